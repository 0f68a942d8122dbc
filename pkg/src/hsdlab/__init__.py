"""hsdlab: desk-scale hate/offensive-content classification lab.

Text cleaning for code-mixed social-media posts, a BiLSTM-with-attention
binary classifier trained from scratch with hand-derived gradients,
seeded 5-fold cross-validation, fold-ensemble inference and macro-F1
evaluation/reporting.
"""

__version__ = "0.1.0"

from .corpus import (CorpusStats, Dataset, FoldAssignment, Label, Sample,
                     corpus_stats, kfold_split, load_dataset, map_label,
                     splitmix64_next)
from .evaluate import (ConfusionMatrix, Metrics, PredictionRecord, RunRecord,
                       compute_metrics, confusion, emit_report,
                       ensemble_predict, score_external, write_predictions)
from .model import (ForwardTrace, ModelConfig, ModelParams, backward,
                    forward, init_params, load_pretrained_vectors, lstm_cell)
from .preprocess import (CleanConfig, EmojiTable, EncodedSample, TextPipeline,
                         UnigramTable, Vocab, build_vocab, clean,
                         collapse_punct, encode, expand_emoji,
                         segment_hashtag, strip_usernames, tokenize)
from .train import (AdamState, Checkpoint, TrainConfig, TrainData, adam_step,
                    bce_loss, load_checkpoint, save_checkpoint, train_all_folds,
                    train_fold)

__all__ = [
    "__version__",
    "AdamState", "Checkpoint", "CleanConfig", "ConfusionMatrix", "CorpusStats",
    "Dataset", "EmojiTable", "EncodedSample", "FoldAssignment", "ForwardTrace",
    "Label", "Metrics", "ModelConfig", "ModelParams", "PredictionRecord",
    "RunRecord", "Sample", "TextPipeline", "TrainConfig", "TrainData",
    "UnigramTable", "Vocab",
    "adam_step", "backward", "bce_loss", "build_vocab", "clean",
    "collapse_punct", "compute_metrics", "confusion", "corpus_stats",
    "emit_report", "encode", "ensemble_predict", "expand_emoji", "forward",
    "init_params", "kfold_split", "load_checkpoint", "load_dataset",
    "load_pretrained_vectors", "lstm_cell", "map_label", "save_checkpoint",
    "score_external", "segment_hashtag", "splitmix64_next", "strip_usernames",
    "tokenize", "train_all_folds", "train_fold", "write_predictions",
]
