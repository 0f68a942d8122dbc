"""Metrics vs a brute-force recount, ensemble laws, files and reports."""

import math
import random

import numpy as np
import pytest

from hsdlab.corpus import Dataset, Label, Sample
from hsdlab.errors import (ArgumentError, EnsembleMismatchError,
                           FingerprintError, JoinError)
from hsdlab.evaluate import (Metrics, PredictionRecord, RunRecord,
                             compute_metrics, confusion, emit_report,
                             ensemble_predict, score_external,
                             write_predictions)
from hsdlab.model import ModelConfig, init_params
from hsdlab.preprocess import (CleanConfig, EmojiTable, TextPipeline,
                               UnigramTable, build_vocab)
from hsdlab.train import Checkpoint, TrainConfig


def brute_force_metrics(preds, golds):
    """Independent recount of every (gold, pred) pair from scratch."""
    out = {}
    per_class = []
    for c in (0, 1):
        tp = sum(1 for p, g in zip(preds, golds) if g == c and p == c)
        fp = sum(1 for p, g in zip(preds, golds) if g != c and p == c)
        fn = sum(1 for p, g in zip(preds, golds) if g == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per_class.append((prec, rec, f1))
    out["macro_precision"] = (per_class[0][0] + per_class[1][0]) / 2
    out["macro_recall"] = (per_class[0][1] + per_class[1][1]) / 2
    out["macro_f1"] = (per_class[0][2] + per_class[1][2]) / 2
    out["accuracy"] = sum(1 for p, g in zip(preds, golds) if p == g) / len(preds)
    out["per_class"] = per_class
    return out


class TestConfusion:
    def test_counting_example(self):
        cm = confusion([0, 0, 1, 1], [0, 1, 1, 1])
        assert cm.counts[0][0] == 1
        assert cm.counts[1][0] == 1
        assert cm.counts[1][1] == 2
        assert cm.counts[0][1] == 0

    def test_perfect_predictions_diagonal(self):
        cm = confusion([0, 1, 1], [0, 1, 1])
        assert cm.counts[0][1] == 0 and cm.counts[1][0] == 0

    def test_errors(self):
        with pytest.raises(ArgumentError):
            confusion([], [])
        with pytest.raises(ArgumentError):
            confusion([0], [0, 1])


class TestComputeMetrics:
    def test_worked_example(self):
        m = compute_metrics(confusion([0, 0, 1, 1], [0, 1, 1, 1]))
        assert math.isclose(m.per_class[0].f1, 2 / 3, rel_tol=1e-12)
        assert math.isclose(m.per_class[1].f1, 4 / 5, rel_tol=1e-12)
        assert math.isclose(m.macro_f1, 11 / 15, rel_tol=1e-12)
        assert math.isclose(m.accuracy, 3 / 4, rel_tol=1e-12)

    def test_perfect(self):
        m = compute_metrics(confusion([0, 1], [0, 1]))
        assert m.macro_f1 == 1.0 and m.accuracy == 1.0

    def test_degenerate_single_class_prediction(self):
        m = compute_metrics(confusion([1, 1], [0, 1]))
        assert m.per_class[0].f1 == 0.0
        assert math.isclose(m.per_class[1].f1, 2 / 3, rel_tol=1e-12)
        assert math.isclose(m.macro_f1, 1 / 3, rel_tol=1e-12)

    def test_matches_bruteforce_recount(self):
        rnd = random.Random(31)
        for _ in range(200):
            n = rnd.randint(1, 200)
            preds = [rnd.randint(0, 1) for _ in range(n)]
            golds = [rnd.randint(0, 1) for _ in range(n)]
            m = compute_metrics(confusion(preds, golds))
            ref = brute_force_metrics(preds, golds)
            for key in ("macro_precision", "macro_recall", "macro_f1", "accuracy"):
                assert abs(getattr(m, key) - ref[key]) <= 1e-12

    def test_macro_f1_invariant_under_code_swap(self):
        rnd = random.Random(5)
        for _ in range(50):
            n = rnd.randint(2, 50)
            preds = [rnd.randint(0, 1) for _ in range(n)]
            golds = [rnd.randint(0, 1) for _ in range(n)]
            a = compute_metrics(confusion(preds, golds)).macro_f1
            b = compute_metrics(confusion([1 - p for p in preds],
                                          [1 - g for g in golds])).macro_f1
            assert math.isclose(a, b, rel_tol=1e-12)


def _pipeline():
    return TextPipeline(cfg=CleanConfig(expand_emoji=False,
                                        segment_hashtags=False),
                        emoji=EmojiTable(entries={}),
                        unigrams=UnigramTable.empty())


def _vocab():
    return build_vocab([["alpha", "beta", "gamma", "delta"]], 1, 20)


def _dataset(n=8):
    words = ["alpha", "beta", "gamma", "delta"]
    samples = tuple(
        Sample(id=f"s{i}", text=" ".join(words[j % 4] for j in range(i, i + 3)))
        for i in range(n)
    )
    return Dataset(samples=samples, labeled=False)


def _checkpoint(seed: int, vocab, bias: float | None = None) -> Checkpoint:
    cfg = ModelConfig(vocab_size=len(vocab), emb_dim=8, hidden_dim=8,
                      attn_dim=8, dense_dim=8, max_len=6, dropout=0.0)
    params = init_params(cfg, seed)
    if bias is not None:
        for name, arr in params.tensors.items():
            arr[:] = 0
        params.tensors["dense2_b"][:] = bias
    return Checkpoint(model_cfg=cfg, train_cfg=TrainConfig(), fold=0,
                      vocab_sha256=vocab.fingerprint(), params=params,
                      final_train_loss=0.0)


class TestEnsemble:
    def test_constant_models_average_and_tie_rule(self):
        vocab = _vocab()
        # zeroed networks output exactly sigmoid(bias)
        cks = [_checkpoint(s, vocab, bias=b)
               for s, b in ((1, 0.0), (2, 0.0), (3, 0.0))]
        records = ensemble_predict(cks, _dataset(3), _pipeline(), vocab)
        for rec in records:
            assert rec.prob == 0.5
            assert rec.label is Label.NOT  # tie goes to NOT

    def test_mean_below_threshold_is_hof(self):
        vocab = _vocab()
        biases = [math.log(0.3 / 0.7), math.log(0.4 / 0.6), math.log(0.7 / 0.3)]
        cks = [_checkpoint(i, vocab, bias=b) for i, b in enumerate(biases)]
        records = ensemble_predict(cks, _dataset(2), _pipeline(), vocab)
        for rec in records:
            assert math.isclose(rec.prob, (0.3 + 0.4 + 0.7) / 3, abs_tol=1e-6)
            assert rec.label is Label.HOF

    def test_single_checkpoint_identity(self):
        from hsdlab.evaluate import predict_probs
        from hsdlab.preprocess import encode_corpus
        vocab = _vocab()
        ck = _checkpoint(5, vocab)
        dataset = _dataset()
        solo = ensemble_predict([ck], dataset, _pipeline(), vocab)
        pipeline = _pipeline()
        ids, lens = encode_corpus([pipeline.clean(s.text) for s in dataset],
                                  vocab, ck.model_cfg.max_len)
        direct = predict_probs(ck.model_cfg, ck.params, ids, lens)
        assert [r.prob for r in solo] == direct.tolist()

    def test_order_permutation_invariance(self):
        vocab = _vocab()
        cks = [_checkpoint(s, vocab) for s in (1, 2, 3, 4, 5)]
        a = ensemble_predict(cks, _dataset(), _pipeline(), vocab)
        b = ensemble_predict(cks[::-1], _dataset(), _pipeline(), vocab)
        assert [r.prob for r in a] == [r.prob for r in b]
        assert [r.label for r in a] == [r.label for r in b]

    def test_duplicated_checkpoints_reproduce_single_model(self):
        vocab = _vocab()
        ck = _checkpoint(9, vocab)
        single = ensemble_predict([ck], _dataset(), _pipeline(), vocab)
        dup = ensemble_predict([ck] * 5, _dataset(), _pipeline(), vocab)
        assert [r.label for r in dup] == [r.label for r in single]

    def test_threshold_rule_on_every_record(self):
        vocab = _vocab()
        cks = [_checkpoint(s, vocab) for s in (1, 2)]
        for rec in ensemble_predict(cks, _dataset(), _pipeline(), vocab):
            assert (rec.label is Label.NOT) == (rec.prob >= 0.5)

    def test_mismatch_errors(self):
        vocab = _vocab()
        ck = _checkpoint(1, vocab)
        other = _checkpoint(2, vocab)
        other.vocab_sha256 = "0" * 64
        with pytest.raises(EnsembleMismatchError):
            ensemble_predict([ck, other], _dataset(), _pipeline(), vocab)
        wrong_cfg = _checkpoint(3, vocab)
        wrong_cfg.model_cfg = ModelConfig(vocab_size=len(vocab), emb_dim=4,
                                          hidden_dim=8, attn_dim=8,
                                          dense_dim=8, max_len=6)
        with pytest.raises(EnsembleMismatchError):
            ensemble_predict([ck, wrong_cfg], _dataset(), _pipeline(), vocab)

    def test_wrong_vocab_fingerprint(self):
        vocab = _vocab()
        ck = _checkpoint(1, vocab)
        other_vocab = build_vocab([["zzz"]], 1, 20)
        with pytest.raises(FingerprintError):
            ensemble_predict([ck], _dataset(), _pipeline(), other_vocab)

    def test_empty_ensemble(self):
        with pytest.raises(ArgumentError):
            ensemble_predict([], _dataset(), _pipeline(), _vocab())


class TestPredictionFiles:
    def test_exact_format(self, tmp_path):
        path = tmp_path / "p.csv"
        write_predictions([PredictionRecord("t1", 0.5, Label.NOT)], path)
        assert path.read_text() == "id,prob,label\nt1,0.500000,NOT\n"

    def test_empty_is_header_only(self, tmp_path):
        path = tmp_path / "p.csv"
        write_predictions([], path)
        assert path.read_text() == "id,prob,label\n"

    def test_roundtrip_self_score(self, tmp_path):
        path = tmp_path / "p.csv"
        write_predictions([PredictionRecord("a", 0.9, Label.NOT),
                           PredictionRecord("b", 0.1, Label.HOF)], path)
        result = score_external(path, path)
        assert result.metrics.macro_f1 == 1.0
        assert result.matched == 2


class TestScoreExternal:
    def _write(self, path, rows):
        path.write_text("id,label\n" + "".join(f"{i},{l}\n" for i, l in rows),
                        encoding="utf-8")

    def test_identity(self, tmp_path):
        gold = tmp_path / "g.csv"
        self._write(gold, [("a", "HOF"), ("b", "NOT")])
        result = score_external(gold, gold)
        assert result.metrics.macro_f1 == 1.0

    def test_inverted_balanced(self, tmp_path):
        gold = tmp_path / "g.csv"
        pred = tmp_path / "p.csv"
        self._write(gold, [("a", "HOF"), ("b", "NOT")])
        self._write(pred, [("a", "NOT"), ("b", "HOF")])
        result = score_external(pred, gold)
        assert result.metrics.accuracy == 0.0
        assert result.metrics.macro_f1 == 0.0

    def test_partial_coverage_counts(self, tmp_path):
        gold = tmp_path / "g.csv"
        pred = tmp_path / "p.csv"
        self._write(gold, [("a", "HOF"), ("b", "NOT"), ("c", "NOT"), ("d", "HOF")])
        self._write(pred, [("a", "HOF"), ("b", "NOT")])
        result = score_external(pred, gold)
        assert result.matched == 2
        assert result.gold_only == 2
        assert result.pred_only == 0
        assert result.metrics.n == 2
        assert result.metrics.macro_f1 == 1.0

    def test_disjoint_ids(self, tmp_path):
        gold = tmp_path / "g.csv"
        pred = tmp_path / "p.csv"
        self._write(gold, [("a", "HOF")])
        self._write(pred, [("z", "HOF")])
        with pytest.raises(JoinError):
            score_external(pred, gold)


TASK4_RUNS = [
    RunRecord("LSTM Baseline", "Bodo", "0.81291"),
    RunRecord("LSTM Baseline", "Assamese", "0.67616"),
    RunRecord("LSTM Baseline", "Bengali", "0.60856"),
    RunRecord("Bert Base Multilingual Cased", "Bodo", "0.83009"),
    RunRecord("Bert Base Multilingual Cased", "Assamese", "0.70525"),
    RunRecord("Bert Base Multilingual Cased", "Bengali", "0.64294"),
    RunRecord("Bert Base Multilingual Uncased", "Bodo", "0.82962"),
    RunRecord("Bert Base Multilingual Uncased", "Assamese", "0.66398"),
    RunRecord("Bert Base Multilingual Uncased", "Bengali", "0.61561"),
    RunRecord("DistilBert Base Multilingual Cased", "Bodo", "0.77606"),
    RunRecord("DistilBert Base Multilingual Cased", "Assamese", "0.67399"),
    RunRecord("DistilBert Base Multilingual Cased", "Bengali", "0.643"),
    RunRecord("XLM Roberta Base", "Bodo", "0.78668"),
    RunRecord("XLM Roberta Base", "Assamese", "0.376"),
    RunRecord("XLM Roberta Base", "Bengali", "0.38476"),
    RunRecord("Muril Base Cased", "Bodo", "0.35085"),
    RunRecord("Muril Base Cased", "Assamese", "0.68985"),
    RunRecord("Muril Base Cased", "Bengali", "0.70467"),
    RunRecord("XLM Indic Base Multiscript", "Bodo", "0.78186"),
    RunRecord("XLM Indic Base Multiscript", "Assamese", "0.633"),
    RunRecord("XLM Indic Base Multiscript", "Bengali", "0.59989"),
    RunRecord("XLM Indic Base Uniscript", "Bodo", "0.62257"),
    RunRecord("XLM Indic Base Uniscript", "Assamese", "0.376"),
    RunRecord("XLM Indic Base Uniscript", "Bengali", "0.37743"),
    RunRecord("csebuetnlp/banglabert", "Bengali", "0.75625"),
]

TASK1_RUNS = [
    RunRecord("LSTM Baseline", "Gujarati", "0.7660"),
    RunRecord("LSTM Baseline", "Sinhala", "0.7530"),
    RunRecord("Bert Multilingual base Cased", "Gujarati", "0.7656"),
    RunRecord("Bert Multilingual base Cased", "Sinhala", "0.8095"),
    RunRecord("XLM Roberta Base", "Sinhala", "0.8349"),
    RunRecord("XLM Indic Base Multiscript", "Gujarati", "0.7235"),
]


class TestEmitReport:
    def test_three_language_fixture_cells(self):
        doc = emit_report(TASK4_RUNS, "markdown")
        lines = doc.splitlines()
        assert lines[0] == "| Model | Bodo | Assamese | Bengali |"
        assert "| LSTM Baseline | 0.81291 | 0.67616 | 0.60856 |" in lines
        assert ("| Bert Base Multilingual Cased | **0.83009** | **0.70525** "
                "| 0.64294 |") in lines
        assert "| csebuetnlp/banglabert | - | - | **0.75625** |" in lines
        assert "| DistilBert Base Multilingual Cased | 0.77606 | 0.67399 | 0.643 |" in lines

    def test_two_language_fixture_marks_best(self):
        doc = emit_report(TASK1_RUNS, "markdown")
        assert "| LSTM Baseline | **0.7660** | 0.7530 |" in doc
        assert "| XLM Roberta Base | - | **0.8349** |" in doc

    def test_single_cell_marked_best(self):
        doc = emit_report([RunRecord("only", "L1", 0.5)], "markdown")
        assert "**0.50000**" in doc

    def test_csv_and_json_formats(self):
        csv_doc = emit_report(TASK1_RUNS, "csv")
        assert csv_doc.splitlines()[0] == "Model,Gujarati,Sinhala"
        assert "0.7660*" in csv_doc
        import json as _json
        obj = _json.loads(emit_report(TASK1_RUNS, "json"))
        assert obj["languages"] == ["Gujarati", "Sinhala"]
        assert obj["best"]["Gujarati"] == ["LSTM Baseline"]

    def test_metrics_scores_render_macro_f1(self):
        m = compute_metrics(confusion([0, 1], [0, 1]))
        doc = emit_report([RunRecord("m", "L", m)], "markdown")
        assert "**1.00000**" in doc

    def test_requires_runs_and_known_format(self):
        with pytest.raises(ArgumentError):
            emit_report([], "markdown")
        with pytest.raises(ArgumentError):
            emit_report(TASK1_RUNS, "pdf")

    def test_empty_model_name_rejected(self):
        with pytest.raises(ArgumentError):
            RunRecord("", "L", 0.1)
