"""Fold-ensemble inference, metrics, external scoring and report emission."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Dataset, Label, map_label
from .errors import (ArgumentError, EnsembleMismatchError, FingerprintError,
                     JoinError, SchemaError)
from .ioutils import atomic_write_text
from .model import ModelConfig, ModelParams, forward_batch
from .preprocess import TextPipeline, Vocab, encode_corpus

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class PredictionRecord:
    id: str
    prob: float          # fold-mean probability of class NOT
    label: Label


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[gold][pred] over the binary label codes."""

    counts: tuple[tuple[int, int], tuple[int, int]]

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class Metrics:
    per_class: tuple[ClassMetrics, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    n: int

    def to_dict(self) -> dict:
        return {
            "per_class": {
                Label(code).name: {
                    "precision": cm.precision, "recall": cm.recall, "f1": cm.f1,
                } for code, cm in enumerate(self.per_class)
            },
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "n": self.n,
        }


def confusion(preds: Sequence[int], golds: Sequence[int]) -> ConfusionMatrix:
    if len(preds) != len(golds):
        raise ArgumentError(
            f"length mismatch: {len(preds)} predictions vs {len(golds)} golds")
    if not preds:
        raise ArgumentError("cannot build a confusion matrix from zero pairs")
    counts = [[0, 0], [0, 0]]
    for p, g in zip(preds, golds):
        counts[int(g)][int(p)] += 1
    return ConfusionMatrix(counts=(tuple(counts[0]), tuple(counts[1])))


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def compute_metrics(cm: ConfusionMatrix) -> Metrics:
    """Per-class precision/recall/F1 with 0/0 defined as 0, macro averages
    as the unweighted mean over the two classes."""
    per_class = []
    for c in (0, 1):
        tp = cm.counts[c][c]
        fp = cm.counts[1 - c][c]
        fn = cm.counts[c][1 - c]
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        f1 = _safe_div(2 * precision * recall, precision + recall)
        per_class.append(ClassMetrics(precision=precision, recall=recall, f1=f1))
    accuracy = _safe_div(cm.counts[0][0] + cm.counts[1][1], cm.total)
    return Metrics(
        per_class=(per_class[0], per_class[1]),
        macro_precision=(per_class[0].precision + per_class[1].precision) / 2,
        macro_recall=(per_class[0].recall + per_class[1].recall) / 2,
        macro_f1=(per_class[0].f1 + per_class[1].f1) / 2,
        accuracy=accuracy,
        n=cm.total,
    )


def predict_probs(cfg: ModelConfig, params: ModelParams,
                  ids: np.ndarray, lens: np.ndarray,
                  batch_size: int = 256) -> np.ndarray:
    """Eval-mode probabilities for pre-encoded samples, in order."""
    out = np.empty(len(ids), dtype=np.float64)
    for start in range(0, len(ids), batch_size):
        stop = start + batch_size
        p, _ = forward_batch(cfg, params, ids[start:stop], lens[start:stop],
                             train_mode=False)
        out[start:stop] = p.astype(np.float64)
    return out


def ensemble_predict(checkpoints: Sequence, dataset: Dataset,
                     pipeline: TextPipeline, vocab: Vocab,
                     threshold: float = DEFAULT_THRESHOLD,
                     batch_size: int = 256) -> list[PredictionRecord]:
    """Average eval-mode probabilities over the fold models (exact sum via
    fsum, so checkpoint order cannot change results) and threshold:
    prob >= threshold => NOT, else HOF."""
    if not checkpoints:
        raise ArgumentError("ensemble needs at least one checkpoint")
    first = checkpoints[0]
    for ckpt in checkpoints[1:]:
        if ckpt.model_cfg != first.model_cfg:
            raise EnsembleMismatchError("checkpoints disagree on model config")
        if ckpt.vocab_sha256 != first.vocab_sha256:
            raise EnsembleMismatchError("checkpoints disagree on vocabulary")
    if vocab.fingerprint() != first.vocab_sha256:
        raise FingerprintError(
            "vocabulary fingerprint does not match the checkpoints "
            f"(vocab {vocab.fingerprint()[:12]}.., "
            f"checkpoint {first.vocab_sha256[:12]}..)")

    tokens = [pipeline.clean(s.text) for s in dataset]
    ids, lens = encode_corpus(tokens, vocab, first.model_cfg.max_len)
    per_model = [predict_probs(c.model_cfg, c.params, ids, lens, batch_size)
                 for c in checkpoints]
    k = len(per_model)
    records = []
    for row, sample in enumerate(dataset):
        prob = math.fsum(pm[row] for pm in per_model) / k
        label = Label.NOT if prob >= threshold else Label.HOF
        records.append(PredictionRecord(id=sample.id, prob=prob, label=label))
    return records


def write_predictions(preds: Sequence[PredictionRecord], path: str | Path) -> None:
    """CSV with header id,prob,label; prob printed with 6 decimals."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "prob", "label"])
    for rec in preds:
        writer.writerow([rec.id, f"{rec.prob:.6f}", rec.label.name])
    atomic_write_text(path, buf.getvalue())


def _read_label_csv(path: str | Path) -> dict[str, Label]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file, header row required")
        for col in ("id", "label"):
            if col not in reader.fieldnames:
                raise SchemaError(f"{path}: missing required column {col!r}")
        out: dict[str, Label] = {}
        for row in reader:
            out[row["id"]] = map_label(row["label"], f"{path}:{reader.line_num}")
    return out


@dataclass(frozen=True)
class ExternalScore:
    metrics: Metrics
    matched: int
    pred_only: int   # predictions with no gold id
    gold_only: int   # gold rows not covered by the predictions

    def to_dict(self) -> dict:
        return {
            **self.metrics.to_dict(),
            "coverage": {"matched": self.matched, "pred_only": self.pred_only,
                         "gold_only": self.gold_only},
        }


def score_external(pred_path: str | Path, gold_path: str | Path) -> ExternalScore:
    """Join two id,label CSVs on id and compute metrics on the overlap."""
    preds = _read_label_csv(pred_path)
    golds = _read_label_csv(gold_path)
    shared = [i for i in preds if i in golds]
    if not shared:
        raise JoinError(f"{pred_path} and {gold_path} share no ids")
    cm = confusion([int(preds[i]) for i in shared],
                   [int(golds[i]) for i in shared])
    return ExternalScore(
        metrics=compute_metrics(cm),
        matched=len(shared),
        pred_only=len(preds) - len(shared),
        gold_only=len(golds) - len(shared),
    )


@dataclass(frozen=True)
class RunRecord:
    """One (model, language) score for the leaderboard-style report.

    ``score`` may be a float, a Metrics (macro-F1 is reported) or a string,
    which is rendered verbatim (useful for quoting external leaderboards
    whose published precision varies).
    """

    model: str
    language: str
    score: float | str | Metrics

    def __post_init__(self):
        if not self.model:
            raise ArgumentError("run record needs a nonempty model name")


def _score_value(score) -> float:
    if isinstance(score, Metrics):
        return score.macro_f1
    return float(score)


def _score_text(score) -> str:
    if isinstance(score, Metrics):
        return f"{score.macro_f1:.5f}"
    if isinstance(score, str):
        return score
    return f"{score:.5f}"


def emit_report(runs: Sequence[RunRecord], fmt: str = "markdown") -> str:
    """One row per model, one column per language (both in input order),
    best score per column marked."""
    if not runs:
        raise ArgumentError("report needs at least one run record")
    models = list(dict.fromkeys(r.model for r in runs))
    languages = list(dict.fromkeys(r.language for r in runs))
    cells: dict[tuple[str, str], RunRecord] = {}
    for r in runs:
        cells.setdefault((r.model, r.language), r)

    best: dict[str, set[str]] = {}
    for lang in languages:
        scored = [(m, _score_value(cells[(m, lang)].score))
                  for m in models if (m, lang) in cells]
        if scored:
            top = max(v for _, v in scored)
            best[lang] = {m for m, v in scored if v == top}

    def cell_text(model: str, lang: str, mark: str) -> str:
        rec = cells.get((model, lang))
        if rec is None:
            return "-"
        text = _score_text(rec.score)
        if model in best.get(lang, ()):
            return mark.format(text)
        return text

    if fmt == "markdown":
        lines = ["| Model | " + " | ".join(languages) + " |",
                 "|" + "---|" * (len(languages) + 1)]
        for m in models:
            row = [cell_text(m, lang, "**{}**") for lang in languages]
            lines.append("| " + m + " | " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["Model"] + languages)
        for m in models:
            writer.writerow([m] + [cell_text(m, lang, "{}*") for lang in languages])
        return buf.getvalue()
    if fmt == "json":
        import json
        rows = []
        for m in models:
            scores = {lang: (_score_text(cells[(m, lang)].score)
                             if (m, lang) in cells else None)
                      for lang in languages}
            rows.append({"model": m, "scores": scores})
        return json.dumps(
            {"languages": languages, "rows": rows,
             "best": {lang: sorted(names) for lang, names in best.items()}},
            indent=2) + "\n"
    raise ArgumentError(f"unknown report format {fmt!r}")
