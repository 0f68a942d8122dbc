"""Dataset ingestion, label mapping, corpus stats and the seeded k-fold split.

Input files are UTF-8 CSVs with a mandatory header row (RFC-4180 quoting).
Column names are supplied through a schema mapping so the same loader
handles train files (id / text / label plus optional metadata columns)
and test files (id / text only).
"""

from __future__ import annotations

import csv
import enum
import json
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ArgumentError, DataError, SchemaError, UnknownLabelError
from .rng import shuffled_indices, splitmix64_next  # noqa: F401  (re-export)

DEFAULT_SEED = 2023
DEFAULT_FOLDS = 5

# Train-file column names; test files carry only id and text.
DEFAULT_SCHEMA = {
    "id": "tweet_id",
    "text": "text",
    "label": "label",
    "created_at": "created_at",
    "user_handle": "user_screen_time",
}


class Label(enum.IntEnum):
    """Binary target: offensive/hateful content (HOF) vs clean (NOT)."""

    HOF = 0
    NOT = 1


def map_label(raw: str, where: str = "") -> Label:
    """Normalize a raw label string: trim, uppercase, map HOF->0 / NOT->1."""
    name = raw.strip().upper()
    if name == "HOF":
        return Label.HOF
    if name == "NOT":
        return Label.NOT
    raise UnknownLabelError(raw, where)


@dataclass(frozen=True)
class Sample:
    """One post: opaque id, raw text, optional gold label and metadata."""

    id: str
    text: str
    label: Label | None = None
    created_at: str | None = None
    user_handle: str | None = None


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    language: str = ""
    labeled: bool = False

    def __post_init__(self):
        all_labeled = all(s.label is not None for s in self.samples)
        if self.labeled and not all_labeled:
            raise DataError("dataset marked labeled but some samples lack a label")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)


@dataclass(frozen=True)
class TokenCountSummary:
    """Whitespace-token counts per sample (raw text, pre-cleaning)."""

    min: int
    max: int
    mean: float
    median: float


@dataclass(frozen=True)
class CorpusStats:
    n: int
    class_counts: dict[Label, int]
    token_counts: TokenCountSummary


@dataclass(frozen=True)
class FoldAssignment:
    """Deterministic sample->fold map; fold r doubles as validation fold r."""

    k: int
    seed: int
    fold_of: tuple[int, ...]

    def validation_indices(self, fold: int) -> list[int]:
        self._check_fold(fold)
        return [i for i, f in enumerate(self.fold_of) if f == fold]

    def train_indices(self, fold: int) -> list[int]:
        self._check_fold(fold)
        return [i for i, f in enumerate(self.fold_of) if f != fold]

    def _check_fold(self, fold: int) -> None:
        if not 0 <= fold < self.k:
            raise ArgumentError(f"fold index {fold} out of range for k={self.k}")

    def to_json(self) -> str:
        return json.dumps(
            {"k": self.k, "seed": self.seed, "fold_of": list(self.fold_of)},
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "FoldAssignment":
        obj = json.loads(text)
        return cls(k=obj["k"], seed=obj["seed"], fold_of=tuple(obj["fold_of"]))


def load_dataset(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    labeled: bool = True,
    language: str = "",
    allow_empty: bool = False,
) -> Dataset:
    """Load one CSV into a Dataset, preserving row order.

    ``schema`` maps logical field names (id, text, label, created_at,
    user_handle) to column names in the file.  id and text columns are
    required, label too when ``labeled``; the metadata columns are picked
    up only if present.
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            raise DataError(f"{path}: empty file, header row required")
        required = ["id", "text"] + (["label"] if labeled else [])
        for name in required:
            if schema[name] not in header:
                raise SchemaError(
                    f"{path}: missing required column {schema[name]!r} (maps to {name!r})"
                )
        has_created = schema["created_at"] in header
        has_handle = schema["user_handle"] in header

        samples: list[Sample] = []
        seen: set[str] = set()
        for row in reader:
            where = f"{path}:{reader.line_num}"
            sid = (row.get(schema["id"]) or "").strip()
            if not sid:
                raise DataError(f"{where}: empty sample id")
            if sid in seen:
                raise DataError(f"{where}: duplicate sample id {sid!r}")
            seen.add(sid)
            text = row.get(schema["text"]) or ""
            if not text and not allow_empty:
                raise DataError(f"{where}: empty text for id {sid!r} "
                                "(pass allow_empty to accept)")
            label = map_label(row[schema["label"]], where) if labeled else None
            samples.append(Sample(
                id=sid,
                text=text,
                label=label,
                created_at=row.get(schema["created_at"]) if has_created else None,
                user_handle=row.get(schema["user_handle"]) if has_handle else None,
            ))
    return Dataset(samples=tuple(samples), language=language, labeled=labeled)


def corpus_stats(dataset: Dataset) -> CorpusStats:
    counts = {Label.HOF: 0, Label.NOT: 0}
    for s in dataset:
        if s.label is not None:
            counts[s.label] += 1
    ntok = [len(s.text.split()) for s in dataset] or [0]
    return CorpusStats(
        n=len(dataset),
        class_counts=counts,
        token_counts=TokenCountSummary(
            min=min(ntok), max=max(ntok),
            mean=statistics.fmean(ntok), median=statistics.median(ntok),
        ),
    )


def kfold_split(n: int, k: int = DEFAULT_FOLDS, seed: int = DEFAULT_SEED) -> FoldAssignment:
    """Shuffle 0..n-1 (Fisher-Yates over splitmix64) and deal contiguous
    chunks into k validation folds; the first n mod k folds get the extra
    sample.  Pure function of (n, k, seed).
    """
    if k < 2:
        raise ArgumentError(f"k must be >= 2, got {k}")
    if n < k:
        raise ArgumentError(f"need at least k={k} samples, got {n}")
    perm = shuffled_indices(n, seed)
    base, extra = divmod(n, k)
    fold_of = [0] * n
    pos = 0
    for r in range(k):
        size = base + (1 if r < extra else 0)
        for idx in perm[pos:pos + size]:
            fold_of[idx] = r
        pos += size
    return FoldAssignment(k=k, seed=seed, fold_of=tuple(fold_of))


def class_balance(labels: Iterable[Label]) -> dict[Label, int]:
    counts = {Label.HOF: 0, Label.NOT: 0}
    for lab in labels:
        counts[lab] += 1
    return counts
