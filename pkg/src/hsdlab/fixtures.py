"""Synthetic keyword-separable corpus generator.

The real shared-task corpora cannot be redistributed, so tests and demo
runs use generated posts: HOF samples contain at least one marker word
(made-up tokens, not actual slurs), NOT samples contain none.  Texts mix
Latin and Indic words, mentions, emoji, hashtags and repeated punctuation
to exercise the full cleaning pipeline.  An optional noise rate flips
labels to make the task non-separable on demand.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from .corpus import Label, Sample, Dataset
from .ioutils import atomic_write_text
from .rng import SplitMix64

MARKER_WORDS = ("vexor", "blargh", "snurf", "grimel", "zorp", "quislet")

BENIGN_WORDS = (
    "the", "game", "today", "river", "sunny", "music", "friend", "happy",
    "team", "play", "green", "road", "book", "dance", "smile", "cloud",
    "coffee", "garden", "train", "market",
    "ভালো", "আজ", "খেলা", "গান", "හොඳ", "ගමන", "සතුට", "સરસ", "મજા", "રમત",
)

HASHTAG_WORDS = ("ban", "media", "social", "news", "daily", "score", "win", "fair")

EMOJI_POOL = ("😂", "😀", "🙏", "✨", "😡", "💙")

PUNCT_POOL = ("!!!", "???", "...")


def _pick(stream: SplitMix64, pool) -> str:
    return pool[stream.next_u64() % len(pool)]


def make_samples(n: int, seed: int, noise: float = 0.0) -> list[Sample]:
    """n deterministic samples, alternating labels (before noise)."""
    stream = SplitMix64(seed)
    samples = []
    for i in range(n):
        label = Label.HOF if i % 2 == 0 else Label.NOT
        length = 4 + stream.next_u64() % 6
        words = [_pick(stream, BENIGN_WORDS) for _ in range(length)]
        if label is Label.HOF:
            for _ in range(1 + stream.next_u64() % 2):
                words[stream.next_u64() % len(words)] = _pick(stream, MARKER_WORDS)
        if stream.uniform() < 0.3:
            words.insert(0, "@USER")
        if stream.uniform() < 0.3:
            words.append(_pick(stream, EMOJI_POOL))
        if stream.uniform() < 0.25:
            a, b = _pick(stream, HASHTAG_WORDS), _pick(stream, HASHTAG_WORDS)
            words.append(f"#{a.capitalize()}{b.capitalize()}")
        if stream.uniform() < 0.2:
            words.append(_pick(stream, PUNCT_POOL))
        if noise > 0.0 and stream.uniform() < noise:
            label = Label.NOT if label is Label.HOF else Label.HOF
        samples.append(Sample(
            id=f"t{i:06d}",
            text=" ".join(words),
            label=label,
            created_at=f"2023-08-{1 + i % 28:02d}",
            user_handle=f"user{i % 97:02d}",
        ))
    return samples


def make_dataset(n: int, seed: int, noise: float = 0.0,
                 language: str = "synthetic") -> Dataset:
    return Dataset(samples=tuple(make_samples(n, seed, noise)),
                   language=language, labeled=True)


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_train_csv(path: str | Path, samples: list[Sample]) -> None:
    atomic_write_text(path, _csv_text(
        ["tweet_id", "created_at", "text", "user_screen_time", "label"],
        [[s.id, s.created_at, s.text, s.user_handle, s.label.name]
         for s in samples]))


def write_test_csv(path: str | Path, samples: list[Sample]) -> None:
    atomic_write_text(path, _csv_text(
        ["tweet_id", "text"], [[s.id, s.text] for s in samples]))


def write_gold_csv(path: str | Path, samples: list[Sample]) -> None:
    atomic_write_text(path, _csv_text(
        ["id", "label"], [[s.id, s.label.name] for s in samples]))


def write_unigram_table(path: str | Path) -> None:
    """Unigram counts covering the hashtag pool, for segmentation."""
    words = {w: 500 - 25 * i for i, w in enumerate(HASHTAG_WORDS)}
    words.update({w: 100 for w in ("for", "with", "from")})
    atomic_write_text(path, "".join(f"{w}\t{c}\n" for w, c in words.items()))


def generate(out_dir: str | Path, train_n: int = 500, test_n: int = 200,
             seed: int = 2023, noise: float = 0.0) -> dict[str, Path]:
    """Write train/test/gold CSVs plus a unigram table; returns the paths.

    Train and test draws use different sub-seeds so the sets are disjoint
    in content, and test ids carry a distinct prefix.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train = make_samples(train_n, seed, noise)
    test = make_samples(test_n, seed + 1_000_003, noise)
    test = [Sample(id="x" + s.id[1:], text=s.text, label=s.label,
                   created_at=s.created_at, user_handle=s.user_handle)
            for s in test]
    paths = {
        "train_csv": out_dir / "train.csv",
        "test_csv": out_dir / "test.csv",
        "gold_csv": out_dir / "test_gold.csv",
        "unigram_table": out_dir / "unigrams.tsv",
    }
    write_train_csv(paths["train_csv"], train)
    write_test_csv(paths["test_csv"], test)
    write_gold_csv(paths["gold_csv"], test)
    write_unigram_table(paths["unigram_table"])
    return paths


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m hsdlab.fixtures",
        description="Generate a synthetic keyword-separable corpus.")
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--train-n", type=int, default=500)
    parser.add_argument("--test-n", type=int, default=200)
    parser.add_argument("--seed", type=int, default=2023)
    parser.add_argument("--noise", type=float, default=0.0)
    args = parser.parse_args(argv)
    paths = generate(args.out_dir, args.train_n, args.test_n,
                     args.seed, args.noise)
    for name, path in paths.items():
        print(f"{name}: {path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
