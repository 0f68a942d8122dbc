"""The ``hsdlab`` command: prep | split | train | predict | eval | report.

One JSON config file drives the pipeline; command-line flags override file
values, and the HSDLAB_SEED environment variable is the lowest-priority
seed source.  Every file-writing run also writes a manifest with the
resolved config and content hashes of inputs and artifacts.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 runtime
failure.  Errors go to stderr with a stable machine-readable prefix
``hsdlab:error:<category>:``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import backend_name
from .corpus import DEFAULT_SCHEMA, corpus_stats, kfold_split, load_dataset
from .errors import (ArgumentError, ConfigError, DataError, FormatError,
                     HsdlabError, JoinError, SchemaError)
from .evaluate import (RunRecord, emit_report, ensemble_predict,
                       score_external, write_predictions)
from .ioutils import atomic_write_text, canonical_json, sha256_file
from .model import ModelConfig, load_pretrained_vectors
from .preprocess import (CleanConfig, EmojiTable, TextPipeline, UnigramTable,
                         Vocab, build_vocab, bundled_emoji_table, encode_corpus)
from .train import (TrainConfig, TrainData, load_checkpoint, save_checkpoint,
                    train_all_folds)

ERROR_PREFIX = "hsdlab:error"
DEFAULT_SEED = 2023
DEFAULT_K = 5

# name -> expected type; nested dicts validate recursively.  A JSON null is
# treated as "not set".
_CONFIG_SPEC = {
    "train_csv": str,
    "test_csv": str,
    "language": str,
    "schema": {key: str for key in DEFAULT_SCHEMA},
    "allow_empty_text": bool,
    "emoji_table": str,
    "unigram_table": str,
    "pretrained_vectors": str,
    "clean": {
        "strip_usernames": bool, "collapse_punct": bool, "expand_emoji": bool,
        "segment_hashtags": bool, "lowercase_latin": bool,
    },
    "vocab": {"min_freq": int, "max_size": int},
    "model": {
        "emb_dim": int, "hidden_dim": int, "attn_dim": int,
        "dense_dim": int, "max_len": int, "dropout": float,
    },
    "train": {
        "epochs": int, "batch_size": int, "lr": float, "beta1": float,
        "beta2": float, "eps_adam": float, "clip_norm": float,
        "eps_loss": float, "seed": int, "dropout": float,
    },
    "k": int,
    "seed": int,
    "out_dir": str,
}


def _check_types(obj: dict, spec: dict, prefix: str = "") -> None:
    for key, value in obj.items():
        path = f"{prefix}{key}"
        if key not in spec:
            raise ConfigError(f"unknown config key {path!r}")
        expected = spec[key]
        if value is None:
            continue
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path!r}: expected object, "
                                  f"got {type(value).__name__}")
            _check_types(value, expected, prefix=f"{path}.")
            continue
        if expected is float:
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        elif expected is int:
            ok = isinstance(value, int) and not isinstance(value, bool)
        else:
            ok = isinstance(value, expected)
        if not ok:
            raise ConfigError(f"{path!r}: expected {expected.__name__}, "
                              f"got {type(value).__name__}")


@dataclass
class RunConfig:
    """Fully resolved run configuration (defaults + file + flags)."""

    train_csv: str | None = None
    test_csv: str | None = None
    language: str = ""
    schema: dict = field(default_factory=lambda: dict(DEFAULT_SCHEMA))
    allow_empty_text: bool = False
    emoji_table: str | None = None       # None -> bundled table
    unigram_table: str | None = None     # None -> empty table
    pretrained_vectors: str | None = None
    clean: CleanConfig = field(default_factory=CleanConfig)
    vocab_min_freq: int = 2
    vocab_max_size: int = 20000
    model: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    k: int = DEFAULT_K
    seed: int = DEFAULT_SEED
    out_dir: str = "hsdlab_out"

    def to_dict(self) -> dict:
        return {
            "train_csv": self.train_csv, "test_csv": self.test_csv,
            "language": self.language, "schema": dict(self.schema),
            "allow_empty_text": self.allow_empty_text,
            "emoji_table": self.emoji_table,
            "unigram_table": self.unigram_table,
            "pretrained_vectors": self.pretrained_vectors,
            "clean": {
                "strip_usernames": self.clean.strip_usernames,
                "collapse_punct": self.clean.collapse_punct,
                "expand_emoji": self.clean.expand_emoji,
                "segment_hashtags": self.clean.segment_hashtags,
                "lowercase_latin": self.clean.lowercase_latin,
            },
            "vocab": {"min_freq": self.vocab_min_freq,
                      "max_size": self.vocab_max_size},
            "model": dict(self.model),
            "train": self.train.to_dict(),
            "k": self.k, "seed": self.seed, "out_dir": self.out_dir,
        }

    def pipeline(self) -> TextPipeline:
        emoji = (EmojiTable.load(self.emoji_table)
                 if self.emoji_table else bundled_emoji_table())
        unigrams = (UnigramTable.load(self.unigram_table)
                    if self.unigram_table else UnigramTable.empty())
        return TextPipeline(cfg=self.clean, emoji=emoji, unigrams=unigrams)

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size=vocab_size, **self.model)


def _env_seed() -> int:
    raw = os.environ.get("HSDLAB_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"HSDLAB_SEED must be an integer, got {raw!r}") from None


def parse_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Load the JSON config file (if any), validate keys/types, apply flag
    overrides, and fill defaults."""
    raw: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top-level value must be an object")
        _check_types(raw, _CONFIG_SPEC)

    cfg = RunConfig()
    cfg.seed = _env_seed()

    def take(key, default):
        value = raw.get(key)
        return default if value is None else value

    cfg.train_csv = take("train_csv", cfg.train_csv)
    cfg.test_csv = take("test_csv", cfg.test_csv)
    cfg.language = take("language", cfg.language)
    cfg.schema.update(raw.get("schema") or {})
    cfg.allow_empty_text = take("allow_empty_text", cfg.allow_empty_text)
    cfg.emoji_table = take("emoji_table", cfg.emoji_table)
    cfg.unigram_table = take("unigram_table", cfg.unigram_table)
    cfg.pretrained_vectors = take("pretrained_vectors", cfg.pretrained_vectors)
    cfg.clean = CleanConfig(**(raw.get("clean") or {}))
    vocab_section = raw.get("vocab") or {}
    cfg.vocab_min_freq = vocab_section.get("min_freq", cfg.vocab_min_freq)
    cfg.vocab_max_size = vocab_section.get("max_size", cfg.vocab_max_size)
    cfg.model = dict(raw.get("model") or {})
    cfg.k = take("k", cfg.k)
    cfg.seed = take("seed", cfg.seed)
    cfg.out_dir = take("out_dir", cfg.out_dir)

    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    for key in ("train_csv", "test_csv", "language", "emoji_table",
                "unigram_table", "pretrained_vectors", "out_dir", "k", "seed"):
        if key in overrides:
            setattr(cfg, key, overrides[key])
    if "allow_empty_text" in overrides:
        cfg.allow_empty_text = overrides["allow_empty_text"]

    model_over = {k: overrides[k] for k in ("max_len", "dropout")
                  if k in overrides}
    if "dropout" in model_over:
        cfg.model["dropout"] = model_over["dropout"]
    if "max_len" in model_over:
        cfg.model["max_len"] = model_over["max_len"]

    train_section = dict(raw.get("train") or {})
    # one top-level seed drives split and training unless train.seed is set
    train_section.setdefault("seed", cfg.seed)
    for key in ("epochs", "batch_size", "lr"):
        if key in overrides:
            train_section[key] = overrides[key]
    if "dropout" in overrides:
        train_section["dropout"] = overrides["dropout"]
    if "seed" in overrides:
        train_section["seed"] = overrides["seed"]
    cfg.train = TrainConfig(**train_section)
    return cfg


def _write_manifest(path: Path, command: str, cfg: RunConfig,
                    inputs: dict[str, str | Path],
                    artifacts: dict[str, str | Path]) -> None:
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "inputs": {str(name): sha256_file(p) for name, p in inputs.items()},
        "artifacts": {str(name): sha256_file(p) for name, p in artifacts.items()},
        "backend": backend_name(),
        "version": __version__,
    }
    atomic_write_text(path, canonical_json(manifest) + "\n")


def _resource_inputs(cfg: RunConfig) -> dict[str, Path]:
    inputs: dict[str, Path] = {}
    for name in ("emoji_table", "unigram_table", "pretrained_vectors"):
        value = getattr(cfg, name)
        if value:
            inputs[name] = Path(value)
    return inputs


def _require(value, what: str):
    if not value:
        raise ConfigError(f"{what} is required (set it in the config file "
                          "or pass the corresponding flag)")
    return value


def cmd_prep(cfg: RunConfig, args) -> int:
    src = _require(args.input or cfg.train_csv, "an input CSV")
    labeled = not args.unlabeled
    dataset = load_dataset(src, cfg.schema, labeled=labeled,
                           language=cfg.language,
                           allow_empty=cfg.allow_empty_text)
    pipeline = cfg.pipeline()
    lines = []
    for sample in dataset:
        lines.append(json.dumps(
            {"id": sample.id,
             "tokens": pipeline.clean(sample.text),
             "label": sample.label.name if sample.label is not None else None},
            ensure_ascii=True, separators=(",", ":")))
    out = Path(args.out) if args.out else Path(cfg.out_dir) / "prep.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out, "\n".join(lines) + "\n")
    _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "prep",
                    cfg, {"input": src, **_resource_inputs(cfg)}, {out.name: out})
    stats = corpus_stats(dataset)
    counts = ", ".join(f"{label.name}={n}"
                       for label, n in stats.class_counts.items())
    print(f"wrote {out} ({stats.n} samples; {counts}; "
          f"tokens/sample median {stats.token_counts.median:.0f})",
          file=sys.stderr)
    return 0


def cmd_split(cfg: RunConfig, args) -> int:
    if args.n is not None:
        n = args.n
    else:
        src = _require(cfg.train_csv, "--n or a train_csv")
        n = len(load_dataset(src, cfg.schema, labeled=True,
                             allow_empty=cfg.allow_empty_text))
    folds = kfold_split(n, cfg.k, cfg.seed)
    text = folds.to_json() + "\n"
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out, text)
        _write_manifest(out.with_suffix(out.suffix + ".manifest.json"),
                        "split", cfg, {}, {out.name: out})
    else:
        sys.stdout.write(text)
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    src = _require(cfg.train_csv, "train_csv")
    dataset = load_dataset(src, cfg.schema, labeled=True,
                           language=cfg.language,
                           allow_empty=cfg.allow_empty_text)
    pipeline = cfg.pipeline()
    token_lists = [pipeline.clean(s.text) for s in dataset]
    vocab = build_vocab(token_lists, cfg.vocab_min_freq, cfg.vocab_max_size)
    model_cfg = cfg.model_config(len(vocab))
    ids, lens = encode_corpus(token_lists, vocab, model_cfg.max_len)
    labels = np.array([int(s.label) for s in dataset], dtype=np.int64)
    data = TrainData(ids=ids, lens=lens, labels=labels)
    folds = kfold_split(len(dataset), cfg.k, cfg.seed)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / "folds.json", folds.to_json() + "\n")
    atomic_write_text(out_dir / "vocab.json", vocab.to_json())

    emb_init = None
    if cfg.pretrained_vectors:
        rows = load_pretrained_vectors(vocab, cfg.pretrained_vectors,
                                       model_cfg.emb_dim)
        emb_init = {vocab.token_to_id[tok]: vec for tok, vec in rows.items()}
        print(f"seeded {len(emb_init)} embedding rows from "
              f"{cfg.pretrained_vectors}", file=sys.stderr)

    epoch_logs: dict[int, list[str]] = {r: [] for r in range(folds.k)}

    def log(record: dict) -> None:
        epoch_logs[record["fold"]].append(
            json.dumps(record, separators=(",", ":")))

    checkpoints = train_all_folds(data, folds, model_cfg, cfg.train,
                                  vocab.fingerprint(), emb_init=emb_init,
                                  log=log)
    artifacts = {"folds.json": out_dir / "folds.json",
                 "vocab.json": out_dir / "vocab.json"}
    for ckpt in checkpoints:
        ckpt_path = out_dir / f"checkpoint_fold{ckpt.fold}.json"
        save_checkpoint(ckpt, ckpt_path)
        log_path = out_dir / f"epochs_fold{ckpt.fold}.jsonl"
        atomic_write_text(log_path, "\n".join(epoch_logs[ckpt.fold]) + "\n")
        artifacts[ckpt_path.name] = ckpt_path
        artifacts[log_path.name] = log_path
        last = json.loads(epoch_logs[ckpt.fold][-1])
        print(f"fold {ckpt.fold}: train_loss={last['train_loss']:.4f} "
              f"val_macro_f1={last['val_macro_f1']:.4f}", file=sys.stderr)

    _write_manifest(out_dir / "manifest.json", "train", cfg,
                    {"train_csv": src, **_resource_inputs(cfg)}, artifacts)
    print(f"wrote {folds.k} checkpoints to {out_dir}", file=sys.stderr)
    return 0


def cmd_predict(cfg: RunConfig, args) -> int:
    ckpt_dir = Path(args.checkpoints or cfg.out_dir)
    ckpt_paths = sorted(ckpt_dir.glob("checkpoint_fold*.json"))
    if not ckpt_paths:
        raise DataError(f"no checkpoint_fold*.json files in {ckpt_dir}")
    checkpoints = [load_checkpoint(p) for p in ckpt_paths]
    vocab_path = ckpt_dir / "vocab.json"
    if not vocab_path.exists():
        raise DataError(f"missing {vocab_path} next to the checkpoints")
    vocab = Vocab.from_json(vocab_path.read_text(encoding="utf-8"))

    src = _require(args.input or cfg.test_csv, "test_csv")
    dataset = load_dataset(src, cfg.schema, labeled=False,
                           language=cfg.language, allow_empty=True)
    preds = ensemble_predict(checkpoints, dataset, cfg.pipeline(), vocab,
                             threshold=args.threshold)
    out = Path(args.out) if args.out else Path(cfg.out_dir) / "predictions.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_predictions(preds, out)
    _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "predict",
                    cfg,
                    {"test_csv": src, "vocab.json": vocab_path,
                     **{p.name: p for p in ckpt_paths},
                     **_resource_inputs(cfg)},
                    {out.name: out})
    print(f"wrote {out} ({len(preds)} predictions)", file=sys.stderr)
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    result = score_external(args.pred, args.gold)
    payload = json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        atomic_write_text(args.out, payload)
    sys.stdout.write(payload)
    m = result.metrics
    print(f"n={m.n} macro_f1={m.macro_f1:.5f} "
          f"macro_precision={m.macro_precision:.5f} "
          f"macro_recall={m.macro_recall:.5f} accuracy={m.accuracy:.5f} "
          f"(matched={result.matched}, pred_only={result.pred_only}, "
          f"gold_only={result.gold_only})", file=sys.stderr)
    return 0


def cmd_report(cfg: RunConfig, args) -> int:
    with open(args.runs, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{args.runs}: invalid JSON ({exc})") from None
    if not isinstance(raw, list):
        raise DataError(f"{args.runs}: expected a JSON array of run records")
    runs = []
    for i, entry in enumerate(raw):
        try:
            runs.append(RunRecord(model=entry["model"],
                                  language=entry["language"],
                                  score=entry["score"]))
        except (KeyError, TypeError) as exc:
            raise DataError(f"{args.runs}: record {i}: missing field "
                            f"{exc}") from None
    document = emit_report(runs, args.format)
    if args.out:
        atomic_write_text(args.out, document)
    else:
        sys.stdout.write(document)
    return 0


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="hsdlab", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--train-csv", dest="train_csv")
        p.add_argument("--test-csv", dest="test_csv")
        p.add_argument("--language")
        p.add_argument("--emoji-table", dest="emoji_table")
        p.add_argument("--unigram-table", dest="unigram_table")
        p.add_argument("--vectors", dest="pretrained_vectors")
        p.add_argument("--allow-empty-text", dest="allow_empty_text",
                       action="store_const", const=True, default=None)
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--dropout", type=float)
        p.add_argument("--max-len", dest="max_len", type=int)

    p = sub.add_parser("prep", help="clean and tokenize a dataset to JSONL")
    common(p)
    p.add_argument("--input", help="CSV to prep (default: train_csv)")
    p.add_argument("--unlabeled", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("split", help="emit the deterministic fold assignment")
    common(p)
    p.add_argument("--n", type=int, help="sample count (default: rows of train_csv)")
    p.add_argument("--out")

    p = sub.add_parser("train", help="train one model per fold")
    common(p)

    p = sub.add_parser("predict", help="fold-ensemble inference to CSV")
    common(p)
    p.add_argument("--checkpoints", help="directory with checkpoint_fold*.json")
    p.add_argument("--input", help="CSV to predict on (default: test_csv)")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out")

    p = sub.add_parser("eval", help="score a prediction CSV against gold")
    common(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out")

    p = sub.add_parser("report", help="emit a leaderboard-style table")
    common(p)
    p.add_argument("--runs", required=True,
                   help="JSON array of {model, language, score}")
    p.add_argument("--format", choices=("markdown", "csv", "json"),
                   default="markdown")
    p.add_argument("--out")
    return parser


_OVERRIDE_KEYS = ("seed", "k", "out_dir", "train_csv", "test_csv", "language",
                  "emoji_table", "unigram_table", "pretrained_vectors",
                  "allow_empty_text", "epochs", "batch_size", "lr", "dropout",
                  "max_len")

_COMMANDS = {
    "prep": cmd_prep, "split": cmd_split, "train": cmd_train,
    "predict": cmd_predict, "eval": cmd_eval, "report": cmd_report,
}

_DATA_ERRORS = (SchemaError, DataError, FormatError, ArgumentError, JoinError)


def run(argv: list[str]) -> int:
    """Dispatch one CLI invocation; returns the process exit code."""
    try:
        args = _build_parser().parse_args(argv)
        overrides = {key: getattr(args, key, None) for key in _OVERRIDE_KEYS}
        cfg = parse_config(args.config, overrides)
        return _COMMANDS[args.command](cfg, args)
    except _UsageError as exc:
        print(f"{ERROR_PREFIX}:usage: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"{ERROR_PREFIX}:config: {exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"{ERROR_PREFIX}:data: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"{ERROR_PREFIX}:io: {exc}", file=sys.stderr)
        return 2
    except HsdlabError as exc:
        print(f"{ERROR_PREFIX}:runtime: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - last-resort conversion to exit code
        print(f"{ERROR_PREFIX}:runtime: unexpected {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run(sys.argv[1:]))
