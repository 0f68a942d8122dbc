"""Mini-batch BCE training with Adam, one model per fold, and versioned
bit-exact checkpoints.

Everything seeded is derived from TrainConfig.seed: per-epoch batch order
uses seed + epoch (epochs numbered from 1), weight init and the dropout
stream use per-fold sub-seeds mixed from (seed, purpose tag, fold), so a
(data, folds, configs) tuple fixes every checkpoint byte.
"""

from __future__ import annotations

import base64
import binascii
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import FoldAssignment
from .errors import (ArgumentError, CheckpointFormatError,
                     CheckpointVersionError)
from .evaluate import compute_metrics, confusion, predict_probs
from .ioutils import atomic_write_text
from .model import (Gradients, ModelConfig, ModelParams, backward_batch,
                    forward_batch, init_params, param_shapes)
from .rng import SplitMix64, mix64, shuffled_indices

CHECKPOINT_VERSION = 1
_INIT_TAG = 0x696E6974   # "init"
_DROP_TAG = 0x64726F70   # "drop"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    clip_norm: float = 5.0
    eps_loss: float = 1e-7
    seed: int = 2023
    dropout: float = 0.2

    def __post_init__(self):
        if self.epochs < 1:
            raise ArgumentError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ArgumentError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ArgumentError("lr must be positive")
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ArgumentError(f"{name} must be in [0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ArgumentError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs, "batch_size": self.batch_size, "lr": self.lr,
            "beta1": self.beta1, "beta2": self.beta2, "eps_adam": self.eps_adam,
            "clip_norm": self.clip_norm, "eps_loss": self.eps_loss,
            "seed": self.seed, "dropout": self.dropout,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        return cls(**obj)


def bce_loss(p: float, y: int, eps: float = 1e-7) -> tuple[float, float]:
    """Binary cross entropy and dL/dp at one sample, with p clamped to
    [eps, 1-eps] so saturated outputs stay finite."""
    pc = min(max(p, eps), 1.0 - eps)
    loss = -(y * math.log(pc) + (1 - y) * math.log(1.0 - pc))
    dldp = (pc - y) / (pc * (1.0 - pc))
    return loss, dldp


def _bce_batch(p: np.ndarray, y: np.ndarray,
               eps: float) -> tuple[np.ndarray, np.ndarray]:
    pc = np.clip(p.astype(np.float64), eps, 1.0 - eps)
    yf = y.astype(np.float64)
    losses = -(yf * np.log(pc) + (1.0 - yf) * np.log1p(-pc))
    dldp = (pc - yf) / (pc * (1.0 - pc))
    return losses, dldp


@dataclass
class AdamState:
    m: Gradients
    v: Gradients
    t: int = 0

    @classmethod
    def zeros(cls, params: ModelParams) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in params.tensors.items()},
            v={k: np.zeros_like(a) for k, a in params.tensors.items()},
            t=0,
        )


def global_grad_norm(grads: Gradients) -> float:
    return math.sqrt(math.fsum(float(np.vdot(g, g)) for g in grads.values()))


def clip_gradients(grads: Gradients, max_norm: float) -> float:
    """Scale all gradients in place so the global L2 norm is at most
    max_norm; returns the pre-clip norm.  An infinite max_norm disables."""
    norm = global_grad_norm(grads)
    if math.isfinite(max_norm) and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= g.dtype.type(scale)
    return norm


def adam_step(params: ModelParams, grads: Gradients, state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, clip_norm: float = 5.0,
              ) -> tuple[ModelParams, AdamState]:
    """One Adam update (in place): clip globally, update biased moments,
    bias-correct, step.  Returns the same (params, state) pair."""
    clip_gradients(grads, clip_norm)
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= m.dtype.type(beta1)
        m += m.dtype.type(1.0 - beta1) * g
        v *= v.dtype.type(beta2)
        v += v.dtype.type(1.0 - beta2) * (g * g)
        mhat = m / m.dtype.type(bc1)
        vhat = v / v.dtype.type(bc2)
        params.tensors[name] -= (
            m.dtype.type(lr) * mhat / (np.sqrt(vhat) + m.dtype.type(eps)))
    return params, state


@dataclass
class TrainData:
    """Encoded, labeled corpus ready for training."""

    ids: np.ndarray     # (n, L) int32
    lens: np.ndarray    # (n,)
    labels: np.ndarray  # (n,) codes, HOF=0 / NOT=1

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class Checkpoint:
    model_cfg: ModelConfig
    train_cfg: TrainConfig
    fold: int
    vocab_sha256: str
    params: ModelParams
    final_train_loss: float


EpochLog = Callable[[dict], None]


def train_fold(data: TrainData, folds: FoldAssignment, fold: int,
               model_cfg: ModelConfig, train_cfg: TrainConfig,
               vocab_sha256: str,
               emb_init: dict[int, np.ndarray] | None = None,
               log: EpochLog | None = None) -> Checkpoint:
    """Train one model on every sample outside ``fold`` and report
    per-epoch train loss plus validation macro-F1 through ``log``."""
    train_idx = np.asarray(folds.train_indices(fold), dtype=np.int64)
    val_idx = np.asarray(folds.validation_indices(fold), dtype=np.int64)
    if train_idx.size == 0:
        raise ArgumentError(f"fold {fold}: empty training partition")
    if len(data) != len(folds.fold_of):
        raise ArgumentError("fold assignment length does not match dataset")

    cfg = replace(model_cfg, dropout=train_cfg.dropout)
    params = init_params(cfg, mix64(train_cfg.seed, _INIT_TAG, fold))
    if emb_init:
        emb = params.tensors["emb"]
        for idx, vec in emb_init.items():
            if 0 < idx < emb.shape[0]:
                emb[idx] = np.asarray(vec, dtype=emb.dtype)
    state = AdamState.zeros(params)
    drop_stream = SplitMix64(mix64(train_cfg.seed, _DROP_TAG, fold))

    train_loss = 0.0
    for epoch in range(1, train_cfg.epochs + 1):
        perm = shuffled_indices(train_idx.size, train_cfg.seed + epoch)
        order = train_idx[np.asarray(perm)]
        loss_sum = 0.0
        for start in range(0, order.size, train_cfg.batch_size):
            batch = order[start:start + train_cfg.batch_size]
            p, trace = forward_batch(cfg, params, data.ids[batch],
                                     data.lens[batch], train_mode=True,
                                     dropout_seed=drop_stream.next_u64())
            losses, dldp = _bce_batch(p, data.labels[batch], train_cfg.eps_loss)
            loss_sum += float(losses.sum())
            grads = backward_batch(cfg, params, trace, dldp / batch.size)
            adam_step(params, grads, state, train_cfg.lr, train_cfg.beta1,
                      train_cfg.beta2, train_cfg.eps_adam, train_cfg.clip_norm)
        train_loss = loss_sum / order.size
        if log is not None:
            val_probs = predict_probs(cfg, params, data.ids[val_idx],
                                      data.lens[val_idx])
            val_pred = (val_probs >= 0.5).astype(int)
            val_f1 = compute_metrics(
                confusion(val_pred.tolist(),
                          data.labels[val_idx].tolist())).macro_f1
            log({"fold": fold, "epoch": epoch,
                 "train_loss": train_loss, "val_macro_f1": val_f1})

    return Checkpoint(model_cfg=cfg, train_cfg=train_cfg, fold=fold,
                      vocab_sha256=vocab_sha256, params=params,
                      final_train_loss=train_loss)


def train_all_folds(data: TrainData, folds: FoldAssignment,
                    model_cfg: ModelConfig, train_cfg: TrainConfig,
                    vocab_sha256: str,
                    emb_init: dict[int, np.ndarray] | None = None,
                    log: EpochLog | None = None) -> list[Checkpoint]:
    return [
        train_fold(data, folds, fold, model_cfg, train_cfg, vocab_sha256,
                   emb_init=emb_init, log=log)
        for fold in range(folds.k)
    ]


def checkpoint_to_json(ckpt: Checkpoint) -> str:
    """Canonical JSON envelope; tensors as base64 little-endian float32."""
    tensors = {
        name: {
            "shape": list(arr.shape),
            "data": base64.b64encode(
                np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii"),
        }
        for name, arr in ckpt.params.tensors.items()
    }
    envelope = {
        "version": CHECKPOINT_VERSION,
        "model_cfg": ckpt.model_cfg.to_dict(),
        "train_cfg": ckpt.train_cfg.to_dict(),
        "fold": ckpt.fold,
        "vocab_sha256": ckpt.vocab_sha256,
        "final_train_loss": ckpt.final_train_loss,
        "tensors": tensors,
    }
    return json.dumps(envelope, sort_keys=True, separators=(",", ":"))


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    atomic_write_text(path, checkpoint_to_json(ckpt))


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        envelope = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointFormatError(f"{path}: truncated or invalid JSON "
                                    f"({exc})") from None
    if not isinstance(envelope, dict) or "version" not in envelope:
        raise CheckpointFormatError(f"{path}: not a checkpoint envelope")
    if envelope["version"] != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: version {envelope['version']} unsupported "
            f"(expected {CHECKPOINT_VERSION})")
    try:
        model_cfg = ModelConfig.from_dict(envelope["model_cfg"])
        train_cfg = TrainConfig.from_dict(envelope["train_cfg"])
        fold = envelope["fold"]
        vocab_sha256 = envelope["vocab_sha256"]
        final_train_loss = envelope["final_train_loss"]
        raw_tensors = envelope["tensors"]
    except (KeyError, TypeError) as exc:
        raise CheckpointFormatError(f"{path}: missing field {exc}") from None

    expected = param_shapes(model_cfg)
    if set(raw_tensors) != set(expected):
        raise CheckpointFormatError(f"{path}: tensor set does not match config")
    tensors: dict[str, np.ndarray] = {}
    for name, spec in raw_tensors.items():
        shape = tuple(spec["shape"])
        if shape != expected[name]:
            raise CheckpointFormatError(
                f"{path}: tensor {name} has shape {shape}, "
                f"expected {expected[name]}")
        try:
            raw = base64.b64decode(spec["data"], validate=True)
        except (binascii.Error, ValueError) as exc:
            raise CheckpointFormatError(
                f"{path}: tensor {name}: bad base64 ({exc})") from None
        if len(raw) != int(np.prod(shape)) * 4:
            raise CheckpointFormatError(
                f"{path}: tensor {name}: byte length {len(raw)} does not "
                f"match shape {shape}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    params = ModelParams(tensors)
    params.validate(model_cfg)
    return Checkpoint(model_cfg=model_cfg, train_cfg=train_cfg, fold=fold,
                      vocab_sha256=vocab_sha256, params=params,
                      final_train_loss=final_train_loss)
