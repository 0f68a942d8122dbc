"""The classifier network and its hand-derived gradients.

Architecture: embedding -> two stacked bidirectional LSTM layers ->
additive attention pooling over the top layer's states -> ReLU dense
layer (with inverted dropout at train time) -> sigmoid output.

Sequences are processed batched and time-major; each sample's recurrence
runs only over its true-length prefix (masked steps carry state through
unchanged), so padding never touches the result: growing the padded
length leaves eval-mode outputs bit-identical.

All arrays share the dtype of the parameters: float32 for training and
checkpoints, float64 for gradient checking.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _kernels as kernels
from .errors import ArgumentError, EmptySequenceError, FormatError
from .preprocess import PAD_ID, EncodedSample, Vocab
from .rng import uniforms

# Gate quarters in every 4H-wide LSTM tensor, in order: input, forget,
# cell candidate, output.
GATES = ("i", "f", "g", "o")


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    emb_dim: int = 100
    hidden_dim: int = 128
    attn_dim: int = 64
    dense_dim: int = 64
    max_len: int = 64
    dropout: float = 0.2

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ArgumentError("vocab_size must be >= 2 (PAD and UNK)")
        for name in ("emb_dim", "hidden_dim", "attn_dim", "dense_dim", "max_len"):
            if getattr(self, name) < 1:
                raise ArgumentError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ArgumentError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size, "emb_dim": self.emb_dim,
            "hidden_dim": self.hidden_dim, "attn_dim": self.attn_dim,
            "dense_dim": self.dense_dim, "max_len": self.max_len,
            "dropout": self.dropout,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Tensor shapes in canonical order (also the weight-draw order)."""
    de, hd = cfg.emb_dim, cfg.hidden_dim
    da, df = cfg.attn_dim, cfg.dense_dim
    shapes: dict[str, tuple[int, ...]] = {"emb": (cfg.vocab_size, de)}
    for layer, din in ((1, de), (2, 2 * hd)):
        for direction in ("fwd", "bwd"):
            shapes[f"lstm{layer}_{direction}_W"] = (4 * hd, din)
            shapes[f"lstm{layer}_{direction}_U"] = (4 * hd, hd)
            shapes[f"lstm{layer}_{direction}_b"] = (4 * hd,)
    shapes["att_W"] = (da, 2 * hd)
    shapes["att_b"] = (da,)
    shapes["att_v"] = (da,)
    shapes["dense1_W"] = (df, 2 * hd)
    shapes["dense1_b"] = (df,)
    shapes["dense2_W"] = (1, df)
    shapes["dense2_b"] = (1,)
    return shapes


_BIAS_NAMES = frozenset(
    [f"lstm{l}_{d}_b" for l in (1, 2) for d in ("fwd", "bwd")]
    + ["att_b", "dense1_b", "dense2_b"]
)


@dataclass
class ModelParams:
    """All tensors of the network, keyed by canonical name."""

    tensors: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    @property
    def dtype(self) -> np.dtype:
        return self.tensors["emb"].dtype

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.tensors.items()})

    def validate(self, cfg: ModelConfig) -> None:
        expected = param_shapes(cfg)
        if set(self.tensors) != set(expected):
            raise ArgumentError("parameter tensor names do not match config")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ArgumentError(
                    f"tensor {name}: expected shape {shape}, "
                    f"got {self.tensors[name].shape}")
        for name, arr in self.tensors.items():
            if not np.all(np.isfinite(arr)):
                raise ArgumentError(f"tensor {name} contains non-finite values")


Gradients = dict[str, np.ndarray]


def init_params(cfg: ModelConfig, seed: int,
                dtype: np.dtype = np.float32) -> ModelParams:
    """Glorot-uniform weights from one splitmix64 stream consumed in
    canonical tensor order (row-major within each tensor); biases zero
    except the LSTM forget-gate slices (1.0); PAD embedding row zeroed.
    """
    tensors: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in param_shapes(cfg).items():
        size = int(np.prod(shape))
        if name in _BIAS_NAMES:
            arr = np.zeros(shape, dtype=dtype)
            if name.startswith("lstm"):
                hd = cfg.hidden_dim
                arr[hd:2 * hd] = 1.0
        else:
            fan_out = shape[0]
            fan_in = shape[1] if len(shape) > 1 else shape[0]
            if len(shape) == 1:
                fan_in, fan_out = shape[0], 1
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            u = uniforms(seed, size, offset)
            offset += size
            arr = ((2.0 * u - 1.0) * limit).astype(dtype).reshape(shape)
        tensors[name] = arr
    tensors["emb"][PAD_ID] = 0.0
    return ModelParams(tensors)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp(-log(1+exp(-x))) never overflows, unlike 1/(1+exp(-x))
    return np.exp(-np.logaddexp(0.0, -x))


def lstm_cell(x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
              W: np.ndarray, U: np.ndarray, b: np.ndarray):
    """Reference single LSTM step: z = W x + U h + b split into (i,f,g,o);
    c' = f*c + i*g, h' = o*tanh(c').  Returns (h, c, gates dict)."""
    hd = h_prev.shape[-1]
    if W.shape != (4 * hd, x_t.shape[-1]) or U.shape != (4 * hd, hd) \
            or b.shape != (4 * hd,):
        raise ArgumentError("lstm_cell: weight shapes do not conform")
    z = W @ x_t + U @ h_prev + b
    i = _sigmoid(z[:hd])
    f = _sigmoid(z[hd:2 * hd])
    g = np.tanh(z[2 * hd:3 * hd])
    o = _sigmoid(z[3 * hd:])
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    return h_t, c_t, {"i": i, "f": f, "g": g, "o": o}


# Operation-count instrumentation: one unit per (timestep, layer, direction)
# processed, used to assert linear scaling in sequence length.
_STEP_OPS = 0


def reset_step_ops() -> None:
    global _STEP_OPS
    _STEP_OPS = 0


def get_step_ops() -> int:
    return _STEP_OPS


@dataclass
class _DirCache:
    H: np.ndarray    # (T, B, H) hidden states (carried where masked)
    C: np.ndarray    # (T, B, H) cell states
    G: np.ndarray    # (T, B, 4H) post-activation gates
    TC: np.ndarray   # (T, B, H) tanh of the computed cell state


def _dir_forward(X, W, U, b, live, reverse: bool) -> _DirCache:
    global _STEP_OPS
    T, B, din = X.shape
    hd = U.shape[1]
    dtype = X.dtype
    XW = (X.reshape(T * B, din) @ W.T + b).reshape(T, B, 4 * hd).astype(dtype, copy=False)
    H = np.zeros((T, B, hd), dtype=dtype)
    C = np.zeros((T, B, hd), dtype=dtype)
    G = np.empty((T, B, 4 * hd), dtype=dtype)
    TC = np.empty((T, B, hd), dtype=dtype)
    h = np.zeros((B, hd), dtype=dtype)
    c = np.zeros((B, hd), dtype=dtype)
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        z = XW[t] + h @ U.T
        kernels.lstm_step_forward(z, c, h, live[t], G[t], C[t], H[t], TC[t])
        h, c = H[t], C[t]
        _STEP_OPS += 1
    return _DirCache(H=H, C=C, G=G, TC=TC)


def _dir_backward(X, W, U, live, reverse: bool, cache: _DirCache, dH):
    T, B, din = X.shape
    hd = U.shape[1]
    dtype = X.dtype
    DZ = np.empty((T, B, 4 * hd), dtype=dtype)
    dh = np.zeros((B, hd), dtype=dtype)
    dc = np.zeros((B, hd), dtype=dtype)
    dc_buf = np.empty((B, hd), dtype=dtype)
    dh_pass = np.empty((B, hd), dtype=dtype)
    zero_state = np.zeros((B, hd), dtype=dtype)
    # iterate in reverse of the forward processing order
    order = range(T) if reverse else range(T - 1, -1, -1)
    for t in order:
        if reverse:
            c_prev = cache.C[t + 1] if t + 1 < T else zero_state
        else:
            c_prev = cache.C[t - 1] if t > 0 else zero_state
        dh_total = dH[t] + dh
        kernels.lstm_step_backward(dh_total, dc, cache.G[t], cache.TC[t],
                                   c_prev, live[t], DZ[t], dc_buf, dh_pass)
        dc, dc_buf = dc_buf, dc
        dh = DZ[t] @ U + dh_pass
    db = DZ.sum(axis=(0, 1))
    dW = DZ.reshape(T * B, 4 * hd).T @ X.reshape(T * B, din)
    Hprev = np.zeros_like(cache.H)
    if reverse:
        Hprev[:-1] = cache.H[1:]
    else:
        Hprev[1:] = cache.H[:-1]
    dU = DZ.reshape(T * B, 4 * hd).T @ Hprev.reshape(T * B, hd)
    dX = (DZ.reshape(T * B, 4 * hd) @ W).reshape(T, B, din)
    return dX, dW, dU, db


@dataclass
class ForwardTrace:
    """Everything the backward pass needs, plus the outputs."""

    ids: np.ndarray          # (T, B) time-major token ids
    lens: np.ndarray         # (B,)
    live: np.ndarray         # (T, B) uint8 position mask
    X: np.ndarray            # (T, B, emb)
    layer1: dict[str, _DirCache]
    layer2: dict[str, _DirCache]
    H1: np.ndarray           # (T, B, 2H)
    H2: np.ndarray           # (T, B, 2H)
    A: np.ndarray            # (T, B, attn) tanh scores
    alpha: np.ndarray        # (T, B) attention weights, 0 on masked
    context: np.ndarray      # (B, 2H)
    z1: np.ndarray           # (B, dense)
    drop_scale: np.ndarray | None
    u_drop: np.ndarray       # (B, dense) post-ReLU, post-dropout
    p: np.ndarray            # (B,) output probabilities

    def attention_weights(self, row: int = 0, length: int | None = None) -> np.ndarray:
        """Per-position attention of one sample, zero on padding."""
        T = self.alpha.shape[0]
        out = np.zeros(length if length is not None else T, dtype=np.float64)
        out[:T] = self.alpha[:, row]
        return out


def forward_batch(cfg: ModelConfig, params: ModelParams,
                  ids: np.ndarray, lens: np.ndarray,
                  train_mode: bool = False, dropout_seed: int = 0,
                  ) -> tuple[np.ndarray, ForwardTrace]:
    """Run the network on a batch of encoded samples.

    ids is (B, L) int, lens (B,) with every entry >= 1.  Returns the
    probability vector (B,) and the trace for backward.
    """
    t = params.tensors
    if np.any(lens < 1):
        bad = int(np.argmin(lens))
        raise EmptySequenceError(f"sample at batch row {bad} has no unmasked positions")
    if np.any(lens > cfg.max_len) or ids.shape[1] < int(lens.max()):
        raise ArgumentError("sequence lengths exceed the encoded width")
    T = int(lens.max())
    ids_tm = np.ascontiguousarray(ids[:, :T].T)
    live = (np.arange(T)[:, None] < lens[None, :]).astype(np.uint8)

    X = t["emb"][ids_tm]
    l1 = {
        "fwd": _dir_forward(X, t["lstm1_fwd_W"], t["lstm1_fwd_U"], t["lstm1_fwd_b"], live, False),
        "bwd": _dir_forward(X, t["lstm1_bwd_W"], t["lstm1_bwd_U"], t["lstm1_bwd_b"], live, True),
    }
    H1 = np.concatenate([l1["fwd"].H, l1["bwd"].H], axis=2)
    l2 = {
        "fwd": _dir_forward(H1, t["lstm2_fwd_W"], t["lstm2_fwd_U"], t["lstm2_fwd_b"], live, False),
        "bwd": _dir_forward(H1, t["lstm2_bwd_W"], t["lstm2_bwd_U"], t["lstm2_bwd_b"], live, True),
    }
    H2 = np.concatenate([l2["fwd"].H, l2["bwd"].H], axis=2)

    A = np.tanh(H2 @ t["att_W"].T + t["att_b"])
    e = A @ t["att_v"]
    e = np.where(live.astype(bool), e, -np.inf)
    w = np.exp(e - e.max(axis=0))
    alpha = w / w.sum(axis=0)
    context = np.einsum("tb,tbh->bh", alpha, H2)

    z1 = context @ t["dense1_W"].T + t["dense1_b"]
    u = np.maximum(z1, 0)
    drop_scale = None
    rate = cfg.dropout
    if train_mode and rate > 0.0:
        B, df = u.shape
        keep = uniforms(dropout_seed, B * df).reshape(B, df) >= rate
        drop_scale = (keep.astype(params.dtype) / params.dtype.type(1.0 - rate))
        u_drop = u * drop_scale
    else:
        u_drop = u
    z2 = u_drop @ t["dense2_W"].T[:, 0] + t["dense2_b"][0]
    p = _sigmoid(z2)

    trace = ForwardTrace(
        ids=ids_tm, lens=lens, live=live, X=X, layer1=l1, layer2=l2,
        H1=H1, H2=H2, A=A, alpha=alpha, context=context, z1=z1,
        drop_scale=drop_scale, u_drop=u_drop, p=p,
    )
    return p, trace


def forward(cfg: ModelConfig, params: ModelParams, sample: EncodedSample,
            train_mode: bool = False, dropout_seed: int = 0,
            ) -> tuple[float, ForwardTrace]:
    """Single-sample forward; raises on a fully masked sample."""
    if sample.true_len == 0:
        raise EmptySequenceError("sample has true_len 0 (all positions masked)")
    ids = sample.ids[None, :]
    lens = np.array([sample.true_len], dtype=np.int64)
    p, trace = forward_batch(cfg, params, ids, lens,
                             train_mode=train_mode, dropout_seed=dropout_seed)
    return float(p[0]), trace


def backward_batch(cfg: ModelConfig, params: ModelParams,
                   trace: ForwardTrace, dLdp: np.ndarray) -> Gradients:
    """Exact gradients for every parameter tensor, given dL/dp per sample
    (include the 1/B factor in dLdp for batch-mean losses)."""
    t = params.tensors
    dtype = params.dtype
    p = trace.p
    dz2 = (dLdp * p * (1.0 - p)).astype(dtype)

    grads: Gradients = {}
    grads["dense2_W"] = (dz2[:, None] * trace.u_drop).sum(axis=0)[None, :]
    grads["dense2_b"] = np.array([dz2.sum()], dtype=dtype)
    du = np.outer(dz2, t["dense2_W"][0])
    if trace.drop_scale is not None:
        du = du * trace.drop_scale
    dz1 = du * (trace.z1 > 0)
    grads["dense1_W"] = dz1.T @ trace.context
    grads["dense1_b"] = dz1.sum(axis=0)
    dcontext = dz1 @ t["dense1_W"]

    alpha, H2, A = trace.alpha, trace.H2, trace.A
    dalpha = np.einsum("bh,tbh->tb", dcontext, H2)
    dH2 = alpha[:, :, None] * dcontext[None, :, :]
    de = alpha * (dalpha - (alpha * dalpha).sum(axis=0)[None, :])
    grads["att_v"] = np.einsum("tb,tbd->d", de, A)
    dApre = (de[:, :, None] * t["att_v"]) * (1.0 - A * A)
    grads["att_W"] = np.tensordot(dApre, H2, axes=([0, 1], [0, 1]))
    grads["att_b"] = dApre.sum(axis=(0, 1))
    dH2 = dH2 + dApre @ t["att_W"]

    hd = cfg.hidden_dim
    dH1 = None
    for direction, sl in (("fwd", slice(0, hd)), ("bwd", slice(hd, 2 * hd))):
        dX2, dW, dU, db = _dir_backward(
            trace.H1, t[f"lstm2_{direction}_W"], t[f"lstm2_{direction}_U"],
            trace.live, direction == "bwd", trace.layer2[direction],
            np.ascontiguousarray(dH2[:, :, sl]))
        grads[f"lstm2_{direction}_W"] = dW
        grads[f"lstm2_{direction}_U"] = dU
        grads[f"lstm2_{direction}_b"] = db
        dH1 = dX2 if dH1 is None else dH1 + dX2

    dX = None
    for direction, sl in (("fwd", slice(0, hd)), ("bwd", slice(hd, 2 * hd))):
        dX1, dW, dU, db = _dir_backward(
            trace.X, t[f"lstm1_{direction}_W"], t[f"lstm1_{direction}_U"],
            trace.live, direction == "bwd", trace.layer1[direction],
            np.ascontiguousarray(dH1[:, :, sl]))
        grads[f"lstm1_{direction}_W"] = dW
        grads[f"lstm1_{direction}_U"] = dU
        grads[f"lstm1_{direction}_b"] = db
        dX = dX1 if dX is None else dX + dX1

    T, B, de_dim = trace.X.shape
    dE = np.zeros_like(t["emb"])
    np.add.at(dE, trace.ids.ravel(), dX.reshape(T * B, de_dim))
    dE[PAD_ID] = 0.0
    grads["emb"] = dE

    ordered = {name: grads[name] for name in param_shapes(cfg)}
    return ordered


def backward(cfg: ModelConfig, params: ModelParams, trace: ForwardTrace,
             y: int, eps_loss: float = 1e-7) -> Gradients:
    """Gradients of the binary cross entropy at one sample."""
    from .train import bce_loss  # deferred: train imports this module

    _, dldp = bce_loss(float(trace.p[0]), y, eps=eps_loss)
    return backward_batch(cfg, params, trace, np.array([dldp]))


def load_pretrained_vectors(vocab: Vocab, path: str | Path,
                            dim: int) -> dict[str, np.ndarray]:
    """Read word2vec-text vectors and return rows for tokens present in
    both the file and the vocabulary."""
    rows: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FormatError(f"{path}:1: expected header '<count> <dim>'")
        try:
            declared_n, declared_d = int(header[0]), int(header[1])
        except ValueError:
            raise FormatError(f"{path}:1: non-integer header fields") from None
        if declared_d != dim:
            raise FormatError(
                f"{path}: vector dim {declared_d} does not match "
                f"embedding dim {dim}")
        seen = 0
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise FormatError(
                    f"{path}:{lineno}: expected token plus {dim} values, "
                    f"got {len(parts) - 1}")
            seen += 1
            token = parts[0]
            if token in vocab.token_to_id:
                try:
                    rows[token] = np.array([float(x) for x in parts[1:]],
                                           dtype=np.float64)
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: non-numeric value") from None
        if seen != declared_n:
            raise FormatError(
                f"{path}: header declares {declared_n} vectors, found {seen}")
    return rows


def apply_pretrained(params: ModelParams, vocab: Vocab,
                     rows: dict[str, np.ndarray]) -> int:
    """Overwrite embedding rows in place; returns how many were set.
    The PAD row is never overwritten."""
    emb = params.tensors["emb"]
    count = 0
    for token, vec in rows.items():
        idx = vocab.token_to_id.get(token)
        if idx is None or idx == PAD_ID:
            continue
        emb[idx] = vec.astype(emb.dtype)
        count += 1
    return count
