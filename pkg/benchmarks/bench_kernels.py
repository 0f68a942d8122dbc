"""Benchmark the compiled LSTM step kernels against the numpy fallback.

Measures raw step-kernel throughput and the end-to-end forward+backward
time of the full network at training-like shapes, once per backend.

Usage:
    python benchmarks/bench_kernels.py [--batch 32] [--seq-len 16]
                                       [--hidden 128] [--repeats 30]
"""

import argparse
import time

import numpy as np

import hsdlab._kernels as kernels
from hsdlab._kernels import available_backends, get_backend
from hsdlab.model import ModelConfig, backward_batch, forward_batch, init_params
from hsdlab.rng import splitmix64_values
from hsdlab.train import _bce_batch


def time_step_kernels(backend, batch, hidden, repeats):
    rng = np.random.default_rng(0)
    z = rng.normal(size=(batch, 4 * hidden)).astype(np.float32)
    c_prev = rng.normal(size=(batch, hidden)).astype(np.float32)
    h_prev = rng.normal(size=(batch, hidden)).astype(np.float32)
    mask = np.ones(batch, dtype=np.uint8)
    g = np.empty_like(z)
    c = np.empty_like(c_prev)
    h = np.empty_like(c_prev)
    tc = np.empty_like(c_prev)
    dz = np.empty_like(z)
    dcp = np.empty_like(c_prev)
    dhp = np.empty_like(c_prev)
    dh = rng.normal(size=(batch, hidden)).astype(np.float32)
    dc = rng.normal(size=(batch, hidden)).astype(np.float32)

    backend.lstm_step_forward(z, c_prev, h_prev, mask, g, c, h, tc)
    start = time.perf_counter()
    for _ in range(repeats * 20):
        backend.lstm_step_forward(z, c_prev, h_prev, mask, g, c, h, tc)
    fwd = (time.perf_counter() - start) / (repeats * 20)

    backend.lstm_step_backward(dh, dc, g, tc, c_prev, mask, dz, dcp, dhp)
    start = time.perf_counter()
    for _ in range(repeats * 20):
        backend.lstm_step_backward(dh, dc, g, tc, c_prev, mask, dz, dcp, dhp)
    bwd = (time.perf_counter() - start) / (repeats * 20)
    return fwd, bwd


def time_model(backend, batch, seq_len, hidden, repeats):
    kernels.lstm_step_forward = backend.lstm_step_forward
    kernels.lstm_step_backward = backend.lstm_step_backward
    cfg = ModelConfig(vocab_size=2000, emb_dim=100, hidden_dim=hidden,
                      attn_dim=64, dense_dim=64, max_len=seq_len, dropout=0.2)
    params = init_params(cfg, 1)
    ids = (2 + splitmix64_values(7, batch * seq_len) % 1998
           ).astype(np.int32).reshape(batch, seq_len)
    lens = np.full(batch, seq_len, dtype=np.int64)
    labels = (splitmix64_values(9, batch) % 2).astype(np.int64)

    def one_pass(step):
        p, trace = forward_batch(cfg, params, ids, lens, train_mode=True,
                                 dropout_seed=step)
        _, dldp = _bce_batch(p, labels, 1e-7)
        backward_batch(cfg, params, trace, dldp / batch)

    one_pass(0)
    start = time.perf_counter()
    for step in range(repeats):
        one_pass(step + 1)
    return (time.perf_counter() - start) / repeats


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--seq-len", type=int, default=16)
    parser.add_argument("--hidden", type=int, default=128)
    parser.add_argument("--repeats", type=int, default=30)
    args = parser.parse_args()

    backends = available_backends()
    print(f"backends: {', '.join(backends)}   "
          f"(B={args.batch}, T={args.seq_len}, H={args.hidden})\n")
    print(f"{'backend':<8} {'step fwd':>12} {'step bwd':>12} "
          f"{'train batch':>14}")
    rows = {}
    original = (kernels.lstm_step_forward, kernels.lstm_step_backward)
    try:
        for name in backends:
            be = get_backend(name)
            fwd, bwd = time_step_kernels(be, args.batch, args.hidden,
                                         args.repeats)
            full = time_model(be, args.batch, args.seq_len, args.hidden,
                              args.repeats)
            rows[name] = (fwd, bwd, full)
            print(f"{name:<8} {fwd * 1e6:>10.1f}us {bwd * 1e6:>10.1f}us "
                  f"{full * 1e3:>12.2f}ms")
    finally:
        kernels.lstm_step_forward, kernels.lstm_step_backward = original
    if len(rows) == 2:
        n, c = rows["numpy"], rows["cython"]
        print(f"\nspeedup (numpy/cython): step fwd {n[0] / c[0]:.1f}x, "
              f"step bwd {n[1] / c[1]:.1f}x, train batch {n[2] / c[2]:.1f}x")


if __name__ == "__main__":
    main()
