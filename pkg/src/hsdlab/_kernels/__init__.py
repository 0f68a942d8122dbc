"""Backend selection for the LSTM step kernels.

Two interchangeable implementations of the per-timestep gate math exist:

* ``_lstm_cy`` — Cython extension, fused loops, built by setup.py;
* ``numpy_backend`` — pure numpy, always available.

The compiled backend is picked when importable; ``HSDLAB_BACKEND=numpy``
or ``=cython`` forces a choice.  Both are deterministic run-to-run, but
they are not bit-identical to each other (different elementwise summation
and libm), so artifacts should be compared within one backend.
"""

from __future__ import annotations

import os

from . import numpy_backend

try:
    from . import _lstm_cy
    _HAVE_CYTHON = True
except ImportError:
    _lstm_cy = None
    _HAVE_CYTHON = False

_FORCED = os.environ.get("HSDLAB_BACKEND", "").strip().lower()
if _FORCED and _FORCED not in ("cython", "numpy"):
    raise RuntimeError(f"HSDLAB_BACKEND must be 'cython' or 'numpy', got {_FORCED!r}")
if _FORCED == "cython" and not _HAVE_CYTHON:
    raise RuntimeError("HSDLAB_BACKEND=cython but the compiled extension is "
                       "not importable; reinstall with a C compiler present")

if _FORCED == "numpy" or not _HAVE_CYTHON:
    _active = numpy_backend
    _active_name = "numpy"
else:
    _active = _lstm_cy
    _active_name = "cython"

lstm_step_forward = _active.lstm_step_forward
lstm_step_backward = _active.lstm_step_backward


def backend_name() -> str:
    return _active_name


def available_backends() -> list[str]:
    return ["numpy"] + (["cython"] if _HAVE_CYTHON else [])


def get_backend(name: str):
    """Return a backend module by name (for benchmarks and parity tests)."""
    if name == "numpy":
        return numpy_backend
    if name == "cython":
        if not _HAVE_CYTHON:
            raise RuntimeError("cython backend not built")
        return _lstm_cy
    raise ValueError(f"unknown backend {name!r}")
