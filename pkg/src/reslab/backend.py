"""Evaluator backend selection.

Two interchangeable implementations of the tape entry points exist: the
compiled extension reslab._core (Cython) and the pure-numpy fallback
reslab._core_py. Both fill caller-allocated output arrays and report a
per-point error code (0 ok, 1 non-finite, 2 kink). RESLAB_BACKEND=python
or =compiled forces a choice; by default the extension is used when it
imports and the fallback is taken silently otherwise.

RESLAB_THREADS caps the worker threads used by the samplers (default 1).
Sampled output is independent of the thread count by construction.
"""

import os

import numpy as np

from . import _core_py


def _select():
    force = os.environ.get("RESLAB_BACKEND", "").strip().lower()
    if force not in ("", "python", "compiled"):
        raise ValueError(f"RESLAB_BACKEND must be 'python' or 'compiled', got {force!r}")
    if force == "python":
        return _core_py, "python"
    try:
        from . import _core
    except ImportError:
        if force == "compiled":
            raise ImportError("RESLAB_BACKEND=compiled but reslab._core is not built")
        return _core_py, "python"
    return _core, "compiled"


_impl, BACKEND_NAME = _select()


def tape_values(tape, X):
    B = X.shape[0]
    out_v = np.empty(B)
    err = np.zeros(B, dtype=np.int32)
    _impl.tape_values(tape.ops, tape.ia, tape.ib, tape.cs, X, out_v, err)
    return out_v, err


def tape_jet1(tape, X):
    B, d = X.shape
    out_v = np.empty(B)
    out_g = np.empty((B, d))
    err = np.zeros(B, dtype=np.int32)
    _impl.tape_jet1(tape.ops, tape.ia, tape.ib, tape.cs, X, out_v, out_g, err)
    return out_v, out_g, err


def tape_jet2(tape, X):
    B, d = X.shape
    out_v = np.empty(B)
    out_g = np.empty((B, d))
    out_h = np.empty((B, d, d))
    err = np.zeros(B, dtype=np.int32)
    _impl.tape_jet2(tape.ops, tape.ia, tape.ib, tape.cs, X, out_v, out_g, out_h, err)
    return out_v, out_g, out_h, err


def thread_count():
    raw = os.environ.get("RESLAB_THREADS", "").strip()
    if not raw:
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"RESLAB_THREADS must be >= 1, got {raw!r}")
    return n
