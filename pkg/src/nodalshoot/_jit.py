"""Backend switch for the numeric kernels.

Kernels are written once in plain numpy-compatible Python.  When numba is
importable and ``NODALSHOOT_BACKEND`` is unset or ``numba``, they are compiled
with ``numba.njit``; ``NODALSHOOT_BACKEND=numpy`` runs them uncompiled.
"""
import logging
import os

BACKEND = os.environ.get("NODALSHOOT_BACKEND", "numba").strip().lower()

if BACKEND not in ("numba", "numpy"):
    raise ImportError(f"NODALSHOOT_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}")

if BACKEND == "numba":
    try:
        import numba
    except ImportError:  # pragma: no cover
        BACKEND = "numpy"
    else:
        logging.getLogger("numba").setLevel(logging.WARNING)


def jit(func):
    if BACKEND == "numba":
        return numba.njit(cache=True, nogil=True)(func)
    return func
