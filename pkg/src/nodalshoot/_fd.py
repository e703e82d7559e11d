"""Exact central finite-difference weights on uniform grids."""
from functools import lru_cache
from math import factorial

import numpy as np


@lru_cache(maxsize=None)
def central_weights(deriv: int, m: int) -> np.ndarray:
    """Weights on offsets -m..m for the first or second derivative, order 2m."""
    w = np.zeros(2 * m + 1)
    for k in range(1, m + 1):
        base = factorial(m) ** 2 / (factorial(m - k) * factorial(m + k))
        if deriv == 1:
            w[m + k] = (-1) ** (k + 1) * base / k
            w[m - k] = -w[m + k]
        elif deriv == 2:
            w[m + k] = w[m - k] = 2 * (-1) ** (k + 1) * base / k ** 2
        else:
            raise ValueError("deriv must be 1 or 2")
    if deriv == 2:
        w[m] = -np.sum(w)
    w.setflags(write=False)
    return w


def apply_central(f: np.ndarray, h: float, deriv: int, m: int) -> np.ndarray:
    """Derivative along the last axis at interior samples m..len-m-1."""
    w = central_weights(deriv, m)
    n = f.shape[-1]
    out = np.zeros(f.shape[:-1] + (n - 2 * m,))
    for k, c in enumerate(w):
        if c:
            out += c * f[..., k:n - 2 * m + k]
    return out / h ** deriv
