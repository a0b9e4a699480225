"""Pure numpy versions of the compiled inner loops."""

from __future__ import annotations

import numpy as np


def cubic_kick(ut: np.ndarray, u: np.ndarray, coef: float) -> np.ndarray:
    """In place ``ut -= coef * u**3``."""
    ut -= coef * u * u * u
    return ut


def cubic_power(u: np.ndarray) -> np.ndarray:
    """Return ``u**3`` as a new array."""
    return u * u * u


def nonuniform_eval(f, x, y, p1, p2, sign, chunk: int = 2048):
    """Evaluate ``sum_jk f[j,k] exp(sign*i*(p1*x[j] + p2*y[k]))`` at each point."""
    f = np.asarray(f, dtype=np.complex128)
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    out = np.empty(p1.shape[0], dtype=np.complex128)
    for a in range(0, p1.shape[0], chunk):
        b = min(a + chunk, p1.shape[0])
        ex = np.exp(sign * 1j * np.outer(p1[a:b], x))
        ey = np.exp(sign * 1j * np.outer(p2[a:b], y))
        out[a:b] = np.einsum("qk,qk->q", ex @ f, ey)
    return out
