"""Finite-difference weights on uniform grids (Fornberg's recursion)."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


def fornberg_weights(x0: float, xs, m: int) -> np.ndarray:
    """Weights ``w`` with ``sum w_i f(xs_i) ~ f^(m)(x0)``."""
    xs = np.asarray(xs, dtype=float)
    npts = xs.size
    c = np.zeros((npts, m + 1))
    c1, c4 = 1.0, xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


@lru_cache(maxsize=None)
def _stencils(npts: int, m: int, accuracy: int):
    """Per-node (offset, weights in units of h^-m) for a grid of ``npts`` nodes."""
    half = accuracy // 2 + (m - 1) // 2
    width_c = 2 * half + 1
    width_b = accuracy + m
    out = []
    for i in range(npts):
        if i - half >= 0 and i + half < npts:
            lo, width = i - half, width_c
        else:
            width = width_b
            lo = 0 if i < npts // 2 else npts - width
        offs = np.arange(lo, lo + width) - i
        out.append((lo, fornberg_weights(0.0, offs, m)))
    return tuple(out)


def derivative(f, h: float, m: int = 1, accuracy: int = 2) -> np.ndarray:
    """m-th derivative of samples ``f`` on a uniform grid, order ``accuracy`` everywhere.

    Interior nodes use centred stencils; nodes too close to an end use
    one-sided stencils of ``accuracy + m`` points.
    """
    if accuracy not in (2, 4, 6):
        raise ValueError("accuracy must be 2, 4 or 6")
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    for i, (lo, w) in enumerate(_stencils(f.size, m, accuracy)):
        out[i] = w @ f[lo:lo + w.size]
    return out / h**m


# one-sided first derivative at the left end, 6 points, fifth order
SLOPE_STENCIL = fornberg_weights(0.0, np.arange(6.0), 1)
