"""Product-integration weights for the left-sided kernel ``(x - t)**(beta - 1)``.

The integrand is replaced by its piecewise-linear interpolant and every cell
is integrated exactly against the kernel.  Right-sided operators never get
their own weights; they reuse these on the reflected grid.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import special

from ._types import Grid

# dense matrices are kept only up to this many cells (about 34 MB each)
CACHE_MAX_CELLS = 2048
_CHUNK = 256


def _moments(x: np.ndarray, rows: np.ndarray, beta: float):
    # distances to every node; cell j spans columns j (b) and j + 1 (a)
    D = np.clip(x[rows, None] - x[None, :], 0.0, None)
    P = D**beta
    Q = P * D
    b, a = D[:, :-1], D[:, 1:]
    m0 = (P[:, :-1] - P[:, 1:]) / beta
    m1 = (Q[:, :-1] - Q[:, 1:]) / (beta + 1.0)
    return a, b, m0, m1, np.diff(x)[None, :]


def integral_rows(x: np.ndarray, rows: np.ndarray, beta: float) -> np.ndarray:
    """Rows of the matrix ``W`` with ``(I^beta f)(x_i) ~ sum_j W_ij f_j``."""
    a, b, m0, m1, h = _moments(x, rows, beta)
    wl = (m1 - a * m0) / h
    wr = (b * m0 - m1) / h
    W = np.zeros((rows.size, x.size))
    W[:, :-1] += wl
    W[:, 1:] += wr
    return W * special.rgamma(beta)


def slope_rows(x: np.ndarray, rows: np.ndarray, beta: float) -> np.ndarray:
    """Rows of ``M`` with ``M_ik = int_cell_k (x_i - t)**(beta-1) dt / Gamma(beta)``."""
    _, _, m0, _, _ = _moments(x, rows, beta)
    return m0 * special.rgamma(beta)


_BUILDERS = {"integral": integral_rows, "slope": slope_rows}


@lru_cache(maxsize=16)
def _cached(grid: Grid, beta: float, kind: str) -> np.ndarray:
    x = grid.nodes
    m = _BUILDERS[kind](x, np.arange(x.size), beta)
    m.setflags(write=False)
    return m


def apply(grid: Grid, beta: float, kind: str, vec: np.ndarray, rows=None) -> np.ndarray:
    """Multiply the weight matrix of ``kind`` by ``vec`` (selected rows only)."""
    if np.iscomplexobj(vec):
        # a real matrix times a complex vector would copy the matrix to complex
        return apply(grid, beta, kind, vec.real, rows) + 1j * apply(grid, beta, kind, vec.imag, rows)
    x = grid.nodes
    all_rows = rows is None
    rows = np.arange(x.size) if all_rows else np.asarray(rows)
    if all_rows and grid.n <= CACHE_MAX_CELLS:
        return _cached(grid, float(beta), kind) @ vec
    build = _BUILDERS[kind]
    out = np.empty(rows.size, dtype=np.result_type(vec, float))
    for s in range(0, rows.size, _CHUNK):
        blk = rows[s:s + _CHUNK]
        out[s:s + _CHUNK] = build(x, blk, beta) @ vec
    return out
