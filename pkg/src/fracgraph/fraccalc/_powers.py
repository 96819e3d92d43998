"""Closed forms for fractional operators acting on endpoint power terms.

A term anchored at the same end as the operator maps to a single power
(Beta integral).  A term anchored at the opposite end is written through a
Gauss hypergeometric function; its endpoint singularities are split off as
new power terms and the bounded remainder is sampled on the grid.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from ._types import Grid, GridFunction, PowerTerm


def _check_integrable(p: float):
    if not p > -1.0:
        raise ValueError(f"power x**{p} is not integrable at its anchor (need exponent > -1)")


def same_side(term: PowerTerm, kind: str, order: float) -> PowerTerm | None:
    """Image of ``c d**p`` under ``I^order`` or ``D^order`` anchored at the same end."""
    p = term.exponent
    _check_integrable(p)
    if kind == "integral":
        return PowerTerm(term.coef * special.gamma(p + 1.0) * special.rgamma(p + 1.0 + order),
                         p + order)
    arg = p + 1.0 - order
    # 1/Gamma vanishes at 0, -1, -2, ...; rounding in p must not leave a residue
    if abs(arg - round(arg)) <= 1e-12 and round(arg) <= 0:
        return None
    factor = special.gamma(p + 1.0) * special.rgamma(arg)
    return PowerTerm(term.coef * factor, p - order)


def right_integral_of_power(y, length: float, p: float, beta: float):
    """``(I_{L-}^beta t**p)(y)`` for ``0 < y < L``."""
    z = (length - y) / length
    return ((length - y) ** beta * length**p * special.hyp2f1(-p, 1.0, beta + 1.0, z)
            * special.rgamma(beta + 1.0))


def right_derivative_of_power(y, length: float, p: float, alpha: float):
    """``(D_{L-}^alpha t**p)(y)`` for ``0 < y < L``."""
    head = length**p * (length - y) ** (-alpha) * special.rgamma(1.0 - alpha)
    if p == 0.0:
        return head
    return head - p * right_integral_of_power(y, length, p - 1.0, 1.0 - alpha)


def _extrapolate_start(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    v = v.copy()
    v[0] = v[1] + (v[2] - v[1]) * (x[0] - x[1]) / (x[2] - x[1])
    return v


def opposite_right(grid: Grid, term: PowerTerm, kind: str, order: float) -> GridFunction:
    """Right-sided operator applied to a term ``c x**p`` anchored at 0."""
    p, c = term.exponent, term.coef
    _check_integrable(p)
    x = grid.nodes
    length = grid.length
    left: list[PowerTerm] = []
    right: list[PowerTerm] = []
    inner = x[1:-1]
    if kind == "integral":
        beta = order
        exact = right_integral_of_power(inner, length, p, beta)
        if p + beta < 0.0:
            left.append(PowerTerm(special.gamma(-p - beta) * special.rgamma(-p), p + beta))
        # p + beta == 0 leaves a logarithm in the sampled remainder
        right.append(PowerTerm(length**p * special.rgamma(beta + 1.0), beta))
        right.append(PowerTerm(-p * length ** (p - 1.0) * special.rgamma(beta + 2.0), beta + 1.0))
    else:
        alpha = order
        exact = right_derivative_of_power(inner, length, p, alpha)
        if p - alpha < 0.0 and special.rgamma(-p) != 0.0:
            left.append(PowerTerm(special.gamma(alpha - p) * special.rgamma(-p), p - alpha))
        right.append(PowerTerm(length**p * special.rgamma(1.0 - alpha), -alpha))
        right.append(PowerTerm(-p * length ** (p - 1.0) * special.rgamma(2.0 - alpha), 1.0 - alpha))
    rem = np.zeros(x.size)
    rem[1:-1] = exact
    for t in left:
        rem[1:-1] -= t(inner).real
    for t in right:
        rem[1:-1] -= t(length - inner).real
    # at y = L the hypergeometric part carries a (L - y)**beta factor and vanishes
    rem[-1] = -sum(t(np.array([length])).real[0] for t in left)
    rem = _extrapolate_start(x, rem)
    scaled = lambda ts: tuple(PowerTerm(c * t.coef, t.exponent) for t in ts)  # noqa: E731
    return GridFunction(grid, c * rem, scaled(left), scaled(right))
