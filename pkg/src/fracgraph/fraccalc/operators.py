"""Riemann-Liouville integrals and derivatives of order ``0 < alpha < 1``.

Only the left-sided operators are implemented directly.  Each right-sided
operator reflects its input, applies the left-sided one on the reflected grid
and reflects back, so the two families share quadrature weights bit for bit.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from . import _weights
from ._powers import opposite_right, same_side
from ._types import (End, EndpointLimit, FracOrder, GridFunction, PowerTerm, TraceKind,
                     as_end, as_order)


def gamma(x: float) -> float:
    """Gamma function on the positive axis."""
    x = float(x)
    if not x > 0.0 or math.isnan(x):
        raise ValueError(f"gamma is only provided for x > 0, got {x}")
    return float(special.gamma(x))


def _order(value, allow_one: bool = False) -> float:
    if isinstance(value, FracOrder):
        return value.alpha
    v = float(value)
    if not v > 0.0 or (not allow_one and v >= 1.0):
        return as_order(v).alpha
    return v


def _opposite_left(f: GridFunction, term: PowerTerm, kind: str, order: float) -> GridFunction:
    # a left operator on (L - t)**p is the mirror of a right operator on t**p
    return opposite_right(f.grid.reflected, term, kind, order).reflected()


def _left(f: GridFunction, kind: str, order: float) -> GridFunction:
    grid = f.grid
    r = f.regular
    r0 = r[0]
    left: list[PowerTerm] = []
    if kind == "integral":
        # the constant r0 is integrated exactly and kept as a power term
        reg = _weights.apply(grid, order, "integral", r - r0)
        reg[0] = 0.0
        left.append(PowerTerm(r0 * special.rgamma(order + 1.0), order))
    else:
        slopes = np.diff(r) / np.diff(grid.nodes)
        reg = _weights.apply(grid, 1.0 - order, "slope", slopes)
        reg[0] = 0.0
        left.append(PowerTerm(r0 * special.rgamma(1.0 - order), -order))
    out = GridFunction(grid, reg, tuple(left))
    for t in f.left:
        img = same_side(t, kind, order)
        if img is not None:
            out = out + GridFunction(grid, np.zeros(grid.nodes.size), (img,))
    for t in f.right:
        out = out + _opposite_left(f, t, kind, order)
    return out


def _right(f: GridFunction, kind: str, order: float) -> GridFunction:
    return _left(f.reflected(), kind, order).reflected()


def frac_integral_left(f: GridFunction, alpha) -> GridFunction:
    """``(I_{0+}^alpha f)(x)`` at every node; orders ``>= 1`` are accepted too."""
    return _left(f, "integral", _order(alpha, allow_one=True))


def frac_integral_right(f: GridFunction, alpha) -> GridFunction:
    """``(I_{L-}^alpha f)(x)``: kernel ``(t - x)**(alpha - 1)`` on ``[x, L]``."""
    return _right(f, "integral", _order(alpha, allow_one=True))


def frac_deriv_left(y: GridFunction, alpha) -> GridFunction:
    """``D_{0+}^alpha y`` in the form valid for absolutely continuous ``y``.

    ``y(0) x**(-alpha) / Gamma(1 - alpha)`` is returned as a power term; the
    convolution of the interpolant's (piecewise constant) derivative with
    ``(x - t)**(-alpha)`` is integrated cell by cell in closed form.
    """
    return _left(y, "derivative", _order(alpha))


def frac_deriv_right(y: GridFunction, alpha) -> GridFunction:
    """``D_{L-}^alpha y``, mirror image of :func:`frac_deriv_left`."""
    return _right(y, "derivative", _order(alpha))


def _node_derivative(x: np.ndarray, F: np.ndarray) -> np.ndarray:
    h = np.diff(x)
    d = np.empty_like(F)
    h0, h1 = h[:-1], h[1:]
    d[1:-1] = (-h1 / (h0 * (h0 + h1)) * F[:-2]
               + (h1 - h0) / (h0 * h1) * F[1:-1]
               + h0 / (h1 * (h0 + h1)) * F[2:])
    d[0] = (F[1] - F[0]) / h[0]
    d[-1] = (F[-1] - F[-2]) / h[-1]
    return d


def _differentiate(F: GridFunction) -> GridFunction:
    grid = F.grid
    reg = _node_derivative(grid.nodes, F.regular)
    left = tuple(PowerTerm(t.coef * t.exponent, t.exponent - 1.0)
                 for t in F.left if t.exponent != 0.0)
    right = tuple(PowerTerm(-t.coef * t.exponent, t.exponent - 1.0)
                  for t in F.right if t.exponent != 0.0)
    return GridFunction(grid, reg, left, right)


def frac_deriv_left_definition(y: GridFunction, alpha) -> GridFunction:
    """``d/dx I_{0+}^{1-alpha} y`` with a finite-difference outer derivative.

    Independent of :func:`frac_deriv_left` apart from the shared integral
    weights; meant as a cross-check.  Power terms are differentiated exactly,
    the sampled part by second-order central differences on the nonuniform grid.
    """
    a = _order(alpha)
    return _differentiate(frac_integral_left(y, 1.0 - a))


def _richardson(x: np.ndarray, v: np.ndarray, alpha: float) -> tuple[complex, float]:
    """Limit at ``x -> 0`` of samples behaving like ``F0 + A x**(1-a) + B x**(2-a)``.

    The model is fitted on nodes 1-3 and again on nodes 2-4; the gap between
    the two extrapolants is the error estimate.
    """
    def fit(xs, vs):
        A = np.stack([np.ones(3), xs ** (1.0 - alpha), xs ** (2.0 - alpha)], axis=1)
        return np.linalg.solve(A, vs)[0]

    near, far = fit(x[:3], v[:3]), fit(x[1:4], v[1:4])
    return complex(near), float(abs(near - far))


def endpoint_trace(f: GridFunction, alpha, which="plus0", tol: float = 1e-6) -> EndpointLimit:
    """One-sided limit of ``I^{1-alpha} f`` at ``0+`` (``plus0``) or ``L-`` (``Lminus``).

    The sampled part is extrapolated from the three nodes nearest the end;
    power terms anchored there contribute in closed form.  A term whose image
    blows up makes the limit infinite and marks it as not converged.
    """
    a = _order(alpha)
    end = as_end(which)
    g = f if end is End.AT_0 else f.reflected()
    kind = TraceKind.LEFT_LIMIT_AT_0 if end is End.AT_0 else TraceKind.LEFT_LIMIT_AT_L
    x = g.grid.nodes
    rows = np.array([1, 2, 3, 4])
    v = _weights.apply(g.grid, 1.0 - a, "integral", g.regular - g.regular[0], rows=rows)
    # the constant part gives r0 x**(1-a) / Gamma(2-a), which vanishes at 0
    value, err = _richardson(x[1:5], v, a)
    scale = max(1.0, float(np.max(np.abs(g.regular))))
    converged = err <= tol * scale
    for t in g.left:
        img = same_side(t, "integral", 1.0 - a)
        if abs(img.exponent) <= 1e-12:
            value += img.coef
        elif img.exponent < 0.0:
            return EndpointLimit(kind, complex(math.inf), False, math.inf)
    return EndpointLimit(kind, value, converged, err)
