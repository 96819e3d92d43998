"""Two-parameter Mittag-Leffler function for real arguments.

``E_{a,b}(z) = sum_n z**n / Gamma(a*n + b)`` is evaluated by its power series
near the origin and by an integral representation (Gorenflo, Loutchko and
Luchko) further out.  The series is only trusted while it neither needs too
many terms (positive ``z``) nor cancels catastrophically (negative ``z``), so
the switch radius depends on ``(a, b)``; it never exceeds :data:`SERIES_RADIUS`.
Every time the integral route is first used for a parameter pair the two
routes are compared at the switch point.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

SERIES_RADIUS = 5.0
Z_MAX = 1.0e3
SWITCH_AGREEMENT = 1.0e-8

# largest tolerated series term for negative arguments (cancellation guard)
_PEAK_LIMIT = 1.0e2
# term budget for positive arguments
_TERM_LIMIT = 600
_TAIL = 1.0e-18


class MittagLefflerAccuracyError(ArithmeticError):
    """The series and integral routes disagree at the switch point."""


@dataclass(frozen=True)
class MLParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")


def _log_terms(r: float, a: float, b: float, nmax: int) -> np.ndarray:
    n = np.arange(nmax)
    with np.errstate(divide="ignore"):
        return n * math.log(r) - special.gammaln(a * n + b)


def _terms_needed(r: float, a: float, b: float, nmax: int = 20000) -> int:
    if r == 0.0:
        return 1
    lt = _log_terms(r, a, b, nmax)
    peak = max(lt.max(), 0.0)
    small = np.nonzero((lt < peak + math.log(_TAIL)) & (np.arange(nmax) > lt.argmax()))[0]
    return int(small[0]) + 1 if small.size else nmax


def _peak_term(r: float, a: float, b: float) -> float:
    with np.errstate(over="ignore"):
        return float(np.exp(_log_terms(r, a, b, _terms_needed(r, a, b)).max()))


@lru_cache(maxsize=256)
def series_radius(alpha: float, beta: float, negative: bool) -> float:
    """Largest ``|z|`` on which the series is used.

    On the positive axis every term is positive, so the series is used
    without limit (see :func:`_series_positive`).
    """
    if not negative:
        return math.inf

    def ok(r):
        return _peak_term(r, alpha, beta) <= _PEAK_LIMIT

    if ok(SERIES_RADIUS):
        return SERIES_RADIUS
    lo, hi = 0.0, SERIES_RADIUS
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


@lru_cache(maxsize=256)
def _fast_positive_radius(alpha: float, beta: float) -> float:
    """Positive arguments up to here go through the vectorised series."""
    def ok(r):
        return _terms_needed(r, alpha, beta) <= _TERM_LIMIT

    if ok(SERIES_RADIUS):
        return SERIES_RADIUS
    lo, hi = 0.0, SERIES_RADIUS
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def _series(z: np.ndarray, a: float, b: float, extra: int = 0) -> np.ndarray:
    """Neumaier-compensated power series, vectorised over ``z``.

    ``extra`` adds terms beyond the automatic truncation point.
    """
    z = np.asarray(z)
    if z.size == 0:
        return np.zeros_like(z, dtype=float)
    nterms = _terms_needed(float(np.abs(z).max()), a, b) + 4 + extra
    rg = special.rgamma(a * np.arange(nterms) + b)
    total = np.zeros_like(z, dtype=np.result_type(z, float))
    comp = np.zeros_like(total)
    power = np.ones_like(total)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(nterms):
            term = power * rg[n]
            t = total + term
            big = np.abs(total) >= np.abs(term)
            comp += np.where(big, (total - t) + term, (term - t) + total)
            total = t
            power = power * z
    return total + comp


_LOG_MAX = math.log(np.finfo(float).max)


def _series_positive(z: float, a: float, b: float) -> float:
    """Series for ``z > 0`` summed in log space; ``inf`` past the double range."""
    if z == 0.0:
        return float(special.rgamma(b))
    root = z ** (1.0 / a)
    # leading asymptotic size z**((1-b)/a) exp(z**(1/a)) / a screens hopeless cases
    if root + (1.0 - b) / a * math.log(z) - math.log(a) > _LOG_MAX + 50.0:
        return math.inf
    n = np.arange(int(2.0 * root / a + 10.0 * math.sqrt(root / a + 1.0) + 200.0))
    lt = n * math.log(z) - special.gammaln(a * n + b)
    peak = lt.max()
    keep = lt > peak + math.log(_TAIL)
    total = math.fsum(np.exp(lt[keep] - peak))
    log_val = peak + math.log(total)
    return math.inf if log_val > _LOG_MAX else math.exp(log_val)


def _quad_real(f, lo, hi, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=500, points=points)
    return val


def _integral_route(z: complex, a: float, b: float) -> complex:
    """Integral representation for ``0 < a <= 1``, ``b <= 1``, ``z != 0``."""
    s1 = math.sin(math.pi * (1.0 - b))
    s2 = math.sin(math.pi * (1.0 - b + a))
    c = math.cos(math.pi * a)
    expo = (1.0 - b) / a

    def kernel(r):
        return (r**expo * math.exp(-(r ** (1.0 / a))) * (r * s1 - z * s2)
                / ((r * r - 2.0 * r * z * c + z * z) * math.pi * a))

    rmax = 800.0**a
    pts = [abs(z)] if 0.0 < abs(z) < rmax else None
    # split at 1 so the algebraic endpoint behaviour at r=0 is isolated
    lo_pts = [p for p in (pts or []) if p < 1.0] or None
    hi_pts = [p for p in (pts or []) if p > 1.0] or None
    val = 0.0 + 0.0j
    for lo, hi, pp in ((0.0, min(1.0, rmax), lo_pts), (min(1.0, rmax), rmax, hi_pts)):
        if hi <= lo:
            continue
        re = _quad_real(lambda r: kernel(r).real, lo, hi, pp)
        im = _quad_real(lambda r: kernel(r).imag, lo, hi, pp) if isinstance(z, complex) else 0.0
        val += complex(re, im)
    if abs(cmath.phase(z)) < a * math.pi:
        root = complex(z) ** (1.0 / a)
        try:
            val += complex(z) ** expo * cmath.exp(root) / a
        except OverflowError:
            return complex(math.inf, 0.0)
    return val


def _far(z: complex, a: float, b: float) -> complex:
    """Non-series route for ``0 < a <= 1`` (complex ``z`` allowed)."""
    if a == 1.0 and not isinstance(z, complex):
        return special.hyp1f1(1.0, b, z) * special.rgamma(b)
    # the integral needs b < 1 + a; stepping down to b <= 1 also keeps its
    # r**((1-b)/a) factor bounded at r = 0
    if b > 1.0:
        return (_far(z, a, b - a) - special.rgamma(b - a)) / z
    return _integral_route(z, a, b)


def _scalar(z: complex, a: float, b: float) -> complex:
    if not isinstance(z, complex) and z >= 0.0:
        return complex(_series_positive(z, a, b))
    neg = True
    if abs(z) <= series_radius(a, b, neg):
        return complex(_series(np.array([z]), a, b)[0])
    _check_switch(a, b, neg)
    if a <= 1.0:
        return complex(_far(z, a, b))
    half = a / 2.0
    if isinstance(z, complex):
        raise ValueError("complex arguments require alpha <= 1")
    if z > 0:
        r = math.sqrt(z)
        return 0.5 * (_scalar(r, half, b) + _scalar(-r, half, b))
    return complex(_scalar(1j * math.sqrt(-z), half, b).real)


@lru_cache(maxsize=256)
def _check_switch(a: float, b: float, negative: bool) -> None:
    r = series_radius(a, b, negative)
    z = -r if negative else r
    near = complex(_series(np.array([z]), a, b)[0])
    if a <= 1.0:
        far = complex(_far(z, a, b))
    else:
        half = a / 2.0
        if z > 0:
            s = math.sqrt(z)
            far = 0.5 * (_scalar(s, half, b) + _scalar(-s, half, b))
        else:
            far = complex(_scalar(1j * math.sqrt(-z), half, b).real)
    scale = max(abs(near), 1e-300)
    if abs(near - far) / scale > SWITCH_AGREEMENT:
        raise MittagLefflerAccuracyError(
            f"E_{{{a},{b}}} regimes disagree at z={z}: series={near!r}, integral={far!r}"
        )


def mittag_leffler(z, alpha: float | MLParams, beta: float = 1.0, *, z_max: float = Z_MAX):
    """Evaluate ``E_{alpha,beta}(z)`` for real ``z`` (scalar or array).

    ``alpha`` may also be an :class:`MLParams`, in which case ``beta`` is
    taken from it.  Values beyond the double range come back as ``inf``.
    """
    if isinstance(alpha, MLParams):
        alpha, beta = alpha.alpha, alpha.beta
    alpha, beta = float(alpha), float(beta)
    MLParams(alpha, beta)
    arr = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(np.abs(arr) > z_max):
        raise ValueError(f"|z| must not exceed z_max={z_max}")
    flat = arr.ravel()
    out = np.empty(flat.shape, dtype=float)
    rpos = _fast_positive_radius(alpha, beta)
    rneg = series_radius(alpha, beta, True)
    near = ((flat >= 0) & (flat <= rpos)) | ((flat < 0) & (flat >= -rneg))
    if near.any():
        out[near] = _series(flat[near], alpha, beta).real
    for i in np.nonzero(~near)[0]:
        out[i] = _scalar(float(flat[i]), alpha, beta).real
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def ml_kernel(alpha: float, k: float, s, length: float):
    """``(l - s)**(alpha - 1) * E_{alpha,alpha}(k (l - s)**alpha)``.

    Diverges as ``s -> l``; ``s == l`` itself is rejected.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    s = np.asarray(s, dtype=float)
    tau = length - s
    if np.any(tau <= 0.0) or np.any(s < 0.0):
        raise ValueError("ml_kernel needs 0 <= s < length")
    out = tau ** (alpha - 1.0) * mittag_leffler(k * tau**alpha, alpha, alpha)
    return float(out) if np.ndim(out) == 0 else out
