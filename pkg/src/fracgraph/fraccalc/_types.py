"""Value types shared by the fractional-calculus routines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Iterable

import numpy as np

MIN_NODES = 8


@dataclass(frozen=True)
class FracOrder:
    """Order ``0 < alpha < 1`` of a fractional integral or derivative."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 < a < 1.0) or not math.isfinite(a):
            raise ValueError(f"fractional order must satisfy 0 < alpha < 1, got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    def __float__(self) -> float:
        return self.alpha


def as_order(alpha) -> FracOrder:
    return alpha if isinstance(alpha, FracOrder) else FracOrder(alpha)


class End(str, Enum):
    """An end of an edge ``[0, L]``."""

    AT_0 = "at_0"
    AT_L = "at_L"

    @property
    def other(self) -> "End":
        return End.AT_L if self is End.AT_0 else End.AT_0


def as_end(end) -> End:
    if isinstance(end, End):
        return end
    aliases = {"at_0": End.AT_0, "0": End.AT_0, "plus0": End.AT_0, "left": End.AT_0,
               "at_L": End.AT_L, "L": End.AT_L, "Lminus": End.AT_L, "right": End.AT_L}
    try:
        return aliases[str(end)]
    except KeyError:
        raise ValueError(f"unknown edge end {end!r}") from None


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing nodes ``0 = x_0 < ... < x_n = L``."""

    nodes: np.ndarray
    grading: float = 1.0

    def __post_init__(self):
        x = np.array(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < MIN_NODES:
            raise ValueError(f"a grid needs at least {MIN_NODES} nodes")
        if x[0] != 0.0:
            raise ValueError("grid must start at 0")
        if not np.all(np.diff(x) > 0) or not np.all(np.isfinite(x)):
            raise ValueError("grid nodes must be finite and strictly increasing")
        if not self.grading >= 1.0:
            raise ValueError(f"grading exponent must be >= 1, got {self.grading}")
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)

    @property
    def length(self) -> float:
        return float(self.nodes[-1])

    @property
    def n(self) -> int:
        """Number of cells."""
        return self.nodes.size - 1

    @cached_property
    def _key(self) -> bytes:
        return self.nodes.tobytes()

    def __eq__(self, other):
        return isinstance(other, Grid) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    @cached_property
    def reflected(self) -> "Grid":
        """Grid of ``L - x`` in increasing order (``self`` when bitwise symmetric)."""
        r = self.length - self.nodes[::-1]
        r[0] = 0.0
        if np.array_equal(r, self.nodes):
            return self
        mirror = Grid(r, self.grading)
        # reflecting twice must give back this very grid, not a rounded copy
        mirror.__dict__["reflected"] = self
        return mirror

    def __repr__(self):
        return f"Grid(n={self.n}, L={self.length:g}, grading={self.grading:g})"


def graded_grid(length: float, n: int, grading: float = 2.0) -> Grid:
    """Two-sided graded grid with ``n`` cells clustering toward both ends.

    The half ``i <= n/2`` follows ``x_i = (L/2) (2i/n)**g``; the other half is
    its mirror image, so cell widths are symmetric about the midpoint.
    """
    if not length > 0 or not math.isfinite(length):
        raise ValueError(f"edge length must be positive, got {length}")
    n = int(n)
    if n + 1 < MIN_NODES:
        raise ValueError(f"need at least {MIN_NODES - 1} cells, got {n}")
    if not grading >= 1.0:
        raise ValueError(f"grading exponent must be >= 1, got {grading}")
    i = np.arange(n + 1, dtype=float)
    length = float(length)
    half = 0.5 * length * (2.0 * np.minimum(i, n - i) / n) ** grading
    # far = fl(L - half) and L - far are both exact, so the grid is bitwise
    # symmetric and left/right operators can share cached weights
    far = length - half
    x = np.where(i <= n / 2, length - far, far)
    x[0], x[-1] = 0.0, length
    return Grid(x, float(grading))


@dataclass(frozen=True)
class PowerTerm:
    """``coef * d**exponent`` where ``d`` is the distance to the anchoring end."""

    coef: complex
    exponent: float

    def __post_init__(self):
        object.__setattr__(self, "coef", complex(self.coef))
        e = float(self.exponent)
        # sums like (a - 1) + (1 - a) should land exactly on the integer
        if abs(e - round(e)) <= 1e-12:
            e = float(round(e))
        object.__setattr__(self, "exponent", e)

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.coef * np.power(d, self.exponent)
        if self.exponent == 0.0:
            return np.full(d.shape, self.coef)
        if self.exponent < 0.0:
            out = np.where(d == 0.0, complex(np.nan, np.nan), out)
        return out


_MERGE_RTOL = 1e-13


def _merge(terms: Iterable[PowerTerm]) -> tuple[PowerTerm, ...]:
    acc: dict[float, list[complex]] = {}
    for t in terms:
        acc.setdefault(t.exponent, []).append(t.coef)
    out = []
    for p in sorted(acc):
        coefs = acc[p]
        total = sum(coefs)
        scale = max(abs(c) for c in coefs)
        # exact cancellation up to rounding: drop the term
        if abs(total) <= _MERGE_RTOL * scale or total == 0:
            continue
        out.append(PowerTerm(total, p))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Function on one edge: piecewise-linear part plus endpoint power terms.

    ``regular`` holds node values of the piecewise-linear part.  ``left`` terms
    are powers of ``x`` and ``right`` terms are powers of ``L - x``; negative
    exponents describe endpoint singularities that are kept analytically.
    """

    grid: Grid
    regular: np.ndarray
    left: tuple[PowerTerm, ...] = field(default=())
    right: tuple[PowerTerm, ...] = field(default=())

    def __post_init__(self):
        r = np.array(self.regular, dtype=complex)
        if r.shape != self.grid.nodes.shape:
            raise ValueError(f"expected {self.grid.nodes.size} values, got shape {r.shape}")
        if not np.all(np.isfinite(r)):
            raise ValueError("regular part must be finite")
        r.setflags(write=False)
        object.__setattr__(self, "regular", r)
        object.__setattr__(self, "left", _merge(self.left))
        object.__setattr__(self, "right", _merge(self.right))

    # construction -----------------------------------------------------
    @classmethod
    def sample(cls, grid: Grid, f: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return cls(grid, np.broadcast_to(f(grid.nodes), grid.nodes.shape))

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.nodes.size))

    @classmethod
    def power(cls, grid: Grid, coef, exponent, end=End.AT_0) -> "GridFunction":
        term = (PowerTerm(coef, exponent),)
        if as_end(end) is End.AT_0:
            return cls(grid, np.zeros(grid.nodes.size), left=term)
        return cls(grid, np.zeros(grid.nodes.size), right=term)

    def terms(self, end) -> tuple[PowerTerm, ...]:
        return self.left if as_end(end) is End.AT_0 else self.right

    # evaluation -------------------------------------------------------
    def evaluate(self, x) -> np.ndarray:
        """Value at arbitrary points (``nan`` where a term is singular)."""
        x = np.asarray(x, dtype=float)
        nodes = self.grid.nodes
        out = (np.interp(x, nodes, self.regular.real)
               + 1j * np.interp(x, nodes, self.regular.imag))
        for t in self.left:
            out = out + t(x)
        for t in self.right:
            out = out + t(self.grid.length - x)
        return out

    @cached_property
    def values(self) -> np.ndarray:
        x = self.grid.nodes
        out = self.regular.copy()
        for t in self.left:
            out = out + t(x)
        for t in self.right:
            out = out + t(self.grid.length - x)
        out.setflags(write=False)
        return out

    @property
    def has_singular_terms(self) -> bool:
        return any(t.exponent < 0 for t in self.left + self.right)

    def singular_coefficient(self, end, exponent: float | None = None) -> complex:
        """Coefficient of the strongest (or the given) negative power at ``end``."""
        terms = [t for t in self.terms(end) if t.exponent < 0]
        if exponent is not None:
            terms = [t for t in terms if math.isclose(t.exponent, exponent, abs_tol=1e-12)]
        if not terms:
            return 0j
        return min(terms, key=lambda t: t.exponent).coef

    def regular_trace(self, end) -> complex:
        """Limit at ``end`` after removing the singular terms anchored there."""
        end = as_end(end)
        idx = 0 if end is End.AT_0 else -1
        val = complex(self.regular[idx])
        val += sum(t.coef for t in self.terms(end) if t.exponent == 0.0)
        length = self.grid.length
        val += sum(t.coef * length**t.exponent for t in self.terms(end.other))
        return val

    # algebra ----------------------------------------------------------
    def _check(self, other: "GridFunction"):
        if self.grid != other.grid:
            raise ValueError("grid functions live on different grids")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.grid, self.regular + other.regular,
                                self.left + other.left, self.right + other.right)
        return GridFunction(self.grid, self.regular + complex(other), self.left, self.right)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        if isinstance(c, GridFunction):
            return NotImplemented
        c = complex(c)
        return GridFunction(self.grid, self.regular * c,
                            tuple(PowerTerm(t.coef * c, t.exponent) for t in self.left),
                            tuple(PowerTerm(t.coef * c, t.exponent) for t in self.right))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / complex(c))

    def conj(self) -> "GridFunction":
        return GridFunction(self.grid, self.regular.conj(),
                            tuple(PowerTerm(t.coef.conjugate(), t.exponent) for t in self.left),
                            tuple(PowerTerm(t.coef.conjugate(), t.exponent) for t in self.right))

    def reflected(self) -> "GridFunction":
        """``x -> L - x``; lives on the reflected grid."""
        return GridFunction(self.grid.reflected, self.regular[::-1], self.right, self.left)

    def __repr__(self):
        return (f"GridFunction({self.grid!r}, left={list(self.left)}, "
                f"right={list(self.right)})")


class TraceKind(str, Enum):
    LEFT_LIMIT_AT_0 = "left_limit_at_0"
    LEFT_LIMIT_AT_L = "left_limit_at_L"


@dataclass(frozen=True)
class EndpointLimit:
    """One-sided limit of ``I^{1-alpha} f`` at an edge end."""

    kind: TraceKind
    value: complex
    converged: bool = True
    error_estimate: float = 0.0


def interior_mask(grid: Grid, margin: float = 0.05) -> np.ndarray:
    """Nodes inside ``[margin L, (1 - margin) L]``."""
    x = grid.nodes
    length = grid.length
    return (x >= margin * length) & (x <= (1.0 - margin) * length)
