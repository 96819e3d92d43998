"""The edge operator ``D_{0+}^alpha + D_{l-}^alpha`` and its skew form on a graph.

Test functions may carry ``x**(alpha-1)`` singularities at vertices, so the
individual integrals in ``<A phi, psi>`` can diverge logarithmically.  All
integrals are therefore taken as Hadamard finite parts with a common cutoff
convention; in ``Omega = <A phi, psi> - <phi, A psi>`` the divergent pieces
cancel and the finite part equals the limit of the cut-off form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .fraccalc import End, GridFunction, PowerTerm, endpoint_trace, frac_deriv_left, frac_deriv_right
from .graphmodel import ConditionKind, GraphFunction, MetricGraph, check_compatible

_TINY = 1e-12


# --------------------------------------------------------------- operator
def apply_edge(phi: GridFunction, alpha: float) -> GridFunction:
    return frac_deriv_left(phi, alpha) + frac_deriv_right(phi, alpha)


def apply_operator(graph: MetricGraph, phi: GraphFunction) -> GraphFunction:
    """Edgewise ``(D_{0+}^alpha + D_{l_j-}^alpha) phi_j``."""
    check_compatible(graph, phi)
    return phi.map(lambda comp: apply_edge(comp, graph.alpha))


# ---------------------------------------------------------- inner product
def _fp_moment(q: float, X: np.ndarray) -> np.ndarray:
    """Finite-part antiderivative of ``x**(q-1)``; it vanishes at ``X = 0``."""
    X = np.asarray(X, dtype=float)
    out = np.zeros_like(X)
    pos = X > 0
    if abs(q) < _TINY:
        out[pos] = np.log(X[pos])
    else:
        out[pos] = X[pos] ** q / q
    return out


def _fp_cell_moment(q: float, xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
    """``FP int_xa^xb x**(q-1) dx`` without cancellation for narrow far cells."""
    out = _fp_moment(q, xb)
    inner = xa > 0
    r = (xb[inner] - xa[inner]) / xa[inner]
    if abs(q) < _TINY:
        out[inner] = np.log1p(r)
    else:
        out[inner] = xa[inner] ** q * np.expm1(q * np.log1p(r)) / q
    return out


def _reg_times_power(x: np.ndarray, r: np.ndarray, p: float) -> complex:
    """``FP int_0^L r(x) x**p dx`` for the piecewise-linear ``r`` on nodes ``x``."""
    xa, xb = x[:-1], x[1:]
    h = xb - xa
    m0 = _fp_cell_moment(p + 1.0, xa, xb)
    m1 = _fp_cell_moment(p + 2.0, xa, xb)
    ra, rb = r[:-1], r[1:]
    return complex(np.sum((ra * (xb * m0 - m1) + rb * (m1 - xa * m0)) / h))


def _power_power_same(p: float, length: float) -> float:
    return float(_fp_moment(p + 1.0, np.array(length)))


def _power_power_opposite(p: float, q: float, length: float) -> float:
    """``FP int_0^L x**p (L - x)**q dx``."""
    if abs(p + 1.0) < _TINY and q > -1.0:
        return length**q * (special.digamma(1.0) - special.digamma(q + 1.0) + math.log(length))
    if abs(q + 1.0) < _TINY and p > -1.0:
        return _power_power_opposite(q, p, length)
    for s in (p, q):
        if s <= -1.0 and abs(s - round(s)) < _TINY:
            raise NotImplementedError(f"finite part of x**{p} (L-x)**{q} is not available")
    return length ** (p + q + 1.0) * special.beta(p + 1.0, q + 1.0)


def _edge_inner(f: GridFunction, g: GridFunction) -> complex:
    if f.grid != g.grid:
        raise ValueError("components live on different grids")
    grid = f.grid
    x = grid.nodes
    length = grid.length
    h = np.diff(x)
    fr, gr = f.regular, g.regular.conj()
    total = complex(np.sum(h / 6.0 * (2 * fr[:-1] * gr[:-1] + fr[:-1] * gr[1:]
                                      + fr[1:] * gr[:-1] + 2 * fr[1:] * gr[1:])))
    xr = grid.reflected.nodes
    # regular part against the other function's power terms
    for t in g.left:
        total += np.conj(t.coef) * _reg_times_power(x, fr, t.exponent)
    for t in g.right:
        total += np.conj(t.coef) * _reg_times_power(xr, fr[::-1], t.exponent)
    for t in f.left:
        total += t.coef * _reg_times_power(x, gr, t.exponent)
    for t in f.right:
        total += t.coef * _reg_times_power(xr, gr[::-1], t.exponent)
    # power terms against power terms
    for side_f, side_g, same in ((f.left, g.left, True), (f.right, g.right, True),
                                 (f.left, g.right, False), (f.right, g.left, False)):
        for a in side_f:
            for b in side_g:
                w = (_power_power_same(a.exponent + b.exponent, length) if same
                     else _power_power_opposite(a.exponent, b.exponent, length))
                total += a.coef * np.conj(b.coef) * w
    return complex(total)


def inner_product(phi: GraphFunction, psi: GraphFunction) -> complex:
    """``sum_j int phi_j conj(psi_j) dx``; the second argument is conjugated."""
    if set(phi.components) != set(psi.components):
        raise ValueError("graph functions cover different edges")
    return complex(sum(_edge_inner(phi[k], psi[k]) for k in sorted(phi.components)))


# ----------------------------------------------------------------- skew form
def pairing_constant(alpha: float) -> float:
    """Weight of the trace/flux pairing at an end for ``x**(alpha-1)`` profiles.

    ``1 + sin(pi a)/pi * (digamma(1 - a) + euler_gamma)``.
    """
    return 1.0 + math.sin(math.pi * alpha) / math.pi * (special.digamma(1.0 - alpha) + np.euler_gamma)


@dataclass(frozen=True)
class EndData:
    edge: str
    end: End
    vertex: str
    trace_phi: complex
    trace_psi: complex
    flux_phi: complex
    flux_psi: complex


@dataclass(frozen=True)
class SkewReport:
    omega: complex
    boundary_form: complex
    pairing_form: complex
    per_vertex_terms: dict = field(default_factory=dict)
    grid_n: int = 0
    ends: tuple = ()

    @property
    def boundary_gap(self) -> float:
        return abs(self.omega - self.boundary_form)


def _end_data(graph: MetricGraph, phi: GraphFunction, psi: GraphFunction) -> list[EndData]:
    out = []
    for e in graph.edges:
        for end in End:
            out.append(EndData(
                e.id, end, e.vertex_at(end),
                phi[e.id].regular_trace(end), psi[e.id].regular_trace(end),
                endpoint_trace(phi[e.id], graph.alpha, end).value,
                endpoint_trace(psi[e.id], graph.alpha, end).value))
    return out


def skew_form(graph: MetricGraph, phi: GraphFunction, psi: GraphFunction) -> SkewReport:
    """``Omega(phi, psi) = <A phi, psi> - <phi, A psi>`` with boundary expressions.

    ``boundary_form`` is ``-sum [psi*(0) F_phi(0+) + psi*(l) F_phi(l-)]`` with
    ``F`` the one-sided limits of ``I^{1-alpha}`` and ``psi`` its bounded end
    value.  ``pairing_form`` is ``c(alpha) sum [u_phi F_psi* - F_phi u_psi*]``
    over all ends (``u`` bounded end values).  The two agree with ``Omega`` for
    absolutely continuous inputs; with ``x**(alpha-1)`` parts only the pairing
    form does.
    """
    check_compatible(graph, phi)
    check_compatible(graph, psi)
    a = graph.alpha
    omega = (inner_product(apply_operator(graph, phi), psi)
             - inner_product(phi, apply_operator(graph, psi)))
    ends = _end_data(graph, phi, psi)
    boundary = -sum(np.conj(d.trace_psi) * d.flux_phi for d in ends)
    c = pairing_constant(a)
    per_vertex: dict[str, complex] = {}
    for d in ends:
        term = c * (d.trace_phi * np.conj(d.flux_psi) - d.flux_phi * np.conj(d.trace_psi))
        per_vertex[d.vertex] = per_vertex.get(d.vertex, 0j) + term
    n = max(comp.grid.n for _, comp in phi.items())
    return SkewReport(complex(omega), complex(boundary), complex(sum(per_vertex.values())),
                      per_vertex, n, tuple(ends))


# ---------------------------------------------------------- verification
@dataclass(frozen=True)
class TrialResult:
    trial: int
    family: str
    omega: float
    boundary_form: float
    pairing_form: float
    passed: bool
    worst_vertex: str = ""


@dataclass(frozen=True)
class VerificationReport:
    trials: tuple[TrialResult, ...]
    violation: TrialResult | None
    tol: float
    n: int
    alpha: float

    @property
    def passed(self) -> bool:
        ok = all(t.passed for t in self.trials)
        return ok and (self.violation is None or self.violation.passed)

    @property
    def max_omega(self) -> float:
        return max((t.omega for t in self.trials), default=0.0)

    def failures(self) -> list[TrialResult]:
        return [t for t in self.trials if not t.passed]


def _poly_profile(rng, x, length):
    """Random complex combination of ``x**p (l - x)**q`` with ``p, q >= 1``."""
    u = x / length
    out = np.zeros(x.size, dtype=complex)
    for _ in range(2):
        p, q = rng.integers(1, 4, size=2)
        coef = complex(rng.normal(), rng.normal())
        out += coef * u**p * (1.0 - u) ** q
    return out / max(1.0, float(np.max(np.abs(out))))


def domain_function(graph: MetricGraph, rng, n: int, grading: float = 2.0) -> GraphFunction:
    """Family (a): smooth components vanishing at every end."""
    grids = graph.grids(n, grading)
    comps = {}
    for e in graph.edges:
        g = grids[e.id]
        comps[e.id] = GridFunction(g, _poly_profile(rng, g.nodes, e.length))
    return GraphFunction(comps)


def _project_fluxes(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    inv = 1.0 / w
    return a - (np.sum(a * inv) / np.sum(inv * inv)) * inv


def vertex_function(graph: MetricGraph, rng, n: int, grading: float = 2.0,
                    values=None, fluxes=None, perturb: tuple[str, int, float] | None = None
                    ) -> GraphFunction:
    """Family (b): components meeting every vertex condition at the trace level.

    At a Kirchhoff vertex with common value ``v`` each incident end gets bounded
    value ``v / w_e`` and a singular part ``a_e x**(alpha-1) / Gamma(alpha)``
    (distance measured from that end), whose ``I^{1-alpha}`` limit is ``a_e``;
    the ``a_e`` are projected onto ``sum a_e / w_e = 0``.  Dirichlet ends get
    bounded value 0 and no singular part.  A smooth random profile vanishing at
    both ends is added.  ``perturb=(vertex, k, factor)`` divides the weight of
    incidence ``k`` at ``vertex`` by ``factor`` in the continuity targets only.
    """
    alpha = graph.alpha
    ginv = special.rgamma(alpha)
    targets: dict[tuple[str, End], complex] = {}
    sing: dict[tuple[str, End], complex] = {}
    for cond in graph.conditions:
        if cond.kind is ConditionKind.DIRICHLET:
            inc = cond.incidences[0]
            targets[(inc.edge, inc.end)] = 0j
            continue
        w = np.array([inc.weight for inc in cond.incidences])
        if values is not None and cond.vertex in values:
            v = complex(values[cond.vertex])
        else:
            v = complex(rng.normal(), rng.normal())
        if fluxes is not None and cond.vertex in fluxes:
            a = np.asarray(fluxes[cond.vertex], dtype=complex)
        else:
            a = _project_fluxes(rng.normal(size=w.size) + 1j * rng.normal(size=w.size), w)
            a = a / max(1.0, float(np.max(np.abs(a))))
        for k, inc in enumerate(cond.incidences):
            wk = inc.weight
            if perturb is not None and perturb[0] == cond.vertex and perturb[1] == k:
                wk = wk * perturb[2]
            targets[(inc.edge, inc.end)] = v / wk
            sing[(inc.edge, inc.end)] = a[k] * ginv
    grids = graph.grids(n, grading)
    comps = {}
    for e in graph.edges:
        g = grids[e.id]
        x = g.nodes
        length = e.length
        left = tuple(PowerTerm(sing[(e.id, End.AT_0)], alpha - 1.0)
                     for _ in [0] if sing.get((e.id, End.AT_0), 0) != 0)
        right = tuple(PowerTerm(sing[(e.id, End.AT_L)], alpha - 1.0)
                      for _ in [0] if sing.get((e.id, End.AT_L), 0) != 0)
        # bounded part: hit the end targets once the far singular tails are counted
        r0 = targets[(e.id, End.AT_0)] - sum(t.coef * length**t.exponent for t in right)
        rL = targets[(e.id, End.AT_L)] - sum(t.coef * length**t.exponent for t in left)
        reg = r0 + (rL - r0) * x / length + _poly_profile(rng, x, length)
        comps[e.id] = GridFunction(g, reg, left, right)
    return GraphFunction(comps)


def _violation_fluxes(graph: MetricGraph, vertex: str) -> dict:
    cond = graph.condition(vertex)
    w = [inc.weight for inc in cond.incidences]
    a = np.zeros(len(w), dtype=complex)
    a[0], a[1] = w[0], -w[1]
    return {vertex: a}


def verify_self_adjoint(graph: MetricGraph, trials: int = 50, tol: float = 1e-3, seed: int = 0,
                        n: int = 2048, grading: float = 2.0,
                        families: tuple[str, ...] = ("a", "b"),
                        violation: bool = True) -> VerificationReport:
    """Check ``|Omega| <= tol`` on random pairs from each family.

    Family ``a`` uses components vanishing at all ends, family ``b`` the
    vertex-condition functions of :func:`vertex_function`.  The violation trial
    perturbs one continuity weight by 10% in ``phi`` and must give
    ``|Omega| > 10 tol``.
    """
    rng = np.random.default_rng(seed)
    results = []
    idx = 0
    for fam in families:
        make = domain_function if fam == "a" else vertex_function
        if fam not in ("a", "b"):
            raise ValueError(f"unknown family {fam!r}")
        for _ in range(trials):
            phi = make(graph, rng, n, grading)
            psi = make(graph, rng, n, grading)
            rep = skew_form(graph, phi, psi)
            worst = max(rep.per_vertex_terms, key=lambda v: abs(rep.per_vertex_terms[v]))
            results.append(TrialResult(idx, fam, abs(rep.omega), abs(rep.boundary_form),
                                       abs(rep.pairing_form), abs(rep.omega) <= tol, worst))
            idx += 1
    viol = None
    kv = graph.kirchhoff_vertices()
    if violation and kv:
        vertex = kv[0].vertex
        fl = _violation_fluxes(graph, vertex)
        phi = vertex_function(graph, rng, n, grading, values={vertex: 1.0}, fluxes=fl,
                              perturb=(vertex, 0, 1.1))
        psi = vertex_function(graph, rng, n, grading, values={vertex: 1.0}, fluxes=fl)
        rep = skew_form(graph, phi, psi)
        viol = TrialResult(-1, "violation", abs(rep.omega), abs(rep.boundary_form),
                           abs(rep.pairing_form), abs(rep.omega) > 10.0 * tol, vertex)
    return VerificationReport(tuple(results), viol, tol, n, graph.alpha)
