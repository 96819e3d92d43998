"""Metric graphs, vertex conditions and functions living on them.

Each edge ``e`` is an interval ``[0, l_e]`` running from its start vertex
(``at_0``) to its end vertex (``at_L``).  A vertex carries one condition:

* ``weighted_kirchhoff``: ``w_e u_e`` agrees over all incident ends and
  ``sum_e F_e / w_e = 0``, where ``u_e`` is the bounded part of the end value
  and ``F_e`` the one-sided limit of ``I^{1-alpha} phi_e`` at that end;
* ``dirichlet``: ``u_e = 0`` at a single end.

Vertex weights are called ``w`` to keep them apart from the order ``alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from .fraccalc import (End, FracOrder, Grid, GridFunction, as_end, as_order, endpoint_trace,
                       graded_grid)


class ConditionKind(str, Enum):
    WEIGHTED_KIRCHHOFF = "weighted_kirchhoff"
    DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class Edge:
    id: str
    length: float
    start_vertex: str
    end_vertex: str

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError(f"edge {self.id}: length must be positive, got {self.length}")
        if self.start_vertex == self.end_vertex:
            raise ValueError(f"edge {self.id}: self-loops are not supported")
        object.__setattr__(self, "length", float(self.length))

    def vertex_at(self, end) -> str:
        return self.start_vertex if as_end(end) is End.AT_0 else self.end_vertex


@dataclass(frozen=True)
class Incidence:
    edge: str
    end: End
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "end", as_end(self.end))
        w = float(self.weight)
        if w == 0.0 or not math.isfinite(w):
            raise ValueError(f"weight for edge {self.edge} must be real and nonzero, got {self.weight}")
        object.__setattr__(self, "weight", w)


@dataclass(frozen=True)
class VertexCondition:
    vertex: str
    kind: ConditionKind
    incidences: tuple[Incidence, ...]

    def __post_init__(self):
        kind = ConditionKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "incidences", tuple(self.incidences))
        k = len(self.incidences)
        if kind is ConditionKind.WEIGHTED_KIRCHHOFF and k < 2:
            raise ValueError(f"vertex {self.vertex}: a Kirchhoff condition needs >= 2 incidences")
        if kind is ConditionKind.DIRICHLET and k != 1:
            raise ValueError(f"vertex {self.vertex}: a Dirichlet condition needs exactly 1 incidence")


@dataclass(frozen=True)
class MetricGraph:
    edges: tuple[Edge, ...]
    vertices: tuple[str, ...]
    conditions: tuple[VertexCondition, ...]
    order: FracOrder
    topology: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "conditions", tuple(self.conditions))
        object.__setattr__(self, "order", as_order(self.order))
        ids = [e.id for e in self.edges]
        if len(set(ids)) != len(ids):
            raise ValueError("edge ids must be unique")
        verts = set(self.vertices)
        for e in self.edges:
            if e.start_vertex not in verts or e.end_vertex not in verts:
                raise ValueError(f"edge {e.id} references an unknown vertex")
        seen_v = [c.vertex for c in self.conditions]
        if sorted(seen_v) != sorted(self.vertices):
            raise ValueError("every vertex needs exactly one condition")
        by_id = self.edge_map
        covered = []
        for c in self.conditions:
            for inc in c.incidences:
                if inc.edge not in by_id:
                    raise ValueError(f"vertex {c.vertex}: unknown edge {inc.edge}")
                if by_id[inc.edge].vertex_at(inc.end) != c.vertex:
                    raise ValueError(f"vertex {c.vertex}: edge {inc.edge} {inc.end.value} is not incident")
                covered.append((inc.edge, inc.end))
        expected = {(e.id, end) for e in self.edges for end in End}
        if len(covered) != len(set(covered)) or set(covered) != expected:
            raise ValueError("every edge end must appear in exactly one vertex condition")

    @property
    def edge_map(self) -> dict[str, Edge]:
        return {e.id: e for e in self.edges}

    @property
    def alpha(self) -> float:
        return self.order.alpha

    def condition(self, vertex: str) -> VertexCondition:
        for c in self.conditions:
            if c.vertex == vertex:
                return c
        raise KeyError(vertex)

    def kirchhoff_vertices(self) -> list[VertexCondition]:
        return [c for c in self.conditions if c.kind is ConditionKind.WEIGHTED_KIRCHHOFF]

    def grids(self, n: int, grading: float = 2.0) -> dict[str, Grid]:
        return {e.id: graded_grid(e.length, n, grading) for e in self.edges}


@dataclass(frozen=True)
class GraphFunction:
    """One :class:`GridFunction` per edge."""

    components: Mapping[str, GridFunction] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "components", dict(self.components))

    @classmethod
    def sample(cls, graph: MetricGraph, funcs: Mapping[str, Callable] | Callable,
               n: int, grading: float = 2.0) -> "GraphFunction":
        grids = graph.grids(n, grading)
        pick = (lambda eid: funcs[eid]) if isinstance(funcs, Mapping) else (lambda eid: funcs)
        return cls({eid: GridFunction.sample(g, pick(eid)) for eid, g in grids.items()})

    def __getitem__(self, eid: str) -> GridFunction:
        return self.components[eid]

    def __iter__(self):
        return iter(self.components)

    def items(self):
        return self.components.items()

    def _combine(self, other, op):
        if set(self.components) != set(other.components):
            raise ValueError("graph functions cover different edges")
        return GraphFunction({k: op(v, other.components[k]) for k, v in self.components.items()})

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __mul__(self, c):
        return GraphFunction({k: v * c for k, v in self.components.items()})

    __rmul__ = __mul__

    def map(self, fn: Callable[[GridFunction], GridFunction]) -> "GraphFunction":
        return GraphFunction({k: fn(v) for k, v in self.components.items()})


def check_compatible(graph: MetricGraph, phi: GraphFunction) -> None:
    edges = graph.edge_map
    if set(phi.components) != set(edges):
        raise ValueError("graph function components do not match the graph edges")
    for eid, comp in phi.items():
        if not math.isclose(comp.grid.length, edges[eid].length, rel_tol=1e-12):
            raise ValueError(f"component {eid} lives on a grid of the wrong length")


# ----------------------------------------------------------------- builders
def _positive(lengths: Sequence[float]):
    for length in lengths:
        if not (float(length) > 0 and math.isfinite(float(length))):
            raise ValueError(f"edge lengths must be positive, got {length}")


def _weight(weights: Mapping[str, float] | None, key: str) -> float:
    if weights is None:
        return 1.0
    if key not in weights:
        raise ValueError(f"missing weight {key!r}")
    w = float(weights[key])
    if w == 0.0:
        raise ValueError(f"weight {key!r} must be nonzero")
    return w


def build_star(N: int, lengths: Sequence[float], weights: Sequence[float],
               alpha: float | FracOrder = 0.5) -> MetricGraph:
    """Star with ``N`` edges leaving a common Kirchhoff vertex ``v0`` at ``x = 0``."""
    N = int(N)
    if N < 2:
        raise ValueError("a star needs at least 2 edges")
    if len(lengths) != N or len(weights) != N:
        raise ValueError(f"expected {N} lengths and {N} weights")
    _positive(lengths)
    if any(float(w) == 0.0 for w in weights):
        raise ValueError("weights must be nonzero")
    ids = [str(j + 1) for j in range(N)]
    edges = [Edge(i, float(length), "v0", f"leaf{i}") for i, length in zip(ids, lengths)]
    conds = [VertexCondition("v0", ConditionKind.WEIGHTED_KIRCHHOFF,
                             tuple(Incidence(i, End.AT_0, w) for i, w in zip(ids, weights)))]
    conds += [VertexCondition(f"leaf{i}", ConditionKind.DIRICHLET, (Incidence(i, End.AT_L),))
              for i in ids]
    return MetricGraph(edges, ["v0"] + [f"leaf{i}" for i in ids], conds, as_order(alpha), "star")


TREE_EDGES = ("1", "11", "12", "111", "112", "121", "122")
TREE_WEIGHTS = ("1", "11", "12", "11'", "12'", "111", "112", "121", "122")
LOOP_WEIGHTS = ("1", "2", "3", "2'", "3'", "4")


def build_tree(lengths: Mapping[str, float], weights: Mapping[str, float] | None = None,
               alpha: float | FracOrder = 0.5) -> MetricGraph:
    """Binary tree ``e1 -> e1i -> e1ij``; weight keys follow :data:`TREE_WEIGHTS`.

    ``"1i'"`` is the weight of edge ``1i`` at its far end.
    """
    missing = [k for k in TREE_EDGES if k not in lengths]
    if missing:
        raise ValueError(f"missing tree lengths {missing}")
    _positive([lengths[k] for k in TREE_EDGES])
    w = {k: _weight(weights, k) for k in TREE_WEIGHTS}
    edges = [Edge("1", lengths["1"], "root", "V1")]
    edges += [Edge(f"1{i}", lengths[f"1{i}"], "V1", f"V1{i}") for i in (1, 2)]
    edges += [Edge(f"1{i}{j}", lengths[f"1{i}{j}"], f"V1{i}", f"leaf1{i}{j}")
              for i in (1, 2) for j in (1, 2)]
    K = ConditionKind.WEIGHTED_KIRCHHOFF
    conds = [VertexCondition("root", ConditionKind.DIRICHLET, (Incidence("1", End.AT_0),)),
             VertexCondition("V1", K, (Incidence("1", End.AT_L, w["1"]),
                                       Incidence("11", End.AT_0, w["11"]),
                                       Incidence("12", End.AT_0, w["12"])))]
    for i in (1, 2):
        conds.append(VertexCondition(f"V1{i}", K, (
            Incidence(f"1{i}", End.AT_L, w[f"1{i}'"]),
            Incidence(f"1{i}1", End.AT_0, w[f"1{i}1"]),
            Incidence(f"1{i}2", End.AT_0, w[f"1{i}2"]))))
    leaves = [f"leaf1{i}{j}" for i in (1, 2) for j in (1, 2)]
    for leaf in leaves:
        conds.append(VertexCondition(leaf, ConditionKind.DIRICHLET,
                                     (Incidence(leaf[4:], End.AT_L),)))
    verts = ["root", "V1", "V11", "V12"] + leaves
    return MetricGraph(edges, verts, conds, as_order(alpha), "tree")


def build_loop(lengths: Sequence[float], weights: Mapping[str, float] | None = None,
               alpha: float | FracOrder = 0.5) -> MetricGraph:
    """Edge 1, a loop of parallel edges 2 and 3, then edge 4.

    Weight keys follow :data:`LOOP_WEIGHTS`; primed keys belong to the far ends
    of edges 2 and 3.
    """
    if len(lengths) != 4:
        raise ValueError("a loop graph needs 4 lengths")
    _positive(lengths)
    w = {k: _weight(weights, k) for k in LOOP_WEIGHTS}
    l1, l2, l3, l4 = (float(v) for v in lengths)
    edges = [Edge("1", l1, "root", "V1"), Edge("2", l2, "V1", "V2"),
             Edge("3", l3, "V1", "V2"), Edge("4", l4, "V2", "leaf4")]
    K = ConditionKind.WEIGHTED_KIRCHHOFF
    conds = [
        VertexCondition("root", ConditionKind.DIRICHLET, (Incidence("1", End.AT_0),)),
        VertexCondition("V1", K, (Incidence("1", End.AT_L, w["1"]),
                                  Incidence("2", End.AT_0, w["2"]),
                                  Incidence("3", End.AT_0, w["3"]))),
        VertexCondition("V2", K, (Incidence("2", End.AT_L, w["2'"]),
                                  Incidence("3", End.AT_L, w["3'"]),
                                  Incidence("4", End.AT_0, w["4"]))),
        VertexCondition("leaf4", ConditionKind.DIRICHLET, (Incidence("4", End.AT_L),)),
    ]
    return MetricGraph(edges, ["root", "V1", "V2", "leaf4"], conds, as_order(alpha), "loop")


# ------------------------------------------------------------ condition check
@dataclass(frozen=True)
class VertexReport:
    vertex: str
    kind: ConditionKind
    continuity: float
    flux: float
    dirichlet: float
    traces: dict
    fluxes: dict
    singular: dict
    flux_converged: bool

    def satisfied(self, tol: float) -> bool:
        return max(self.continuity, self.flux, self.dirichlet) <= tol and self.flux_converged


@dataclass(frozen=True)
class ConditionReport:
    vertices: tuple[VertexReport, ...]
    tol: float

    @property
    def satisfied(self) -> bool:
        return all(v.satisfied(self.tol) for v in self.vertices)

    @property
    def max_continuity(self) -> float:
        return max((v.continuity for v in self.vertices), default=0.0)

    @property
    def max_flux(self) -> float:
        return max((v.flux for v in self.vertices), default=0.0)

    @property
    def max_dirichlet(self) -> float:
        return max((v.dirichlet for v in self.vertices), default=0.0)


def check_conditions(graph: MetricGraph, phi: GraphFunction, tol: float = 1e-6) -> ConditionReport:
    """Residuals of every vertex condition for ``phi``.

    Continuity and Dirichlet use the bounded part of each end value
    (:meth:`GridFunction.regular_trace`); flux uses
    :func:`~fracgraph.fraccalc.endpoint_trace`.  Singular coefficients at the
    incident ends are reported alongside but do not enter the verdict.
    """
    check_compatible(graph, phi)
    alpha = graph.alpha
    out = []
    for cond in graph.conditions:
        traces, fluxes, sing = {}, {}, {}
        converged = True
        for inc in cond.incidences:
            comp = phi[inc.edge]
            key = f"{inc.edge}@{inc.end.value}"
            traces[key] = comp.regular_trace(inc.end)
            lim = endpoint_trace(comp, alpha, inc.end)
            fluxes[key] = lim.value
            converged &= lim.converged
            sing[key] = comp.singular_coefficient(inc.end)
        if cond.kind is ConditionKind.DIRICHLET:
            (key,) = traces
            out.append(VertexReport(cond.vertex, cond.kind, 0.0, 0.0, abs(traces[key]),
                                    traces, fluxes, sing, True))
            continue
        weighted = np.array([inc.weight * traces[f"{inc.edge}@{inc.end.value}"]
                             for inc in cond.incidences])
        cont = float(np.max(np.abs(weighted[:, None] - weighted[None, :])))
        flux = abs(sum(fluxes[f"{inc.edge}@{inc.end.value}"] / inc.weight
                       for inc in cond.incidences))
        out.append(VertexReport(cond.vertex, cond.kind, cont, float(flux), 0.0,
                                traces, fluxes, sing, converged))
    return ConditionReport(tuple(out), tol)
