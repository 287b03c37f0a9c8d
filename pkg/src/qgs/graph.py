"""Metric graphs, edge data and rooting.

Vertices are integers ``0..n-1``.  Edge ``e`` joins ``edges[e] = (u, v)``
and this pair fixes its canonical orientation.  The two bonds of ``e`` are
numbered ``2e`` (``u -> v``) and ``2e + 1`` (``v -> u``), so reversal is
``b ^ 1`` and the edge of a bond is ``b >> 1``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np

from .conditions import (
    BoundaryMatrices,
    boundary_matrices,
    delta_unitary,
    dirichlet_unitary,
    is_permutation_invariant,
    is_unitary,
    kirchhoff_unitary,
    neumann_unitary,
)
from .errors import GraphValidationError

__all__ = [
    "Ball",
    "CombinatorialGraph",
    "EdgeData",
    "EdgePotential",
    "QuantumGraph",
    "RootSplit",
    "RootedQuantumGraph",
    "ValidationBounds",
    "add_root_vertex",
    "build_quantum_graph",
    "combinatorial_ball",
    "make_quantum_graph",
    "split_at_root",
    "total_length",
]

DEFAULT_POTENTIAL_SAMPLES = 64


def reverse(b: int) -> int:
    return b ^ 1


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class CombinatorialGraph:
    """Finite simple graph with bond bookkeeping.

    Parameters
    ----------
    vertex_count : int
    edges : sequence of (u, v)
        Canonical orientation of each edge.
    require_connected : bool
        Reject disconnected inputs (the default for quantum graphs).
    """

    def __init__(self, vertex_count: int, edges: Sequence[tuple[int, int]], require_connected: bool = True):
        n = int(vertex_count)
        if n < 1:
            raise GraphValidationError("graph needs at least one vertex")
        E = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        seen: dict[frozenset, int] = {}
        for e, (u, v) in enumerate(E):
            if not (0 <= u < n and 0 <= v < n):
                raise GraphValidationError(f"edge {e} refers to a vertex outside 0..{n - 1}")
            if u == v:
                raise GraphValidationError(f"edge {e} is a self-loop at vertex {u}")
            key = frozenset((int(u), int(v)))
            if key in seen:
                raise GraphValidationError(f"edges {seen[key]} and {e} both join vertices {u} and {v}")
            seen[key] = e
        self.vertex_count = n
        self.edges = _frozen(E)
        out: list[list[int]] = [[] for _ in range(n)]
        for e, (u, v) in enumerate(E):
            out[u].append(2 * e)
            out[v].append(2 * e + 1)
        self._out = tuple(tuple(x) for x in out)
        if require_connected and not self.is_connected():
            raise GraphValidationError("graph is disconnected")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def bond_count(self) -> int:
        return 2 * len(self.edges)

    def origin(self, b: int) -> int:
        return int(self.edges[b >> 1][b & 1])

    def terminus(self, b: int) -> int:
        return int(self.edges[b >> 1][1 - (b & 1)])

    def bonds_from(self, v: int) -> tuple[int, ...]:
        return self._out[v]

    def degree(self, v: int) -> int:
        return len(self._out[v])

    def neighbors(self, v: int) -> list[int]:
        return [self.terminus(b) for b in self._out[v]]

    def bond_between(self, u: int, v: int) -> int | None:
        for b in self._out[u]:
            if self.terminus(b) == v:
                return b
        return None

    def is_connected(self) -> bool:
        return len(self.bfs_distances(0)) == self.vertex_count

    def bfs_distances(self, v: int, limit: int | None = None) -> dict[int, int]:
        dist = {v: 0}
        queue = deque([v])
        while queue:
            w = queue.popleft()
            if limit is not None and dist[w] >= limit:
                continue
            for x in self.neighbors(w):
                if x not in dist:
                    dist[x] = dist[w] + 1
                    queue.append(x)
        return dist

    def __repr__(self) -> str:
        return f"CombinatorialGraph(vertices={self.vertex_count}, edges={self.edge_count})"


@dataclass(frozen=True)
class Ball:
    """Combinatorial ball with its injection into the parent graph.

    Local vertex 0 is the centre; local vertices are sorted by distance.
    Local edge ``i`` is parent edge ``edge_map[i]`` with the parent's
    canonical orientation.
    """

    graph: CombinatorialGraph
    vertex_map: np.ndarray
    edge_map: np.ndarray
    distance: np.ndarray
    radius: int

    def saturated(self, parent: CombinatorialGraph) -> bool:
        return len(self.vertex_map) == parent.vertex_count and len(self.edge_map) == parent.edge_count


def combinatorial_ball(g: CombinatorialGraph, v: int, r: int) -> Ball:
    if r < 0:
        raise GraphValidationError("ball radius must be non-negative")
    dist = g.bfs_distances(v, limit=r)
    order = sorted(dist, key=lambda w: (dist[w], w))
    local = {w: i for i, w in enumerate(order)}
    emap = [e for e, (a, b) in enumerate(g.edges) if a in local and b in local]
    sub_edges = [(local[int(g.edges[e][0])], local[int(g.edges[e][1])]) for e in emap]
    sub = CombinatorialGraph(len(order), sub_edges)
    return Ball(
        graph=sub,
        vertex_map=_frozen(np.array(order, dtype=np.int64)),
        edge_map=_frozen(np.array(emap, dtype=np.int64)),
        distance=_frozen(np.array([dist[w] for w in order], dtype=np.int64)),
        radius=r,
    )


class EdgePotential:
    """Piecewise-linear real potential on ``[0, length]``.

    Stored by knots and values.  ``reversed()`` returns the potential seen
    from the other end; its value array is a reversed view of this one.
    """

    __slots__ = ("knots", "values", "length", "_rev")

    def __init__(self, knots: np.ndarray, values: np.ndarray, _rev: "EdgePotential | None" = None):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.ndim != 1 or knots.shape != values.shape or len(knots) < 2:
            raise GraphValidationError("potential needs matching knot and value arrays of length >= 2")
        self.knots = knots
        self.values = values
        self.length = float(knots[-1])
        self._rev = _rev

    @classmethod
    def uniform(cls, length: float, samples: Sequence[float] | None = None) -> "EdgePotential":
        if samples is None:
            samples = np.zeros(2)
        samples = np.atleast_1d(np.asarray(samples, dtype=float))
        if len(samples) == 1:
            samples = np.repeat(samples, 2)
        knots = np.linspace(0.0, length, len(samples))
        return cls(_frozen(knots), _frozen(samples.copy()))

    @classmethod
    def from_function(cls, length: float, fn, samples: int = DEFAULT_POTENTIAL_SAMPLES) -> "EdgePotential":
        knots = np.linspace(0.0, length, samples)
        return cls(_frozen(knots), _frozen(np.asarray(fn(knots), dtype=float)))

    def reversed(self) -> "EdgePotential":
        if self._rev is None:
            knots = _frozen(self.length - self.knots[::-1])
            self._rev = EdgePotential(knots, self.values[::-1], _rev=self)
        return self._rev

    def __call__(self, x):
        return np.interp(x, self.knots, self.values)

    def restrict(self, a: float, b: float) -> "EdgePotential":
        """Potential on ``[a, b]`` shifted to start at 0; exact for piecewise-linear data."""
        inner = (self.knots > a) & (self.knots < b)
        knots = np.concatenate([[a], self.knots[inner], [b]])
        vals = np.interp(knots, self.knots, self.values)
        return EdgePotential(_frozen(knots - a), _frozen(vals))

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.values == 0.0))

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def lipschitz(self) -> float:
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.knots))))


@dataclass(frozen=True)
class EdgeData:
    length: float
    potential: EdgePotential

    def potential_on(self, direction: int) -> EdgePotential:
        return self.potential if direction == 0 else self.potential.reversed()


@dataclass(frozen=True)
class ValidationBounds:
    """Uniform bounds on degree, lengths, potentials and Robin parts."""

    D: int
    m: float
    M: float
    M_W: float = np.inf
    M_Lambda: float = np.inf

    def __post_init__(self):
        if self.D < 1:
            raise GraphValidationError("degree bound D must be >= 1")
        if not (0 < self.m <= self.M):
            raise GraphValidationError("length bounds need 0 < m <= M")


class QuantumGraph:
    """Graph with edge lengths, potentials, vertex unitaries and bond orderings.

    ``beta[v]`` lists the bonds leaving ``v``; ``conditions[v]`` acts on
    boundary values in that order.
    """

    def __init__(
        self,
        graph: CombinatorialGraph,
        edge_data: Sequence[EdgeData],
        conditions: Sequence[np.ndarray],
        beta: Sequence[Sequence[int]] | None = None,
    ):
        if len(edge_data) != graph.edge_count:
            raise GraphValidationError("edge data count does not match edge count")
        if len(conditions) != graph.vertex_count:
            raise GraphValidationError("condition count does not match vertex count")
        if beta is None:
            beta = [graph.bonds_from(v) for v in range(graph.vertex_count)]
        beta = tuple(tuple(int(b) for b in bl) for bl in beta)
        for v in range(graph.vertex_count):
            if sorted(beta[v]) != sorted(graph.bonds_from(v)):
                raise GraphValidationError(f"bond ordering at vertex {v} is not a bijection onto its outgoing bonds")
        conds = []
        for v, U in enumerate(conditions):
            U = np.array(U, dtype=complex)
            if U.shape != (graph.degree(v), graph.degree(v)):
                raise GraphValidationError(
                    f"condition at vertex {v} has shape {U.shape}, expected degree {graph.degree(v)}"
                )
            if not is_unitary(U):
                raise GraphValidationError(f"condition at vertex {v} is non-unitary")
            conds.append(_frozen(U))
        for e, ed in enumerate(edge_data):
            if not (ed.length > 0 and np.isfinite(ed.length)):
                raise GraphValidationError(f"edge {e} has non-positive length {ed.length}")
            if abs(ed.potential.length - ed.length) > 1e-12 * ed.length:
                raise GraphValidationError(f"edge {e} potential grid does not span the edge")
        self.graph = graph
        self.edge_data = tuple(edge_data)
        self.conditions = tuple(conds)
        self.beta = beta

    @property
    def vertex_count(self) -> int:
        return self.graph.vertex_count

    @property
    def edge_count(self) -> int:
        return self.graph.edge_count

    @cached_property
    def lengths(self) -> np.ndarray:
        return _frozen(np.array([ed.length for ed in self.edge_data]))

    def bond_length(self, b: int) -> float:
        return self.edge_data[b >> 1].length

    def bond_potential(self, b: int) -> EdgePotential:
        return self.edge_data[b >> 1].potential_on(b & 1)

    @cached_property
    def boundary(self) -> tuple[BoundaryMatrices, ...]:
        return tuple(boundary_matrices(U) for U in self.conditions)

    def slot(self, b: int) -> tuple[int, int]:
        """Vertex and position of bond ``b`` in the ordering at its origin."""
        v = self.graph.origin(b)
        return v, self.beta[v].index(b)

    @cached_property
    def potential_free(self) -> bool:
        return all(ed.potential.is_zero for ed in self.edge_data)

    @cached_property
    def kirchhoff_everywhere(self) -> bool:
        return all(
            np.allclose(U, kirchhoff_unitary(U.shape[0]), atol=1e-13, rtol=0) for U in self.conditions
        )

    @cached_property
    def equilateral(self) -> bool:
        L = self.lengths
        return bool(np.all(np.abs(L - L[0]) <= 1e-14 * L[0]))

    def permutation_invariant(self, v: int) -> bool:
        return is_permutation_invariant(self.conditions[v])

    def __repr__(self) -> str:
        return f"QuantumGraph(vertices={self.vertex_count}, edges={self.edge_count}, length={total_length(self):.6g})"


def total_length(q: QuantumGraph) -> float:
    return float(np.sum(q.lengths))


def validate_bounds(q: QuantumGraph, bounds: ValidationBounds) -> None:
    g = q.graph
    for v in range(g.vertex_count):
        if g.degree(v) > bounds.D:
            raise GraphValidationError(f"vertex {v} has degree {g.degree(v)} > D={bounds.D}")
        if q.boundary[v].lambda_norm > bounds.M_Lambda:
            raise GraphValidationError(
                f"vertex {v} has Robin norm {q.boundary[v].lambda_norm:.6g} > M_Lambda={bounds.M_Lambda}"
            )
    for e, ed in enumerate(q.edge_data):
        if not (bounds.m <= ed.length <= bounds.M):
            raise GraphValidationError(f"edge {e} length {ed.length:.6g} outside [{bounds.m}, {bounds.M}]")
        if ed.potential.sup > bounds.M_W:
            raise GraphValidationError(f"edge {e} potential sup {ed.potential.sup:.6g} > M_W={bounds.M_W}")
        if ed.potential.lipschitz > bounds.M_W:
            raise GraphValidationError(
                f"edge {e} potential Lipschitz constant {ed.potential.lipschitz:.6g} > M_W={bounds.M_W}"
            )


def _named_condition(kind: str, d: int, alpha: float = 0.0) -> np.ndarray:
    if kind == "kirchhoff":
        return kirchhoff_unitary(d)
    if kind == "dirichlet":
        return dirichlet_unitary(d)
    if kind == "neumann":
        return neumann_unitary(d)
    if kind == "delta":
        return delta_unitary(d, alpha)
    raise GraphValidationError(f"unknown condition kind {kind!r}")


def make_quantum_graph(
    vertex_count: int,
    edges: Sequence[tuple[int, int]],
    lengths: Sequence[float] | float = 1.0,
    potentials: Sequence[Any] | None = None,
    conditions: Mapping[int, Any] | Sequence[Any] | str | None = None,
    beta: Sequence[Sequence[int]] | None = None,
    bounds: ValidationBounds | None = None,
) -> QuantumGraph:
    """Convenience constructor.

    ``potentials`` entries may be ``None`` (zero), a sample sequence on a
    uniform grid, a callable of position, or an :class:`EdgePotential`.
    ``conditions`` entries may be a kind name, ``("delta", alpha)`` or a
    matrix; missing vertices default to Kirchhoff.
    """
    g = CombinatorialGraph(vertex_count, edges)
    L = np.broadcast_to(np.asarray(lengths, dtype=float), (g.edge_count,))
    data = []
    for e in range(g.edge_count):
        p = None if potentials is None else potentials[e]
        if isinstance(p, EdgePotential):
            pot = p
        elif callable(p):
            pot = EdgePotential.from_function(L[e], p)
        else:
            pot = EdgePotential.uniform(L[e], p)
        data.append(EdgeData(float(L[e]), pot))
    if conditions is None or isinstance(conditions, str):
        spec = {v: conditions or "kirchhoff" for v in range(g.vertex_count)}
    elif isinstance(conditions, Mapping):
        spec = dict(conditions)
    else:
        spec = dict(enumerate(conditions))
    conds = []
    for v in range(g.vertex_count):
        c = spec.get(v, "kirchhoff")
        d = g.degree(v)
        if isinstance(c, str):
            conds.append(_named_condition(c, d))
        elif isinstance(c, tuple) and len(c) == 2 and isinstance(c[0], str):
            conds.append(_named_condition(c[0], d, float(c[1])))
        else:
            conds.append(np.asarray(c, dtype=complex))
    q = QuantumGraph(g, data, conds, beta)
    if bounds is not None:
        validate_bounds(q, bounds)
    return q


def _field(obj: Mapping, key: str, where: str):
    if key not in obj:
        raise GraphValidationError(f"{where}: missing field {key!r}")
    return obj[key]


def _parse_matrix(raw, where: str) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2 and arr.shape[-1] == 2:
        d = int(round(np.sqrt(arr.shape[0])))
        if d * d == arr.shape[0]:
            return (arr[:, 0] + 1j * arr[:, 1]).reshape(d, d)
    raise GraphValidationError(f"{where}: matrix must be rows of [re, im] pairs")


def build_quantum_graph(spec: Mapping[str, Any], bounds: ValidationBounds | None = None) -> QuantumGraph:
    """Build a graph from the JSON-style description.

    ``{"vertices": n, "edges": [{"u", "v", "length", "potential"?}],
    "conditions": [{"vertex", "kind", "alpha"?} | {"vertex", "matrix"}]?,
    "beta": [[neighbour ids in order] per vertex]?}``
    """
    try:
        n = int(_field(spec, "vertices", "graph"))
    except (TypeError, ValueError) as exc:
        raise GraphValidationError(f"graph.vertices: {exc}") from exc
    raw_edges = _field(spec, "edges", "graph")
    if not isinstance(raw_edges, Sequence) or not raw_edges:
        raise GraphValidationError("graph.edges must be a non-empty list")
    edges, lengths, pots = [], [], []
    for i, ed in enumerate(raw_edges):
        where = f"edges[{i}]"
        if not isinstance(ed, Mapping):
            raise GraphValidationError(f"{where} must be an object")
        u, v = _field(ed, "u", where), _field(ed, "v", where)
        length = _field(ed, "length", where)
        if not isinstance(length, (int, float)) or not np.isfinite(length) or length <= 0:
            raise GraphValidationError(f"{where}.length must be a positive number, got {length!r}")
        edges.append((int(u), int(v)))
        lengths.append(float(length))
        p = ed.get("potential")
        if p is not None and (not isinstance(p, Sequence) or not all(isinstance(x, (int, float)) for x in p)):
            raise GraphValidationError(f"{where}.potential must be a list of numbers")
        pots.append(p)
    conds: dict[int, Any] = {}
    for i, c in enumerate(spec.get("conditions", []) or []):
        where = f"conditions[{i}]"
        vtx = int(_field(c, "vertex", where))
        if not 0 <= vtx < n:
            raise GraphValidationError(f"{where}.vertex {vtx} out of range")
        if "matrix" in c:
            conds[vtx] = _parse_matrix(c["matrix"], where)
        else:
            kind = _field(c, "kind", where)
            conds[vtx] = (kind, float(c.get("alpha", 0.0))) if kind == "delta" else kind
    g = CombinatorialGraph(n, edges)
    beta = None
    if spec.get("beta") is not None:
        raw_beta = spec["beta"]
        if len(raw_beta) != n:
            raise GraphValidationError("beta must list one ordering per vertex")
        beta = []
        for v, order in enumerate(raw_beta):
            bl = []
            for w in order:
                b = g.bond_between(v, int(w))
                if b is None:
                    raise GraphValidationError(f"beta[{v}] names {w}, which is not adjacent to {v}")
                bl.append(b)
            beta.append(bl)
    return make_quantum_graph(n, edges, lengths, pots, conds, beta, bounds)


@dataclass(frozen=True)
class RootedQuantumGraph:
    base: QuantumGraph
    root_bond: int
    root_offset: float

    def __post_init__(self):
        if not 0 <= self.root_bond < self.base.graph.bond_count:
            raise GraphValidationError(f"root bond {self.root_bond} does not exist")
        L = self.base.bond_length(self.root_bond)
        if not (0.0 < self.root_offset < L):
            raise GraphValidationError(
                f"root offset {self.root_offset} is not interior to bond {self.root_bond} of length {L}"
            )

    @property
    def canonical(self) -> tuple[int, float]:
        """Root as (edge id, position from the canonical origin)."""
        e = self.root_bond >> 1
        L = self.base.lengths[e]
        t = self.root_offset if self.root_bond & 1 == 0 else L - self.root_offset
        return e, float(t)


@dataclass(frozen=True)
class RootSplit:
    """Bookkeeping of the added root vertex.

    ``to_origin`` and ``to_terminus`` are the bonds leaving the new vertex,
    in the order used by its unitary.  ``near_edge`` keeps the id of the
    split edge and joins ``o(b0)`` to the new vertex; ``far_edge`` is
    appended and joins the new vertex to ``t(b0)``.
    """

    graph: QuantumGraph
    vertex: int
    to_origin: int
    to_terminus: int
    near_edge: int
    far_edge: int
    root_bond: int
    root_offset: float

    def locate(self, bond: int, offset: float) -> tuple[int, float]:
        """Map a point of the original graph to (bond, offset) in the split graph."""
        e = bond >> 1
        if e != self.root_bond >> 1:
            return bond, offset
        same = (bond & 1) == (self.root_bond & 1)
        x = offset if same else self.graph.bond_length(self.near_edge * 2) + self.graph.bond_length(self.far_edge * 2) - offset
        if x <= self.root_offset:
            b = 2 * self.near_edge
            return (b, x) if same else (b ^ 1, self.root_offset - x)
        b = 2 * self.far_edge
        return (b, x - self.root_offset) if same else (b ^ 1, self.graph.bond_length(b) - (x - self.root_offset))


def split_at_root(rq: RootedQuantumGraph) -> RootSplit:
    q, b0, x0 = rq.base, rq.root_bond, rq.root_offset
    g = q.graph
    e0 = b0 >> 1
    L = q.lengths[e0]
    o, t = g.origin(b0), g.terminus(b0)
    vnew = g.vertex_count
    enew = g.edge_count
    W = q.bond_potential(b0)
    edges = [tuple(map(int, ed)) for ed in g.edges]
    edges[e0] = (o, vnew)
    edges.append((vnew, t))
    data = list(q.edge_data)
    data[e0] = EdgeData(float(x0), W.restrict(0.0, x0))
    data.append(EdgeData(float(L - x0), W.restrict(x0, L)))
    new_g = CombinatorialGraph(vnew + 1, edges)
    beta = [list(bl) for bl in q.beta]
    beta[o][beta[o].index(b0)] = 2 * e0
    beta[t][beta[t].index(b0 ^ 1)] = 2 * enew + 1
    beta.append([2 * e0 + 1, 2 * enew])
    conds = list(q.conditions) + [np.array([[0, 1], [1, 0]], dtype=complex)]
    qa = QuantumGraph(new_g, data, conds, beta)
    return RootSplit(qa, vnew, 2 * e0 + 1, 2 * enew, e0, enew, b0, float(x0))


def add_root_vertex(rq: RootedQuantumGraph) -> QuantumGraph:
    return split_at_root(rq).graph
