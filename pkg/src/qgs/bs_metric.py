"""Local distance between rooted quantum graphs, root sampling and re-rooting.

A rooted graph is compared through the combinatorial balls around its added
root vertex.  For each radius ``k`` we enumerate the root-preserving ball
isomorphisms, measure how far the lengths, potentials and vertex unitaries
are from each other under the best one, and convert the per-radius data
distances into ``alpha``; the distance is ``1 / (1 + alpha)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .edge import gauss_panels
from .graph import (
    Ball,
    QuantumGraph,
    RootedQuantumGraph,
    combinatorial_ball,
    split_at_root,
    total_length,
)

__all__ = [
    "DistanceReport",
    "RadiusResult",
    "RootedBall",
    "ball_isomorphisms",
    "bs_distance",
    "data_distance",
    "green_diagonal_functional",
    "reroot_average_check",
    "rooted_ball",
    "sample_root",
    "sample_roots",
]

REFINE = 4


@dataclass(frozen=True)
class RootedBall:
    """Radius-``k`` ball around the added root vertex.

    ``graph`` is the quantum graph with the root vertex inserted; ``ball``
    holds the combinatorial ball together with its injections into it.
    """

    graph: QuantumGraph
    ball: Ball
    root: int

    @property
    def radius(self) -> int:
        return self.ball.radius

    @property
    def size(self) -> int:
        return len(self.ball.vertex_map)

    @property
    def saturated(self) -> bool:
        return self.ball.saturated(self.graph.graph)

    def parent_bond(self, a: int, b: int) -> int:
        """Bond of the parent graph from local vertex ``a`` to local vertex ``b``."""
        va, vb = int(self.ball.vertex_map[a]), int(self.ball.vertex_map[b])
        bond = self.graph.graph.bond_between(va, vb)
        if bond is None:
            raise KeyError(f"local vertices {a} and {b} are not adjacent")
        return bond

    def full_degree(self, a: int) -> int:
        return self.graph.graph.degree(int(self.ball.vertex_map[a]))

    def position(self, a: int, b: int) -> int:
        """Index of the bond ``a -> b`` in the bond ordering at ``a``."""
        va = int(self.ball.vertex_map[a])
        return self.graph.beta[va].index(self.parent_bond(a, b))

    def condition(self, a: int) -> np.ndarray:
        return self.graph.conditions[int(self.ball.vertex_map[a])]


def rooted_ball(rq: RootedQuantumGraph, k: int, _graph: QuantumGraph | None = None) -> RootedBall:
    if _graph is None:
        split = split_at_root(rq)
        _graph, root = split.graph, split.vertex
    else:
        root = _graph.vertex_count - 1
    return RootedBall(_graph, combinatorial_ball(_graph.graph, root, k), root)


# ---------------------------------------------------------------- isomorphisms


class _Matcher:
    """Backtracking over vertex assignments in breadth-first order.

    Local ball vertices are already sorted by distance from the centre, so
    every vertex after the centre has an assigned neighbour one step closer.
    """

    def __init__(self, b1: RootedBall, b2: RootedBall, strict: bool):
        self.b1, self.b2 = b1, b2
        g1, g2 = b1.ball.graph, b2.ball.graph
        self.n = g1.vertex_count
        self.adj1 = [set(g1.neighbors(a)) for a in range(self.n)]
        self.adj2 = [set(g2.neighbors(a)) for a in range(g2.vertex_count)]
        self.d1, self.d2 = b1.ball.distance, b2.ball.distance
        self.deg1 = [b1.full_degree(a) for a in range(self.n)]
        self.deg2 = [b2.full_degree(a) for a in range(g2.vertex_count)]
        self.strict = strict
        self._inv1 = [b1.graph.permutation_invariant(int(v)) for v in b1.ball.vertex_map]
        self._inv2 = [b2.graph.permutation_invariant(int(v)) for v in b2.ball.vertex_map]
        self.parent = [min((j for j in self.adj1[a] if j < a), default=-1) for a in range(self.n)]

    def compatible_shapes(self) -> bool:
        g1, g2 = self.b1.ball.graph, self.b2.ball.graph
        if g1.vertex_count != g2.vertex_count or g1.edge_count != g2.edge_count:
            return False
        sig1 = sorted((int(self.d1[a]), len(self.adj1[a]), self.deg1[a]) for a in range(self.n))
        sig2 = sorted((int(self.d2[a]), len(self.adj2[a]), self.deg2[a]) for a in range(self.n))
        return sig1 == sig2

    def _ordering_enforced(self, a: int, a2: int) -> bool:
        return self.strict or not (self._inv1[a] and self._inv2[a2])

    def _fits(self, a: int, c: int, phi: list[int]) -> bool:
        if self.d1[a] != self.d2[c] or len(self.adj1[a]) != len(self.adj2[c]) or self.deg1[a] != self.deg2[c]:
            return False
        placed = [j for j in self.adj1[a] if j < a]
        images = {phi[j] for j in placed}
        if not images <= self.adj2[c]:
            return False
        if sum(1 for m in self.adj2[c] if m in self._used) != len(placed):
            return False
        for j in placed:
            if self._ordering_enforced(a, c) and self.b1.position(a, j) != self.b2.position(c, phi[j]):
                return False
            if self._ordering_enforced(j, phi[j]) and self.b1.position(j, a) != self.b2.position(phi[j], c):
                return False
        return True

    def run(self, cost: Callable[[int, list[int]], float] | None = None, prune: bool = False):
        """Yield ``(phi, partial_cost)`` for every complete isomorphism.

        ``cost(a, phi)`` returns the data discrepancy introduced by placing
        vertex ``a``; with ``prune`` the search skips branches that cannot
        beat the best value found so far.
        """
        if not self.compatible_shapes():
            return
        phi = [-1] * self.n
        self._used: set[int] = set()
        best = [math.inf]

        def place(a: int, c: int, acc: float):
            phi[a] = c
            self._used.add(c)
            return max(acc, cost(a, phi)) if cost is not None else acc

        def undo(a: int):
            self._used.discard(phi[a])
            phi[a] = -1

        if not self._fits(0, 0, phi):
            return
        acc0 = place(0, 0, 0.0)

        def rec(a: int, acc: float):
            if a == self.n:
                if acc < best[0] or not prune:
                    best[0] = min(best[0], acc)
                    yield list(phi), acc
                return
            p = self.parent[a]
            for c in sorted(self.adj2[phi[p]]):
                if c in self._used or not self._fits(a, c, phi):
                    continue
                new = place(a, c, acc)
                if not (prune and new >= best[0]):
                    yield from rec(a + 1, new)
                undo(a)

        yield from rec(1, acc0)
        undo(0)


def ball_isomorphisms(b1: RootedBall, b2: RootedBall, strict: bool = False) -> list[tuple[int, ...]]:
    """All root-preserving isomorphisms between two balls of equal radius.

    ``phi[a]`` is the local vertex of ``b2`` matched with local vertex ``a``
    of ``b1``.  Bond orderings must agree except at vertices whose
    unitaries are both invariant under relabelling, unless ``strict``.
    """
    if b1.radius != b2.radius:
        raise ValueError("balls must have equal radii")
    return [tuple(phi) for phi, _ in _Matcher(b1, b2, strict).run()]


def _potential_gap(q1: QuantumGraph, bond1: int, q2: QuantumGraph, bond2: int) -> float:
    p1, p2 = q1.bond_potential(bond1), q2.bond_potential(bond2)
    t = np.union1d(p1.knots / p1.length, p2.knots / p2.length)
    # refine the common grid; exact already for piecewise-linear data
    frac = np.arange(REFINE) / REFINE
    t = np.append((t[:-1, None] + np.diff(t)[:, None] * frac[None, :]).ravel(), t[-1])
    return float(np.max(np.abs(p1(t * p1.length) - p2(t * p2.length))))


def _vertex_cost(b1: RootedBall, b2: RootedBall):
    """Discrepancy added when local vertex ``a`` is placed: its unitary and edges to earlier vertices."""
    q1, q2 = b1.graph, b2.graph
    adj = [sorted(b1.ball.graph.neighbors(a)) for a in range(b1.size)]

    def cost(a: int, phi: list[int]) -> float:
        c = float(np.linalg.norm(b1.condition(a) - b2.condition(phi[a]), 2))
        for j in adj[a]:
            if j >= a:
                continue
            bond1, bond2 = b1.parent_bond(j, a), b2.parent_bond(phi[j], phi[a])
            c = max(c, abs(q1.bond_length(bond1) - q2.bond_length(bond2)), _potential_gap(q1, bond1, q2, bond2))
        return c

    return cost


def data_distance(phi, b1: RootedBall, b2: RootedBall) -> float:
    """Largest discrepancy of lengths, rescaled potentials and unitaries under ``phi``."""
    cost = _vertex_cost(b1, b2)
    phi = list(phi)
    return max(cost(a, phi) for a in range(b1.size))


# ---------------------------------------------------------------- distance


@dataclass(frozen=True)
class RadiusResult:
    radius: int
    delta: float
    witness: tuple[int, ...] | None
    contribution: float

    @property
    def feasible(self) -> bool:
        return self.witness is not None


@dataclass(frozen=True)
class DistanceReport:
    """Per-radius results with the resulting bounds on ``alpha`` and ``d``.

    When every radius up to the cap is feasible and the balls have not
    stopped growing, only the lower bound on ``alpha`` is known and ``d``
    is reported as an interval.
    """

    radii: tuple[RadiusResult, ...]
    alpha_lower: float
    alpha_upper: float
    k_max: int
    strict: bool
    reason: str
    monotone: bool = field(default=True)

    @property
    def exact(self) -> bool:
        return self.alpha_lower == self.alpha_upper

    @property
    def d_lower(self) -> float:
        return 1.0 / (1.0 + self.alpha_upper)

    @property
    def d_upper(self) -> float:
        return 1.0 / (1.0 + self.alpha_lower)

    @property
    def d(self) -> float | None:
        return self.d_upper if self.exact else None

    @property
    def status(self) -> str:
        return "exact" if self.exact else "upper bound only"

    def to_dict(self) -> dict:
        def num(x):
            return None if math.isinf(x) else float(x)

        return {
            "status": self.status,
            "reason": self.reason,
            "k_max": self.k_max,
            "strict": self.strict,
            "alpha": [num(self.alpha_lower), num(self.alpha_upper)],
            "d": [self.d_lower, self.d_upper],
            "delta_monotone": self.monotone,
            "radii": [
                {
                    "k": r.radius,
                    "delta": num(r.delta),
                    "contribution": r.contribution,
                    "witness": list(r.witness) if r.witness is not None else None,
                }
                for r in self.radii
            ],
        }


def _best_match(b1: RootedBall, b2: RootedBall, strict: bool):
    best, witness = math.inf, None
    for phi, acc in _Matcher(b1, b2, strict).run(_vertex_cost(b1, b2), prune=True):
        if acc < best:
            best, witness = acc, tuple(phi)
    return best, witness


def _contribution(k: int, delta: float) -> float:
    """Supremum of admissible ``r`` in ``[k, k+1)`` (``(0, 1)`` for ``k = 0``)."""
    cap = 1.0 / delta if delta > 0 else math.inf
    if k == 0:
        return min(1.0, cap)
    return min(k + 1.0, cap) if cap > k else 0.0


def bs_distance(rq1: RootedQuantumGraph, rq2: RootedQuantumGraph, k_max: int = 6, strict: bool = False) -> DistanceReport:
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    s1, s2 = split_at_root(rq1), split_at_root(rq2)
    results: list[RadiusResult] = []
    alpha = 0.0
    upper = None
    reason = "radius cap reached"
    for k in range(k_max + 1):
        b1 = rooted_ball(rq1, k, s1.graph)
        b2 = rooted_ball(rq2, k, s2.graph)
        delta, witness = _best_match(b1, b2, strict)
        if witness is None:
            results.append(RadiusResult(k, math.inf, None, 0.0))
            upper, reason = alpha, f"balls of radius {k} are not isomorphic"
            break
        c = _contribution(k, delta)
        results.append(RadiusResult(k, delta, witness, c))
        if c == 0.0:
            upper, reason = alpha, f"data distance {delta:.6g} too large at radius {k}"
            break
        alpha = max(alpha, c)
        if b1.saturated and b2.saturated:
            # larger radii see the same balls and the same data distance
            alpha = 1.0 / delta if delta > 0 else math.inf
            upper, reason = alpha, f"both graphs exhausted at radius {k}"
            break
        if c < k + 1.0:
            # data distance only grows with the radius
            upper, reason = alpha, f"data distance {delta:.6g} binds at radius {k}"
            break
    deltas = [r.delta for r in results if r.feasible]
    monotone = all(a <= b + 1e-15 for a, b in zip(deltas, deltas[1:]))
    if upper is None:
        upper = math.inf
    return DistanceReport(tuple(results), alpha, upper, k_max, strict, reason, monotone)


# ---------------------------------------------------------------- roots


def sample_roots(q: QuantumGraph, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Edges drawn proportionally to length and uniform interior offsets."""
    rng = np.random.default_rng(seed)
    L = q.lengths
    edges = rng.choice(len(L), size=n, p=L / L.sum())
    u = rng.uniform(size=n)
    while np.any(u == 0.0):
        bad = u == 0.0
        u[bad] = rng.uniform(size=int(bad.sum()))
    return edges, u * L[edges]


def sample_root(q: QuantumGraph, seed) -> RootedQuantumGraph:
    edges, offsets = sample_roots(q, 1, seed)
    return RootedQuantumGraph(q, 2 * int(edges[0]), float(offsets[0]))


class green_diagonal_functional:
    """Root functional ``Im G_z(x0, x0)`` (or the real part, or the full value)."""

    def __init__(self, z: complex, part: str = "imag"):
        if part not in ("imag", "real", "complex"):
            raise ValueError("part must be 'imag', 'real' or 'complex'")
        self.z = complex(z)
        self.part = part

    def _pick(self, v):
        return v.imag if self.part == "imag" else v.real if self.part == "real" else v

    def on_bond(self, q: QuantumGraph, bond: int, offsets: np.ndarray) -> np.ndarray:
        from .greens import _diag_batch, conjugate_graph

        L = q.bond_length(bond)
        t = offsets if bond & 1 == 0 else L - offsets
        qq, zz = (q, self.z) if self.z.imag > 0 else (conjugate_graph(q), np.conj(self.z))
        vals = _diag_batch(qq, bond >> 1, np.asarray(t, dtype=float), np.array([zz]))[0]
        return self._pick(vals if self.z.imag > 0 else np.conj(vals))

    def __call__(self, rq: RootedQuantumGraph):
        return self.on_bond(rq.base, rq.root_bond, np.array([rq.root_offset]))[0]


def _bond_values(q: QuantumGraph, F, bond: int, x: np.ndarray) -> np.ndarray:
    if hasattr(F, "on_bond"):
        return np.asarray(F.on_bond(q, bond, x))
    return np.array([F(RootedQuantumGraph(q, bond, float(s))) for s in x])


def reroot_average_check(q: QuantumGraph, F, n: int = 16) -> tuple[float, float]:
    """Average of ``F`` over a uniform root against its average over unit stars.

    The left side integrates along each edge in its canonical direction.
    The right side integrates every bond separately from its own origin, so
    disagreement exposes a functional that depends on how the root is
    written rather than where it is.  ``F`` maps a rooted graph to a number;
    objects with an ``on_bond(q, bond, offsets)`` method are evaluated in
    batches.  Each edge is integrated with ``n``-point Gauss panels split
    at potential knots.
    """
    g = q.graph

    def integral(bond: int) -> complex:
        L = q.bond_length(bond)
        x, w = gauss_panels(0.0, L, breaks=q.bond_potential(bond).knots[1:-1], order=n)
        return complex(np.dot(w, _bond_values(q, F, bond, x)))

    total = total_length(q)
    lhs = sum(integral(2 * e) for e in range(g.edge_count)) / total
    per_bond = {b: integral(b) for b in range(g.bond_count)}
    rhs = 0.0
    for v in range(g.vertex_count):
        star = g.bonds_from(v)
        size = sum(q.bond_length(b) for b in star)
        inner = sum(per_bond[b] for b in star) / size
        rhs += sum(q.bond_length(b0) for b0 in star) * inner
    rhs /= 2 * total
    if abs(lhs.imag) == 0 and abs(rhs.imag) == 0:
        return float(lhs.real), float(rhs.real)
    return lhs, rhs
