"""Graph families, random lifts and desk-scale spectral convergence runs."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import integrate

from .edge import gauss_panels
from .errors import GraphValidationError
from .graph import (
    CombinatorialGraph,
    EdgeData,
    EdgePotential,
    QuantumGraph,
    ValidationBounds,
    _named_condition,
    combinatorial_ball,
    total_length,
    validate_bounds,
)
from .spectral import TestFunction, ZeroFunction, eigenvalues_up_to, empirical_measure

__all__ = [
    "ConvergenceRow",
    "EnsembleSpec",
    "FAMILIES",
    "LAWS",
    "convergence_experiment",
    "cover_ball",
    "generate",
    "injectivity_profile",
    "injectivity_radii",
    "lift_projection",
    "line_limit",
    "n_lift",
]

FAMILIES = ("cycle", "interval", "star", "complete", "n_lift", "equilateral_from_discrete")
LAWS = ("fixed", "iid_lengths", "iid_alpha")
LIFT_ATTEMPTS = 100


@dataclass(frozen=True)
class EnsembleSpec:
    """Family, shared data and the law of random data.

    ``condition`` applies at every vertex except degree-one vertices of
    ``interval`` and ``star``, which use ``ends``.  ``law_range`` is the
    support ``[lo, hi]`` of the uniform law for ``iid_lengths`` and
    ``iid_alpha``; ``iid_alpha`` puts delta conditions at every vertex.
    ``base`` is the graph lifted by ``n_lift``; ``edges`` and
    ``vertex_count`` describe the combinatorial graph for
    ``equilateral_from_discrete``.
    """

    family: str
    length: float = 1.0
    condition: str = "kirchhoff"
    alpha: float = 0.0
    ends: str = "kirchhoff"
    law: str = "fixed"
    law_range: tuple[float, float] | None = None
    seed: int = 0
    base: QuantumGraph | None = field(default=None, compare=False)
    edges: tuple[tuple[int, int], ...] | None = None
    vertex_count: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GraphValidationError(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if self.law not in LAWS:
            raise GraphValidationError(f"unknown data law {self.law!r}; expected one of {', '.join(LAWS)}")
        if self.law != "fixed":
            if self.law_range is None or len(self.law_range) != 2 or not self.law_range[0] <= self.law_range[1]:
                raise GraphValidationError(f"law {self.law} needs law_range = (lo, hi) with lo <= hi")
            if self.law == "iid_lengths" and self.law_range[0] <= 0:
                raise GraphValidationError("iid_lengths needs a positive lower bound")
        if not self.length > 0:
            raise GraphValidationError(f"length must be positive, got {self.length}")
        if self.family == "n_lift" and self.base is None:
            raise GraphValidationError("n_lift family needs a base graph")
        if self.family == "equilateral_from_discrete" and (self.edges is None or self.vertex_count is None):
            raise GraphValidationError("equilateral_from_discrete needs edges and vertex_count")

    def bounds(self) -> ValidationBounds:
        """Bounds every generated graph satisfies (degree cap is generous)."""
        lo, hi = (self.length, self.length)
        if self.law == "iid_lengths":
            lo, hi = self.law_range
        if self.base is not None and self.law != "iid_lengths":
            lo, hi = float(self.base.lengths.min()), float(self.base.lengths.max())
        lam = abs(self.alpha)
        if self.law == "iid_alpha":
            lam = max(abs(self.law_range[0]), abs(self.law_range[1]))
        return ValidationBounds(D=10**6, m=lo, M=max(hi, 1.0), M_W=np.inf, M_Lambda=lam + 1e-12)


def _rng(spec: EnsembleSpec, n: int) -> np.random.Generator:
    # one independent stream per (seed, size) pair
    return np.random.default_rng(np.random.SeedSequence([int(spec.seed), int(n)]))


def _family_graph(spec: EnsembleSpec, n: int) -> CombinatorialGraph:
    f = spec.family
    if f == "cycle":
        if n < 3:
            raise GraphValidationError(f"cycle needs N >= 3, got {n}")
        return CombinatorialGraph(n, [(i, (i + 1) % n) for i in range(n)])
    if f == "interval":
        if n < 1:
            raise GraphValidationError(f"interval needs N >= 1 edges, got {n}")
        return CombinatorialGraph(n + 1, [(i, i + 1) for i in range(n)])
    if f == "star":
        if n < 1:
            raise GraphValidationError(f"star needs N >= 1 leaves, got {n}")
        return CombinatorialGraph(n + 1, [(0, i) for i in range(1, n + 1)])
    if f == "complete":
        if n < 2:
            raise GraphValidationError(f"complete graph needs N >= 2, got {n}")
        return CombinatorialGraph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])
    if f == "equilateral_from_discrete":
        return CombinatorialGraph(spec.vertex_count, spec.edges)
    raise GraphValidationError(f"family {f} has no combinatorial template")


def _vertex_condition(spec: EnsembleSpec, g: CombinatorialGraph, v: int, alpha: float | None) -> np.ndarray:
    d = g.degree(v)
    if alpha is not None:
        return _named_condition("delta", d, alpha)
    kind = spec.ends if (d == 1 and spec.family in ("interval", "star")) else spec.condition
    return _named_condition(kind, d, spec.alpha)


def generate(spec: EnsembleSpec, n: int) -> QuantumGraph:
    """Member of size ``n`` of the family; deterministic in ``(spec.seed, n)``."""
    rng = _rng(spec, n)
    if spec.family == "n_lift":
        q = n_lift(spec.base, n, rng)
        if spec.law == "fixed":
            return q
        g = q.graph
        lengths = q.lengths.copy()
        pots = [ed.potential for ed in q.edge_data]
        conds = list(q.conditions)
        beta = q.beta
    else:
        g = _family_graph(spec, n)
        lengths = np.full(g.edge_count, spec.length)
        pots = None
        conds = None
        beta = None
    if spec.law == "iid_lengths":
        lengths = rng.uniform(*spec.law_range, size=g.edge_count)
        pots = None
    alphas = rng.uniform(*spec.law_range, size=g.vertex_count) if spec.law == "iid_alpha" else None
    if conds is None or alphas is not None:
        conds = [
            _vertex_condition(spec, g, v, None if alphas is None else float(alphas[v])) for v in range(g.vertex_count)
        ]
    if pots is None:
        pots = [EdgePotential.uniform(float(L)) for L in lengths]
    data = [EdgeData(float(L), p) for L, p in zip(lengths, pots)]
    q = QuantumGraph(g, data, conds, beta)
    validate_bounds(q, spec.bounds())
    return q


# ---------------------------------------------------------------- lifts


def lift_projection(base: QuantumGraph, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vertex and edge projections of an ``n``-lift produced by :func:`n_lift`.

    Lifted vertex ``v * n + i`` lies over ``v`` and lifted edge ``e * n + i``
    over ``e``.
    """
    return np.arange(base.vertex_count * n) // n, np.arange(base.edge_count * n) // n


def n_lift(base: QuantumGraph, n: int, seed=None) -> QuantumGraph:
    """Random ``n``-fold cover wired by one uniform permutation per base edge.

    Lifted edge ``e * n + i`` joins ``(u, i)`` to ``(w, pi_e(i))`` for base
    edge ``e = (u, w)`` and carries the base length and potential.  Vertex
    unitaries and bond orderings are copied from the base.  Disconnected
    wirings are redrawn.
    """
    if n < 1:
        raise GraphValidationError(f"lift order must be at least 1, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bg = base.graph
    nv, ne = bg.vertex_count, bg.edge_count
    for _ in range(LIFT_ATTEMPTS):
        perms = [np.arange(n) if n == 1 else rng.permutation(n) for _ in range(ne)]
        edges = [
            (int(bg.edges[e][0]) * n + i, int(bg.edges[e][1]) * n + int(perms[e][i])) for e in range(ne) for i in range(n)
        ]
        g = CombinatorialGraph(nv * n, edges, require_connected=False)
        if g.is_connected():
            break
    else:
        raise GraphValidationError(f"no connected {n}-lift found in {LIFT_ATTEMPTS} attempts")
    inverse = [np.argsort(p) for p in perms]

    def lifted_bond(b: int, i: int) -> int:
        e = b >> 1
        if b & 1 == 0:
            return 2 * (e * n + i)
        return 2 * (e * n + int(inverse[e][i])) + 1

    beta = [[lifted_bond(b, i) for b in base.beta[v]] for v in range(nv) for i in range(n)]
    conds = [base.conditions[v] for v in range(nv) for _ in range(n)]
    data = [base.edge_data[e] for e in range(ne) for _ in range(n)]
    return QuantumGraph(g, data, conds, beta)


# ---------------------------------------------------------------- injectivity


def injectivity_radii(g: CombinatorialGraph, r_cap: int | None = None) -> np.ndarray:
    """Largest radius whose ball is a tree, per vertex; capped at ``r_cap`` (default: vertex count)."""
    cap = g.vertex_count if r_cap is None else int(r_cap)
    out = np.empty(g.vertex_count, dtype=np.int64)
    for v in range(g.vertex_count):
        r = 0
        while r < cap:
            ball = combinatorial_ball(g, v, r + 1)
            if ball.graph.edge_count != ball.graph.vertex_count - 1:
                break
            r += 1
            if ball.saturated(g):
                r = cap
                break
        out[v] = r
    return out


def injectivity_profile(g: CombinatorialGraph, r_max: int) -> np.ndarray:
    """Fraction of vertices with injectivity radius ``< r`` for ``r = 0 .. r_max``."""
    rho = injectivity_radii(g, r_cap=r_max)
    return np.array([np.mean(rho < r) for r in range(r_max + 1)])


# ---------------------------------------------------------------- limits


def line_limit(chi: TestFunction) -> float:
    """Integral of ``chi`` against the density ``1 / (2 pi sqrt(lam))`` on ``lam > 0``."""
    if isinstance(chi, ZeroFunction):
        return 0.0
    a, b = max(chi.a, 0.0), chi.b
    if b <= a:
        return 0.0
    # substitute lam = k^2 to remove the endpoint singularity
    ks = sorted({np.sqrt(max(p, 0.0)) for p in chi.breakpoints()} | {np.sqrt(a), np.sqrt(b)})
    total = 0.0
    for lo, hi in zip(ks[:-1], ks[1:]):
        val, _ = integrate.quad(lambda k: float(chi(k * k)), lo, hi, epsabs=1e-14, epsrel=1e-12, limit=400)
        total += val
    return total / np.pi


def cover_ball(base: QuantumGraph, edge: int, radius: int) -> QuantumGraph:
    """Ball of the universal cover around a lift of ``edge``, as a finite quantum graph.

    The central edge is edge 0 of the result with the base orientation.  Nodes
    further than ``radius`` steps from its endpoints are dropped; the
    resulting leaves carry Kirchhoff conditions, all other nodes copy the
    base unitary and bond ordering.
    """
    bg = base.graph
    u, w = int(bg.edges[edge][0]), int(bg.edges[edge][1])
    over = [u, w]
    depth = [0, 0]
    edges = [(0, 1)]
    data = [base.edge_data[edge]]
    # bond of the tree leaving a node, keyed by the base bond it covers
    bond_of: list[dict[int, int]] = [{2 * edge: 0}, {2 * edge + 1: 1}]
    # each entry holds a node and the base bond leading back towards the centre
    queue = deque([(0, 2 * edge), (1, 2 * edge + 1)])
    while queue:
        node, back = queue.popleft()
        if depth[node] >= radius:
            continue
        v = over[node]
        for b in bg.bonds_from(v):
            if b == back:
                continue
            child = len(over)
            over.append(bg.terminus(b))
            depth.append(depth[node] + 1)
            e_new = len(edges)
            edges.append((node, child))
            data.append(EdgeData(base.bond_length(b), base.bond_potential(b)))
            bond_of[node][b] = 2 * e_new
            bond_of.append({b ^ 1: 2 * e_new + 1})
            queue.append((child, b ^ 1))
    g = CombinatorialGraph(len(over), edges)
    conds, beta = [], []
    for node, v in enumerate(over):
        if len(bond_of[node]) == bg.degree(v):
            conds.append(base.conditions[v])
            beta.append([bond_of[node][b] for b in base.beta[v]])
        else:
            conds.append(_named_condition("kirchhoff", g.degree(node)))
            beta.append(list(g.bonds_from(node)))
    return QuantumGraph(g, data, conds, beta)


def _cover_limit(base: QuantumGraph, chi: TestFunction, radius: int, order: int = 16) -> float:
    """Root-averaged diagonal of ``chi(H)`` over truncated universal covers of ``base``."""
    if isinstance(chi, ZeroFunction):
        return 0.0
    total = 0.0
    for e in range(base.edge_count):
        q = cover_ball(base, e, radius)
        sd = eigenvalues_up_to(q, chi.b)
        L = q.lengths[0]
        x, wts = gauss_panels(0.0, L, breaks=q.edge_data[0].potential.knots[1:-1], order=order)
        weights = np.asarray(chi(sd.eigenvalues), dtype=float)
        acc = np.zeros(len(x))
        for k in np.nonzero(weights)[0]:
            f = sd.eigenspace(int(k)).values(0, x)
            acc += weights[k] * np.sum(np.abs(f) ** 2, axis=-1)
        total += float(np.dot(wts, acc))
    return total / total_length(base)


# ---------------------------------------------------------------- experiments


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    esm: float
    limit: float
    gap: float
    seed: int


def _limit_base(spec: EnsembleSpec) -> QuantumGraph:
    """Finite graph whose universal cover is the expected limit for a fixed-data family."""
    if spec.law != "fixed":
        raise ValueError("truncation limit needs fixed data; random data limits are not tabulated")
    if spec.family == "n_lift":
        return spec.base
    if spec.family == "cycle":
        return generate(replace(spec, seed=0), 3)
    if spec.family == "complete":
        raise ValueError("complete graphs have no local limit along the family")
    raise ValueError(f"truncation limit is unavailable for family {spec.family}")


def _analytic_limit(spec: EnsembleSpec, chi: TestFunction) -> float:
    if spec.family in ("cycle", "interval") and spec.law == "fixed" and spec.condition == "kirchhoff":
        # the line with unit-free Kirchhoff vertices is the free line
        return line_limit(chi)
    raise ValueError(f"no analytic limit registered for family {spec.family} with law {spec.law}")


def convergence_experiment(
    runs: Sequence[tuple[EnsembleSpec, int]],
    chi: TestFunction,
    limit: str = "analytic",
    radius: int = 12,
) -> list[ConvergenceRow]:
    """Empirical spectral measure of each run against the limiting value.

    ``limit`` is ``"analytic"`` (closed-form density) or ``"truncation"``
    (diagonal of ``chi(H)`` on a truncated universal cover of radius
    ``radius``, averaged over the root edge).  Sizes must increase.
    """
    if limit not in ("analytic", "truncation"):
        raise ValueError(f"unknown limit mode {limit!r}")
    sizes = [n for _, n in runs]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("run sizes must be strictly increasing")
    cache: dict = {}
    rows = []
    for spec, n in runs:
        key = (spec.family, spec.length, spec.condition, spec.alpha, spec.law, id(spec.base), limit, radius)
        if key not in cache:
            if limit == "analytic":
                cache[key] = _analytic_limit(spec, chi)
            else:
                cache[key] = _cover_limit(_limit_base(spec), chi, radius)
        lim = cache[key]
        q = generate(spec, n)
        if isinstance(chi, ZeroFunction):
            esm = 0.0
        else:
            esm = empirical_measure(eigenvalues_up_to(q, chi.b)).evaluate(chi)
        rows.append(ConvergenceRow(int(n), float(esm), float(lim), float(abs(esm - lim)), int(spec.seed)))
    return rows
