"""Green's function of ``(H - z)^{-1}`` through the bond evolution operator.

On every bond ``b`` a solution of ``-f'' + W f = z f`` is written as
``a(b) E_b(s) + a(rev b) E_{rev b}(L - s)``.  The vertex conditions turn into
``a = S D a`` with ``S`` built from per-vertex scattering blocks and ``D``
the diagonal of far-end values ``E_b(L_b)``.

For the kernel we add a vertex ``v1`` at the midpoint of the edge carrying
the first argument.  Two right-hand sides are solved there: a unit
derivative jump, giving ``y -> G(x1, y)``, and a unit value jump, giving
``y -> d/dx G(x, y)`` at ``x = x1``.  Other points of that edge are reached
from ``x1`` with the fundamental solutions ``C`` and ``S``.

The kernel convention is ``((H - z)^{-1} u)(x) = int G(x, y) u(y) dy``.  A
source at ``x1`` solved on the graph with transposed vertex unitaries gives
``G(x1, .)``; for symmetric unitaries (every named family) the transposed
graph is the graph itself.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .edge import gauss_panels, principal_sqrt, transfer_matrices
from .errors import GraphValidationError, NumericalError
from .graph import QuantumGraph, RootedQuantumGraph, RootSplit, split_at_root, total_length

__all__ = [
    "EvolutionSystem",
    "GreenEvaluation",
    "conjugate_graph",
    "evolution_operator",
    "green_coefficients",
    "green_diagonal",
    "green_pointwise",
    "kirchhoff_coefficients",
    "resolvent_trace",
    "smoothed_spectral_density",
    "theta_matrix",
    "transposed_graph",
]

COND_LIMIT = 1e12
NEUMANN_TOL = 1e-14
_GREEN_RHS = np.array([-1.0, -1.0], dtype=complex)
_DIPOLE_RHS = np.array([1j, -1j])


# ---------------------------------------------------------------- graph variants


def _with_conditions(q: QuantumGraph, conds) -> QuantumGraph:
    return QuantumGraph(q.graph, q.edge_data, conds, q.beta)


def transposed_graph(q: QuantumGraph) -> QuantumGraph:
    """Same graph with every vertex unitary transposed."""
    if all(np.array_equal(U, U.T) for U in q.conditions):
        return q
    return _with_conditions(q, [U.T.copy() for U in q.conditions])


def conjugate_graph(q: QuantumGraph) -> QuantumGraph:
    """Graph whose operator is the complex conjugate of ``H_Q``.

    Conjugating ``A1 F + A2 F' = 0`` and multiplying by ``U^T`` shows that
    this is the transposed graph.
    """
    return transposed_graph(q)


def theta_matrix(bm, k) -> np.ndarray:
    """``(A1 - i k A2)^{-1} (A1 + i k A2)`` for a vertex."""
    return np.linalg.solve(bm.A1 - 1j * k * bm.A2, bm.A1 + 1j * k * bm.A2)


# ---------------------------------------------------------------- evolution operator


def _bond_tables(q: QuantumGraph, z: np.ndarray, rtol: float):
    """``E_b(L_b)`` and ``E_b'(L_b)`` for every bond, shape ``(nz, bonds)``."""
    k = principal_sqrt(z)
    nb = q.graph.bond_count
    E = np.empty((len(z), nb), dtype=complex)
    dE = np.empty_like(E)
    for b in range(nb):
        Phi = transfer_matrices(q.bond_potential(b), z, [q.bond_length(b)], rtol)[:, 0]
        E[:, b] = Phi[:, 0, 0] - 1j * k * Phi[:, 0, 1]
        dE[:, b] = Phi[:, 1, 0] - 1j * k * Phi[:, 1, 1]
    return E, dE


def _evolution_batch(q: QuantumGraph, z: np.ndarray, rtol: float = 1e-10):
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("the evolution operator is assembled for Im z > 0 only")
    k = principal_sqrt(z)
    E, dE = _bond_tables(q, z, rtol)
    nz, nb = E.shape
    S = np.zeros((nz, nb, nb), dtype=complex)
    sigmas, deltas, conds = [], [], np.zeros(nz)
    for v in range(q.vertex_count):
        bm = q.boundary[v]
        bonds = np.array(q.beta[v])
        incoming = bonds ^ 1
        delta = -dE[:, incoming] / E[:, incoming]
        K = bm.A1[None] - 1j * k[:, None, None] * bm.A2[None]
        cond = np.linalg.cond(K)
        if np.any(~np.isfinite(cond)) or np.any(cond > COND_LIMIT):
            raise NumericalError(
                f"vertex {v}: A1 - i sqrt(z) A2 has condition number {np.max(cond):.3e}; z is too close to the real axis"
            )
        conds = np.maximum(conds, cond)
        rhs = bm.A1[None] + bm.A2[None] * delta[:, None, :]
        sigma = -np.linalg.solve(K, rhs)
        S[:, bonds[:, None], incoming[None, :]] = sigma
        sigmas.append(sigma)
        deltas.append(delta)
    return dict(z=z, k=k, E=E, dE=dE, S=S, sigma=sigmas, delta=deltas, cond=conds)


@dataclass(frozen=True)
class EvolutionSystem:
    """Bond evolution data at one spectral parameter with ``Im z > 0``.

    ``S`` and ``D`` are ``bonds x bonds``; ``sigma_blocks[v]`` and
    ``delta_blocks[v]`` are indexed in the bond order at ``v``.
    """

    z: complex
    S: np.ndarray
    D: np.ndarray
    sigma_blocks: tuple
    delta_blocks: tuple
    source: np.ndarray
    condition: float

    @property
    def SD(self) -> np.ndarray:
        return self.S * self.D[None, :]

    def inverse_norm(self) -> float:
        """Spectral norm of ``(S D)^{-1}``."""
        return float(1.0 / np.linalg.svd(self.SD, compute_uv=False)[-1])

    def solve(self, rhs: np.ndarray | None = None) -> np.ndarray:
        rhs = self.source if rhs is None else rhs
        return np.linalg.solve(np.eye(len(self.D)) - self.SD, rhs)


def _source(q: QuantumGraph, v: int, k: complex, r: np.ndarray) -> np.ndarray:
    bm = q.boundary[v]
    xi = np.zeros(q.graph.bond_count, dtype=complex)
    xi[list(q.beta[v])] = np.linalg.solve(bm.A1 - 1j * k * bm.A2, r)
    return xi


def evolution_operator(q: QuantumGraph, z: complex, source_vertex: int | None = None, rhs=None, rtol: float = 1e-10) -> EvolutionSystem:
    """Assemble ``S(z)``, ``D(z)`` and, optionally, a source at one vertex.

    The source solves ``A1 F + A2 F' = rhs`` at ``source_vertex``; the
    default ``rhs = (-1, ..., -1)`` is a unit point source when the vertex
    carries the transmission condition of an added root vertex.
    """
    data = _evolution_batch(q, np.array([z]), rtol)
    xi = np.zeros(q.graph.bond_count, dtype=complex)
    if source_vertex is not None:
        d = q.graph.degree(source_vertex)
        r = -np.ones(d, dtype=complex) if rhs is None else np.asarray(rhs, dtype=complex)
        xi = _source(q, source_vertex, data["k"][0], r)
    return EvolutionSystem(
        complex(z),
        data["S"][0],
        data["E"][0],
        tuple(s[0] for s in data["sigma"]),
        tuple(d[0] for d in data["delta"]),
        xi,
        float(data["cond"][0]),
    )


def _neumann(system: EvolutionSystem) -> np.ndarray:
    Sinv_xi = lambda x: np.linalg.solve(system.S, x) / system.D
    if system.inverse_norm() >= 0.5:
        raise ValueError(
            f"neumann_series needs ||(S D)^-1|| < 1/2, found {system.inverse_norm():.4g}; use method='direct'"
        )
    term = Sinv_xi(system.source)
    total = term.copy()
    scale = max(np.linalg.norm(term), 1e-300)
    for _ in range(10_000):
        term = Sinv_xi(term)
        total += term
        if np.linalg.norm(term) < NEUMANN_TOL * scale:
            return -total
    raise NumericalError("Neumann series did not converge")


def green_coefficients(rq: RootedQuantumGraph, z: complex, method: str = "direct", rtol: float = 1e-10) -> np.ndarray:
    """Coefficients of ``y -> G(x1, y)`` on the graph with a vertex at the root edge midpoint.

    Bonds are those of ``add_root_vertex`` applied at the midpoint of the
    root bond.  ``method`` is ``"direct"`` or ``"neumann_series"``.
    """
    if not np.imag(z) > 0:
        raise ValueError("green_coefficients expects Im z > 0")
    mid = RootedQuantumGraph(transposed_graph(rq.base), rq.root_bond, rq.base.bond_length(rq.root_bond) / 2)
    split = split_at_root(mid)
    system = evolution_operator(split.graph, z, split.vertex, _GREEN_RHS, rtol)
    if method == "direct":
        return system.solve()
    if method == "neumann_series":
        return _neumann(system)
    raise ValueError(f"unknown method {method!r}")


def kirchhoff_coefficients(rq: RootedQuantumGraph, z: complex) -> np.ndarray:
    """Same coefficients as :func:`green_coefficients` from the constant scattering matrix.

    Valid for potential-free graphs with Kirchhoff conditions.  The vertex
    blocks are then the unitaries themselves and the edge factors are plain
    exponentials; outgoing-wave amplitudes are converted at the end.
    """
    q = rq.base
    if not (q.potential_free and q.kirchhoff_everywhere):
        raise ValueError("the constant scattering route needs zero potential and Kirchhoff conditions")
    if not np.imag(z) > 0:
        raise ValueError("kirchhoff_coefficients expects Im z > 0")
    split = split_at_root(RootedQuantumGraph(q, rq.root_bond, q.bond_length(rq.root_bond) / 2))
    qa = split.graph
    nb = qa.graph.bond_count
    k = complex(principal_sqrt(z))
    S4 = np.zeros((nb, nb), dtype=complex)
    for v in range(qa.vertex_count):
        bonds = np.array(qa.beta[v])
        S4[bonds[:, None], (bonds ^ 1)[None, :]] = qa.conditions[v]
    phase = np.exp(1j * k * np.array([qa.bond_length(b) for b in range(nb)]))
    xi = np.zeros(nb, dtype=complex)
    xi[list(qa.beta[split.vertex])] = -1.0 / (2j * k)
    a4 = np.linalg.solve(np.eye(nb) - S4 * phase[None, :], xi)
    return a4[np.arange(nb) ^ 1] * phase[np.arange(nb) ^ 1]


# ---------------------------------------------------------------- midpoint solves


@dataclass(frozen=True)
class _MidpointSolve:
    """Green and dipole coefficient sets for a batch of ``z`` on one edge."""

    split: RootSplit
    z: np.ndarray
    k: np.ndarray
    green: np.ndarray
    dipole: np.ndarray

    @property
    def half(self) -> float:
        return self.split.root_offset

    def expand(self, coeffs: np.ndarray, bond: int, s: np.ndarray, rtol: float = 1e-10):
        """Values and derivatives at offsets ``s`` on split-graph ``bond``; shapes ``(nz, len(s))``."""
        q = self.split.graph
        L = q.bond_length(bond)
        s = np.asarray(s, dtype=float)
        fw = transfer_matrices(q.bond_potential(bond), self.z, s, rtol)
        bw = transfer_matrices(q.bond_potential(bond ^ 1), self.z, L - s, rtol)
        k = self.k[:, None]
        Ef = fw[:, :, 0, 0] - 1j * k * fw[:, :, 0, 1]
        dEf = fw[:, :, 1, 0] - 1j * k * fw[:, :, 1, 1]
        Eb = bw[:, :, 0, 0] - 1j * k * bw[:, :, 0, 1]
        dEb = bw[:, :, 1, 0] - 1j * k * bw[:, :, 1, 1]
        a, c = coeffs[:, bond, None], coeffs[:, bond ^ 1, None]
        return a * Ef + c * Eb, a * dEf - c * dEb

    def branch(self, t: float) -> tuple[int, float, int]:
        """Bond from ``v1`` towards canonical position ``t``, offset along it, and direction sign."""
        if t >= self.half:
            return self.split.to_terminus, t - self.half, 1
        return self.split.to_origin, self.half - t, -1


def _midpoint_solve(P: QuantumGraph, edge: int, z: np.ndarray, rtol: float = 1e-10) -> _MidpointSolve:
    split = split_at_root(RootedQuantumGraph(P, 2 * edge, P.lengths[edge] / 2))
    qa = split.graph
    data = _evolution_batch(qa, z, rtol)
    nb = qa.graph.bond_count
    M = np.eye(nb)[None] - data["S"] * data["E"][:, None, :]
    bm = qa.boundary[split.vertex]
    bonds = list(qa.beta[split.vertex])
    K = bm.A1[None] - 1j * data["k"][:, None, None] * bm.A2[None]
    rhs = np.zeros((len(z), nb, 2), dtype=complex)
    rhs[:, bonds, 0] = np.linalg.solve(K, np.broadcast_to(_GREEN_RHS, (len(z), 2))[..., None])[..., 0]
    rhs[:, bonds, 1] = np.linalg.solve(K, np.broadcast_to(_DIPOLE_RHS, (len(z), 2))[..., None])[..., 0]
    sol = np.linalg.solve(M, rhs)
    return _MidpointSolve(split, data["z"], data["k"], sol[:, :, 0], sol[:, :, 1])


def _canonical(q: QuantumGraph, point) -> tuple[int, float, int]:
    """``(edge, position from canonical origin, orientation sign)`` of an interior point."""
    bond, offset = int(point[0]), float(point[1])
    if not 0 <= bond < q.graph.bond_count:
        raise GraphValidationError(f"bond {bond} does not exist")
    L = q.bond_length(bond)
    if not 0.0 < offset < L:
        raise GraphValidationError(f"point ({bond}, {offset}) is not interior to its edge; vertices are excluded")
    e = bond >> 1
    return (e, offset, 1) if bond & 1 == 0 else (e, L - offset, -1)


def _diag_batch(q: QuantumGraph, edge: int, t: np.ndarray, z: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """``G_z(x, x)`` at canonical positions ``t`` on ``edge`` for ``Im z > 0``."""
    ms = _midpoint_solve(transposed_graph(q), edge, z, rtol)
    out = np.empty((len(z), len(t)), dtype=complex)
    half = ms.half
    for side, mask in ((1, t >= half), (-1, t < half)):
        if not mask.any():
            continue
        beta = ms.split.to_terminus if side > 0 else ms.split.to_origin
        s = np.abs(t[mask] - half)
        Phi = transfer_matrices(ms.split.graph.bond_potential(beta), z, s, rtol)
        fg, _ = ms.expand(ms.green, beta, s, rtol)
        fd, _ = ms.expand(ms.dipole, beta, s, rtol)
        out[:, mask] = Phi[:, :, 0, 0] * fg + side * Phi[:, :, 0, 1] * fd
    return out


def green_diagonal(q: QuantumGraph, x0, z, rtol: float = 1e-10) -> np.ndarray:
    """``G_z(x0, x0)`` for an array of ``z``; ``x0`` is ``(bond, offset)``."""
    e, t, _ = _canonical(q, x0)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z.imag == 0):
        raise ValueError("Green's function needs Im z != 0")
    out = np.empty(len(z), dtype=complex)
    up = z.imag > 0
    if up.any():
        out[up] = _diag_batch(q, e, np.array([t]), z[up], rtol)[:, 0]
    if (~up).any():
        out[~up] = np.conj(_diag_batch(conjugate_graph(q), e, np.array([t]), np.conj(z[~up]), rtol)[:, 0])
    return out


# ---------------------------------------------------------------- pointwise evaluation


class GreenEvaluation:
    """Green's function at one ``z`` with first argument on the root edge.

    Points are ``(bond, offset)`` pairs of the original graph.  Evaluations
    with the first argument elsewhere are delegated to an evaluation rooted
    on that edge.
    """

    def __init__(self, rq: RootedQuantumGraph, z: complex, rtol: float = 1e-10):
        z = complex(z)
        if z.imag == 0:
            raise ValueError("Green's function needs Im z != 0")
        self.rq = rq
        self.z = z
        self.rtol = rtol
        self.edge = rq.root_bond >> 1
        self._flip = z.imag < 0
        # lower half-plane values are conjugates of the conjugated graph's
        self._q = conjugate_graph(rq.base) if self._flip else rq.base
        self._zz = np.array([np.conj(z) if self._flip else z])
        self._others: dict[int, GreenEvaluation] = {}

    @cached_property
    def _main(self) -> _MidpointSolve:
        return _midpoint_solve(transposed_graph(self._q), self.edge, self._zz, self.rtol)

    @cached_property
    def _swap(self) -> _MidpointSolve:
        if transposed_graph(self._q) is self._q:
            return self._main
        return _midpoint_solve(self._q, self.edge, self._zz, self.rtol)

    @property
    def coefficients(self) -> np.ndarray:
        """Coefficients of ``y -> G(x1, y)`` on the midpoint-augmented graph."""
        a = self._main.green[0]
        return np.conj(a) if self._flip else a

    def _other(self, edge: int) -> "GreenEvaluation":
        if edge not in self._others:
            rq = RootedQuantumGraph(self.rq.base, 2 * edge, self.rq.base.lengths[edge] / 2)
            self._others[edge] = GreenEvaluation(rq, self.z, self.rtol)
        return self._others[edge]

    def value(self, x, y, dx: bool = False, dy: bool = False) -> complex:
        """``G(x, y)`` or a first derivative along the bond directions given for ``x`` and ``y``."""
        q = self.rq.base
        ex, tx, ox = _canonical(q, x)
        ey, ty, oy = _canonical(q, y)
        if ex != self.edge:
            return self._other(ex).value(x, y, dx, dy)
        if dx and dy:
            raise ValueError("mixed second derivatives are not provided")
        half = q.lengths[ex] / 2
        same_side = ey == ex and (tx - half) * (ty - half) > 0 and abs(ty - half) < abs(tx - half)
        if same_side:
            # second argument sits between x1 and x: propagate in the second argument instead
            ms, prop_t, orient, other, d_prop, d_other = self._swap, ty, oy, x, dy, dx
        else:
            ms, prop_t, orient, other, d_prop, d_other = self._main, tx, ox, y, dx, dy
        beta, s, sign = ms.branch(prop_t)
        ob, oo = ms.split.locate(*other)
        g, dg = ms.expand(ms.green, ob, np.array([oo]), self.rtol)
        d, dd = ms.expand(ms.dipole, ob, np.array([oo]), self.rtol)
        if d_other:
            g, d = dg, dd
        Phi = transfer_matrices(ms.split.graph.bond_potential(beta), ms.z, [s], self.rtol)[0, 0]
        if d_prop:
            # d/d(offset) = orient * d/dt and d/dt = sign * d/ds
            val = sign * orient * (Phi[1, 0] * g[0, 0] + sign * Phi[1, 1] * d[0, 0])
        else:
            val = Phi[0, 0] * g[0, 0] + sign * Phi[0, 1] * d[0, 0]
        val = complex(val)
        return val.conjugate() if self._flip else val

    def __call__(self, x, y) -> complex:
        return self.value(x, y)


def green_pointwise(ev: GreenEvaluation, x, y, dx: bool = False, dy: bool = False) -> complex:
    return ev.value(x, y, dx, dy)


# ---------------------------------------------------------------- traces and densities


def _edge_trace(q: QuantumGraph, edge: int, z: np.ndarray, tol: float, rtol: float) -> np.ndarray:
    L = q.lengths[edge]
    pot = q.edge_data[edge].potential
    breaks = [L / 2] + ([] if pot.is_constant else list(pot.knots[1:-1]))
    width = min(L / 2, 1.0 / (np.max(np.abs(principal_sqrt(z))) + 1.0))
    prev = None
    for _ in range(12):
        x, w = gauss_panels(0.0, L, breaks, width, order=10)
        cur = _diag_batch(q, edge, x, z, rtol) @ w
        if prev is not None and np.all(np.abs(cur - prev) <= tol * np.maximum(1.0, np.abs(cur))):
            return cur
        prev = cur
        width /= 2
    raise NumericalError(f"trace quadrature on edge {edge} did not converge")


def resolvent_trace(q: QuantumGraph, z, tol: float = 1e-8, rtol: float = 1e-10):
    """``int_G G_z(x, x) dx`` summed over edges; scalar or array following ``z``."""
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z.imag == 0):
        raise ValueError("resolvent trace needs Im z != 0")
    out = np.zeros(len(z), dtype=complex)
    up = z.imag > 0
    for mask, graph, zz, conj in ((up, q, z, False), (~up, conjugate_graph(q), np.conj(z), True)):
        if not mask.any():
            continue
        tot = sum(_edge_trace(graph, e, zz[mask], tol, rtol) for e in range(q.edge_count))
        out[mask] = np.conj(tot) if conj else tot
    return complex(out[0]) if scalar else out


def smoothed_spectral_density(q: QuantumGraph, lam_grid, eps: float, tol: float = 1e-8) -> np.ndarray:
    """``Im Tr (H - lam - i eps)^{-1} / (pi * total length)`` on a grid of ``lam``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    lam = np.atleast_1d(np.asarray(lam_grid, dtype=float))
    tr = resolvent_trace(q, lam + 1j * eps, tol)
    return np.imag(tr) / (np.pi * total_length(q))
