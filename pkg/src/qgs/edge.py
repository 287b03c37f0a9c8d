"""Fundamental solutions of ``-f'' + W f = z f`` on a single edge.

``C`` and ``S`` are the solutions with ``C(0)=1, C'(0)=0`` and
``S(0)=0, S'(0)=1``; ``E = C - i sqrt(z) S`` with the principal square
root.  The transfer matrix ``[[C, S], [C', S']]`` is propagated by a
fourth-order Magnus integrator.  Each step is the exact exponential of a
traceless 2x2 matrix, so constant potentials are integrated exactly and
the local error involves only the variation of ``W``.  Accuracy is
controlled by halving the step until two successive results agree.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .graph import EdgeData, EdgePotential, QuantumGraph

__all__ = [
    "DualFunctionals",
    "EdgeSolution",
    "EdgeSolutionTable",
    "dual_functionals",
    "e_solution",
    "edge_solution_table",
    "gauss_panels",
    "principal_sqrt",
    "solve_fundamental",
    "transfer_matrices",
]

_G1 = 0.5 - np.sqrt(3.0) / 6.0
_G2 = 0.5 + np.sqrt(3.0) / 6.0
_COMM = np.sqrt(3.0) / 12.0
_MAX_HALVINGS = 14
_CHUNK = 400_000


def principal_sqrt(z):
    """Square root with ``Re >= 0``; for ``Im z > 0`` this gives ``Im > 0``."""
    return np.sqrt(np.asarray(z, dtype=complex))


def _series(m):
    ch = 1 + m / 2 + m * m / 24 + m ** 3 / 720
    sh = 1 + m / 6 + m * m / 120 + m ** 3 / 5040
    return ch, sh


def _expm_traceless(a, b, c):
    """``exp([[a, b], [c, -a]])`` elementwise, returned as four component arrays.

    Real input stays real: the eigenvalues are then real or imaginary and
    the hyperbolic or trigonometric branch is taken accordingly.
    """
    mu2 = a * a + b * c
    small = np.abs(mu2) < 1e-6
    if np.isrealobj(mu2):
        r = np.sqrt(np.abs(mu2))
        r[small] = 1.0
        ch = np.empty_like(r)
        sh = np.empty_like(r)
        pos = mu2 > 0
        neg = ~pos
        ch[pos] = np.cosh(r[pos])
        sh[pos] = np.sinh(r[pos]) / r[pos]
        ch[neg] = np.cos(r[neg])
        sh[neg] = np.sin(r[neg]) / r[neg]
    else:
        mu = np.sqrt(mu2)
        mu[small] = 1.0
        ep = np.exp(mu)
        em = 1.0 / ep
        ch = 0.5 * (ep + em)
        sh = 0.5 * (ep - em) / mu
    if small.any():
        ch[small], sh[small] = _series(mu2[small])
    sa = sh * a
    return ch + sa, sh * b, sh * c, ch - sa


def _steps(pot: EdgePotential, nodes: np.ndarray, h_target: float, level: int = 0):
    """Substep left ends and widths; every node is a step boundary.

    Non-flat intervals get ``ceil(width / h_target) * 2**level`` steps so that
    successive levels are true bisections.
    """
    widths = np.diff(nodes)
    flat = np.abs(pot(nodes[1:]) - pot(nodes[:-1])) == 0
    if pot.is_constant:
        flat[:] = True
    base = np.maximum(1, np.ceil(widths / h_target)) if np.isfinite(h_target) else np.ones_like(widths)
    counts = np.where(flat, 1, base * 2 ** level).astype(np.int64)
    owner = np.repeat(np.arange(len(widths)), counts)
    local = np.arange(owner.size) - np.repeat(np.cumsum(counts) - counts, counts)
    h = widths[owner] / counts[owner]
    x0 = nodes[:-1][owner] + local * h
    return x0, h, owner


def _step_matrices(pot: EdgePotential, z: np.ndarray, x0: np.ndarray, h: np.ndarray):
    w1 = pot(x0 + _G1 * h)
    w2 = pot(x0 + _G2 * h)
    shape = (len(z), len(h))
    a = np.broadcast_to(_COMM * h * h * (w1 - w2), shape)
    b = np.broadcast_to(h, shape)
    c = (0.5 * h)[None, :] * ((w1 + w2)[None, :] - 2.0 * z[:, None])
    return _expm_traceless(a, b, c)


def _mul(A, B):
    """Product ``A @ B`` of 2x2 matrices given as component tuples."""
    a00, a01, a10, a11 = A
    b00, b01, b10, b11 = B
    return (a00 * b00 + a01 * b10, a00 * b01 + a01 * b11, a10 * b00 + a11 * b10, a10 * b01 + a11 * b11)


def _segment_products(T, owner: np.ndarray, nseg: int):
    """Ordered product of the step matrices inside each segment, as components ``(nz, nseg)``."""
    nz = T[0].shape[0]
    counts = np.bincount(owner, minlength=nseg)
    width = int(counts.max())
    if width == 1 and owner.size == nseg:
        return T
    pad = 1 << max(0, (width - 1).bit_length())
    start = np.cumsum(counts) - counts
    pos = np.arange(owner.size) - start[owner]
    P = []
    for k, comp in enumerate(T):
        arr = np.full((nz, nseg, pad), 1.0 if k in (0, 3) else 0.0, dtype=comp.dtype)
        arr[:, owner, pos] = comp
        P.append(arr)
    while P[0].shape[2] > 1:
        P = _mul([p[:, :, 1::2] for p in P], [p[:, :, 0::2] for p in P])
    return tuple(p[:, :, 0] for p in P)


def _propagate_once(pot, z, nodes, out_nodes, h_target, level=0):
    """Transfer matrices at ``nodes[out_nodes]`` (sorted, unique node indices)."""
    x0, h, owner = _steps(pot, nodes, h_target, level)
    # group steps by the output interval they fall into
    seg_of_node = np.searchsorted(out_nodes, np.arange(len(nodes) - 1), side="right")
    seg = seg_of_node[owner]
    keep = seg < len(out_nodes)
    x0, h, seg = x0[keep], h[keep], seg[keep]
    nout = len(out_nodes)
    real = not np.iscomplexobj(z)
    dtype = float if real else complex
    result = np.empty((len(z), nout, 2, 2), dtype=dtype)
    chunk = max(1, _CHUNK // max(1, x0.size))
    for lo in range(0, len(z), chunk):
        zc = z[lo:lo + chunk]
        n = len(zc)
        if x0.size:
            P = _segment_products(_step_matrices(pot, zc, x0, h), seg, nout)
        else:
            one, zero = np.ones((n, nout), dtype), np.zeros((n, nout), dtype)
            P = (one, zero, zero, one)
        acc = (np.ones(n, dtype), np.zeros(n, dtype), np.zeros(n, dtype), np.ones(n, dtype))
        for j in range(nout):
            acc = _mul(tuple(p[:, j] for p in P), acc)
            for k, (r, col) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
                result[lo:lo + chunk, j, r, col] = acc[k]
    return result


def _scaled(Phi: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Rescale so that all four entries are O(1) for real spectral parameter."""
    k = np.maximum(1.0, np.sqrt(np.abs(z)))[:, None]
    out = Phi.copy()
    out[..., 0, 1] *= k
    out[..., 1, 0] /= k
    return out


def transfer_matrices(pot: EdgePotential, z, points, rtol: float = 1e-10, aligned: bool = True) -> np.ndarray:
    """Transfer matrices from 0 to each point.

    Parameters
    ----------
    pot : EdgePotential
    z : complex or array of shape (nz,)
    points : array of positions in ``[0, pot.length]``
    rtol : float
        Target relative accuracy of the scaled transfer matrix.
    aligned : bool
        Place step boundaries on the potential's knots.  Unaligned steps
        lose order at the kinks and are meant for coarse scans only.

    Returns
    -------
    ndarray of shape ``(nz, npts, 2, 2)``; entry ``[..., :, 0]`` holds
    ``(C, C')`` and ``[..., :, 1]`` holds ``(S, S')``.
    """
    z = np.atleast_1d(np.asarray(z))
    z = z.real.astype(float) if np.isrealobj(z) or not np.any(z.imag) else z.astype(complex)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    if points.size == 0:
        return np.zeros((len(z), 0, 2, 2), dtype=complex)
    xmax = float(points.max())
    if points.min() < 0 or xmax > pot.length * (1 + 1e-12):
        raise ValueError("evaluation points must lie on the edge")
    parts = [[0.0], points]
    if aligned and not pot.is_constant:
        parts.append(pot.knots[(pot.knots > 0) & (pot.knots < xmax)])
    nodes = np.unique(np.concatenate(parts))
    if len(nodes) == 1:
        nodes = np.array([0.0, 0.0])
    uniq_pts, inverse = np.unique(points, return_inverse=True)
    out_nodes = np.searchsorted(nodes, uniq_pts)
    # the identity at x = 0 needs no step
    if pot.is_constant:
        return _propagate_once(pot, z, nodes, out_nodes, np.inf)[:, inverse]
    scale = np.sqrt(np.max(np.abs(z)) + np.max(np.abs(pot.values)) + 1.0)
    h = min(0.25, 1.0 / scale)
    prev = _propagate_once(pot, z, nodes, out_nodes, h)
    for level in range(1, _MAX_HALVINGS + 1):
        cur = _propagate_once(pot, z, nodes, out_nodes, h, level)
        a, b = _scaled(cur, z), _scaled(prev, z)
        diff = np.max(np.abs(a - b), axis=(-1, -2))
        size = np.maximum(1.0, np.max(np.abs(a), axis=(-1, -2)))
        # Richardson estimate for a fourth-order method
        if np.all(diff / size / 15.0 <= rtol):
            return cur[:, inverse]
        prev = cur
    raise NumericalError(
        f"step-size underflow on edge of length {pot.length:.6g} at |z| up to {np.max(np.abs(z)):.6g}"
    )


def gauss_panels(a: float, b: float, breaks=(), max_width: float = np.inf, order: int = 12):
    """Composite Gauss-Legendre nodes and weights on ``[a, b]``."""
    cuts = np.unique(np.concatenate([[a, b], [x for x in breaks if a < x < b]]))
    xg, wg = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(np.ceil((hi - lo) / max_width)))
        edges = np.linspace(lo, hi, n + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes.append((mid[:, None] + half[:, None] * xg[None, :]).ravel())
        weights.append((half[:, None] * wg[None, :]).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class EdgeSolution:
    """Fundamental solutions on one bond for one spectral parameter."""

    z: complex
    length: float
    grid: np.ndarray
    C: np.ndarray
    S: np.ndarray
    dC: np.ndarray
    dS: np.ndarray

    @property
    def sqrt_z(self) -> complex:
        return complex(principal_sqrt(self.z))

    @property
    def endpoint(self) -> tuple[complex, complex, complex, complex]:
        return self.C[-1], self.dC[-1], self.S[-1], self.dS[-1]

    @property
    def E(self) -> np.ndarray:
        return self.C - 1j * self.sqrt_z * self.S

    @property
    def dE(self) -> np.ndarray:
        return self.dC - 1j * self.sqrt_z * self.dS

    def wronskian(self) -> np.ndarray:
        return self.C * self.dS - self.dC * self.S


def solve_fundamental(edge: EdgeData, orientation: int, z: complex, n_grid: int = 257, rtol: float = 1e-10) -> EdgeSolution:
    pot = edge.potential_on(orientation)
    grid = np.linspace(0.0, edge.length, n_grid)
    Phi = transfer_matrices(pot, z, grid, rtol)[0]
    return EdgeSolution(complex(z), edge.length, grid, Phi[:, 0, 0], Phi[:, 0, 1], Phi[:, 1, 0], Phi[:, 1, 1])


def e_solution(entry: EdgeSolution, z: complex | None = None) -> tuple[complex, complex]:
    """``(E(L), E'(L))`` for the entry's spectral parameter."""
    if z is not None and z != entry.z:
        raise ValueError("table entry was computed for a different z")
    C, dC, S, dS = entry.endpoint
    k = entry.sqrt_z
    return C - 1j * k * S, dC - 1j * k * dS


@dataclass(frozen=True)
class EdgeSolutionTable:
    """Endpoint data of every bond of a graph at one or more z values.

    Arrays have shape ``(nz, bonds)``.
    """

    z: np.ndarray
    C: np.ndarray
    dC: np.ndarray
    S: np.ndarray
    dS: np.ndarray

    @property
    def sqrt_z(self) -> np.ndarray:
        return principal_sqrt(self.z)

    @property
    def E(self) -> np.ndarray:
        return self.C - 1j * self.sqrt_z[:, None] * self.S

    @property
    def dE(self) -> np.ndarray:
        return self.dC - 1j * self.sqrt_z[:, None] * self.dS


def edge_solution_table(q: QuantumGraph, z, bonds=None, rtol: float = 1e-10, aligned: bool = True) -> EdgeSolutionTable:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    nb = q.graph.bond_count
    bonds = range(nb) if bonds is None else bonds
    out = {k: np.full((len(z), nb), np.nan, dtype=complex) for k in ("C", "dC", "S", "dS")}
    for b in bonds:
        Phi = transfer_matrices(q.bond_potential(b), z, [q.bond_length(b)], rtol, aligned)[:, 0]
        out["C"][:, b] = Phi[:, 0, 0]
        out["dC"][:, b] = Phi[:, 1, 0]
        out["S"][:, b] = Phi[:, 0, 1]
        out["dS"][:, b] = Phi[:, 1, 1]
    return EdgeSolutionTable(z, **out)


@dataclass(frozen=True)
class DualFunctionals:
    """Functions on ``[0, zeta]`` that pair with solutions to give ``f(0)`` and ``f'(0)``.

    The pairing ``<u, f> = int conj(u) f`` is evaluated with the stored
    quadrature ``nodes``/``weights``.
    """

    zeta: float
    sigma1: float
    sigma2: float
    sigma3: complex
    nodes: np.ndarray
    weights: np.ndarray
    Y: np.ndarray
    Z: np.ndarray

    def pair(self, u: np.ndarray, f: np.ndarray) -> complex:
        return complex(np.sum(self.weights * np.conj(u) * f))

    def value_at_origin(self, f: np.ndarray) -> complex:
        return self.pair(self.Y, f)

    def derivative_at_origin(self, f: np.ndarray) -> complex:
        return self.pair(self.Z, f)


def dual_functionals(edge: EdgeData, orientation: int, z: complex, zeta: float, tol: float = 1e-10) -> DualFunctionals:
    if not 0 < zeta <= edge.length * (1 + 1e-12):
        raise ValueError("cutoff must lie in (0, L]")
    pot = edge.potential_on(orientation)
    breaks = pot.knots[(pot.knots > 0) & (pot.knots < zeta)]
    width = min(zeta, 1.0 / np.sqrt(abs(z) + 1.0))
    prev = None
    for _ in range(8):
        x, w = gauss_panels(0.0, zeta, breaks, width)
        Phi = transfer_matrices(pot, z, x)[0]
        C, S = Phi[:, 0, 0], Phi[:, 0, 1]
        s1 = float(np.sum(w * np.abs(S) ** 2))
        s2 = float(np.sum(w * np.abs(C) ** 2))
        s3 = complex(np.sum(w * C * np.conj(S)))
        cur = np.array([s1, s2, s3])
        if prev is not None and np.max(np.abs(cur - prev)) <= tol * max(1.0, np.max(np.abs(cur))):
            break
        prev = cur
        width *= 0.5
    else:
        raise NumericalError("dual functional integrals did not converge")
    den = s1 * s2 - abs(s3) ** 2
    if den < 1e-14:
        raise NumericalError(f"dual functional denominator {den:.3e} is degenerate; increase zeta")
    Y = (s1 * C - s3 * S) / den
    Zf = (s2 * S - np.conj(s3) * C) / den
    return DualFunctionals(float(zeta), s1, s2, s3, x, w, Y, Zf)
