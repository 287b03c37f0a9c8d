"""Eigenvalues, eigenfunctions and spectral measures of finite quantum graphs.

Eigenvalues are found on the real axis as zeros of the smallest singular
value of a secular matrix.  The unknowns are ``(f(0), f'(0)/kappa)`` on the
canonical orientation of each edge, ``kappa = max(1, sqrt|lambda|)``, and
every vertex contributes one row per eigenvector of its unitary.  Each row
is normalised, so the matrix stays well scaled at all energies.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .edge import edge_solution_table, gauss_panels, transfer_matrices
from .errors import GraphValidationError, NumericalError
from .conditions import kirchhoff_unitary
from .graph import QuantumGraph, total_length
from .workers import map_chunks

__all__ = [
    "EigenSpace",
    "EmpiricalMeasure",
    "Hat",
    "Indicator",
    "SecularSystem",
    "SmoothBump",
    "SpectralData",
    "TestFunction",
    "ZeroFunction",
    "eigenvalues_up_to",
    "empirical_measure",
    "equilateral_eigenvalues",
    "functional_calculus_kernel",
    "parse_test_function",
    "secular_matrix",
    "smallest_singular_values",
    "spectrum_lower_bound",
]

MULTIPLICITY_TOL = 1e-6
SCAN_RTOL = 1e-5
REFINE_RTOL = 1e-10
_ZOOM_POINTS = 21
_BAND = 1024
_MAX_GOLDEN = 200
_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------- test functions


class TestFunction:
    """Real function of the spectral variable with compact support ``[a, b]``."""

    __test__ = False
    a: float
    b: float

    def __call__(self, lam):
        raise NotImplementedError

    @property
    def support(self) -> tuple[float, float]:
        return self.a, self.b

    def breakpoints(self) -> tuple[float, ...]:
        return (self.a, self.b)

    def descriptor(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class SmoothBump(TestFunction):
    """``exp(1 - 1/(1 - t^2))`` with ``t`` the affine map of ``[a, b]`` onto ``[-1, 1]``; peak value 1."""

    a: float
    b: float

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("bump needs a < b")

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        t = (2.0 * lam - self.a - self.b) / (self.b - self.a)
        inside = np.abs(t) < 1.0
        out = np.zeros_like(t)
        ti = t[inside]
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
        return out

    def descriptor(self) -> str:
        return f"bump:{self.a:g}:{self.b:g}"


@dataclass(frozen=True)
class Indicator(TestFunction):
    """Indicator of the closed interval ``[a, b]``."""

    a: float
    b: float

    def __post_init__(self):
        if not self.b >= self.a:
            raise ValueError("indicator needs a <= b")

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        return ((lam >= self.a) & (lam <= self.b)).astype(float)

    def descriptor(self) -> str:
        return f"indicator:{self.a:g}:{self.b:g}"


@dataclass(frozen=True)
class Hat(TestFunction):
    """Piecewise-linear tent on ``[a, b]`` peaking at 1 in the middle."""

    a: float
    b: float

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("hat needs a < b")

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        mid, half = 0.5 * (self.a + self.b), 0.5 * (self.b - self.a)
        return np.clip(1.0 - np.abs(lam - mid) / half, 0.0, None)

    def breakpoints(self) -> tuple[float, ...]:
        return (self.a, 0.5 * (self.a + self.b), self.b)

    def descriptor(self) -> str:
        return f"hat:{self.a:g}:{self.b:g}"


@dataclass(frozen=True)
class ZeroFunction(TestFunction):
    a: float = 0.0
    b: float = 0.0

    def __call__(self, lam):
        return np.zeros_like(np.asarray(lam, dtype=float))

    def descriptor(self) -> str:
        return "zero"


def parse_test_function(text: str) -> TestFunction:
    """Parse ``kind:a:b`` with kind one of bump, indicator, hat; ``zero`` is also accepted."""
    if text.strip() == "zero":
        return ZeroFunction()
    parts = text.split(":")
    kinds = {"bump": SmoothBump, "indicator": Indicator, "hat": Hat}
    if len(parts) != 3 or parts[0] not in kinds:
        raise ValueError(f"bad test function {text!r}; expected bump:a:b, indicator:a:b or hat:a:b")
    try:
        a, b = float(parts[1]), float(parts[2])
    except ValueError:
        raise ValueError(f"bad test function bounds in {text!r}") from None
    return kinds[parts[0]](a, b)


# ---------------------------------------------------------------- secular matrix


def _kappa(lam: np.ndarray) -> np.ndarray:
    return np.maximum(1.0, np.sqrt(np.abs(lam)))


def _canonical_table(q: QuantumGraph, lam: np.ndarray, rtol: float, aligned: bool = True):
    bonds = range(0, 2 * q.edge_count, 2)
    t = edge_solution_table(q, lam.astype(complex), bonds, rtol, aligned)
    return t.C[:, 0::2], t.dC[:, 0::2], t.S[:, 0::2], t.dS[:, 0::2]


def _assemble(q: QuantumGraph, lam: np.ndarray, table) -> np.ndarray:
    C, dC, S, dS = table
    nl = len(lam)
    n = 2 * q.edge_count
    kap = _kappa(lam)
    M = np.zeros((nl, n, n), dtype=complex)
    row = 0
    for v in range(q.vertex_count):
        bm = q.boundary[v]
        d = bm.degree
        w = bm.eigenvalues
        Vh = bm.eigenvectors.conj().T
        a = 1j * (w - 1.0)
        c = w + 1.0
        norm = np.sqrt(np.abs(a)[None, :] ** 2 + (kap[:, None] * np.abs(c)[None, :]) ** 2)
        RF = (a[:, None] * Vh)[None] / norm[:, :, None]
        RD = (kap[:, None, None] * (c[:, None] * Vh)[None]) / norm[:, :, None]
        rows = slice(row, row + d)
        for j, b in enumerate(q.beta[v]):
            e = b >> 1
            if b & 1 == 0:
                M[:, rows, 2 * e] += RF[:, :, j]
                M[:, rows, 2 * e + 1] += RD[:, :, j]
            else:
                # far end of the canonical orientation, derivative taken outward
                M[:, rows, 2 * e] += RF[:, :, j] * C[:, e, None] - RD[:, :, j] * (dC[:, e] / kap)[:, None]
                M[:, rows, 2 * e + 1] += RF[:, :, j] * (kap * S[:, e])[:, None] - RD[:, :, j] * dS[:, e, None]
        row += d
    return M


@dataclass(frozen=True)
class SecularSystem:
    """Secular matrix at one real spectral parameter.

    The nullspace corresponds to eigenfunctions; a null vector ``x`` gives
    ``f(0) = x[2e]`` and ``f'(0) = kappa * x[2e+1]`` on edge ``e``.
    """

    lam: float
    kappa: float
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)

    def nullspace(self, tol: float = MULTIPLICITY_TOL) -> np.ndarray:
        _, s, Vh = np.linalg.svd(self.matrix)
        return Vh[s < tol].conj().T

    def initial_data(self, x: np.ndarray) -> np.ndarray:
        """Edge-wise ``(f(0), f'(0))`` from secular coefficients, shape ``(edges, 2, ...)``."""
        x = np.asarray(x)
        out = x.reshape((-1, 2) + x.shape[1:]).astype(complex)
        out[:, 1] *= self.kappa
        return out


def secular_matrix(q: QuantumGraph, lam: float, tables=None, rtol: float = REFINE_RTOL) -> SecularSystem:
    """Secular matrix at real ``lam``.

    ``tables`` may be an :class:`EdgeSolutionTable` computed at ``lam``;
    otherwise the edge solutions are computed here.
    """
    lam_arr = np.array([float(lam)])
    if tables is None:
        tab = _canonical_table(q, lam_arr, rtol)
    else:
        if tables.z.shape != (1,) or tables.z[0] != lam:
            raise ValueError("edge solution table was computed for a different spectral parameter")
        tab = (tables.C[:, 0::2], tables.dC[:, 0::2], tables.S[:, 0::2], tables.dS[:, 0::2])
    M = _assemble(q, lam_arr, tab)[0]
    return SecularSystem(float(lam), float(_kappa(lam_arr)[0]), M)


def smallest_singular_values(q: QuantumGraph, lam, count: int = 1, rtol: float = REFINE_RTOL, aligned: bool = True) -> np.ndarray:
    """The ``count`` smallest singular values of the secular matrix at each ``lam``, ascending."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))

    def work(part):
        M = _assemble(q, part, _canonical_table(q, part, rtol, aligned))
        return np.linalg.svd(M, compute_uv=False)[:, ::-1][:, :count]

    # energy bands get their own step size, so sort first
    order = np.argsort(lam)
    bands = [order[i:i + _BAND] for i in range(0, len(lam), _BAND)]
    out = np.empty((len(lam), count))
    for band in bands:
        out[band] = np.concatenate(map_chunks(work, lam[band], min_chunk=256), axis=0)
    return out


# ---------------------------------------------------------------- spectrum search


def spectrum_lower_bound(q: QuantumGraph) -> float:
    """A guaranteed lower bound for the bottom of the spectrum.

    Uses ``|f(v)|^2 <= eps ||f'||^2 + (1/eps + 2/m) ||f||^2`` on half-edges
    to absorb the negative part of the vertex Robin terms.
    """
    wmin = min(float(np.min(ed.potential.values)) for ed in q.edge_data)
    neg = 0.0
    for bm in q.boundary:
        if bm.lambda_norm > 0:
            neg = max(neg, -float(np.min(np.linalg.eigvalsh(bm.Lambda))))
    m = float(np.min(q.lengths))
    return wmin - neg * (2.0 / m + neg)


def _local_minima(y: np.ndarray) -> np.ndarray:
    inner = (y[1:-1] <= y[:-2]) & (y[1:-1] <= y[2:])
    idx = np.nonzero(inner)[0] + 1
    # collapse plateaus to one representative
    if idx.size:
        keep = np.concatenate([[True], np.diff(idx) > 1])
        idx = idx[keep]
    return idx


def _golden(q: QuantumGraph, lo: np.ndarray, hi: np.ndarray, rtol: float) -> np.ndarray:
    """Batched golden-section minimisation of the smallest singular value."""
    a, b = lo.copy(), hi.copy()
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = smallest_singular_values(q, c, rtol=rtol)[:, 0]
    fd = smallest_singular_values(q, d, rtol=rtol)[:, 0]
    for _ in range(_MAX_GOLDEN):
        active = (b - a) > 1e-10 * (1.0 + np.abs(0.5 * (a + b)))
        if not active.any():
            break
        left = active & (fc < fd)
        right = active & ~(fc < fd)
        b[left], d[left], fd[left] = d[left], c[left], fc[left]
        c[left] = b[left] - _INV_PHI * (b[left] - a[left])
        a[right], c[right], fc[right] = c[right], d[right], fd[right]
        d[right] = a[right] + _INV_PHI * (b[right] - a[right])
        vals = smallest_singular_values(q, np.concatenate([c[left], d[right]]), rtol=rtol)[:, 0]
        nl = int(left.sum())
        fc[left] = vals[:nl]
        fd[right] = vals[nl:]
    return 0.5 * (a + b)


def _scan(q: QuantumGraph, lo: float, hi: float, step: float):
    grid = np.arange(lo, hi + step, step)
    sig = smallest_singular_values(q, grid, rtol=SCAN_RTOL, aligned=False)[:, 0]
    mins = _local_minima(sig)
    if mins.size == 0:
        return []
    # zoom each coarse dip to separate close pairs
    span_lo, span_hi = grid[mins - 1], grid[mins + 1]
    t = np.linspace(0.0, 1.0, _ZOOM_POINTS)
    fine = span_lo[:, None] + (span_hi - span_lo)[:, None] * t[None, :]
    fsig = smallest_singular_values(q, fine.ravel(), rtol=1e-8).reshape(fine.shape[0], -1, 1)[:, :, 0]
    brackets = []
    for row, vals in zip(fine, fsig):
        for k in _local_minima(np.concatenate([[np.inf], vals, [np.inf]])) - 1:
            brackets.append((row[max(k - 1, 0)], row[min(k + 1, len(row) - 1)]))
    return brackets


def _search(q: QuantumGraph, lam_max: float, step: float):
    start = spectrum_lower_bound(q) - 2.0 * step
    brackets = _scan(q, start, lam_max + 2.0 * step, step)
    if not brackets:
        return np.empty(0), np.empty(0, dtype=int)
    lo = np.array([b[0] for b in brackets])
    hi = np.array([b[1] for b in brackets])
    found = _golden(q, lo, hi, REFINE_RTOL)
    sv = smallest_singular_values(q, found, count=2 * q.edge_count, rtol=REFINE_RTOL)
    mult = np.sum(sv < MULTIPLICITY_TOL, axis=1)
    keep = mult > 0
    found, mult = found[keep], mult[keep]
    order = np.argsort(found)
    found, mult = found[order], mult[order]
    # merge duplicates produced by overlapping zoom brackets
    lams, mults = [], []
    for lam, m in zip(found, mult):
        if lams and abs(lam - lams[-1]) <= 1e-7 * (1.0 + abs(lam)):
            mults[-1] = max(mults[-1], int(m))
            continue
        lams.append(float(lam))
        mults.append(int(m))
    lams, mults = np.array(lams), np.array(mults, dtype=int)
    inside = lams <= lam_max + 1e-8 * (1.0 + abs(lam_max))
    return lams[inside], mults[inside]


def _weyl_ok(q: QuantumGraph, lams: np.ndarray, mults: np.ndarray, lam_max: float) -> bool:
    L = total_length(q)
    slack = q.vertex_count + q.edge_count
    probes = np.concatenate([lams[lams > 0], [lam_max]])
    probes = probes[probes > 0]
    for lam in probes:
        n = int(np.sum(mults[lams <= lam]))
        if abs(n - L * np.sqrt(lam) / np.pi) > slack:
            return False
    return True


def _fast_path_applies(q: QuantumGraph) -> bool:
    return q.equilateral and q.potential_free and q.kirchhoff_everywhere


def equilateral_eigenvalues(q: QuantumGraph, lam_max: float, cluster_tol: float = 1e-8):
    """Eigenvalues of an equilateral, potential-free Kirchhoff graph from the bond scattering matrix.

    For ``k > 0`` the eigenvalue ``k^2`` has multiplicity equal to the
    number of eigenphases ``phi`` of the scattering matrix with
    ``k L + phi`` in ``2 pi Z``; zero is simple on a connected graph.
    """
    if not _fast_path_applies(q):
        raise ValueError("scattering route needs equal lengths, zero potential and Kirchhoff conditions")
    g = q.graph
    nb = g.bond_count
    Sm = np.zeros((nb, nb))
    for v in range(g.vertex_count):
        out = g.bonds_from(v)
        d = len(out)
        sig = kirchhoff_unitary(d).real
        for i, b_out in enumerate(out):
            for j, b_o2 in enumerate(out):
                # incoming bond is the reverse of an outgoing one
                Sm[b_out, b_o2 ^ 1] = sig[i, j]
    phases = np.angle(np.linalg.eigvals(Sm))
    phases = np.mod(phases, 2 * np.pi)
    phases.sort()
    # cluster eigenphases on the circle
    clusters: list[list[float]] = []
    for p in phases:
        if clusters and abs(p - clusters[-1][-1]) <= cluster_tol:
            clusters[-1].append(p)
        else:
            clusters.append([p])
    if len(clusters) > 1 and abs(clusters[0][0] + 2 * np.pi - clusters[-1][-1]) <= cluster_tol:
        clusters[0] = [p - 2 * np.pi for p in clusters[-1]] + clusters[0]
        clusters.pop()
    L = float(q.lengths[0])
    kmax = np.sqrt(lam_max) if lam_max > 0 else 0.0
    lams, mults = [0.0], [1]
    for cl in clusters:
        phi = float(np.mean(cl))
        n0 = int(np.floor(phi / (2 * np.pi))) + 1
        n = n0
        while True:
            k = (2 * np.pi * n - phi) / L
            if k > kmax:
                break
            if k > 1e-9:
                lams.append(k * k)
                mults.append(len(cl))
            n += 1
    order = np.argsort(lams)
    lams = np.array(lams)[order]
    mults = np.array(mults, dtype=int)[order]
    # phases symmetric about zero give the same k twice only when they are distinct clusters
    merged_l, merged_m = [], []
    for lam, m in zip(lams, mults):
        if merged_l and abs(lam - merged_l[-1]) <= 1e-9 * (1 + lam):
            merged_m[-1] += int(m)
        else:
            merged_l.append(float(lam))
            merged_m.append(int(m))
    return np.array(merged_l), np.array(merged_m, dtype=int)


def eigenvalues_up_to(q: QuantumGraph, lam_max: float, resolution: float | None = None, method: str = "auto") -> "SpectralData":
    """All eigenvalues up to ``lam_max`` with multiplicities.

    ``resolution`` is the scan step; the default is an eighth of
    ``(pi / total_length)^2``.  ``method`` is ``"auto"``, ``"scan"`` or
    ``"scattering"``; ``auto`` uses the scattering route when it applies.
    """
    if not lam_max > 0:
        raise ValueError("lam_max must be positive")
    if method not in ("auto", "scan", "scattering"):
        raise ValueError(f"unknown method {method!r}")
    if method == "scattering" or (method == "auto" and _fast_path_applies(q)):
        lams, mults = equilateral_eigenvalues(q, lam_max)
        return SpectralData(q, lams, mults, float(lam_max), 0.0, "scattering")
    step = resolution if resolution is not None else (np.pi / total_length(q)) ** 2 / 8.0
    if not step > 0:
        raise ValueError("resolution must be positive")
    for attempt in range(2):
        lams, mults = _search(q, lam_max, step)
        if _weyl_ok(q, lams, mults, lam_max):
            return SpectralData(q, lams, mults, float(lam_max), step, "scan")
        step /= 4.0
    raise NumericalError("eigenvalue count violates Weyl bounds; increase resolution")


# ---------------------------------------------------------------- eigenfunctions


@dataclass
class EigenSpace:
    """Orthonormal eigenfunctions for one eigenvalue.

    ``data[e, :, j]`` holds ``(f_j(0), f_j'(0))`` on the canonical
    orientation of edge ``e``.
    """

    q: QuantumGraph
    lam: float
    data: np.ndarray

    @property
    def multiplicity(self) -> int:
        return self.data.shape[2]

    def values(self, edge: int, t) -> np.ndarray:
        """Eigenfunction values at positions ``t`` on ``edge``, shape ``(len(t), multiplicity)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        pot = self.q.edge_data[edge].potential
        Phi = transfer_matrices(pot, self.lam, t)[0]
        f0, d0 = self.data[edge, 0], self.data[edge, 1]
        return Phi[:, 0, 0, None] * f0[None] + Phi[:, 0, 1, None] * d0[None]

    def derivatives(self, edge: int, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        pot = self.q.edge_data[edge].potential
        Phi = transfer_matrices(pot, self.lam, t)[0]
        f0, d0 = self.data[edge, 0], self.data[edge, 1]
        return Phi[:, 1, 0, None] * f0[None] + Phi[:, 1, 1, None] * d0[None]

    def boundary_data(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        """Vertex values and outward derivatives in the bond order at ``v``."""
        F, dF = [], []
        for b in self.q.beta[v]:
            e = b >> 1
            if b & 1 == 0:
                F.append(self.data[e, 0])
                dF.append(self.data[e, 1])
            else:
                L = self.q.lengths[e]
                F.append(self.values(e, [L])[0])
                dF.append(-self.derivatives(e, [L])[0])
        return np.array(F), np.array(dF)


def _edge_gram(q: QuantumGraph, lam: float, data: np.ndarray) -> np.ndarray:
    m = data.shape[2]
    G = np.zeros((m, m), dtype=complex)
    for e, ed in enumerate(q.edge_data):
        pot = ed.potential
        breaks = pot.knots[1:-1] if not pot.is_constant else ()
        x, w = gauss_panels(0.0, ed.length, breaks, 0.5 / np.sqrt(abs(lam) + 1.0))
        Phi = transfer_matrices(pot, lam, x)[0]
        f = Phi[:, 0, 0, None] * data[e, 0][None] + Phi[:, 0, 1, None] * data[e, 1][None]
        G += (f.conj().T * w[None]) @ f
    return G


@dataclass
class SpectralData:
    """Eigenvalues (ascending, distinct) with multiplicities up to ``lam_max``."""

    q: QuantumGraph
    eigenvalues: np.ndarray
    multiplicities: np.ndarray
    lam_max: float
    resolution: float
    method: str
    _spaces: dict = field(default_factory=dict, repr=False)

    @property
    def total_length(self) -> float:
        return total_length(self.q)

    def counted(self) -> np.ndarray:
        """Eigenvalues repeated according to multiplicity."""
        return np.repeat(self.eigenvalues, self.multiplicities)

    def count(self, lam: float) -> int:
        """Number of eigenvalues ``<= lam`` with multiplicity."""
        return int(np.sum(self.multiplicities[self.eigenvalues <= lam]))

    def eigenspace(self, k: int) -> EigenSpace:
        if k not in self._spaces:
            lam = float(self.eigenvalues[k])
            m = int(self.multiplicities[k])
            sys = secular_matrix(self.q, lam)
            _, s, Vh = np.linalg.svd(sys.matrix)
            X = Vh[-m:].conj().T
            data = sys.initial_data(X)
            G = _edge_gram(self.q, lam, data)
            w, P = np.linalg.eigh(G)
            if np.min(w) <= 0:
                raise NumericalError(f"degenerate eigenfunction basis at lambda={lam:.12g}")
            data = np.einsum("eij,jk->eik", data, P / np.sqrt(w)[None, :])
            self._spaces[k] = EigenSpace(self.q, lam, data)
        return self._spaces[k]

    def residual(self, k: int) -> float:
        """Norm of the secular matrix applied to the normalised coefficient set."""
        sp = self.eigenspace(k)
        sys = secular_matrix(self.q, sp.lam)
        x = sp.data.copy()
        x[:, 1] /= sys.kappa
        return float(np.linalg.norm(sys.matrix @ x.reshape(-1, sp.multiplicity), 2))


# ---------------------------------------------------------------- measures and kernels


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Eigenvalue counting measure divided by total length."""

    spectrum: SpectralData
    length: float

    def evaluate(self, chi: Callable) -> float:
        sup = getattr(chi, "b", None)
        if sup is not None and sup > self.spectrum.lam_max and not isinstance(chi, ZeroFunction):
            raise ValueError(
                f"test function support reaches {sup:g}, beyond the computed range {self.spectrum.lam_max:g}"
            )
        vals = np.asarray(chi(self.spectrum.eigenvalues), dtype=float)
        return float(np.sum(vals * self.spectrum.multiplicities) / self.length)

    def cdf(self, lam: float) -> float:
        return self.spectrum.count(lam) / self.length

    def mass(self, a: float, b: float) -> float:
        """Mass of the half-open interval ``(a, b]``."""
        ev, m = self.spectrum.eigenvalues, self.spectrum.multiplicities
        return float(np.sum(m[(ev > a) & (ev <= b)]) / self.length)

    def histogram(self, edges) -> list[tuple[float, float, float]]:
        edges = np.asarray(edges, dtype=float)
        if edges[-1] > self.spectrum.lam_max:
            raise ValueError("histogram range exceeds computed spectrum")
        return [(float(a), float(b), self.mass(a, b)) for a, b in zip(edges[:-1], edges[1:])]


def empirical_measure(sd: SpectralData, length: float | None = None) -> EmpiricalMeasure:
    return EmpiricalMeasure(sd, float(sd.total_length if length is None else length))


def _canonical_point(q: QuantumGraph, x0) -> tuple[int, float]:
    bond, offset = x0
    bond, offset = int(bond), float(offset)
    if not 0 <= bond < q.graph.bond_count:
        raise GraphValidationError(f"bond {bond} does not exist")
    L = q.bond_length(bond)
    if not 0 < offset < L:
        raise GraphValidationError("kernel points must lie strictly inside an edge, not at a vertex")
    e = bond >> 1
    return e, (offset if bond & 1 == 0 else L - offset)


def functional_calculus_kernel(q: QuantumGraph, chi: TestFunction, x0, y0=None, sd: SpectralData | None = None) -> complex | float:
    """Kernel of ``chi(H)`` at ``(x0, y0)`` from the eigen-expansion.

    Points are ``(bond, offset)`` pairs; ``y0`` defaults to ``x0``, in which
    case a real number is returned.
    """
    e0, t0 = _canonical_point(q, x0)
    e1, t1 = (e0, t0) if y0 is None else _canonical_point(q, y0)
    if sd is None:
        sd = eigenvalues_up_to(q, max(chi.b, 1e-9))
    elif chi.b > sd.lam_max and not isinstance(chi, ZeroFunction):
        raise ValueError("spectral data does not cover the support of the test function")
    total = 0.0 + 0.0j
    weights = np.asarray(chi(sd.eigenvalues), dtype=float)
    for k in np.nonzero(weights)[0]:
        sp = sd.eigenspace(int(k))
        fx = sp.values(e0, [t0])[0]
        fy = fx if y0 is None else sp.values(e1, [t1])[0]
        total += weights[k] * np.sum(fx * np.conj(fy))
    return float(total.real) if y0 is None else complex(total)
