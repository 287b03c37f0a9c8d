"""Finite-element eigenvalues of a quantum graph, used as an independent check.

Piecewise-linear elements discretise the quadratic form
``sum_e int |f'|^2 + W |f|^2 + sum_v <Lambda_v F(v), F(v)>`` on functions whose
vertex data avoid the Dirichlet eigenspace of ``U_v``.  Vertex values are
parametrised by an orthonormal basis of the admissible subspace.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .graph import QuantumGraph, total_length
from .spectral import spectrum_lower_bound

__all__ = ["fem_matrices", "fem_oracle", "fem_richardson"]

_XG = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_WG = np.array([5.0, 8.0, 5.0]) / 9.0


def _admissible_basis(bm) -> np.ndarray:
    """Orthonormal basis of the complement of the Dirichlet eigenspace."""
    keep = np.abs(bm.eigenvalues + 1.0) > 1e-9
    return bm.eigenvectors[:, keep]


def _element_potential(pot, x0: float, x1: float) -> np.ndarray:
    """``int W phi_i phi_j`` over one element, split at the potential's knots."""
    cuts = np.concatenate([[x0], pot.knots[(pot.knots > x0) & (pot.knots < x1)], [x1]])
    out = np.zeros((2, 2))
    h = x1 - x0
    for a, b in zip(cuts[:-1], cuts[1:]):
        x = 0.5 * (a + b) + 0.5 * (b - a) * _XG
        w = 0.5 * (b - a) * _WG * pot(x)
        phi = np.vstack([(x1 - x) / h, (x - x0) / h])
        out += (phi * w) @ phi.T
    return out


def fem_matrices(q: QuantumGraph, n_per_edge: int):
    """Stiffness and mass matrices in the reduced vertex/interior basis."""
    if n_per_edge < 4:
        raise ValueError("n_per_edge must be at least 4")
    n = int(n_per_edge)
    g = q.graph
    vdof = []
    offset = 0
    bases = []
    for v in range(g.vertex_count):
        B = _admissible_basis(q.boundary[v])
        bases.append(B)
        vdof.append(offset)
        offset += B.shape[1]
    interior0 = offset
    ndof = interior0 + g.edge_count * (n - 1)
    rows, cols, kv, mv = [], [], [], []
    # T maps global dofs to the two end values of every edge
    for e, ((u, w), ed) in enumerate(zip(g.edges, q.edge_data)):
        h = ed.length / n
        xs = np.linspace(0.0, ed.length, n + 1)
        node_maps = []
        for i in range(n + 1):
            if 0 < i < n:
                node_maps.append(([interior0 + e * (n - 1) + i - 1], np.array([1.0 + 0j])))
            else:
                v, b = (u, 2 * e) if i == 0 else (w, 2 * e + 1)
                j = q.beta[v].index(b)
                B = bases[v]
                node_maps.append((list(range(vdof[v], vdof[v] + B.shape[1])), B[j, :].copy()))
        ks = np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
        ms = np.array([[2.0, 1.0], [1.0, 2.0]]) * h / 6.0
        for i in range(n):
            ke = ks + (0.0 if ed.potential.is_zero else _element_potential(ed.potential, xs[i], xs[i + 1]))
            for p in range(2):
                ip, cp = node_maps[i + p]
                for r in range(2):
                    ir, cr = node_maps[i + r]
                    for a, ca in zip(ip, cp):
                        for bcol, cb in zip(ir, cr):
                            rows.append(a)
                            cols.append(bcol)
                            kv.append(np.conj(ca) * ke[p, r] * cb)
                            mv.append(np.conj(ca) * ms[p, r] * cb)
    for v in range(g.vertex_count):
        B = bases[v]
        if B.shape[1] == 0:
            continue
        R = B.conj().T @ q.boundary[v].Lambda @ B
        idx = range(vdof[v], vdof[v] + B.shape[1])
        for a, ia in enumerate(idx):
            for b, ib in enumerate(idx):
                if R[a, b] != 0:
                    rows.append(ia)
                    cols.append(ib)
                    kv.append(R[a, b])
                    mv.append(0.0)
    K = sp.csr_matrix((np.array(kv, dtype=complex), (rows, cols)), shape=(ndof, ndof))
    M = sp.csr_matrix((np.array(mv, dtype=complex), (rows, cols)), shape=(ndof, ndof))
    K = 0.5 * (K + K.conj().T)
    M = 0.5 * (M + M.conj().T)
    return K, M


def fem_oracle(q: QuantumGraph, n_per_edge: int, lam_max: float | None = None, count: int | None = None) -> np.ndarray:
    """Lowest finite-element eigenvalues, repeated by multiplicity.

    Returns the ``count`` lowest values, or all values up to ``lam_max``.
    """
    K, M = fem_matrices(q, n_per_edge)
    ndof = K.shape[0]
    real = not (np.any(K.data.imag) or np.any(M.data.imag))
    if real:
        K, M = K.real, M.real
    shift = spectrum_lower_bound(q) - 1.0
    if count is None:
        if lam_max is None:
            raise ValueError("give lam_max or count")
        count = int(total_length(q) * np.sqrt(max(lam_max, 0.0)) / np.pi) + q.vertex_count + q.edge_count + 4
    while True:
        k = min(count, ndof - 2)
        vals = np.sort(eigsh(K.tocsc(), k=k, M=M.tocsc(), sigma=shift, which="LM", return_eigenvectors=False).real)
        if lam_max is None or vals[-1] > lam_max or k == ndof - 2:
            break
        count *= 2
    if lam_max is not None:
        return vals[vals <= lam_max]
    return vals[:count]


def fem_richardson(q: QuantumGraph, n_per_edge: int, count: int) -> np.ndarray:
    """Extrapolate the ``count`` lowest eigenvalues from meshes ``n`` and ``2n``."""
    coarse = fem_oracle(q, n_per_edge, count=count)
    fine = fem_oracle(q, 2 * n_per_edge, count=count)
    return (4.0 * fine - coarse) / 3.0
