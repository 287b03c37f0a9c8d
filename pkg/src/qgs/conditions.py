"""Unitary vertex conditions and the matrices derived from them.

A vertex of degree ``d`` carries a unitary ``U`` acting on the vector of
boundary values.  A function satisfies the condition when

    A1 F + A2 F' = 0,    A1 = i (U - I),    A2 = U + I,

with ``F`` the values and ``F'`` the outgoing derivatives at the vertex.
The eigenspaces of ``U`` for -1 and +1 carry Dirichlet and Neumann
constraints; the remaining eigenspaces carry a Robin relation
``F' = Lambda F`` with ``Lambda`` the Cayley transform of ``U``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import GraphValidationError, NumericalError

__all__ = [
    "BoundaryMatrices",
    "boundary_matrices",
    "delta_unitary",
    "dirichlet_unitary",
    "is_permutation_invariant",
    "is_unitary",
    "kirchhoff_unitary",
    "neumann_unitary",
    "unitary_spectrum",
]

UNITARY_TOL = 1e-12
CLUSTER_TOL = 1e-9


def kirchhoff_unitary(d: int) -> np.ndarray:
    """Continuity plus zero current: ``(2/d) J - I`` with ``J`` all ones."""
    if d < 1:
        raise GraphValidationError(f"degree must be >= 1, got {d}")
    return np.full((d, d), 2.0 / d, dtype=complex) - np.eye(d)


def delta_unitary(d: int, alpha: float) -> np.ndarray:
    """Continuity plus ``sum f'_b(0) = alpha f(v)``.

    The matrix is ``c J - I`` with ``c = 2 / (d - i alpha)``; on the constant
    vector it acts as ``(d + i alpha)/(d - i alpha)`` and as ``-1`` on its
    orthogonal complement.
    """
    if d < 1:
        raise GraphValidationError(f"degree must be >= 1, got {d}")
    c = 2.0 / (d - 1j * alpha)
    return np.full((d, d), c, dtype=complex) - np.eye(d)


def dirichlet_unitary(d: int) -> np.ndarray:
    return -np.eye(d, dtype=complex)


def neumann_unitary(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex)


def is_unitary(U: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        return False
    return bool(np.linalg.norm(U @ U.conj().T - np.eye(U.shape[0]), 2) <= tol)


def is_permutation_invariant(U: np.ndarray, tol: float = 1e-12) -> bool:
    """True when ``U`` commutes with every coordinate permutation.

    Such matrices have the form ``a I + c J``: constant diagonal and constant
    off-diagonal entries.
    """
    U = np.asarray(U)
    d = U.shape[0]
    diag = np.diag(U)
    if np.max(np.abs(diag - diag[0])) > tol:
        return False
    if d == 1:
        return True
    off = U[~np.eye(d, dtype=bool)]
    return bool(np.max(np.abs(off - off[0])) <= tol)


def unitary_spectrum(U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and an orthonormal eigenbasis of a unitary matrix.

    The complex Schur form of a normal matrix is diagonal, so its unitary
    factor is an orthonormal eigenbasis even inside degenerate clusters.
    """
    U = np.asarray(U, dtype=complex)
    try:
        T, Z = scipy.linalg.schur(U, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver failed on vertex unitary: {exc}") from exc
    return np.diag(T).copy(), Z


@dataclass(frozen=True)
class BoundaryMatrices:
    """Derived data of one vertex condition.

    ``Lambda`` is stored as a ``d x d`` Hermitian matrix that vanishes on the
    Dirichlet and Neumann eigenspaces.
    """

    U: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    P_D: np.ndarray
    P_N: np.ndarray
    P_R: np.ndarray
    Lambda: np.ndarray
    lambda_norm: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def degree(self) -> int:
        return self.U.shape[0]

    def residual(self, F: np.ndarray, dF: np.ndarray) -> float:
        """Norm of ``A1 F + A2 F'``."""
        return float(np.linalg.norm(self.A1 @ F + self.A2 @ dF))


def _projector(V: np.ndarray) -> np.ndarray:
    return V @ V.conj().T


def boundary_matrices(U: np.ndarray, cluster_tol: float = CLUSTER_TOL) -> BoundaryMatrices:
    U = np.asarray(U, dtype=complex)
    d = U.shape[0]
    eye = np.eye(d)
    w, V = unitary_spectrum(U)
    dirichlet = np.abs(w + 1.0) <= cluster_tol
    neumann = np.abs(w - 1.0) <= cluster_tol
    robin = ~(dirichlet | neumann)
    VR = V[:, robin]
    if VR.shape[1]:
        # Cayley transform restricted to the Robin subspace
        up = VR.conj().T @ (U + eye) @ VR
        um = VR.conj().T @ (U - eye) @ VR
        lam_r = -1j * np.linalg.solve(up, um)
        lam_r = 0.5 * (lam_r + lam_r.conj().T)
        Lam = VR @ lam_r @ VR.conj().T
        lam_norm = float(np.linalg.norm(lam_r, 2))
    else:
        Lam = np.zeros((d, d), dtype=complex)
        lam_norm = 0.0
    return BoundaryMatrices(
        U=U,
        A1=1j * (U - eye),
        A2=U + eye,
        P_D=_projector(V[:, dirichlet]),
        P_N=_projector(V[:, neumann]),
        P_R=_projector(VR),
        Lambda=Lam,
        lambda_norm=lam_norm,
        eigenvalues=w,
        eigenvectors=V,
    )
