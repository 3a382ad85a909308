"""Dense complex linear algebra: Hermitian eigensystems, propagators, vectorization.

Matrices and state vectors are plain ``numpy`` arrays of dtype ``complex128``.
Vectorization is row-major, ``vec(A)[i*n + j] = A[i, j]``, so that
``vec(K rho K^dagger) = (K kron conj(K)) vec(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonHermitian

HERMITIAN_TOL = 1e-10


def as_matrix(a, square=True) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d matrix, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def as_state(psi) -> np.ndarray:
    v = np.asarray(psi, dtype=complex).reshape(-1)
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise ValueError("state vector must be non-empty and finite")
    return v


def is_subnormalized(psi, tol=1e-10) -> bool:
    """True when ``||psi|| < 1`` beyond ``tol`` (allowed, but not a physical state)."""
    return float(np.linalg.norm(psi)) < 1.0 - tol


def hermiticity_error(h: np.ndarray) -> float:
    return float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0


def unitarity_error(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


@dataclass(frozen=True)
class EigenSystem:
    """Spectral decomposition ``H = V diag(E) V^dagger`` with ascending ``E``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def eig_hermitian(h, tol: float = HERMITIAN_TOL) -> EigenSystem:
    """Eigendecomposition of a Hermitian matrix.

    Raises:
        NonHermitian: if ``max |H - H^dagger|`` exceeds ``tol``.
    """
    h = as_matrix(h)
    dev = hermiticity_error(h)
    if dev > tol:
        raise NonHermitian(dev, tol)
    # LAPACK zheevd reads only one triangle; symmetrize so both halves agree.
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    w.setflags(write=False)
    v.setflags(write=False)
    return EigenSystem(w, v)


def propagator(eig: EigenSystem, t: float) -> np.ndarray:
    """``U(t) = exp(-i H t)`` assembled from the eigensystem."""
    t = float(t)
    if not np.isfinite(t):
        raise ValueError(f"time must be finite, got {t}")
    if t == 0.0:
        return np.eye(eig.dim, dtype=complex)
    v = eig.eigenvectors
    return (v * np.exp(-1j * eig.eigenvalues * t)) @ v.conj().T


def vec(a) -> np.ndarray:
    a = as_matrix(a)
    return a.reshape(-1).copy()


def unvec(v) -> np.ndarray:
    v = as_state(v)
    n = int(round(np.sqrt(v.size)))
    if n * n != v.size:
        raise DimensionMismatch(f"length {v.size} is not a perfect square")
    return v.reshape(n, n).copy()


def vectorized_superoperator(k_left, k_right) -> np.ndarray:
    """Matrix of ``rho -> K_left rho K_right^dagger`` acting on ``vec(rho)``."""
    k_left = as_matrix(k_left)
    k_right = as_matrix(k_right)
    if k_left.shape != k_right.shape:
        raise DimensionMismatch(
            f"operator shapes differ: {k_left.shape} vs {k_right.shape}"
        )
    return np.kron(k_left, k_right.conj())
