"""Dense complex linear algebra used throughout the package.

Operators are plain ``numpy.ndarray`` objects of dtype ``complex128``; state
vectors are 1-d arrays. The helpers here add the dimension and Hermiticity
checks the rest of the code relies on, and the spectral matrix exponential.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

HERMITIAN_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when operand shapes are not conformable."""


class NotHermitianError(ValueError):
    """Raised when an operator that must be Hermitian is not.

    The offending defect ``max|A - A^dagger|`` is kept on ``defect``.
    """

    def __init__(self, defect, what="operator"):
        self.defect = float(defect)
        super().__init__(f"{what} is not Hermitian (defect {self.defect:.3e})")


def as_operator(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d operator, got shape {a.shape}")
    return a


def as_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-d state vector, got shape {v.shape}")
    return v


def hermiticity_defect(a) -> float:
    a = as_operator(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"operator of shape {a.shape} is not square")
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def is_hermitian(a, tol=HERMITIAN_TOL) -> bool:
    return hermiticity_defect(a) <= tol


def require_hermitian(a, tol=HERMITIAN_TOL, what="operator") -> np.ndarray:
    a = as_operator(a)
    defect = hermiticity_defect(a)
    if defect > tol:
        raise NotHermitianError(defect, what)
    return a


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=complex)


def tensor_product(a, b) -> np.ndarray:
    """Kronecker product with ``a`` as the slow (outer) index."""
    return np.kron(as_operator(a), as_operator(b))


def adjoint(a) -> np.ndarray:
    return as_operator(a).conj().T


def matmul(a, b) -> np.ndarray:
    a, b = as_operator(a), as_operator(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def matvec(a, v) -> np.ndarray:
    a, v = as_operator(a), as_vector(v)
    if a.shape[1] != v.shape[0]:
        raise DimensionError(f"cannot apply {a.shape} operator to vector of length {v.shape[0]}")
    return a @ v


def inner(u, v) -> complex:
    """Inner product, conjugate-linear in ``u``."""
    u, v = as_vector(u), as_vector(v)
    if u.shape != v.shape:
        raise DimensionError(f"vector lengths differ: {u.shape[0]} vs {v.shape[0]}")
    return complex(np.vdot(u, v))


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(as_operator(a), "fro"))


def vec_norm(v) -> float:
    return float(np.linalg.norm(as_vector(v)))


def hermitian_eig(a, tol=HERMITIAN_TOL):
    """Eigendecomposition of a Hermitian operator.

    Returns
    -------
    eigenvalues : ndarray of float, ascending
    eigenvectors : ndarray, eigenvectors as columns
    """
    a = require_hermitian(a, tol)
    # symmetrize so LAPACK sees an exactly Hermitian input
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    return w, v


def expm_hermitian(h, t=1.0) -> np.ndarray:
    """``exp(-i t h)`` for Hermitian ``h`` via its spectral decomposition."""
    w, v = hermitian_eig(h)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def matrix_exponential(a) -> np.ndarray:
    """Matrix exponential of a square operator.

    Anti-Hermitian arguments ``a = -i h`` go through the spectral route so
    the result is unitary to rounding; anything else falls back to
    ``scipy.linalg.expm``.
    """
    a = as_operator(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"matrix exponential needs a square operator, got {a.shape}")
    h = 1j * a
    if hermiticity_defect(h) <= HERMITIAN_TOL * max(1.0, np.max(np.abs(h), initial=0.0)):
        return expm_hermitian(h)
    return scipy.linalg.expm(a)
