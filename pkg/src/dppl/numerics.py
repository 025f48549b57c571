"""Dense real linear algebra used throughout the package.

Thin wrappers over LAPACK (via scipy) that pin down the numeric contracts the
rest of the code relies on: a relative singularity cutoff for LU, and a
symmetry check in front of the symmetric eigensolver.
"""
from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

SINGULAR_RTOL = 1e-14
SYMMETRY_RTOL = 1e-10


class DimensionError(ValueError):
    pass


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, pivot: int, msg: str | None = None):
        self.pivot = pivot
        super().__init__(msg or f"matrix is singular at pivot {pivot}")


class SymmetryError(ValueError):
    pass


class LogDet(NamedTuple):
    sign: int
    logabsdet: float


class SymEigen(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def _square(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def _lu(a: np.ndarray):
    with warnings.catch_warnings():
        # exact zero pivots are reported through the sign / pivot index instead
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=False)
    diag = np.diag(lu)
    scale = np.max(np.abs(a)) if a.size else 0.0
    small = np.flatnonzero(np.abs(diag) <= SINGULAR_RTOL * scale)
    return lu, piv, diag, small


def logdet_lu(a) -> LogDet:
    """Sign and log-magnitude of det(a) from a partial-pivot LU factorization.

    The sign is 0 when any pivot is at or below ``1e-14 * max|a_ij|``; the
    log-magnitude is then ``-inf``.
    """
    a = _square(a)
    n = a.shape[0]
    if n == 0:
        return LogDet(1, 0.0)
    if not np.any(a):
        return LogDet(0, -np.inf)
    lu, piv, diag, small = _lu(a)
    if small.size:
        return LogDet(0, -np.inf)
    swaps = np.count_nonzero(piv != np.arange(n))
    sign = (-1) ** swaps * int(np.prod(np.sign(diag)))
    return LogDet(int(sign), float(np.sum(np.log(np.abs(diag)))))


def solve(a, b) -> np.ndarray:
    """Solve ``a @ x = b``; raises SingularMatrixError naming the first bad pivot."""
    a = _square(a)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise DimensionError(f"rhs has {b.shape[0]} rows, matrix has {a.shape[0]}")
    if a.shape[0] == 0:
        return b.copy()
    if not np.any(a):
        raise SingularMatrixError(0)
    lu, piv, _, small = _lu(a)
    if small.size:
        raise SingularMatrixError(int(small[0]))
    return sla.lu_solve((lu, piv), b, check_finite=False)


def sym_eig(a) -> SymEigen:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    a = _square(a)
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    bound = SYMMETRY_RTOL * (1.0 + (np.max(np.abs(a)) if a.size else 0.0))
    if asym > bound:
        raise SymmetryError(f"matrix is not symmetric (max |a - a^T| = {asym:.3g})")
    values, vectors = np.linalg.eigh(0.5 * (a + a.T))
    return SymEigen(values, vectors)


def is_symmetric(a, rtol: float = SYMMETRY_RTOL) -> bool:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return True
    return bool(np.max(np.abs(a - a.T)) <= rtol * (1.0 + np.max(np.abs(a))))
