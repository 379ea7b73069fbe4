from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve_triangular

from rotorfsi.errors import RotorFsiError


class ZeroDiagonal(RotorFsiError):
    """Raised when a Gauss-Seidel matrix has a zero on its diagonal"""


def _split(matrix) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    matrix = sparse.csr_matrix(matrix, dtype=float)
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"matrix must be square, got {matrix.shape}")
    zero = np.flatnonzero(matrix.diagonal() == 0.0)
    if len(zero):
        raise ZeroDiagonal(
            f"{len(zero)} zero diagonal entries, first at row {zero[0]}",
            details=zero.tolist(),
        )
    lower = sparse.tril(matrix, format="csr")
    upper = sparse.triu(matrix, k=1, format="csr")
    return lower, upper


def _forward(lower: sparse.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    return spsolve_triangular(lower, rhs, lower=True)


def gauss_seidel_sweeps(matrix, x0, b, sweeps: int = 1) -> np.ndarray:
    """``sweeps`` forward Gauss-Seidel sweeps starting from ``x0``"""
    lower, upper = _split(matrix)
    x = np.array(x0, dtype=float)
    b = np.asarray(b, dtype=float)
    for _ in range(sweeps):
        x = _forward(lower, b - upper @ x)
    return x


class GaussSeidelPreconditioner:
    """Forward Gauss-Seidel from a zero initial guess"""

    def __init__(self, matrix, sweeps: int = 1):
        if sweeps < 1:
            raise ValueError("at least one sweep is needed")
        self.sweeps = sweeps
        self._lower, self._upper = _split(matrix)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        x = _forward(self._lower, r)
        for _ in range(self.sweeps - 1):
            x = _forward(self._lower, r - self._upper @ x)
        return x
