from __future__ import annotations

import logging

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from rotorfsi.errors import RotorFsiError

logger = logging.getLogger(__name__)

RESIDUAL_TARGET = 1e-10


class SingularMatrix(RotorFsiError):
    """Raised when the sparse LU factorization breaks down"""


class SparseLU:
    """Sparse LU factorization with one step of iterative refinement"""

    def __init__(self, matrix):
        self.matrix = sparse.csc_matrix(matrix, dtype=float)
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError(f"matrix must be square, got {matrix.shape}")
        try:
            self._factor = splu(self.matrix)
        except RuntimeError as error:
            message = f"LU factorization failed: {error}"
            raise SingularMatrix(message) from error

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        x = self._factor.solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularMatrix("LU solve produced non-finite values")
        x = x + self._factor.solve(b - self.matrix @ x)
        b_norm = float(np.linalg.norm(b))
        relative = float(np.linalg.norm(b - self.matrix @ x)) / (
            b_norm if b_norm > 0 else 1.0
        )
        if not np.isfinite(relative) or relative > 1e-6:
            raise SingularMatrix(
                f"LU solve residual {relative:.3e}, matrix is numerically "
                "singular",
                details=[relative],
            )
        if relative > RESIDUAL_TARGET:
            logger.warning("sparse LU residual %.3e above target", relative)
        return x


def sparse_lu_fallback(matrix, b: np.ndarray) -> np.ndarray:
    """Direct solve used as oracle and as fallback of iterative solves"""
    return SparseLU(matrix).solve(b)
