"""Block triangular preconditioner for the stabilized saddle-point system.

The engine assembles::

    [ A  -B^T ] [v]   [f]
    [ B   C   ] [p] = [g]

Internally the pressure is rescaled by -1, which turns the system into
``[[A, B^T], [B, -C]]`` with the lower block triangular preconditioner
``[[A, 0], [B, -S]]`` and ``S = C + B diag(A)^-1 B^T``. The sign flip is
undone on exit, callers only see engine-sign pressures.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from rotorfsi.errors import RotorFsiError
from rotorfsi.linsolve.direct import SingularMatrix
from rotorfsi.linsolve.direct import SparseLU
from rotorfsi.linsolve.krylov import fgmres
from rotorfsi.linsolve.krylov import KrylovFailure
from rotorfsi.linsolve.smoothers import GaussSeidelPreconditioner
from rotorfsi.linsolve.smoothers import ZeroDiagonal

logger = logging.getLogger(__name__)


class InnerSolveFailure(RotorFsiError):
    """Raised when an inner block solve fails; ``block`` names it"""

    def __init__(self, message: str, *args, **kwargs):
        self.block = kwargs.pop("block", None)
        super().__init__(message, *args, **kwargs)


@dataclass(frozen=True)
class InnerSolverConfig:
    """Inner solves of the two preconditioner steps.

    With ``exact`` both blocks are solved by sparse LU.
    """

    tolerance: float = 1e-2
    max_iterations: int = 100
    sweeps: int = 1
    lu_fallback: bool = True
    exact: bool = False


def schur_approximation(A, B, C) -> sparse.csr_matrix:
    """``C + B diag(A)^-1 B^T``"""
    diag = np.asarray(A.diagonal(), dtype=float)
    if np.any(diag == 0):
        raise ZeroDiagonal(
            "velocity block has zero diagonal entries",
            details=np.flatnonzero(diag == 0).tolist(),
        )
    if np.any(diag < 0):
        logger.warning(
            "%d negative velocity diagonal entries, using magnitudes",
            int(np.sum(diag < 0)),
        )
        diag = np.abs(diag)
    scaled = sparse.diags(1.0 / diag)
    return sparse.csr_matrix(C + B @ scaled @ B.T)


class _BlockSolver:
    def __init__(self, matrix, name: str, config: InnerSolverConfig):
        self.matrix = sparse.csr_matrix(matrix)
        self.name = name
        self.config = config
        self._lu: SparseLU | None = None
        self._smoother = None
        if not config.exact:
            try:
                self._smoother = GaussSeidelPreconditioner(
                    self.matrix, config.sweeps
                )
            except ZeroDiagonal as error:
                raise InnerSolveFailure(
                    f"cannot smooth block {name}: {error.message}",
                    block=name,
                ) from error
        self.fallbacks = 0

    def _direct(self, rhs: np.ndarray) -> np.ndarray:
        try:
            if self._lu is None:
                self._lu = SparseLU(self.matrix)
            return self._lu.solve(rhs)
        except SingularMatrix as error:
            raise InnerSolveFailure(
                f"direct solve of block {self.name} failed: {error.message}",
                block=self.name,
            ) from error

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.config.exact:
            return self._direct(rhs)
        try:
            return fgmres(
                self.matrix,
                rhs,
                self._smoother,
                tol=self.config.tolerance,
                max_iter=self.config.max_iterations,
                restart=self.config.max_iterations,
            ).x
        except KrylovFailure as error:
            if not self.config.lu_fallback:
                raise InnerSolveFailure(
                    f"inner solve of block {self.name} failed: "
                    f"{error.message}",
                    block=self.name,
                ) from error
            self.fallbacks += 1
            logger.warning(
                "inner solve of block %s fell back to sparse LU: %s",
                self.name,
                error.message,
            )
            return self._direct(rhs)


class BlockPreconditioner:
    """Two-step application: solve ``A v = f``, then ``S p = B v - g``.

    Calling the instance applies it to an engine-sign vector ``(f, g)``
    and returns ``(v, -p)``.
    """

    def __init__(self, A, B, C, config: InnerSolverConfig | None = None):
        self.config = config or InnerSolverConfig()
        self.A = sparse.csr_matrix(A)
        self.B = sparse.csr_matrix(B)
        self.C = sparse.csr_matrix(C)
        self.n_velocity = self.A.shape[0]
        self.n_pressure = self.B.shape[0]
        self._velocity = _BlockSolver(self.A, "A", self.config)
        self._schur = None
        if self.n_pressure:
            self.S = schur_approximation(self.A, self.B, self.C)
            diag = self.S.diagonal()
            if np.any(diag <= 0):
                logger.warning(
                    "%d non-positive Schur diagonal entries, using "
                    "magnitudes",
                    int(np.sum(diag <= 0)),
                )
                fixed = np.where(diag == 0, 1.0, np.abs(diag))
                self.S = sparse.csr_matrix(
                    self.S + sparse.diags(fixed - diag)
                )
            self._schur = _BlockSolver(self.S, "S", self.config)

    @property
    def fallbacks(self) -> int:
        total = self._velocity.fallbacks
        if self._schur is not None:
            total += self._schur.fallbacks
        return total

    def apply_block_triangular(
        self, f: np.ndarray, g: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Velocity and rescaled (sign flipped) pressure"""
        v = self._velocity.solve(f)
        if self._schur is None:
            return v, np.zeros(0)
        p = self._schur.solve(self.B @ v - g)
        return v, p

    def __call__(self, r: np.ndarray) -> np.ndarray:
        v, p = self.apply_block_triangular(
            r[: self.n_velocity], r[self.n_velocity:]
        )
        return np.concatenate([v, -p])
