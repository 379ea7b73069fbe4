"""Restarted flexible GMRES with right preconditioning"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular
from scipy.sparse.linalg import aslinearoperator

from rotorfsi.errors import RotorFsiError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class KrylovResult:
    """Outcome of a Krylov solve.

    ``residuals`` are relative recursive residual norms, the initial one
    first. ``true_residual`` is recomputed from ``x``.
    """

    x: np.ndarray
    iterations: int
    residuals: tuple[float, ...]
    converged: bool
    true_residual: float


class KrylovFailure(RotorFsiError):
    def __init__(self, message: str, *args, **kwargs):
        self.result = kwargs.pop("result", None)
        super().__init__(message, *args, **kwargs)


class Stagnation(KrylovFailure):
    """Raised when a restart cycle does not reduce the residual"""


class MaxIterations(KrylovFailure):
    """Raised when the iteration budget runs out"""


def _givens(a: float, b: float) -> tuple[float, float]:
    norm = math.hypot(a, b)
    if norm == 0.0:
        return 1.0, 0.0
    return a / norm, b / norm


def fgmres(
    operator,
    b: np.ndarray,
    preconditioner: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = 1e-8,
    max_iter: int = 500,
    restart: int = 50,
    x0: np.ndarray | None = None,
) -> KrylovResult:
    """Solve ``operator @ x = b``.

    The preconditioner may change between iterations (it can itself be
    an inexact iterative solve); the preconditioned directions are kept
    for the update.

    :raises Stagnation: a whole restart cycle without residual decrease.
    :raises MaxIterations: ``max_iter`` iterations without convergence.
    """
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if restart < 1 or max_iter < 1:
        raise ValueError("restart and max_iter must be at least 1")
    op = aslinearoperator(operator)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if op.shape != (n, n):
        raise ValueError(
            f"operator shape {op.shape} does not match rhs length {n}"
        )
    apply_preconditioner = preconditioner or (lambda v: v)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return KrylovResult(np.zeros(n), 0, (0.0,), True, 0.0)

    residual = b - op.matvec(x)
    relative = float(np.linalg.norm(residual)) / b_norm
    history = [relative]
    iterations = 0
    if relative <= tol:
        return KrylovResult(x, 0, tuple(history), True, relative)

    while True:
        beta = float(np.linalg.norm(residual))
        cycle_start = beta / b_norm
        basis = np.zeros((restart + 1, n))
        directions = np.zeros((restart, n))
        hessenberg = np.zeros((restart + 1, restart))
        cosines = np.zeros(restart)
        sines = np.zeros(restart)
        g = np.zeros(restart + 1)
        basis[0] = residual / beta
        g[0] = beta

        size = 0
        breakdown = False
        for j in range(restart):
            directions[j] = apply_preconditioner(basis[j])
            w = op.matvec(directions[j])
            for i in range(j + 1):
                hessenberg[i, j] = np.dot(w, basis[i])
                w = w - hessenberg[i, j] * basis[i]
            h_next = float(np.linalg.norm(w))
            hessenberg[j + 1, j] = h_next
            column_norm = float(np.linalg.norm(hessenberg[: j + 2, j]))
            breakdown = h_next <= 1e-14 * column_norm
            if not breakdown:
                basis[j + 1] = w / h_next

            for i in range(j):
                upper = (
                    cosines[i] * hessenberg[i, j]
                    + sines[i] * hessenberg[i + 1, j]
                )
                hessenberg[i + 1, j] = (
                    -sines[i] * hessenberg[i, j]
                    + cosines[i] * hessenberg[i + 1, j]
                )
                hessenberg[i, j] = upper
            cosines[j], sines[j] = _givens(
                hessenberg[j, j], hessenberg[j + 1, j]
            )
            hessenberg[j, j] = (
                cosines[j] * hessenberg[j, j] + sines[j] * hessenberg[j + 1, j]
            )
            hessenberg[j + 1, j] = 0.0
            g[j + 1] = -sines[j] * g[j]
            g[j] = cosines[j] * g[j]

            size = j + 1
            iterations += 1
            relative = abs(g[j + 1]) / b_norm
            history.append(relative)
            logger.debug("fgmres it %d: residual %.3e", iterations, relative)
            if relative <= tol or breakdown or iterations >= max_iter:
                break

        triangle = hessenberg[:size, :size]
        if np.any(np.diag(triangle) == 0.0):
            raise Stagnation(
                "singular Hessenberg matrix in flexible GMRES",
                result=KrylovResult(
                    x, iterations, tuple(history), False, cycle_start
                ),
            )
        y = solve_triangular(triangle, g[:size])
        x = x + directions[:size].T @ y

        residual = b - op.matvec(x)
        true_relative = float(np.linalg.norm(residual)) / b_norm
        converged = true_relative <= tol or (
            relative <= tol and true_relative <= 10.0 * tol
        )
        result = KrylovResult(
            x, iterations, tuple(history), converged, true_relative
        )
        if converged:
            return result
        if iterations >= max_iter:
            raise MaxIterations(
                f"flexible GMRES stopped after {iterations} iterations at "
                f"relative residual {true_relative:.3e}",
                result=result,
            )
        if breakdown or true_relative >= cycle_start:
            raise Stagnation(
                f"flexible GMRES stagnated at relative residual "
                f"{true_relative:.3e}",
                result=result,
            )
