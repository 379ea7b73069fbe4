from __future__ import annotations

import logging
from dataclasses import dataclass
from dataclasses import field

import numpy as np

from rotorfsi.linsolve.direct import sparse_lu_fallback
from rotorfsi.linsolve.krylov import fgmres
from rotorfsi.linsolve.krylov import KrylovFailure
from rotorfsi.linsolve.krylov import KrylovResult
from rotorfsi.linsolve.preconditioner import BlockPreconditioner
from rotorfsi.linsolve.preconditioner import InnerSolverConfig

logger = logging.getLogger(__name__)

METHODS = ("fgmres", "direct")
PRECONDITIONERS = ("block", "none")


@dataclass(frozen=True)
class SolverConfig:
    method: str = "fgmres"
    tolerance: float = 1e-8
    restart: int = 50
    max_iterations: int = 500
    preconditioner: str = "block"
    inner: InnerSolverConfig = field(default_factory=InnerSolverConfig)
    lu_fallback: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown solver method {self.method!r}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(
                f"unknown preconditioner {self.preconditioner!r}"
            )


def solve_monolithic(
    system, config: SolverConfig | None = None, x0: np.ndarray | None = None
) -> tuple[np.ndarray, KrylovResult]:
    """Solve a reduced saddle-point system.

    ``system`` provides the blocks ``A``, ``B``, ``C`` and
    ``matrix()``/``rhs()``. The returned vector stacks velocity and
    pressure unknowns.
    """
    config = config or SolverConfig()
    matrix, rhs = system.matrix(), system.rhs()

    def direct() -> tuple[np.ndarray, KrylovResult]:
        x = sparse_lu_fallback(matrix, rhs)
        b_norm = float(np.linalg.norm(rhs)) or 1.0
        true = float(np.linalg.norm(rhs - matrix @ x)) / b_norm
        return x, KrylovResult(x, 0, (true,), True, true)

    if config.method == "direct":
        return direct()

    preconditioner = None
    if config.preconditioner == "block":
        preconditioner = BlockPreconditioner(
            system.A, system.B, system.C, config.inner
        )
    try:
        result = fgmres(
            matrix,
            rhs,
            preconditioner,
            tol=config.tolerance,
            max_iter=config.max_iterations,
            restart=config.restart,
            x0=x0,
        )
    except KrylovFailure as error:
        if not config.lu_fallback:
            raise
        logger.warning(
            "outer solve fell back to sparse LU: %s", error.message
        )
        return direct()
    logger.debug(
        "outer solve: %d iterations, residual %.3e",
        result.iterations,
        result.true_residual,
    )
    return result.x, result
