from __future__ import annotations

from rotorfsi.linsolve.direct import SingularMatrix
from rotorfsi.linsolve.direct import sparse_lu_fallback
from rotorfsi.linsolve.direct import SparseLU
from rotorfsi.linsolve.krylov import fgmres
from rotorfsi.linsolve.krylov import KrylovFailure
from rotorfsi.linsolve.krylov import KrylovResult
from rotorfsi.linsolve.krylov import MaxIterations
from rotorfsi.linsolve.krylov import Stagnation
from rotorfsi.linsolve.monolithic import solve_monolithic
from rotorfsi.linsolve.monolithic import SolverConfig
from rotorfsi.linsolve.preconditioner import BlockPreconditioner
from rotorfsi.linsolve.preconditioner import InnerSolveFailure
from rotorfsi.linsolve.preconditioner import InnerSolverConfig
from rotorfsi.linsolve.preconditioner import schur_approximation
from rotorfsi.linsolve.smoothers import gauss_seidel_sweeps
from rotorfsi.linsolve.smoothers import GaussSeidelPreconditioner
from rotorfsi.linsolve.smoothers import ZeroDiagonal
from rotorfsi.linsolve.sparse import finalize
from rotorfsi.linsolve.sparse import read_matrix_market
from rotorfsi.linsolve.sparse import write_matrix_market

__all__ = [
    "BlockPreconditioner",
    "fgmres",
    "finalize",
    "gauss_seidel_sweeps",
    "GaussSeidelPreconditioner",
    "InnerSolveFailure",
    "InnerSolverConfig",
    "KrylovFailure",
    "KrylovResult",
    "MaxIterations",
    "read_matrix_market",
    "schur_approximation",
    "SingularMatrix",
    "solve_monolithic",
    "SolverConfig",
    "sparse_lu_fallback",
    "SparseLU",
    "Stagnation",
    "write_matrix_market",
    "ZeroDiagonal",
]
