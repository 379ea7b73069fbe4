from __future__ import annotations

import numpy as np
import pytest
from scipy import sparse

from rotorfsi.errors import IoError
from rotorfsi.linsolve import BlockPreconditioner
from rotorfsi.linsolve import fgmres
from rotorfsi.linsolve import finalize
from rotorfsi.linsolve import gauss_seidel_sweeps
from rotorfsi.linsolve import GaussSeidelPreconditioner
from rotorfsi.linsolve import InnerSolverConfig
from rotorfsi.linsolve import MaxIterations
from rotorfsi.linsolve import read_matrix_market
from rotorfsi.linsolve import schur_approximation
from rotorfsi.linsolve import SingularMatrix
from rotorfsi.linsolve import smoothers
from rotorfsi.linsolve import solve_monolithic
from rotorfsi.linsolve import SolverConfig
from rotorfsi.linsolve import sparse_lu_fallback
from rotorfsi.linsolve import SparseLU
from rotorfsi.linsolve import write_matrix_market
from rotorfsi.linsolve import ZeroDiagonal


def laplacian_1d(n):
    return sparse.diags(
        [-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]
    ).tocsr()


class SaddlePoint:
    """Small stabilized saddle point problem in engine sign"""

    def __init__(self, n=20, m=6, seed=0):
        rng = np.random.default_rng(seed)
        self.A = sparse.csr_matrix(
            laplacian_1d(n) + sparse.diags(rng.uniform(0.5, 1.0, n))
        )
        self.B = sparse.csr_matrix(rng.normal(size=(m, n)))
        self.C = sparse.csr_matrix(0.1 * np.eye(m))
        self.f = rng.normal(size=n)
        self.g = rng.normal(size=m)

    def matrix(self):
        return sparse.bmat(
            [[self.A, -self.B.T], [self.B, self.C]], format="csr"
        )

    def rhs(self):
        return np.concatenate([self.f, self.g])


@pytest.fixture
def saddle():
    return SaddlePoint()


def test_finalize_sums_duplicates():
    matrix = sparse.coo_matrix(
        ([1.0, 2.0, 0.0], ([0, 0, 1], [1, 1, 0])), shape=(2, 2)
    )
    result = finalize(matrix)
    assert result[0, 1] == 3.0
    assert result.nnz == 1
    assert result.has_sorted_indices


def test_gauss_seidel_identity_converges_at_once():
    b = np.array([1.0, -2.0, 3.0])
    x = gauss_seidel_sweeps(sparse.identity(3), np.zeros(3), b, 1)
    assert np.array_equal(x, b)


def test_gauss_seidel_matches_scalar_loop():
    n = 10
    matrix = laplacian_1d(n)
    b = np.linspace(1.0, 2.0, n)
    x = np.zeros(n)
    dense = matrix.toarray()
    for _ in range(3):
        for i in range(n):
            x[i] = (b[i] - dense[i] @ x + dense[i, i] * x[i]) / dense[i, i]
    result = gauss_seidel_sweeps(matrix, np.zeros(n), b, 3)
    assert np.allclose(result, x, rtol=0, atol=1e-14)


def test_gauss_seidel_fixed_point():
    matrix = sparse.csr_matrix([[2.0, 1.0], [1.0, 2.0]])
    x = gauss_seidel_sweeps(matrix, np.zeros(2), np.ones(2), 40)
    assert np.allclose(x, [1 / 3, 1 / 3], rtol=0, atol=1e-12)


def test_gauss_seidel_rejects_zero_diagonal():
    with pytest.raises(ZeroDiagonal):
        GaussSeidelPreconditioner(sparse.csr_matrix([[0.0, 1.0], [1.0, 0]]))


def test_gauss_seidel_uses_triangular_solve(mocker):
    spy = mocker.spy(smoothers, "spsolve_triangular")
    matrix = laplacian_1d(6)
    r = np.arange(1.0, 7.0)
    x = GaussSeidelPreconditioner(matrix, sweeps=2)(r)
    assert spy.call_count == 2
    for call in spy.call_args_list:
        lower = call.args[0]
        assert sparse.isspmatrix_csr(lower)
        assert sparse.triu(lower, k=1).nnz == 0
        assert call.kwargs["lower"] is True
    expected = gauss_seidel_sweeps(matrix, np.zeros(6), r, 2)
    assert np.allclose(x, expected, rtol=0, atol=1e-14)


def test_fgmres_identity():
    b = np.arange(1.0, 6.0)
    result = fgmres(sparse.identity(5), b)
    assert result.converged
    assert result.iterations == 1
    assert np.allclose(result.x, b)


def test_fgmres_zero_rhs():
    result = fgmres(laplacian_1d(5), np.zeros(5))
    assert result.iterations == 0
    assert np.array_equal(result.x, np.zeros(5))


def test_fgmres_random_system():
    rng = np.random.default_rng(1)
    matrix = rng.normal(size=(30, 30)) + 10 * np.eye(30)
    b = rng.normal(size=30)
    result = fgmres(matrix, b, tol=1e-12, max_iter=100)
    assert result.true_residual <= 1e-10
    assert np.all(np.diff(result.residuals) <= 1e-14)


def test_fgmres_budget():
    with pytest.raises(MaxIterations) as excinfo:
        fgmres(laplacian_1d(200), np.ones(200), tol=1e-12, max_iter=3)
    assert excinfo.value.result.iterations == 3


def test_fgmres_rejects_bad_arguments():
    with pytest.raises(ValueError):
        fgmres(sparse.identity(3), np.ones(3), tol=0.0)
    with pytest.raises(ValueError):
        fgmres(sparse.identity(3), np.ones(4))


def test_flexible_preconditioner(saddle):
    preconditioner = BlockPreconditioner(saddle.A, saddle.B, saddle.C)
    result = fgmres(saddle.matrix(), saddle.rhs(), preconditioner, 1e-10)
    exact = sparse_lu_fallback(saddle.matrix(), saddle.rhs())
    error = np.linalg.norm(result.x - exact)
    assert error <= 1e-6 * np.linalg.norm(exact)


def test_exact_block_preconditioner_is_a_good_approximation(saddle):
    config = InnerSolverConfig(exact=True)
    preconditioner = BlockPreconditioner(saddle.A, saddle.B, saddle.C, config)
    exact = fgmres(saddle.matrix(), saddle.rhs(), preconditioner, 1e-10)
    plain = fgmres(saddle.matrix(), saddle.rhs(), None, 1e-10)
    assert exact.iterations < plain.iterations


def test_schur_approximation(saddle):
    S = schur_approximation(saddle.A, saddle.B, saddle.C)
    diag = saddle.A.diagonal()
    expected = saddle.C.toarray() + saddle.B.toarray() @ np.diag(
        1 / diag
    ) @ saddle.B.T.toarray()
    assert np.allclose(S.toarray(), expected)


def test_preconditioner_flips_pressure_sign():
    A = sparse.identity(2, format="csr")
    B = sparse.csr_matrix([[1.0, 0.0]])
    C = sparse.csr_matrix([[1.0]])
    config = InnerSolverConfig(exact=True)
    preconditioner = BlockPreconditioner(A, B, C, config)
    # v = f, S = 2, p = (B v - g) / 2
    result = preconditioner(np.array([1.0, 0.0, 3.0]))
    assert np.allclose(result, [1.0, 0.0, 1.0])


def test_monolithic_methods_agree(saddle):
    direct, _ = solve_monolithic(saddle, SolverConfig(method="direct"))
    iterative, result = solve_monolithic(saddle, SolverConfig(tolerance=1e-11))
    assert result.converged
    error = np.linalg.norm(direct - iterative)
    assert error <= 1e-6 * np.linalg.norm(direct)


def test_monolithic_falls_back_to_lu(saddle, caplog):
    config = SolverConfig(
        preconditioner="none", max_iterations=2, tolerance=1e-12
    )
    x, result = solve_monolithic(saddle, config)
    assert "fell back to sparse LU" in caplog.text
    assert result.iterations == 0
    exact = sparse_lu_fallback(saddle.matrix(), saddle.rhs())
    assert np.allclose(x, exact)


def test_monolithic_without_fallback_raises(saddle):
    config = SolverConfig(
        preconditioner="none",
        max_iterations=2,
        tolerance=1e-12,
        lu_fallback=False,
    )
    with pytest.raises(MaxIterations):
        solve_monolithic(saddle, config)


def test_unknown_solver_settings():
    with pytest.raises(ValueError):
        SolverConfig(method="cg")
    with pytest.raises(ValueError):
        SolverConfig(preconditioner="amg")


def test_sparse_lu():
    matrix = laplacian_1d(50)
    b = np.ones(50)
    x = SparseLU(matrix).solve(b)
    assert np.linalg.norm(matrix @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_singular_matrix():
    matrix = sparse.csr_matrix([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SingularMatrix):
        sparse_lu_fallback(matrix, np.array([1.0, 0.0]))


def test_matrix_market_files(tmpdir):
    matrix = finalize(laplacian_1d(6))
    path = write_matrix_market(tmpdir.join("laplace"), matrix, "1d")
    assert path.suffix == ".mtx"
    assert (read_matrix_market(path) != matrix).nnz == 0
    vector = write_matrix_market(tmpdir.join("b.mtx"), np.arange(3.0))
    assert np.array_equal(read_matrix_market(vector), [0.0, 1.0, 2.0])


def test_missing_matrix_market_file(tmpdir):
    with pytest.raises(IoError):
        read_matrix_market(tmpdir.join("missing.mtx"))
