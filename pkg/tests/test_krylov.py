"""PCG, the Lanczos-connection condition estimate, and solve reporting."""

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from mselast.assembly import CoefficientField, assemble_elasticity
from mselast.grid import build_fine_mesh
from mselast.krylov import estimate_condition, pcg_solve


class ApplyWrapper:
    def __init__(self, fn):
        self.apply = fn


class TestPcgBasics:
    def test_finite_termination_on_diagonal_system(self):
        n = 12
        A = sp.diags(np.arange(1.0, n + 1)).tocsr()
        b = np.ones(n)
        x, report = pcg_solve(A, b, tol=1e-12, maxit=5 * n)
        assert report.converged
        assert report.iterations <= n
        assert np.allclose(A @ x, b, atol=1e-10)

    def test_exact_preconditioner_one_iteration(self):
        n = 30
        d = np.linspace(1.0, 50.0, n)
        A = sp.diags(d).tocsr()
        M = ApplyWrapper(lambda r: r / d)
        x, report = pcg_solve(A, np.ones(n), M, tol=1e-10)
        assert report.iterations == 1
        assert estimate_condition(report) == pytest.approx(1.0, abs=1e-8)

    def test_condition_estimate_2x2(self):
        A = sp.diags([1.0, 4.0]).tocsr()
        b = np.array([1.0, 1.0])
        _, report = pcg_solve(A, b, tol=1e-12)
        assert estimate_condition(report) == pytest.approx(4.0, rel=1e-6)

    def test_scale_invariance_of_condition(self):
        rng = np.random.default_rng(0)
        n = 40
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        A = sp.csr_matrix(Q @ np.diag(np.linspace(1, 30, n)) @ Q.T)
        b = rng.standard_normal(n)
        _, r1 = pcg_solve(A, b, tol=1e-10)
        _, r2 = pcg_solve(A, 2 * b, tol=1e-10)
        assert estimate_condition(r1) == pytest.approx(estimate_condition(r2), rel=1e-6)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        n = 25
        B = rng.standard_normal((n, n))
        A = sp.csr_matrix(B @ B.T + n * np.eye(n))
        b = rng.standard_normal(n)
        x1, r1 = pcg_solve(A, b, tol=1e-9)
        x2, r2 = pcg_solve(A, b, tol=1e-9)
        assert np.array_equal(x1, x2)
        assert r1.iterations == r2.iterations

    def test_maxit_reports_unconverged(self):
        n = 50
        A = sp.diags(np.geomspace(1e-6, 1.0, n)).tocsr()
        _, report = pcg_solve(A, np.ones(n), tol=1e-14, maxit=3)
        assert not report.converged
        assert report.iterations == 3

    def test_bad_tolerance_rejected(self):
        A = sp.identity(3, format="csr")
        with pytest.raises(ValueError):
            pcg_solve(A, np.ones(3), tol=2.0)

    def test_nonsymmetric_preconditioner_detected(self):
        n = 10
        A = sp.diags(np.arange(1.0, n + 1)).tocsr()
        S = np.triu(np.ones((n, n)))  # deliberately nonsymmetric
        M = ApplyWrapper(lambda r: S @ r)
        with pytest.raises(ValueError):
            pcg_solve(A, np.ones(n), M, check_symmetry=True)


class TestReport:
    def setup_method(self):
        rng = np.random.default_rng(3)
        n = 60
        B = rng.standard_normal((n, n))
        self.A = sp.csr_matrix(B @ B.T + 5 * np.eye(n))
        self.b = rng.standard_normal(n)

    def test_final_residual_reduction(self):
        x, report = pcg_solve(self.A, self.b, tol=1e-8)
        assert report.converged
        res = np.linalg.norm(self.b - self.A @ x)
        assert res <= 1e-8 * np.linalg.norm(self.b)
        assert report.residuals[-1] <= 1e-8

    def test_condition_estimate_nondecreasing_over_history(self):
        _, report = pcg_solve(self.A, self.b, tol=1e-10)
        history = [
            estimate_condition(report, upto=j)
            for j in range(1, report.iterations + 1)
        ]
        assert all(b >= a - 1e-9 * a for a, b in zip(history, history[1:]))

    def test_residual_csv_export(self, tmp_path):
        _, report = pcg_solve(self.A, self.b, tol=1e-8)
        path = tmp_path / "residuals.csv"
        report.write_residual_csv(path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "iteration,relative_residual"
        assert len(rows) == len(report.residuals) + 1


class TestAgainstDirectOracle:
    def test_elasticity_solution_accuracy(self):
        mesh = build_fine_mesh(20, 20)
        rng = np.random.default_rng(5)
        E = rng.uniform(1e-4, 1.0, mesh.n_elements)
        coeff = CoefficientField(E, 0.3, 1e-4, 1.0)
        op = assemble_elasticity(mesh, coeff, mesh.boundary_nodes())
        b = rng.standard_normal(op.n_free)
        x, report = pcg_solve(op.matrix, b, tol=1e-8, maxit=5000)
        assert report.converged
        x_direct = spla.spsolve(op.matrix.tocsc(), b)
        assert np.linalg.norm(x - x_direct) <= 1e-5 * np.linalg.norm(x_direct)
