import numpy as np
import pytest

from vrfrls.linalg import (
    ConditioningWarning,
    DegeneracyError,
    InvalidInputError,
    check_symmetric,
    inv_spd,
    solve_spd,
    sym_eig_extrema,
    symmetrize,
)


def eig_count_below(A, x):
    """Number of eigenvalues of symmetric A below x, via LDL^T inertia.

    Pure-Python Gaussian elimination; independent of any LAPACK
    eigensolver path.
    """
    n = A.shape[0]
    M = [[float(A[i, j]) for j in range(n)] for i in range(n)]
    for i in range(n):
        M[i][i] -= x
    neg = 0
    for i in range(n):
        pivot = M[i][i]
        if pivot == 0.0:
            pivot = 1e-300
        if pivot < 0:
            neg += 1
        for r in range(i + 1, n):
            f = M[r][i] / pivot
            for c in range(i, n):
                M[r][c] -= f * M[i][c]
    return neg


def eig_extrema_bisection(A, tol=1e-12):
    """Smallest/largest eigenvalues by bisection on the inertia count."""
    n = A.shape[0]
    radius = max(sum(abs(A[i, j]) for j in range(n)) for i in range(n)) + 1.0

    def bisect(target):
        lo, hi = -radius, radius
        while hi - lo > tol * radius:
            mid = 0.5 * (lo + hi)
            if eig_count_below(A, mid) >= target:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    return bisect(1), bisect(n)


class TestSymEigExtrema:
    def test_identity(self):
        lo, hi = sym_eig_extrema(np.eye(3))
        assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)

    def test_diagonal(self):
        lo, hi = sym_eig_extrema(np.diag([2.0, 5.0]))
        assert lo == pytest.approx(2.0) and hi == pytest.approx(5.0)

    def test_random_symmetric_vs_bisection_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            A = symmetrize(rng.standard_normal((4, 4)))
            lo, hi = sym_eig_extrema(A)
            lo_ref, hi_ref = eig_extrema_bisection(A)
            assert lo == pytest.approx(lo_ref, abs=1e-8)
            assert hi == pytest.approx(hi_ref, abs=1e-8)

    def test_nonfinite_rejected(self):
        A = np.eye(2)
        A[0, 1] = A[1, 0] = np.nan
        with pytest.raises(InvalidInputError):
            sym_eig_extrema(A)

    def test_asymmetric_rejected(self):
        with pytest.raises(InvalidInputError):
            sym_eig_extrema(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestSolveSpd:
    def test_identity_solve(self):
        B = np.arange(6.0).reshape(3, 2)
        np.testing.assert_allclose(solve_spd(np.eye(3), B), B)

    def test_scalar(self):
        np.testing.assert_allclose(solve_spd(np.array([[4.0]]), np.array([8.0])), [2.0])

    def test_multiply_back_residual(self):
        rng = np.random.default_rng(11)
        G = rng.standard_normal((5, 5))
        A = symmetrize(G.T @ G + np.eye(5))
        B = rng.standard_normal((5, 3))
        X = solve_spd(A, B)
        assert np.abs(A @ X - B).max() <= 1e-10 * np.abs(B).max()

    def test_indefinite_reports_pivot(self):
        with pytest.raises(DegeneracyError, match="pivot"):
            solve_spd(np.diag([1.0, -1.0]), np.ones(2))

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            solve_spd(np.eye(3), np.ones(2))


class TestInvSpd:
    def test_identity(self):
        np.testing.assert_allclose(inv_spd(np.eye(4)), np.eye(4))

    def test_diagonal(self):
        np.testing.assert_allclose(inv_spd(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))

    def test_multiply_back(self):
        rng = np.random.default_rng(5)
        G = rng.standard_normal((4, 4))
        A = symmetrize(G.T @ G + 0.5 * np.eye(4))
        np.testing.assert_allclose(A @ inv_spd(A), np.eye(4), atol=1e-10)

    def test_involution(self):
        rng = np.random.default_rng(9)
        G = rng.standard_normal((4, 4))
        A = symmetrize(G.T @ G + np.eye(4))
        AA = inv_spd(inv_spd(A))
        assert np.abs(AA - A).max() <= 1e-8 * np.abs(A).max()

    def test_result_symmetric(self):
        rng = np.random.default_rng(13)
        G = rng.standard_normal((6, 6))
        A = symmetrize(G.T @ G + np.eye(6))
        X = inv_spd(A)
        np.testing.assert_array_equal(X, X.T)


def test_conditioning_warning_emitted_but_proceeds():
    A = np.diag([1.0, 1e-14])
    with pytest.warns(ConditioningWarning):
        X = solve_spd(A, np.eye(2))
    assert np.all(np.isfinite(X))


def test_check_symmetric_accepts_roundoff_asymmetry():
    A = np.eye(3)
    A[0, 1] += 1e-14
    check_symmetric(A)
