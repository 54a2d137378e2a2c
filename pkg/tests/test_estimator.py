import numpy as np
import pytest

from vrfrls.estimator import (
    EstimatorConfig,
    History,
    batch_minimize,
    cost,
    crf_step,
    init,
    pinv_closed_form,
    step,
)
from vrfrls.linalg import InvalidInputError, inv_spd, sym_eig_extrema


def make_config(n=2, p=1, theta0=None, P0=None):
    theta0 = np.zeros(n) if theta0 is None else np.asarray(theta0, float)
    P0 = np.eye(n) if P0 is None else np.asarray(P0, float)
    return EstimatorConfig(theta0=theta0, P0=P0, n=n, p=p)


def random_history(rng, n, p, length, beta_range=(1.0, 3.0)):
    cfg = make_config(
        n=n,
        p=p,
        theta0=rng.standard_normal(n),
        P0=np.diag(rng.uniform(0.5, 5.0, size=n)),
    )
    hist = History(cfg)
    for _ in range(length):
        phi = rng.standard_normal((p, n))
        y = rng.standard_normal(p)
        beta = rng.uniform(*beta_range)
        hist.append(phi, y, beta)
    return hist


def run_recursion(hist):
    state = init(hist.config)
    for phi, y, beta in zip(hist.phis, hist.ys, hist.betas):
        state = step(state, phi, y, beta)
    return state


class TestInit:
    def test_zero_prior(self):
        state = init(make_config(n=2, p=1))
        assert state.k == 0 and state.rho_prev == 1.0
        np.testing.assert_array_equal(state.theta, np.zeros(2))
        np.testing.assert_array_equal(state.P, np.eye(2))

    def test_pass_through(self):
        cfg = make_config(n=2, theta0=[1.0, 2.0], P0=np.diag([10.0, 10.0]))
        state = init(cfg)
        np.testing.assert_array_equal(state.theta, [1.0, 2.0])
        np.testing.assert_array_equal(state.P, np.diag([10.0, 10.0]))

    def test_non_spd_prior_rejected(self):
        with pytest.raises(InvalidInputError):
            make_config(n=2, P0=np.diag([1.0, -1.0]))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            EstimatorConfig(theta0=np.zeros(3), P0=np.eye(2), n=2, p=1)


class TestStep:
    def test_zero_regressor_inflates_covariance_only(self):
        state = init(make_config(n=3))
        beta = 1.7
        out = step(state, np.zeros((1, 3)), np.array([2.0]), beta)
        np.testing.assert_array_equal(out.theta, state.theta)
        np.testing.assert_allclose(out.P, beta * state.P, rtol=1e-14)
        assert out.k == 1 and out.rho_prev == beta

    def test_zero_residual_keeps_estimate_but_contracts(self):
        rng = np.random.default_rng(0)
        cfg = make_config(n=3, theta0=rng.standard_normal(3))
        state = init(cfg)
        phi = rng.standard_normal((1, 3))
        y = phi @ state.theta
        out = step(state, phi, y, 1.0)
        np.testing.assert_allclose(out.theta, state.theta, atol=1e-14)
        _, hi_before = sym_eig_extrema(state.P)
        _, hi_after = sym_eig_extrema(out.P)
        assert hi_after <= hi_before + 1e-12

    def test_five_step_schedule_matches_batch(self):
        rng = np.random.default_rng(42)
        cfg = make_config(n=2, theta0=rng.standard_normal(2))
        hist = History(cfg)
        state = init(cfg)
        for beta in (1.0, 1.2, 1.0, 1.5, 1.1):
            phi = rng.standard_normal((1, 2))
            y = rng.standard_normal(1)
            hist.append(phi, y, beta)
            state = step(state, phi, y, beta)
        theta_batch, _ = batch_minimize(hist)
        np.testing.assert_allclose(state.theta, theta_batch, rtol=1e-10)

    def test_bad_beta_rejected(self):
        state = init(make_config(n=2))
        with pytest.raises(InvalidInputError):
            step(state, np.ones((1, 2)), np.ones(1), 0.0)

    def test_recursion_matches_batch_randomized(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = rng.integers(1, 7)
            p = rng.integers(1, 4)
            hist = random_history(rng, n, p, int(rng.integers(1, 51)))
            state = run_recursion(hist)
            theta_batch, _ = batch_minimize(hist)
            scale = max(1.0, np.abs(theta_batch).max())
            assert np.abs(state.theta - theta_batch).max() <= 1e-8 * scale

    def test_information_recursion_per_step(self):
        rng = np.random.default_rng(21)
        cfg = make_config(n=3, theta0=rng.standard_normal(3))
        state = init(cfg)
        for _ in range(30):
            phi = rng.standard_normal((2, 3))
            y = rng.standard_normal(2)
            beta = rng.uniform(1.0, 3.0)
            new = step(state, phi, y, beta)
            lhs = inv_spd(new.P)
            rhs = inv_spd(state.P) / beta + phi.T @ phi
            assert np.abs(lhs - rhs).max() <= 1e-9 * np.abs(rhs).max()
            state = new

    def test_monotone_contraction_without_forgetting(self):
        rng = np.random.default_rng(17)
        state = init(make_config(n=3))
        prev_max = sym_eig_extrema(state.P)[1]
        for _ in range(25):
            phi = rng.standard_normal((1, 3))
            y = rng.standard_normal(1)
            state = step(state, phi, y, 1.0)
            cur_max = sym_eig_extrema(state.P)[1]
            assert cur_max <= prev_max + 1e-12
            prev_max = cur_max


class TestCrfStep:
    def test_lambda_one_zero_regressor_keeps_covariance(self):
        state = init(make_config(n=2))
        out = crf_step(state, np.zeros((1, 2)), np.zeros(1), 1.0)
        np.testing.assert_array_equal(out.P, state.P)

    def test_bitwise_identity_with_step(self):
        rng = np.random.default_rng(1)
        cfg = make_config(n=3, theta0=rng.standard_normal(3))
        a = init(cfg)
        b = init(cfg)
        lam = 0.5
        for _ in range(10):
            phi = rng.standard_normal((1, 3))
            y = rng.standard_normal(1)
            a = crf_step(a, phi, y, lam)
            b = step(b, phi, y, 1.0 / lam)
            np.testing.assert_array_equal(a.theta, b.theta)
            np.testing.assert_array_equal(a.P, b.P)
            assert a.rho_prev == b.rho_prev

    def test_lambda_out_of_range(self):
        state = init(make_config(n=2))
        with pytest.raises(InvalidInputError):
            crf_step(state, np.ones((1, 2)), np.ones(1), 1.5)


class TestCost:
    def test_noiseless_at_truth_is_zero(self):
        rng = np.random.default_rng(2)
        theta_star = rng.standard_normal(3)
        cfg = make_config(n=3, theta0=theta_star)
        hist = History(cfg)
        for _ in range(5):
            phi = rng.standard_normal((1, 3))
            hist.append(phi, phi @ theta_star, rng.uniform(1.0, 2.0))
        assert cost(hist, theta_star) == pytest.approx(0.0, abs=1e-12)

    def test_single_step_direct_value(self):
        cfg = make_config(n=2)
        hist = History(cfg)
        hist.append(np.array([[1.0, 0.0]]), np.array([1.0]), 1.0)
        assert cost(hist, np.zeros(2)) == pytest.approx(1.0)

    def test_minimizer_dominates_perturbations(self):
        rng = np.random.default_rng(33)
        hist = random_history(rng, n=3, p=1, length=12)
        state = run_recursion(hist)
        c0 = cost(hist, state.theta)
        for _ in range(100):
            delta = rng.standard_normal(3) * rng.uniform(0.01, 1.0)
            assert c0 <= cost(hist, state.theta + delta) + 1e-12

    def test_empty_history_rejected(self):
        with pytest.raises(InvalidInputError):
            cost(History(make_config(n=2)), np.zeros(2))


class TestBatchMinimize:
    def test_one_datum_convex_combination(self):
        rng = np.random.default_rng(4)
        n = 3
        theta_star = rng.standard_normal(n)
        theta0 = rng.standard_normal(n)
        P0 = np.diag(rng.uniform(0.5, 4.0, size=n))
        cfg = EstimatorConfig(theta0=theta0, P0=P0, n=n, p=n)
        hist = History(cfg)
        beta0 = 1.4
        hist.append(np.eye(n), theta_star, beta0)
        theta, acc = batch_minimize(hist)
        # Direct normal equations: (I + P0^-1/rho0) theta = theta* + P0^-1 theta0 / rho0
        P0_inv = np.diag(1.0 / np.diag(P0))
        expected = np.linalg.solve(np.eye(n) + P0_inv / beta0, theta_star + P0_inv @ theta0 / beta0)
        np.testing.assert_allclose(theta, expected, rtol=1e-12)
        assert acc.rho == pytest.approx(beta0)

    def test_constant_beta_reproduces_exponential_weights(self):
        rng = np.random.default_rng(6)
        lam = 0.9
        cfg = make_config(n=2, theta0=rng.standard_normal(2))
        hist = History(cfg)
        k = 7
        for _ in range(k + 1):
            hist.append(rng.standard_normal((1, 2)), rng.standard_normal(1), 1.0 / lam)
        theta, _ = batch_minimize(hist)
        # Independent weighted LS with weights lam^(k-i) and lam^(k+1) prior term.
        A = lam ** (k + 1) * inv_spd(cfg.P0)
        b = lam ** (k + 1) * inv_spd(cfg.P0) @ cfg.theta0
        for i, (phi, y) in enumerate(zip(hist.phis, hist.ys)):
            w = lam ** (k - i)
            A += w * phi.T @ phi
            b += w * phi.T @ y
        np.testing.assert_allclose(theta, np.linalg.solve(A, b), rtol=1e-10)

    def test_matches_recursion_five_steps(self):
        rng = np.random.default_rng(8)
        hist = random_history(rng, n=3, p=2, length=5)
        state = run_recursion(hist)
        theta, _ = batch_minimize(hist)
        np.testing.assert_allclose(state.theta, theta, rtol=1e-10)


class TestPinvClosedForm:
    def test_single_step_base_case(self):
        rng = np.random.default_rng(10)
        cfg = make_config(n=3)
        hist = History(cfg)
        phi = rng.standard_normal((1, 3))
        hist.append(phi, rng.standard_normal(1), 1.0)
        np.testing.assert_allclose(
            pinv_closed_form(hist), np.eye(3) + phi.T @ phi, rtol=1e-12
        )

    def test_zero_regressors_scaled_prior(self):
        cfg = make_config(n=2, P0=np.diag([2.0, 4.0]))
        hist = History(cfg)
        for beta in (2.0, 3.0):
            hist.append(np.zeros((1, 2)), np.zeros(1), beta)
        np.testing.assert_allclose(
            pinv_closed_form(hist), np.diag([0.5, 0.25]) / 6.0, rtol=1e-12
        )

    def test_matches_recursive_covariance(self):
        rng = np.random.default_rng(12)
        hist = random_history(rng, n=3, p=1, length=6)
        state = run_recursion(hist)
        lhs = inv_spd(state.P)
        rhs = pinv_closed_form(hist)
        assert np.abs(lhs - rhs).max() <= 1e-9 * np.abs(rhs).max()
