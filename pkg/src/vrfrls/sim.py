"""ARX plant simulation and scenario execution.

The plant is a piecewise-constant-parameter ARX difference equation
driven by white Gaussian input, optionally with white Gaussian output
noise.  ``run_scenario`` closes the loop between the simulated data
stream, a forgetting policy, and the recursive estimator, producing a
per-step trace.  ``monte_carlo_variance`` repeats a constant-parameter
noisy scenario across independent seeds to estimate the sampling
covariance of the parameter estimate at chosen checkpoints.

All randomness flows through ``numpy.random.default_rng`` (PCG64);
identical seeds reproduce identical streams bit-for-bit.  Monte Carlo
replicate seeds are derived from the master seeds by
``SeedSequence([master, replicate_index])``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import estimator as est
from .forgetting import (
    ForgettingPolicy,
    ResidualWindow,
    WindowedRms,
    policy_beta,
    rho_sequence,
)
from .linalg import InvalidInputError

# Pre-change and post-change ARX coefficients for the abruptly-changing
# benchmark plant, in regressor order [y_{k-1}, y_{k-2}, u_{k-1}, u_{k-2}]
# (denominator coefficients negated onto the right-hand side).
BENCHMARK_THETA_PRE = (1.64, -0.8187, 0.4606, 0.4307)
BENCHMARK_THETA_POST = (0.3116, -0.998, 0.4218, 0.4215)
BENCHMARK_CHANGE_STEP = 100


@dataclass(frozen=True)
class PlantSpec:
    """Piecewise-constant ARX plant: (start_step, theta) segments."""

    segments: tuple
    na: int
    nb: int

    def __post_init__(self):
        segs = []
        n = self.na + self.nb
        if self.na < 0 or self.nb < 0 or n < 1:
            raise InvalidInputError("na, nb must be >= 0 with na + nb >= 1")
        for start, theta in self.segments:
            theta = np.asarray(theta, dtype=float).reshape(-1)
            if theta.shape != (n,):
                raise InvalidInputError(
                    f"segment theta has length {theta.shape[0]}, expected {n}"
                )
            segs.append((int(start), theta))
        if not segs or segs[0][0] != 0:
            raise InvalidInputError("first segment must start at step 0")
        starts = [s for s, _ in segs]
        if starts != sorted(starts) or len(set(starts)) != len(starts):
            raise InvalidInputError("segments must have strictly increasing start steps")
        object.__setattr__(self, "segments", tuple(segs))

    @property
    def n(self) -> int:
        return self.na + self.nb

    def theta_true(self, k: int) -> np.ndarray:
        """Active parameter vector at step k."""
        theta = self.segments[0][1]
        for start, t in self.segments:
            if k >= start:
                theta = t
        return theta

    @property
    def change_steps(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.segments[1:])


@dataclass(frozen=True)
class NoiseModel:
    variance: float
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.variance) and self.variance >= 0):
            raise InvalidInputError("noise variance must be finite and >= 0")


@dataclass(frozen=True)
class Scenario:
    plant: PlantSpec
    noise: NoiseModel
    input_seed: int
    horizon: int
    policy: ForgettingPolicy
    estimator_config: est.EstimatorConfig

    def __post_init__(self):
        if self.horizon < self.plant.n:
            raise InvalidInputError("horizon must cover the regressor warm-up")
        if self.estimator_config.n != self.plant.n:
            raise InvalidInputError("estimator dimension must match plant order")
        if self.estimator_config.p != 1:
            raise InvalidInputError("ARX scenarios are single-output (p = 1)")


@dataclass
class Trace:
    """Per-step scenario record; theta_est row k is the post-update estimate."""

    k: np.ndarray
    theta_est: np.ndarray
    beta: np.ndarray
    rho: np.ndarray
    residual_norm: np.ndarray
    error_norm: np.ndarray
    y: np.ndarray
    u: np.ndarray

    def __len__(self) -> int:
        return len(self.k)


@dataclass
class ArxData:
    """Simulated record: regressors (T x n), outputs, and the injected noise."""

    phis: np.ndarray
    ys: np.ndarray
    noises: np.ndarray


def gaussian_input(seed: int, T: int) -> np.ndarray:
    """T standard-normal samples from a PCG64 generator with the given seed."""
    if T < 1:
        raise InvalidInputError("T must be >= 1")
    return np.random.default_rng(seed).standard_normal(T)


def simulate_arx(plant: PlantSpec, inputs, noise: NoiseModel, T: int) -> ArxData:
    """Simulate T steps of the plant with zero pre-history.

    Regressor convention: phi_k = [y_{k-1}..y_{k-na}, u_{k-1}..u_{k-nb}];
    y_k = phi_k . theta_true(k) + nu_k.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.shape[0] < T:
        raise InvalidInputError(f"need {T} inputs, got {inputs.shape[0]}")
    n = plant.n
    nus = (
        np.sqrt(noise.variance) * np.random.default_rng(noise.seed).standard_normal(T)
        if noise.variance > 0
        else np.zeros(T)
    )
    phis = np.zeros((T, n))
    ys = np.zeros(T)
    for k in range(T):
        for i in range(plant.na):
            phis[k, i] = ys[k - 1 - i] if k - 1 - i >= 0 else 0.0
        for i in range(plant.nb):
            j = k - 1 - i
            phis[k, plant.na + i] = inputs[j] if j >= 0 else 0.0
        ys[k] = phis[k] @ plant.theta_true(k) + nus[k]
    return ArxData(phis=phis, ys=ys, noises=nus)


def run_scenario(scenario: Scenario, theta0_override=None) -> Trace:
    """Run the estimator with the scenario's policy over simulated data.

    The forgetting rate at step k is computed from the pre-update
    residual y_k - phi_k theta_k.  ``theta0_override`` replaces the
    configured initial estimate (used by the Monte Carlo study, which
    draws it at random).
    """
    T = scenario.horizon
    inputs = gaussian_input(scenario.input_seed, T)
    data = simulate_arx(scenario.plant, inputs, scenario.noise, T)
    cfg = scenario.estimator_config
    state = est.init(cfg)
    if theta0_override is not None:
        theta0 = np.asarray(theta0_override, dtype=float).reshape(-1)
        state = est.EstimatorState(k=0, theta=theta0, P=state.P, rho_prev=1.0)
    window = (
        ResidualWindow(scenario.policy.tau)
        if isinstance(scenario.policy, WindowedRms)
        else None
    )

    n = cfg.n
    ks = np.arange(T)
    thetas = np.zeros((T, n))
    betas = np.zeros(T)
    rhos = np.zeros(T)
    res_norms = np.zeros(T)
    err_norms = np.zeros(T)
    for k in range(T):
        phi = data.phis[k]
        y = data.ys[k]
        residual = abs(y - phi @ state.theta)
        if window is not None:
            window.push(residual)
        beta = policy_beta(scenario.policy, k, residual_norm=residual, window=window)
        state = est.step(state, phi, y, beta)
        thetas[k] = state.theta
        betas[k] = beta
        rhos[k] = state.rho_prev
        res_norms[k] = residual
        err_norms[k] = np.linalg.norm(state.theta - scenario.plant.theta_true(k))
    return Trace(
        k=ks,
        theta_est=thetas,
        beta=betas,
        rho=rhos,
        residual_norm=res_norms,
        error_norm=err_norms,
        y=data.ys,
        u=inputs[:T],
    )


def reconvergence_step(trace: Trace, change_step: int, threshold: float = 0.05,
                       sustain: int = 5) -> int | None:
    """First k >= change_step with error below threshold for `sustain` steps."""
    err = trace.error_norm
    run = 0
    for k in range(change_step, len(err)):
        run = run + 1 if err[k] < threshold else 0
        if run >= sustain:
            return k - sustain + 1
    return None


@dataclass
class MonteCarloResult:
    """Sample-covariance eigen-extrema across replicates, per checkpoint.

    ``se_min``/``se_max`` are jackknife standard errors of the extrema.
    ``reference_phis`` is replicate 0's realized regressor record and
    ``rhos`` the (deterministic-policy) rate products, kept so callers
    can evaluate analytic covariance bounds against the same record.
    """

    checkpoints: list[int]
    lam_min: np.ndarray
    lam_max: np.ndarray
    se_min: np.ndarray
    se_max: np.ndarray
    reference_phis: np.ndarray
    rhos: list[float] = field(default_factory=list)


def _replicate_seeds(master: int, idx: int) -> tuple[int, int, int]:
    """Deterministic per-replicate (input, noise, theta0) seed split."""
    children = np.random.SeedSequence([master, idx]).generate_state(3)
    return int(children[0]), int(children[1]), int(children[2])


def _jackknife_se(samples: np.ndarray, extremum) -> float:
    """Leave-one-out standard error of an eigen-extremum of the sample cov."""
    m = samples.shape[0]
    vals = np.empty(m)
    total = samples.sum(axis=0)
    # Leave-one-out covariances from sufficient statistics.
    xxt = np.einsum("ri,rj->rij", samples, samples)
    sxxt = xxt.sum(axis=0)
    for r in range(m):
        mu = (total - samples[r]) / (m - 1)
        cov = (sxxt - xxt[r]) / (m - 2) - (m - 1) / (m - 2) * np.outer(mu, mu)
        w = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        vals[r] = extremum(w)
    return float(np.sqrt((m - 1) / m * np.sum((vals - vals.mean()) ** 2)))


def monte_carlo_variance(
    scenario: Scenario,
    runs: int,
    checkpoints,
    master_seed: int = 0,
) -> MonteCarloResult:
    """Estimate eigen-extrema of the estimate's sampling covariance.

    Replicates differ only in input/noise seeds and the initial-estimate
    draw from N(theta_true, P0).  Requires a constant-parameter plant
    (the setting in which the analytic covariance bracketing applies).
    With zero noise variance the replicates differ only through the
    initial-estimate draws, whose influence washes out.
    """
    if runs < 100:
        raise InvalidInputError(f"insufficient runs: need >= 100, got {runs}")
    if scenario.plant.change_steps:
        raise InvalidInputError("Monte Carlo study requires a constant-parameter plant")
    checkpoints = sorted(int(c) for c in checkpoints)
    if not checkpoints or checkpoints[0] < 1 or checkpoints[-1] > scenario.horizon:
        raise InvalidInputError("checkpoints must lie in [1, horizon]")

    theta_true = scenario.plant.segments[0][1]
    cfg = scenario.estimator_config
    chol_P0 = np.linalg.cholesky(cfg.P0)
    samples = np.zeros((runs, len(checkpoints), cfg.n))
    reference_phis = None
    for r in range(runs):
        in_seed, noise_seed, theta_seed = _replicate_seeds(master_seed, r)
        rep = Scenario(
            plant=scenario.plant,
            noise=NoiseModel(variance=scenario.noise.variance, seed=noise_seed),
            input_seed=in_seed,
            horizon=scenario.horizon,
            policy=scenario.policy,
            estimator_config=cfg,
        )
        z = np.random.default_rng(theta_seed).standard_normal(cfg.n)
        trace = run_scenario(rep, theta0_override=theta_true + chol_P0 @ z)
        for ci, c in enumerate(checkpoints):
            samples[r, ci] = trace.theta_est[c - 1]
        if r == 0:
            inputs = gaussian_input(in_seed, rep.horizon)
            reference_phis = simulate_arx(rep.plant, inputs, rep.noise, rep.horizon).phis

    lam_min = np.zeros(len(checkpoints))
    lam_max = np.zeros(len(checkpoints))
    se_min = np.zeros(len(checkpoints))
    se_max = np.zeros(len(checkpoints))
    for ci in range(len(checkpoints)):
        cov = np.cov(samples[:, ci, :], rowvar=False)
        w = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        lam_min[ci], lam_max[ci] = w[0], w[-1]
        se_min[ci] = _jackknife_se(samples[:, ci, :], np.min)
        se_max[ci] = _jackknife_se(samples[:, ci, :], np.max)

    try:
        rhos = rho_sequence(scenario.policy, scenario.horizon + 64)
    except InvalidInputError:
        rhos = []
    return MonteCarloResult(
        checkpoints=checkpoints,
        lam_min=lam_min,
        lam_max=lam_max,
        se_min=se_min,
        se_max=se_max,
        reference_phis=reference_phis,
        rhos=rhos,
    )
