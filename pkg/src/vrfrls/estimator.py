"""Recursive least squares with a per-step forgetting rate.

The recursion tracks the minimizer of a growing-window quadratic cost in
which the weight on datum i relative to datum k is the product of the
per-step rates beta_{i+1} .. beta_k.  Setting beta_k = 1/lambda for all k
recovers classical exponentially-forgetting RLS.

The live recursion is constant-memory: ``step`` maps one immutable state
to the next.  Cost evaluation and the batch normal-equations solve need
the full data record and take a ``History``; they exist mainly as
cross-checking oracles for the recursion and for offline analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    DegeneracyError,
    InvalidInputError,
    assert_spd,
    inv_spd,
    solve_spd,
    symmetrize,
)

# SPD certification cadence for the covariance (in steps).  Long runs with
# beta > 1 amplify roundoff; certification failure raises rather than
# silently continuing.
SPD_CHECK_INTERVAL = 100


@dataclass(frozen=True)
class EstimatorConfig:
    """Prior estimate, prior covariance, and problem dimensions."""

    theta0: np.ndarray
    P0: np.ndarray
    n: int
    p: int = 1

    def __post_init__(self):
        theta0 = np.asarray(self.theta0, dtype=float).reshape(-1)
        object.__setattr__(self, "theta0", theta0)
        if self.n < 1 or self.p < 1:
            raise InvalidInputError("n and p must be >= 1")
        if theta0.shape != (self.n,):
            raise InvalidInputError(
                f"theta0 has length {theta0.shape[0]}, expected n = {self.n}"
            )
        P0 = assert_spd(self.P0)
        if P0.shape != (self.n, self.n):
            raise InvalidInputError(
                f"P0 has shape {P0.shape}, expected ({self.n}, {self.n})"
            )
        object.__setattr__(self, "P0", P0)


@dataclass(frozen=True)
class EstimatorState:
    """Live recursion state: step index, estimate, covariance, rate product.

    ``rho_prev`` is the running product of the rates consumed so far
    (empty product = 1 at k = 0).
    """

    k: int
    theta: np.ndarray
    P: np.ndarray
    rho_prev: float = 1.0


@dataclass(frozen=True)
class BatchAccumulator:
    """Quadratic-cost coefficients: J(theta) = theta'A theta - 2 b'theta + c."""

    A: np.ndarray
    b: np.ndarray
    c: float
    rho: float


class History:
    """Ordered record of (phi, y, beta) triples plus the prior config.

    The recursion itself never needs this; it backs cost evaluation and
    the batch oracle.
    """

    def __init__(self, config: EstimatorConfig):
        self.config = config
        self.phis: list[np.ndarray] = []
        self.ys: list[np.ndarray] = []
        self.betas: list[float] = []

    def append(self, phi, y, beta: float) -> None:
        phi, y = _check_datum(phi, y, self.config.n, self.config.p)
        if not (np.isfinite(beta) and beta > 0):
            raise InvalidInputError(f"beta must be finite and > 0, got {beta}")
        self.phis.append(phi)
        self.ys.append(y)
        self.betas.append(float(beta))

    def __len__(self) -> int:
        return len(self.phis)

    def rhos(self) -> np.ndarray:
        """Cumulative products rho_i = beta_0 * ... * beta_i."""
        return np.cumprod(self.betas)


def _check_datum(phi, y, n: int, p: int) -> tuple[np.ndarray, np.ndarray]:
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        phi = phi.reshape(1, -1)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if phi.shape != (p, n):
        raise InvalidInputError(f"phi has shape {phi.shape}, expected ({p}, {n})")
    if y.shape != (p,):
        raise InvalidInputError(f"y has shape {y.shape}, expected ({p},)")
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(y))):
        raise InvalidInputError("phi/y must be finite")
    return phi, y


def init(config: EstimatorConfig) -> EstimatorState:
    """Initial state: k = 0, theta = theta0, P = P0, empty rate product."""
    return EstimatorState(
        k=0, theta=config.theta0.copy(), P=config.P0.copy(), rho_prev=1.0
    )


def step(
    state: EstimatorState,
    phi,
    y,
    beta: float,
    spd_check_interval: int = SPD_CHECK_INTERVAL,
) -> EstimatorState:
    """One recursion step consuming (phi, y) with forgetting rate beta.

    Inflates the covariance by beta, contracts it along the observed
    directions through the p x p innovation solve, and moves the estimate
    by the covariance-weighted innovation.
    """
    n = state.theta.shape[0]
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        phi = phi.reshape(1, -1)
    p = phi.shape[0]
    phi, y = _check_datum(phi, y, n=n, p=p)
    if not (np.isfinite(beta) and beta > 0):
        raise InvalidInputError(f"beta must be finite and > 0, got {beta}")

    L = beta * state.P
    if p == 1:
        g = L @ phi[0]
        s = 1.0 + float(phi[0] @ g)
        if not np.isfinite(s) or s <= 0.0:
            raise DegeneracyError(
                "innovation scalar is not positive; covariance has degenerated"
            )
        P_new = symmetrize(L - np.outer(g, g) / s)
    else:
        G = phi @ L
        S = np.eye(p) + G @ phi.T
        try:
            P_new = symmetrize(L - G.T @ solve_spd(symmetrize(S), G))
        except DegeneracyError as exc:
            raise DegeneracyError(
                f"innovation matrix is numerically singular: {exc}"
            ) from exc
    theta_new = state.theta + P_new @ (phi.T @ (y - phi @ state.theta))

    k_new = state.k + 1
    if spd_check_interval and k_new % spd_check_interval == 0:
        try:
            assert_spd(P_new)
        except InvalidInputError as exc:
            raise DegeneracyError(f"covariance lost positive definiteness: {exc}")

    return EstimatorState(
        k=k_new, theta=theta_new, P=P_new, rho_prev=state.rho_prev * beta
    )


def crf_step(state: EstimatorState, phi, y, lam: float) -> EstimatorState:
    """Classical constant-forgetting step; identical to step with beta = 1/lam."""
    if not (0.0 < lam <= 1.0):
        raise InvalidInputError(f"lambda must be in (0, 1], got {lam}")
    return step(state, phi, y, 1.0 / lam)


def cost(history: History, theta) -> float:
    """Evaluate the discounted quadratic cost the recursion minimizes.

    sum_i (rho_i/rho_k) ||y_i - phi_i theta||^2
    + (1/rho_k) (theta - theta0)' P0^{-1} (theta - theta0)
    """
    if len(history) == 0:
        raise InvalidInputError("history is empty")
    theta = np.asarray(theta, dtype=float).reshape(-1)
    cfg = history.config
    if theta.shape != (cfg.n,):
        raise InvalidInputError(
            f"theta has length {theta.shape[0]}, expected {cfg.n}"
        )
    rhos = history.rhos()
    rho_k = rhos[-1]
    total = 0.0
    for phi, y, rho_i in zip(history.phis, history.ys, rhos):
        e = y - phi @ theta
        total += (rho_i / rho_k) * float(e @ e)
    d = theta - cfg.theta0
    total += float(d @ solve_spd(cfg.P0, d)) / rho_k
    return total


def batch_minimize(history: History) -> tuple[np.ndarray, BatchAccumulator]:
    """Minimize the cost by direct normal equations over the full record.

    Independent of the recursive path; used to cross-check it.
    """
    if len(history) == 0:
        raise InvalidInputError("history is empty")
    cfg = history.config
    rhos = history.rhos()
    rho_k = rhos[-1]
    P0_inv = inv_spd(cfg.P0)
    A = P0_inv / rho_k
    b = P0_inv @ cfg.theta0 / rho_k
    c = float(cfg.theta0 @ P0_inv @ cfg.theta0) / rho_k
    for phi, y, rho_i in zip(history.phis, history.ys, rhos):
        w = rho_i / rho_k
        A = A + w * (phi.T @ phi)
        b = b + w * (phi.T @ y)
        c += w * float(y @ y)
    A = symmetrize(A)
    theta = solve_spd(A, b)
    return theta, BatchAccumulator(A=A, b=b, c=c, rho=float(rho_k))


def pinv_closed_form(history: History) -> np.ndarray:
    """Closed-form information matrix (inverse covariance) after the record.

    (1/rho_k) (P0^{-1} + sum_i rho_i phi_i' phi_i); equals the inverse of
    the recursively maintained covariance.
    """
    if len(history) == 0:
        raise InvalidInputError("history is empty")
    cfg = history.config
    rhos = history.rhos()
    M = inv_spd(cfg.P0)
    for phi, rho_i in zip(history.phis, rhos):
        M = M + rho_i * (phi.T @ phi)
    return symmetrize(M / rhos[-1])
