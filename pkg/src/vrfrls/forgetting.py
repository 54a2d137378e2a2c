"""Forgetting-rate policies.

A policy produces the per-step rate beta_k >= 1 from the step index and
(for residual-driven policies) recent prediction-error norms.  Policies
are plain deterministic functions; the only state, the residual ring
buffer for the windowed-RMS policy, is owned by the caller.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .linalg import InvalidInputError


@dataclass(frozen=True)
class Constant:
    """beta_k = 1/lam for all k (classical exponential forgetting)."""

    lam: float

    def __post_init__(self):
        if not (0.0 < self.lam <= 1.0):
            raise InvalidInputError(f"lambda must be in (0, 1], got {self.lam}")


@dataclass(frozen=True)
class ResidualSaturation:
    """beta_k = 1 + eta * sat_gamma(current residual norm)."""

    eta: float
    gamma: float

    def __post_init__(self):
        if not (self.eta > 0 and self.gamma > 0):
            raise InvalidInputError("eta and gamma must be > 0")


@dataclass(frozen=True)
class WindowedRms:
    """beta_k = 1 + eta * sat_gamma(E) when the windowed RMS residual E > 1, else 1."""

    eta: float
    gamma: float
    tau: int

    def __post_init__(self):
        if not (self.eta > 0 and self.gamma > 0):
            raise InvalidInputError("eta and gamma must be > 0")
        if self.tau < 1:
            raise InvalidInputError(f"tau must be >= 1, got {self.tau}")


@dataclass(frozen=True)
class Harmonic:
    """beta_0 = 1, beta_k = 1 + 1/k (unbounded product, yet consistent)."""


@dataclass(frozen=True)
class Geometric:
    """beta_k = gamma constant; consistent iff gamma = 1."""

    gamma: float

    def __post_init__(self):
        if not self.gamma >= 1.0:
            raise InvalidInputError(f"gamma must be >= 1, got {self.gamma}")


@dataclass(frozen=True)
class Schedule:
    """Explicit per-step rates, repeated from the last entry if exhausted."""

    values: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise InvalidInputError("schedule must be nonempty")
        if any(not (math.isfinite(v) and v > 0) for v in values):
            raise InvalidInputError("schedule values must be finite and > 0")
        object.__setattr__(self, "values", values)


ForgettingPolicy = (
    Constant | ResidualSaturation | WindowedRms | Harmonic | Geometric | Schedule
)


class ResidualWindow:
    """Ring buffer of the last tau residual norms."""

    def __init__(self, tau: int):
        if tau < 1:
            raise InvalidInputError(f"tau must be >= 1, got {tau}")
        self.tau = tau
        self._buf: deque[float] = deque(maxlen=tau)

    def push(self, residual_norm: float) -> None:
        if not (residual_norm >= 0):
            raise InvalidInputError("residual norms must be nonnegative")
        self._buf.append(float(residual_norm))

    def __len__(self) -> int:
        return len(self._buf)

    def values(self) -> list[float]:
        return list(self._buf)


def beta_constant(lam: float) -> float:
    """Rate equivalent of a constant forgetting factor: 1/lam."""
    if not (0.0 < lam <= 1.0):
        raise InvalidInputError(f"lambda must be in (0, 1], got {lam}")
    return 1.0 / lam


def sat(gamma: float, x: float) -> float:
    """Unit-slope saturation at level gamma, for nonnegative arguments."""
    if not gamma > 0:
        raise InvalidInputError(f"gamma must be > 0, got {gamma}")
    if not x >= 0:
        raise InvalidInputError(f"saturation argument must be >= 0, got {x}")
    return min(x, gamma)


def beta_residual_sat(eta: float, gamma: float, residual_norm: float) -> float:
    if not eta > 0:
        raise InvalidInputError(f"eta must be > 0, got {eta}")
    return 1.0 + eta * sat(gamma, residual_norm)


def beta_windowed_rms(eta: float, gamma: float, tau: int, window: ResidualWindow) -> float:
    """Windowed-RMS rate: quiescent (beta = 1) unless the RMS exceeds 1.

    During startup (fewer than tau residuals recorded) the RMS averages
    over the residuals available so far; zero-padding would bias it
    downward and delay change detection.
    """
    if len(window) == 0:
        raise InvalidInputError("residual window is empty")
    vals = window.values()
    e = math.sqrt(sum(v * v for v in vals) / len(vals))
    if e <= 1.0:
        return 1.0
    return 1.0 + eta * sat(gamma, e)


def beta_harmonic(k: int) -> float:
    if k < 0:
        raise InvalidInputError(f"step index must be >= 0, got {k}")
    return 1.0 if k == 0 else 1.0 + 1.0 / k


def rho_accumulate(rho_prev: float, beta: float) -> float:
    """Advance the running rate product by one step."""
    if not rho_prev > 0:
        raise InvalidInputError(f"rho_prev must be > 0, got {rho_prev}")
    if not beta > 0:
        raise InvalidInputError(f"beta must be > 0, got {beta}")
    return rho_prev * beta


def policy_beta(
    policy: ForgettingPolicy,
    k: int,
    residual_norm: float | None = None,
    window: ResidualWindow | None = None,
) -> float:
    """Evaluate a policy at step k.

    Residual-driven policies require ``residual_norm`` (current pre-update
    residual norm); the windowed policy additionally requires the caller's
    ``ResidualWindow`` with the current residual already pushed.
    """
    if isinstance(policy, Constant):
        return beta_constant(policy.lam)
    if isinstance(policy, ResidualSaturation):
        if residual_norm is None:
            raise InvalidInputError("residual-driven policy needs residual_norm")
        return beta_residual_sat(policy.eta, policy.gamma, residual_norm)
    if isinstance(policy, WindowedRms):
        if window is None:
            raise InvalidInputError("windowed policy needs a ResidualWindow")
        return beta_windowed_rms(policy.eta, policy.gamma, policy.tau, window)
    if isinstance(policy, Harmonic):
        return beta_harmonic(k)
    if isinstance(policy, Geometric):
        return policy.gamma
    if isinstance(policy, Schedule):
        return policy.values[min(k, len(policy.values) - 1)]
    raise InvalidInputError(f"unknown policy {policy!r}")


def rho_sequence(policy: ForgettingPolicy, length: int) -> list[float]:
    """Rate products rho_0..rho_{length-1} for step-index-only policies."""
    if isinstance(policy, (ResidualSaturation, WindowedRms)):
        raise InvalidInputError(
            "rate products of residual-driven policies depend on the data record"
        )
    rhos = []
    rho = 1.0
    for k in range(length):
        rho = rho_accumulate(rho, policy_beta(policy, k))
        rhos.append(rho)
    return rhos
