"""Excitation and consistency diagnostics for regressor/rate records.

Persistency profiling extracts, from a finite regressor record, the
smallest window length over which the summed outer products are
uniformly positive definite, along with lower/upper eigenvalue bounds on
those window sums.  The consistency sequences combine those bounds with
the forgetting-rate products to bracket the eigenvalues of the estimate
covariance under measurement noise; their ratio tails decide whether the
estimator can concentrate on the true parameter.

All quantities computed from a finite record are finite-horizon
estimates of the corresponding asymptotic definitions.

``consistency_sequences`` deliberately uses plain Python arithmetic so
callers may pass high-precision numbers (e.g. ``mpmath.mpf``) when rate
products overflow float64, as geometric rates do for long records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import InvalidInputError, sym_eig_extrema, symmetrize

# Window sums count as positive definite when lambda_min exceeds this
# times max(1, largest window eigenvalue); absorbs roundoff in the sums.
EIG_TOL = 1e-10


@dataclass(frozen=True)
class PersistencyProfile:
    """Window length N, eigenvalue lower bound alpha, upper bound beta_ub."""

    N: int
    alpha: float
    beta_ub: float

    def __post_init__(self):
        if self.N < 0:
            raise InvalidInputError("window length must be >= 0")
        if not self.alpha > 0:
            raise InvalidInputError("alpha must be > 0")
        if not self.alpha <= self.beta_ub:
            raise InvalidInputError("alpha must not exceed beta_ub")


@dataclass(frozen=True)
class ConsistencySequences:
    """Windowed partial sums of rate products and squared rate products.

    Indexed by window count j: ``s_l[j]`` and ``q_l[j]`` sum the products
    at window starts i(N+1) for i < j; ``s_u[j]`` and ``q_u[j]`` sum the
    products at window ends i(N+1)+N for i <= j.
    """

    N: int
    s_l: list
    s_u: list
    q_l: list
    q_u: list


@dataclass(frozen=True)
class VarianceBounds:
    lower: float
    upper: float


def xi(k: int, N: int) -> int:
    """Number of complete windows of length N+1 within the first k steps."""
    if k < 0 or N < 0:
        raise InvalidInputError("k and N must be >= 0")
    return k // (N + 1)


def _window_eig_ranges(S: np.ndarray, N: int) -> tuple[float, float]:
    """(min lambda_min, max lambda_max) over all complete sliding window sums."""
    T = S.shape[0]
    csum = np.concatenate([np.zeros((1,) + S.shape[1:]), np.cumsum(S, axis=0)])
    lo = math.inf
    hi = -math.inf
    for j in range(T - N):
        W = csum[j + N + 1] - csum[j]
        lam_min, lam_max = sym_eig_extrema(symmetrize(W))
        lo = min(lo, lam_min)
        hi = max(hi, lam_max)
    return lo, hi


def persistency_profile(phis, N_max: int) -> PersistencyProfile | None:
    """Smallest window length N <= N_max making all window sums positive definite.

    Returns the profile (N, alpha = smallest window eigenvalue, beta_ub =
    largest window eigenvalue) over the finite record, or None if no
    window length up to N_max qualifies.
    """
    if N_max < 0:
        raise InvalidInputError("N_max must be >= 0")
    mats = [np.atleast_2d(np.asarray(p, dtype=float)) for p in phis]
    if len(mats) < N_max + 2:
        raise InvalidInputError(
            f"record of length {len(mats)} too short for N_max = {N_max}"
        )
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise InvalidInputError("all regressors must share one shape")
    S = np.stack([m.T @ m for m in mats])
    for N in range(N_max + 1):
        lo, hi = _window_eig_ranges(S, N)
        if lo > EIG_TOL * max(1.0, hi):
            return PersistencyProfile(N=N, alpha=lo, beta_ub=hi)
    return None


def consistency_sequences(rhos, N: int, j_max: int) -> ConsistencySequences:
    """Windowed partial sums of the rate products up to window count j_max."""
    if N < 0 or j_max < 0:
        raise InvalidInputError("N and j_max must be >= 0")
    needed = j_max * (N + 1) + N + 1
    if len(rhos) < needed:
        raise InvalidInputError(
            f"need {needed} rate products for j_max = {j_max}, N = {N}; got {len(rhos)}"
        )
    s_l, s_u, q_l, q_u = [], [], [], []
    sl = sq = 0
    su = uq = 0
    for j in range(j_max + 1):
        # i < j terms at window starts
        if j > 0:
            r = rhos[(j - 1) * (N + 1)]
            sl = sl + r
            sq = sq + r * r
        s_l.append(sl)
        q_l.append(sq)
        # i <= j terms at window ends
        r = rhos[j * (N + 1) + N]
        su = su + r
        uq = uq + r * r
        s_u.append(su)
        q_u.append(uq)
    return ConsistencySequences(N=N, s_l=s_l, s_u=s_u, q_l=q_l, q_u=q_u)


def consistency_ratios(seq: ConsistencySequences) -> tuple[list, list]:
    """Per-window-count ratios whose tails decide consistency.

    ``upper[j] = q_u[j] / s_l[j]**2`` (defined for j >= 1; entry 0 is NaN):
    a tail going to 0 is sufficient for consistency.
    ``lower[j] = q_l[j] / s_u[j]**2``: a tail going to 0 is necessary.
    """
    upper = [math.nan]
    for j in range(1, len(seq.q_u)):
        upper.append(seq.q_u[j] / seq.s_l[j] ** 2)
    lower = [seq.q_l[j] / seq.s_u[j] ** 2 for j in range(len(seq.q_l))]
    return upper, lower


def geometric_ratio_limit(gamma: float, N: int) -> float:
    """Limit of the lower consistency ratio under a constant rate gamma > 1.

    With rate products gamma^(i+1), the lower ratio q_l[j]/s_u[j]^2
    converges to gamma^-(4N+2) * (gamma^(N+1) - 1)/(gamma^(N+1) + 1),
    which is positive: constant-rate forgetting with gamma > 1 can never
    be consistent.
    """
    if not gamma > 1.0:
        raise InvalidInputError(f"gamma must be > 1, got {gamma}")
    if N < 0:
        raise InvalidInputError("N must be >= 0")
    g = gamma ** (N + 1)
    return (g - 1.0) / (g + 1.0) / gamma ** (4 * N + 2)


def variance_bounds(
    profile: PersistencyProfile,
    V_min: float,
    V_max: float,
    seq: ConsistencySequences,
    k: int,
) -> VarianceBounds:
    """Bracket the estimate-covariance eigenvalues at step k.

    The bracketing is asymptotic; at finite k these values are
    diagnostics, not guarantees.  Requires a finite excitation upper
    bound and at least one complete window (xi(k, N) >= 1).
    """
    if not math.isfinite(profile.beta_ub):
        raise InvalidInputError("variance bounds require a finite excitation upper bound")
    if not (0 <= V_min <= V_max):
        raise InvalidInputError("need 0 <= V_min <= V_max")
    j = xi(k, profile.N)
    if j < 1:
        raise InvalidInputError(f"k = {k} completes no excitation window")
    if j >= len(seq.q_l):
        raise InvalidInputError(f"sequences too short for window count {j}")
    lower = (profile.alpha * V_min / profile.beta_ub**2) * float(
        seq.q_l[j] / seq.s_u[j] ** 2
    )
    upper = (profile.beta_ub * V_max / profile.alpha**2) * float(
        seq.q_u[j] / seq.s_l[j] ** 2
    )
    return VarianceBounds(lower=lower, upper=upper)


def sum_bounds_check(S, a, profile: PersistencyProfile, tol: float = 1e-10) -> bool:
    """Verify the eigenvalue sandwich on weighted partial sums of PSD matrices.

    For every k where the required weights exist, checks
    alpha * l_{xi(k,N)-1} I <= sum_{i<=k} a_i S_i <= beta_ub * r_{xi(k,N)} I,
    with l_j summing weights at window starts and r_j at window ends.
    Requires the weights to be nonnegative and nondecreasing.
    """
    mats = [np.asarray(M, dtype=float) for M in S]
    a = [float(v) for v in a]
    if len(mats) != len(a):
        raise InvalidInputError("S and a must have equal length")
    if any(v < 0 for v in a) or any(x > y for x, y in zip(a, a[1:])):
        raise InvalidInputError("weights must be nonnegative and nondecreasing")
    n = mats[0].shape[0]
    N = profile.N
    total = np.zeros((n, n))
    ok = True
    for k, (M, w) in enumerate(zip(mats, a)):
        total = symmetrize(total + w * M)
        j = xi(k, N)
        if j * (N + 1) + N >= len(a):
            continue
        l_lo = sum(a[i * (N + 1)] for i in range(j))
        r_hi = sum(a[i * (N + 1) + N] for i in range(j + 1))
        scale = max(1.0, float(np.abs(total).max()))
        lam_lo, _ = sym_eig_extrema(total - profile.alpha * l_lo * np.eye(n))
        if lam_lo < -tol * scale:
            ok = False
            break
        lam_lo2, _ = sym_eig_extrema(profile.beta_ub * r_hi * np.eye(n) - total)
        if lam_lo2 < -tol * scale:
            ok = False
            break
    return ok
