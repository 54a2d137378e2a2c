"""Small dense symmetric/SPD kernel backing the estimator and analyzer.

All matrices in this package are tiny (single-digit dimensions, at most
~16), dense, and real.  Helpers here wrap LAPACK routines with the
validation, symmetrization, and conditioning policies the recursion
needs: results that should be symmetric are explicitly re-symmetrized,
and SPD factorization failures are reported with the failing pivot.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.linalg.lapack import dpotrf, dpotrs

# Relative symmetry slack allowed before an input is rejected.
SYM_TOL = 1e-12

# lambda_max/lambda_min above this triggers a ConditioningWarning.
COND_WARN_THRESHOLD = 1e12


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class DegeneracyError(RuntimeError):
    """Raised when a nominally SPD matrix fails factorization."""


class ConditioningWarning(UserWarning):
    """Emitted when an SPD operand is stiff but still usable."""


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidInputError(f"expected a 2-d matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    return A


def check_symmetric(A) -> np.ndarray:
    """Validate that A is square and symmetric to relative tolerance."""
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"matrix is not square: shape {A.shape}")
    scale = max(1.0, np.abs(A).max())
    if np.abs(A - A.T).max() > SYM_TOL * scale:
        raise InvalidInputError("matrix is not symmetric within tolerance")
    return A


def symmetrize(A) -> np.ndarray:
    """Return (A + A^T)/2, suppressing drift in nominally symmetric results."""
    A = _as_matrix(A)
    return 0.5 * (A + A.T)


def sym_eig_extrema(A) -> tuple[float, float]:
    """Smallest and largest eigenvalues of a symmetric matrix."""
    A = check_symmetric(A)
    w = np.linalg.eigvalsh(A)
    return float(w[0]), float(w[-1])


def assert_spd(A) -> np.ndarray:
    """Validate that A is symmetric positive definite; return it."""
    A = check_symmetric(A)
    lam_min, _ = sym_eig_extrema(A)
    if lam_min <= 0.0:
        raise InvalidInputError(
            f"matrix is not positive definite (lambda_min = {lam_min:.3e})"
        )
    return A


def _cholesky(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of A, with pivot-indexed failure reporting."""
    c, info = dpotrf(A, lower=1)
    if info != 0:
        raise DegeneracyError(
            f"Cholesky factorization lost positive definiteness at pivot {info - 1}"
        )
    # Cheap stiffness estimate: cond(A) ~ (max diag / min diag)^2 of the factor.
    d = np.diag(c)
    cond_est = (d.max() / d.min()) ** 2
    if cond_est > COND_WARN_THRESHOLD:
        warnings.warn(
            f"SPD operand is ill-conditioned (estimated condition {cond_est:.3e})",
            ConditioningWarning,
            stacklevel=3,
        )
    return c


def solve_spd(A, B) -> np.ndarray:
    """Solve A X = B for SPD A via Cholesky factorization."""
    A = check_symmetric(A)
    B = np.asarray(B, dtype=float)
    b2 = np.atleast_2d(B.T).T if B.ndim == 1 else _as_matrix(B)
    if b2.shape[0] != A.shape[0]:
        raise InvalidInputError(
            f"dimension mismatch: A is {A.shape}, B has {b2.shape[0]} rows"
        )
    if not np.all(np.isfinite(b2)):
        raise InvalidInputError("right-hand side has non-finite entries")
    c = _cholesky(A)
    x, info = dpotrs(c, b2, lower=1)
    if info != 0:
        raise DegeneracyError(f"triangular solve failed (info = {info})")
    return x[:, 0] if B.ndim == 1 else x


def inv_spd(A) -> np.ndarray:
    """Inverse of an SPD matrix, symmetrized."""
    A = check_symmetric(A)
    return symmetrize(solve_spd(A, np.eye(A.shape[0])))
