"""Scikit-learn compatible front end for the streaming estimator.

``VRFRegressor`` wraps the pure-functional recursion in the familiar
fit/partial_fit/predict surface so it composes with pipelines and model
selection.  Rows of X are consumed in order, one recursion step each;
the forgetting policy is evaluated on each row's pre-update residual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_X_y

from . import estimator as est
from .forgetting import Constant, ResidualWindow, WindowedRms, policy_beta


class VRFRegressor(BaseEstimator, RegressorMixin):
    """Online linear regression with variable-rate forgetting.

    Parameters
    ----------
    policy : forgetting policy, default Constant(1.0)
        Per-step forgetting-rate rule (no forgetting by default).
    theta0 : array-like or None
        Initial estimate; zeros if None.
    p0_scale : float
        Initial covariance is p0_scale * I.
    """

    def __init__(self, policy=None, theta0=None, p0_scale=100.0):
        self.policy = policy
        self.theta0 = theta0
        self.p0_scale = p0_scale

    def _init_state(self, n_features: int) -> None:
        theta0 = (
            np.zeros(n_features)
            if self.theta0 is None
            else np.asarray(self.theta0, dtype=float)
        )
        cfg = est.EstimatorConfig(
            theta0=theta0, P0=self.p0_scale * np.eye(n_features), n=n_features, p=1
        )
        self._policy = Constant(1.0) if self.policy is None else self.policy
        self._window = (
            ResidualWindow(self._policy.tau)
            if isinstance(self._policy, WindowedRms)
            else None
        )
        self.state_ = est.init(cfg)
        self.n_features_in_ = n_features

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self._init_state(X.shape[1])
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if not hasattr(self, "state_"):
            self._init_state(X.shape[1])
        state = self.state_
        for k in range(X.shape[0]):
            phi = X[k]
            residual = abs(y[k] - phi @ state.theta)
            if self._window is not None:
                self._window.push(residual)
            beta = policy_beta(
                self._policy, state.k, residual_norm=residual, window=self._window
            )
            state = est.step(state, phi, y[k], beta)
        self.state_ = state
        self.coef_ = state.theta
        return self

    def predict(self, X):
        if not hasattr(self, "state_"):
            raise NotFittedError("VRFRegressor is not fitted yet")
        X = check_array(X)
        return X @ self.coef_
