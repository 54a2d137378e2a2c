"""Recursive least squares with variable-rate forgetting.

Modules: ``estimator`` (the recursion and its batch oracles),
``forgetting`` (per-step rate policies), ``analysis`` (persistency and
consistency diagnostics), ``sim`` (ARX scenario harness), ``cli``
(command-line front end), ``linalg`` (small SPD kernel), and
``regressor`` (scikit-learn compatible wrapper).
"""

from .estimator import (
    BatchAccumulator,
    EstimatorConfig,
    EstimatorState,
    History,
    batch_minimize,
    cost,
    crf_step,
    init,
    pinv_closed_form,
    step,
)
from .forgetting import (
    Constant,
    ForgettingPolicy,
    Geometric,
    Harmonic,
    ResidualSaturation,
    ResidualWindow,
    Schedule,
    WindowedRms,
)
from .linalg import ConditioningWarning, DegeneracyError, InvalidInputError
from .regressor import VRFRegressor

__all__ = [
    "BatchAccumulator",
    "ConditioningWarning",
    "Constant",
    "DegeneracyError",
    "EstimatorConfig",
    "EstimatorState",
    "ForgettingPolicy",
    "Geometric",
    "Harmonic",
    "History",
    "InvalidInputError",
    "ResidualSaturation",
    "ResidualWindow",
    "Schedule",
    "VRFRegressor",
    "WindowedRms",
    "batch_minimize",
    "cost",
    "crf_step",
    "init",
    "pinv_closed_form",
    "step",
]

__version__ = "0.1.0"
