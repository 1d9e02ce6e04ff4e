"""spitfilter: sequential screening of outbound call sources.

Per-source likelihood-ratio tests over call durations, loss-optimal
accuracy planning, maximum-likelihood model fitting from call records,
a deterministic Monte Carlo harness, and a filtering engine with
snapshot persistence.  See the README for the CLI surface.
"""

__version__ = "0.1.0"

from .errors import (FitError, FormatError, HorizonWarning, LabelingError,
                     ParameterError, ProtocolError, RoleInversionWarning,
                     SnapshotError, SpitFilterError, StateError,
                     UnsupportedModelError)
from .models import (EmpiricalPair, ExponentialPair, KlInfo, MlFit,
                     build_surrogate_model, fit_exponential_ml, kl_numbers,
                     kl_numbers_monte_carlo, log_likelihood_ratio)
from .planning import (CostSpec, PlanResult, expected_loss_nonspit,
                       expected_loss_spit, expected_stopping_time_nonspit,
                       expected_stopping_time_spit, optimize_accuracy,
                       total_expected_loss, total_expected_loss_equal_priors)
from .sprt import AccuracySpec, SprtState, Verdict, make_accuracy, replay, update

__all__ = [
    "__version__",
    "SpitFilterError", "ParameterError", "FitError", "UnsupportedModelError",
    "StateError", "ProtocolError", "FormatError", "SnapshotError",
    "LabelingError", "HorizonWarning", "RoleInversionWarning",
    "ExponentialPair", "EmpiricalPair", "KlInfo", "MlFit",
    "log_likelihood_ratio", "kl_numbers", "kl_numbers_monte_carlo",
    "fit_exponential_ml", "build_surrogate_model",
    "Verdict", "AccuracySpec", "SprtState", "make_accuracy", "update", "replay",
    "CostSpec", "PlanResult", "expected_stopping_time_spit",
    "expected_stopping_time_nonspit", "expected_loss_spit",
    "expected_loss_nonspit", "total_expected_loss",
    "total_expected_loss_equal_priors", "optimize_accuracy",
]
