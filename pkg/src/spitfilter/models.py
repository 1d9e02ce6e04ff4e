"""Likelihood models for call durations.

Two hypotheses are compared throughout: class 0 (SPIT, rate lambda0) and
class 1 (NON-SPIT, rate lambda1).  All ratio arithmetic happens in log
space; raw densities are never evaluated.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import FitError, ParameterError, RoleInversionWarning, UnsupportedModelError

__all__ = [
    "ExponentialPair",
    "EmpiricalPair",
    "KlInfo",
    "MlFit",
    "log_likelihood_ratio",
    "kl_numbers",
    "kl_numbers_monte_carlo",
    "fit_exponential_ml",
    "build_surrogate_model",
]

# Relative tolerance below which two rates are considered identical and the
# model is rejected as degenerate (the test would never terminate).
EQUAL_RATE_RTOL = 1e-12


@dataclass(frozen=True)
class ExponentialPair:
    """Exponential duration densities for the two classes.

    lambda0 is the SPIT rate, lambda1 the NON-SPIT rate, both in 1/seconds.
    """

    lambda0: float
    lambda1: float

    def __post_init__(self):
        for name in ("lambda0", "lambda1"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
                raise ParameterError(f"{name} must be a finite positive rate, got {v!r}")
            object.__setattr__(self, name, float(v))
        if abs(self.lambda0 - self.lambda1) <= EQUAL_RATE_RTOL * max(self.lambda0, self.lambda1):
            raise ParameterError(
                f"rates are equal within tolerance ({self.lambda0!r} vs {self.lambda1!r}); "
                "the test would never terminate"
            )

    @property
    def ratio(self) -> float:
        return self.lambda1 / self.lambda0

    @property
    def llr_offset(self) -> float:
        """Constant term of the per-call log-likelihood-ratio increment."""
        return math.log(self.lambda1 / self.lambda0)

    @property
    def llr_slope(self) -> float:
        """Duration coefficient of the increment."""
        return self.lambda0 - self.lambda1

    @property
    def role_inverted(self) -> bool:
        """True when NON-SPIT calls are modeled as shorter than SPIT calls."""
        return self.lambda1 >= self.lambda0


def _as_sample_array(samples, what: str) -> np.ndarray:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ParameterError(f"{what} must be a non-empty 1-d sequence of durations")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ParameterError(f"{what} must contain only finite durations >= 0")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EmpiricalPair:
    """Raw duration pools for the two classes, used on the surrogate path."""

    spit_samples: np.ndarray
    nonspit_samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "spit_samples",
                           _as_sample_array(self.spit_samples, "spit_samples"))
        object.__setattr__(self, "nonspit_samples",
                           _as_sample_array(self.nonspit_samples, "nonspit_samples"))


@dataclass(frozen=True)
class KlInfo:
    """Kullback-Leibler information numbers (nats); kappa0 < 0 < kappa1."""

    kappa0: float
    kappa1: float


@dataclass(frozen=True)
class MlFit:
    lambda_ml: float
    n: int
    mean: float


def log_likelihood_ratio(model: ExponentialPair, x: float) -> float:
    """Per-call increment log(lambda1/lambda0) + (lambda0 - lambda1) * x."""
    if not isinstance(model, ExponentialPair):
        raise UnsupportedModelError(f"no closed-form ratio for {type(model).__name__}")
    if not math.isfinite(x) or x < 0:
        raise ParameterError(f"duration must be finite and >= 0, got {x!r}")
    # plain float even when x arrives as a numpy scalar
    return float(model.llr_offset + model.llr_slope * x)


def kl_numbers(model: ExponentialPair) -> KlInfo:
    """Closed-form information numbers; depend only on r = lambda1/lambda0."""
    if not isinstance(model, ExponentialPair):
        raise UnsupportedModelError(f"no closed form for {type(model).__name__}")
    r = model.lambda1 / model.lambda0
    log_r = math.log(r)
    return KlInfo(kappa0=log_r + 1.0 - r, kappa1=log_r - 1.0 + 1.0 / r)


def kl_numbers_monte_carlo(model, n_samples: int, seed: int) -> KlInfo:
    """Sample-mean estimates of the information numbers.

    For an ExponentialPair, durations are drawn from each class density by
    inverse CDF.  For an EmpiricalPair, an exponential surrogate is fitted to
    the pools and the expectations are taken under pool resampling.
    Deterministic for a given seed.
    """
    if n_samples < 1000:
        raise ParameterError(f"n_samples must be >= 1000, got {n_samples}")
    rng = np.random.default_rng(seed)
    if isinstance(model, ExponentialPair):
        scorer = model
        x0 = rng.standard_exponential(n_samples, method="inv") / model.lambda0
        x1 = rng.standard_exponential(n_samples, method="inv") / model.lambda1
    elif isinstance(model, EmpiricalPair):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RoleInversionWarning)
            scorer = build_surrogate_model(model.spit_samples, model.nonspit_samples)
        x0 = _resample(model.spit_samples, n_samples, rng)
        x1 = _resample(model.nonspit_samples, n_samples, rng)
    else:
        raise UnsupportedModelError(f"cannot sample from {type(model).__name__}")
    kappa0 = float(np.mean(scorer.llr_offset + scorer.llr_slope * x0))
    kappa1 = float(np.mean(scorer.llr_offset + scorer.llr_slope * x1))
    return KlInfo(kappa0=kappa0, kappa1=kappa1)


def _resample(pool: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    # Uniform with replacement via idx = int(u * len(pool)), the same
    # convention the trial kernels use.
    idx = (rng.random(n) * len(pool)).astype(np.int64)
    return pool[idx]


def fit_exponential_ml(samples) -> MlFit:
    """Maximum-likelihood exponential rate: n over the sample sum."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise FitError("need a non-empty 1-d sequence of durations")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise FitError("samples must be finite and >= 0")
    n = int(arr.size)
    total = math.fsum(arr)
    if total <= 0.0:
        raise FitError("all samples are zero; rate is unbounded")
    return MlFit(lambda_ml=n / total, n=n, mean=total / n)


def build_surrogate_model(spit_samples, nonspit_samples) -> ExponentialPair:
    """Fit one rate per class and return the resulting pair.

    Rate order is data-driven.  When the fitted NON-SPIT rate is not smaller
    than the SPIT rate (NON-SPIT calls modeled as shorter), the pair is still
    returned but a RoleInversionWarning is emitted and the pair's
    role_inverted property reads True.
    """
    lam0 = fit_exponential_ml(spit_samples).lambda_ml
    lam1 = fit_exponential_ml(nonspit_samples).lambda_ml
    pair = ExponentialPair(lambda0=lam0, lambda1=lam1)
    if pair.role_inverted:
        warnings.warn(
            "fitted NON-SPIT calls are not longer than SPIT calls "
            f"(lambda0={lam0:.6g} <= lambda1={lam1:.6g})",
            RoleInversionWarning,
            stacklevel=2,
        )
    return pair
