"""Sequential probability ratio test: thresholds, state, one-step update.

The running statistic is Lambda_t, the summed log ratio of the NON-SPIT
density over the SPIT density.  Low values accuse the source, high values
clear it.  Crossings are non-strict: a test decides exactly when
Lambda_t <= log_a (SPIT) or Lambda_t >= log_b (NON-SPIT).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .errors import ParameterError, StateError
from .models import ExponentialPair, log_likelihood_ratio

__all__ = ["Verdict", "AccuracySpec", "SprtState", "make_accuracy", "update", "replay"]


class Verdict(enum.IntEnum):
    """Test outcome / state tag. CONTINUE doubles as the observing status."""

    CONTINUE = 0
    SPIT = 1
    NONSPIT = 2

    # Alias used when the value describes a state rather than a step outcome.
    OBSERVING = 0


@dataclass(frozen=True)
class AccuracySpec:
    """Target error probabilities and the log decision thresholds.

    alpha: P(decide NON-SPIT | source is SPIT)
    beta:  P(decide SPIT | source is NON-SPIT)
    log_a = log(beta / (1 - alpha)) < 0 < log_b = log((1 - beta) / alpha)
    """

    alpha: float
    beta: float
    log_a: float
    log_b: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0 and 0.0 < self.beta < 1.0):
            raise ParameterError(
                f"alpha and beta must lie in (0, 1), got {self.alpha!r}, {self.beta!r}")
        if self.alpha + self.beta >= 1.0:
            raise ParameterError(
                f"alpha + beta must be < 1, got {self.alpha!r} + {self.beta!r}")
        if not (self.log_a < 0.0 < self.log_b):
            raise ParameterError("thresholds must satisfy log_a < 0 < log_b")


def make_accuracy(alpha: float, beta: float) -> AccuracySpec:
    if not (isinstance(alpha, (int, float)) and isinstance(beta, (int, float))):
        raise ParameterError("alpha and beta must be numbers")
    if not (math.isfinite(alpha) and math.isfinite(beta)):
        raise ParameterError("alpha and beta must be finite")
    if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0) or alpha + beta >= 1.0:
        raise ParameterError(
            f"need 0 < alpha < 1, 0 < beta < 1, alpha + beta < 1; got {alpha!r}, {beta!r}")
    log_a = math.log(beta) - math.log1p(-alpha)
    log_b = math.log1p(-beta) - math.log(alpha)
    return AccuracySpec(alpha=float(alpha), beta=float(beta), log_a=log_a, log_b=log_b)


@dataclass(frozen=True)
class SprtState:
    """Immutable per-source test state; the default value is a fresh test."""

    log_lambda: float = 0.0
    t: int = 0
    status: Verdict = Verdict.OBSERVING


def update(state: SprtState, spec: AccuracySpec, llr_increment: float) -> tuple[SprtState, Verdict]:
    """Consume one observation's log-ratio increment.

    Returns the successor state and the step verdict.  Updating a decided
    state is an error; callers keep terminal states frozen.
    """
    if state.status != Verdict.OBSERVING:
        raise StateError(f"test already decided ({state.status.name}); no further updates")
    if not isinstance(llr_increment, (int, float)) or not math.isfinite(llr_increment):
        raise ParameterError(f"increment must be finite, got {llr_increment!r}")
    log_lambda = float(state.log_lambda + llr_increment)
    t = state.t + 1
    if log_lambda <= spec.log_a:
        verdict = Verdict.SPIT
    elif log_lambda >= spec.log_b:
        verdict = Verdict.NONSPIT
    else:
        verdict = Verdict.CONTINUE
    return replace(state, log_lambda=log_lambda, t=t, status=verdict), verdict


def replay(observations, model: ExponentialPair, spec: AccuracySpec) -> tuple[Verdict, int]:
    """Batch equivalent of repeated update calls over raw durations.

    Returns the first terminal verdict and the number of observations
    consumed, or (CONTINUE, len(observations)) if the sequence runs out
    undecided.  An empty sequence yields (CONTINUE, 0).
    """
    state = SprtState()
    for x in observations:
        state, verdict = update(state, spec, log_likelihood_ratio(model, x))
        if verdict != Verdict.CONTINUE:
            return verdict, state.t
    return Verdict.CONTINUE, state.t
