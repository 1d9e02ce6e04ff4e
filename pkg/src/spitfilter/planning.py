"""Analytical performance formulas and the loss-minimizing accuracy planner.

Expected stopping times follow Wald's approximations (boundary overshoot
neglected); the loss model prices accepted SPIT calls at c0 each and blocked
NON-SPIT calls at c1 each over a horizon of n_calls.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import HorizonWarning, ParameterError
from .models import KlInfo

__all__ = [
    "CostSpec",
    "PlanResult",
    "expected_stopping_time_spit",
    "expected_stopping_time_nonspit",
    "expected_loss_spit",
    "expected_loss_nonspit",
    "total_expected_loss",
    "total_expected_loss_equal_priors",
    "optimize_accuracy",
]

GRID_POINTS = 61
REFINE_MAX_ITER = 500
REFINE_REL_TOL = 1e-12


@dataclass(frozen=True)
class CostSpec:
    """Mistake costs and horizon: c0 per accepted SPIT call, c1 per blocked
    NON-SPIT call, over n_calls calls, with prior P(source is SPIT)."""

    c0: float
    c1: float
    n_calls: int
    prior_spit: float = 0.5

    def __post_init__(self):
        for name in ("c0", "c1"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ParameterError(f"{name} must be finite and >= 0, got {v!r}")
            object.__setattr__(self, name, float(v))
        if not isinstance(self.n_calls, int) or self.n_calls < 1:
            raise ParameterError(f"n_calls must be an integer >= 1, got {self.n_calls!r}")
        if not (math.isfinite(self.prior_spit) and 0.0 <= self.prior_spit <= 1.0):
            raise ParameterError(f"prior_spit must lie in [0, 1], got {self.prior_spit!r}")
        object.__setattr__(self, "prior_spit", float(self.prior_spit))


@dataclass(frozen=True)
class PlanResult:
    alpha_star: float
    beta_star: float
    expected_loss: float
    e_t_spit: float
    e_t_nonspit: float


def _check_error_prob(name: str, v: float) -> None:
    if not (isinstance(v, (int, float)) and math.isfinite(v) and 0.0 < v < 1.0):
        raise ParameterError(f"{name} must lie in (0, 1), got {v!r}")


def expected_stopping_time_spit(alpha: float, beta: float, kappa0: float) -> float:
    """Mean observations to a verdict when the source really is SPIT."""
    _check_error_prob("alpha", alpha)
    _check_error_prob("beta", beta)
    if not (math.isfinite(kappa0) and kappa0 < 0.0):
        raise ParameterError(f"kappa0 must be negative, got {kappa0!r}")
    term_b = math.log1p(-beta) - math.log(alpha)    # log((1-beta)/alpha)
    term_a = math.log(beta) - math.log1p(-alpha)    # log(beta/(1-alpha))
    return (alpha * term_b + (1.0 - alpha) * term_a) / kappa0


def expected_stopping_time_nonspit(alpha: float, beta: float, kappa1: float) -> float:
    """Mean observations to a verdict when the source really is NON-SPIT."""
    _check_error_prob("alpha", alpha)
    _check_error_prob("beta", beta)
    if not (math.isfinite(kappa1) and kappa1 > 0.0):
        raise ParameterError(f"kappa1 must be positive, got {kappa1!r}")
    term_a = math.log(beta) - math.log1p(-alpha)
    term_b = math.log1p(-beta) - math.log(alpha)
    return (beta * term_a + (1.0 - beta) * term_b) / kappa1


def expected_loss_spit(alpha: float, beta: float, cost: CostSpec, kappa0: float) -> float:
    e_t = expected_stopping_time_spit(alpha, beta, kappa0)
    return alpha * cost.c0 * cost.n_calls + cost.c0 * (1.0 - alpha) * e_t


def expected_loss_nonspit(alpha: float, beta: float, cost: CostSpec, kappa1: float) -> float:
    e_t = expected_stopping_time_nonspit(alpha, beta, kappa1)
    if e_t > cost.n_calls:
        warnings.warn(
            f"expected test length {e_t:.1f} exceeds the horizon n_calls={cost.n_calls}",
            HorizonWarning,
            stacklevel=2,
        )
    return beta * cost.c1 * (cost.n_calls - e_t)


def total_expected_loss(alpha: float, beta: float, cost: CostSpec, kl: KlInfo) -> float:
    """Prior-weighted mixture of the two per-class expected losses."""
    return (cost.prior_spit * expected_loss_spit(alpha, beta, cost, kl.kappa0)
            + (1.0 - cost.prior_spit) * expected_loss_nonspit(alpha, beta, cost, kl.kappa1))


def total_expected_loss_equal_priors(alpha: float, beta: float, cost: CostSpec, kl: KlInfo) -> float:
    """Closed-form total loss for prior 1/2, used as an independent cross-check
    of the mixture formulation."""
    _check_error_prob("alpha", alpha)
    _check_error_prob("beta", beta)
    term_b = math.log1p(-beta) - math.log(alpha)
    term_a = math.log(beta) - math.log1p(-alpha)
    inner_b = (cost.c0 * alpha * (1.0 - alpha) / kl.kappa0
               - cost.c1 * beta * (1.0 - beta) / kl.kappa1)
    inner_a = (cost.c0 * (1.0 - alpha) ** 2 / kl.kappa0
               - cost.c1 * beta ** 2 / kl.kappa1)
    return 0.5 * (cost.n_calls * (alpha * cost.c0 + beta * cost.c1)
                  + term_b * inner_b + term_a * inner_a)


def optimize_accuracy(cost: CostSpec, kl: KlInfo, lower_bound: float = 1e-4) -> PlanResult:
    """Minimize the total expected loss over (alpha, beta) in [lower_bound, 0.5]^2.

    Logarithmic grid scan (GRID_POINTS per axis, ascending) followed by
    Nelder-Mead refinement in log coordinates from the best grid point.  The
    refined point is kept only when strictly better, so the result is never
    worse than the grid optimum.  Ties on a flat objective resolve to the
    componentwise-smallest candidate.
    """
    if not (0.0 < lower_bound < 0.5):
        raise ParameterError(f"lower_bound must lie in (0, 0.5), got {lower_bound!r}")
    if not (math.isfinite(kl.kappa0) and kl.kappa0 < 0.0 < kl.kappa1 and math.isfinite(kl.kappa1)):
        raise ParameterError(f"need kappa0 < 0 < kappa1, got {kl.kappa0!r}, {kl.kappa1!r}")

    grid = np.geomspace(lower_bound, 0.5, GRID_POINTS)
    grid[0], grid[-1] = lower_bound, 0.5    # geomspace endpoints, exactly

    best_a = best_b = None
    best_loss = math.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HorizonWarning)

        def objective(a: float, b: float) -> float:
            return total_expected_loss(a, b, cost, kl)

        # Ascending scan with strict improvement: the first of any set of
        # tied candidates wins, which is the componentwise-smallest one.
        for a in grid:
            for b in grid:
                loss = objective(float(a), float(b))
                if loss < best_loss:
                    best_a, best_b, best_loss = float(a), float(b), loss

        lo, hi = math.log(lower_bound), math.log(0.5)

        def log_objective(z):
            return objective(math.exp(z[0]), math.exp(z[1]))

        res = minimize(
            log_objective,
            x0=[math.log(best_a), math.log(best_b)],
            method="Nelder-Mead",
            bounds=[(lo, hi), (lo, hi)],
            options={
                "maxiter": REFINE_MAX_ITER,
                "fatol": REFINE_REL_TOL * max(1.0, abs(best_loss)),
                "xatol": 1e-12,
            },
        )
        cand_a = min(max(math.exp(res.x[0]), lower_bound), 0.5)
        cand_b = min(max(math.exp(res.x[1]), lower_bound), 0.5)
        cand_loss = objective(cand_a, cand_b)
        if cand_loss < best_loss:
            best_a, best_b, best_loss = cand_a, cand_b, cand_loss

    # Final evaluation outside the suppression so a horizon violation at the
    # optimum still surfaces to the caller.
    final_loss = total_expected_loss(best_a, best_b, cost, kl)
    return PlanResult(
        alpha_star=best_a,
        beta_star=best_b,
        expected_loss=final_loss,
        e_t_spit=expected_stopping_time_spit(best_a, best_b, kl.kappa0),
        e_t_nonspit=expected_stopping_time_nonspit(best_a, best_b, kl.kappa1),
    )
