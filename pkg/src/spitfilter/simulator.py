"""Monte Carlo harness: seeded trials, aggregate reports, and the three
standard study tables (analytic stopping times, optimized-filter performance,
surrogate-model error rates).

Seeding discipline: trial index k of a run uses the dedicated stream
PCG64(SeedSequence(entropy, spawn_key=(k,))).  Aggregates are therefore
independent of trial ordering, chunking, and worker count.  Multi-cell
tables derive one entropy per cell from the master seed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import __version__
from ._backend import run_trials_exponential, run_trials_pool
from .errors import ParameterError, UnsupportedModelError
from .models import ExponentialPair, KlInfo, kl_numbers, _as_sample_array
from .planning import (CostSpec, expected_stopping_time_nonspit,
                       expected_stopping_time_spit, optimize_accuracy)
from .sprt import AccuracySpec, SprtState, Verdict, make_accuracy, update

__all__ = [
    "ExponentialSource",
    "EmpiricalSource",
    "TrialConfig",
    "TrialOutcome",
    "AggregateReport",
    "Table",
    "sample_duration",
    "run_trial",
    "monte_carlo",
    "derive_entropy",
    "reproduce_table1",
    "reproduce_table2",
    "surrogate_experiment",
    "SCENARIOS",
    "DEFAULT_RATIOS",
    "DEFAULT_SPECS",
    "DEFAULT_COST_SETTINGS",
    "DEFAULT_SURROGATE_SPECS",
]

DEFAULT_MAX_CALLS = 10**6

DEFAULT_RATIOS = (0.99, 0.95, 0.90, 0.70, 0.50, 0.30, 0.10, 0.01)
DEFAULT_SPECS = (0.05, 0.01, 0.001)
# (n_calls, c1/c0) columns of the optimized-performance table.
DEFAULT_COST_SETTINGS = ((500, 1.0), (500, 10.0), (500, 100.0), (5000, 1.0), (5000, 10.0))
DEFAULT_TABLE2_RATIOS = (0.1, 0.2, 0.3, 0.4)
DEFAULT_SURROGATE_SPECS = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)

SCENARIOS = ("model-model", "model-data", "data-model", "data-data")


@dataclass(frozen=True)
class ExponentialSource:
    """Truth-side duration generator: Exp(rate)."""

    rate: float

    def __post_init__(self):
        if not (isinstance(self.rate, (int, float)) and math.isfinite(self.rate)
                and self.rate > 0):
            raise ParameterError(f"rate must be a finite positive number, got {self.rate!r}")
        object.__setattr__(self, "rate", float(self.rate))


@dataclass(frozen=True)
class EmpiricalSource:
    """Truth-side duration generator: uniform resampling from a pool."""

    pool: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pool", _as_sample_array(self.pool, "pool"))


TruthModel = Union[ExponentialSource, EmpiricalSource]


@dataclass(frozen=True)
class TrialConfig:
    """One simulated source: who it really is, and what the filter assumes."""

    truth_model: TruthModel
    filter_model: ExponentialPair
    spec: AccuracySpec
    truth_class: Verdict
    max_calls: int = DEFAULT_MAX_CALLS
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.truth_model, (ExponentialSource, EmpiricalSource)):
            raise ParameterError(f"unknown truth model {type(self.truth_model).__name__}")
        if self.truth_class not in (Verdict.SPIT, Verdict.NONSPIT):
            raise ParameterError("truth_class must be SPIT or NONSPIT")
        if not isinstance(self.max_calls, int) or self.max_calls < 1:
            raise ParameterError(f"max_calls must be an integer >= 1, got {self.max_calls!r}")


@dataclass(frozen=True)
class TrialOutcome:
    verdict: Verdict
    stopping_time: int
    undecided: bool


@dataclass(frozen=True)
class AggregateReport:
    """Aggregate of decided and undecided trials.

    mean_stop/std_stop/se_mean_stop cover decided trials only; std_stop is
    the sample standard deviation of the stopping time and se_mean_stop the
    standard error of its mean (both are reported since error bars are
    quoted either way).
    """

    n_trials: int
    n_errors: int
    n_undecided: int
    mean_stop: float
    std_stop: float
    se_mean_stop: float

    @property
    def error_rate(self) -> float:
        return self.n_errors / self.n_trials

    @property
    def undecided_rate(self) -> float:
        return self.n_undecided / self.n_trials

    @property
    def correct_rate(self) -> float:
        return (self.n_trials - self.n_errors - self.n_undecided) / self.n_trials


def sample_duration(generator: TruthModel, rng: np.random.Generator) -> float:
    """Draw one call duration.

    Exponential path: inverse CDF x = -ln(U)/rate with U uniform on (0, 1]
    (computed as -log1p(-u), u in [0, 1)).  Empirical path: uniform draw
    with replacement, index int(u * pool size).  Both consume exactly one
    uniform, matching the trial kernels draw for draw.
    """
    if isinstance(generator, ExponentialSource):
        return float(rng.standard_exponential(method="inv")) / generator.rate
    if isinstance(generator, EmpiricalSource):
        pool = generator.pool
        return float(pool[int(rng.random() * pool.size)])
    raise UnsupportedModelError(f"cannot sample from {type(generator).__name__}")


def run_trial(config: TrialConfig, rng: np.random.Generator) -> TrialOutcome:
    """One SPRT run to verdict or to the max_calls cap."""
    offset = config.filter_model.llr_offset
    slope = config.filter_model.llr_slope
    state = SprtState()
    for _ in range(config.max_calls):
        x = sample_duration(config.truth_model, rng)
        state, verdict = update(state, config.spec, offset + slope * x)
        if verdict != Verdict.CONTINUE:
            return TrialOutcome(verdict=verdict, stopping_time=state.t, undecided=False)
    return TrialOutcome(verdict=Verdict.CONTINUE, stopping_time=config.max_calls,
                        undecided=True)


def derive_entropy(master_seed: int, *path: int) -> int:
    """Deterministic 128-bit child entropy for a table cell or sub-run."""
    words = np.random.SeedSequence(master_seed, spawn_key=tuple(path)).generate_state(
        4, np.uint32)
    return int.from_bytes(words.tobytes(), "little")


def _run_raw_trials(config: TrialConfig, n_trials: int, entropy, n_jobs: int):
    """Dispatch to the selected kernel; returns (verdicts, stops) arrays."""
    offset = config.filter_model.llr_offset
    slope = config.filter_model.llr_slope
    log_a, log_b = config.spec.log_a, config.spec.log_b

    if isinstance(config.truth_model, ExponentialSource):
        def run_range(first: int, count: int):
            return run_trials_exponential(entropy, first, count,
                                          config.truth_model.rate, offset, slope,
                                          log_a, log_b, config.max_calls)
    else:
        # The pool transform runs once, outside the kernels, so both backends
        # consume identical increment values.
        inc_pool = offset + slope * config.truth_model.pool
        def run_range(first: int, count: int):
            return run_trials_pool(entropy, first, count, inc_pool,
                                   log_a, log_b, config.max_calls)

    if n_jobs <= 1 or n_trials < 2:
        return run_range(0, n_trials)

    verdicts = np.empty(n_trials, dtype=np.int8)
    stops = np.empty(n_trials, dtype=np.int64)
    bounds = np.linspace(0, n_trials, n_jobs + 1).astype(int)
    with ThreadPoolExecutor(max_workers=n_jobs) as executor:
        futures = [(lo, hi, executor.submit(run_range, int(lo), int(hi - lo)))
                   for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        for lo, hi, fut in futures:
            v, s = fut.result()
            verdicts[lo:hi] = v
            stops[lo:hi] = s
    return verdicts, stops


def monte_carlo(config: TrialConfig, n_trials: int,
                master_seed: Optional[int] = None, n_jobs: int = 1) -> AggregateReport:
    """Aggregate n_trials independent seeded runs of config.

    master_seed defaults to config.seed.  Identical inputs give an identical
    report regardless of n_jobs or trial chunking.
    """
    if n_trials < 1:
        raise ParameterError(f"n_trials must be >= 1, got {n_trials!r}")
    entropy = config.seed if master_seed is None else master_seed
    verdicts, stops = _run_raw_trials(config, n_trials, entropy, n_jobs)

    wrong_code = 2 if config.truth_class == Verdict.SPIT else 1
    n_errors = int(np.count_nonzero(verdicts == wrong_code))
    decided = verdicts != 0
    n_decided = int(np.count_nonzero(decided))
    if n_decided > 0:
        dstops = stops[decided]
        mean_stop = float(np.mean(dstops))
        std_stop = float(np.std(dstops, ddof=1)) if n_decided > 1 else math.nan
    else:
        mean_stop = std_stop = math.nan
    se = std_stop / math.sqrt(n_decided) if n_decided > 1 else math.nan
    return AggregateReport(
        n_trials=n_trials,
        n_errors=n_errors,
        n_undecided=n_trials - n_decided,
        mean_stop=mean_stop,
        std_stop=std_stop,
        se_mean_stop=se,
    )


@dataclass(frozen=True)
class Table:
    """A report: named columns, plain-value rows, and a metadata header."""

    title: str
    columns: tuple
    rows: tuple
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# spitfilter-report v{__version__} title={self.title}\n")
        if self.meta:
            pairs = " ".join(f"{k}={v}" for k, v in sorted(self.meta.items()))
            buf.write(f"# {pairs}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow(["" if v is None else v for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": "spitfilter-report",
                "version": __version__,
                "title": self.title,
                "meta": self.meta,
                "columns": list(self.columns),
                "rows": [list(row) for row in self.rows],
            },
            indent=2,
            sort_keys=True,
        ) + "\n"


def reproduce_table1(ratios=DEFAULT_RATIOS, specs=DEFAULT_SPECS) -> Table:
    """Analytic difficulty table: information numbers and expected stopping
    times for each rate ratio under each symmetric accuracy setting."""
    columns = ["ratio", "kappa0", "kappa1"]
    for s in specs:
        columns += [f"e_spit_t_{s:g}", f"e_nonspit_t_{s:g}"]
    rows = []
    for r in ratios:
        kl = kl_numbers(ExponentialPair(lambda0=1.0, lambda1=float(r)))
        row = [float(r), kl.kappa0, kl.kappa1]
        for s in specs:
            row.append(expected_stopping_time_spit(s, s, kl.kappa0))
            row.append(expected_stopping_time_nonspit(s, s, kl.kappa1))
        rows.append(tuple(row))
    return Table(
        title="analytic-stopping-times",
        columns=tuple(columns),
        rows=tuple(rows),
        meta={"specs": ",".join(f"{s:g}" for s in specs)},
    )


def reproduce_table2(ratios=DEFAULT_TABLE2_RATIOS, cost_settings=DEFAULT_COST_SETTINGS,
                     n_trials: int = 100_000, master_seed: int = 0,
                     lower_bound: float = 1e-4, c0: float = 1.0,
                     n_jobs: int = 1) -> Table:
    """Optimized-filter performance: for each (ratio, horizon, cost ratio)
    cell, plan (alpha*, beta*), then measure mistakes and mean stopping time
    over seeded trials with a true SPIT source.  n_trials=0 keeps only the
    analytic columns."""
    columns = ("ratio", "n_calls", "cost_ratio", "alpha_star", "beta_star",
               "n_errors", "mean_stop")
    rows = []
    cell = 0
    for r in ratios:
        pair = ExponentialPair(lambda0=1.0, lambda1=float(r))
        kl = kl_numbers(pair)
        for n_calls, k in cost_settings:
            cost = CostSpec(c0=c0, c1=c0 * k, n_calls=int(n_calls), prior_spit=0.5)
            plan = optimize_accuracy(cost, kl, lower_bound=lower_bound)
            if n_trials > 0:
                config = TrialConfig(
                    truth_model=ExponentialSource(rate=pair.lambda0),
                    filter_model=pair,
                    spec=make_accuracy(plan.alpha_star, plan.beta_star),
                    truth_class=Verdict.SPIT,
                    max_calls=int(n_calls),
                    seed=derive_entropy(master_seed, cell),
                )
                rep = monte_carlo(config, n_trials, n_jobs=n_jobs)
                n_err, mean_stop = rep.n_errors, rep.mean_stop
            else:
                n_err = mean_stop = None
            rows.append((float(r), int(n_calls), float(k),
                         plan.alpha_star, plan.beta_star, n_err, mean_stop))
            cell += 1
    return Table(
        title="optimized-filter-performance",
        columns=columns,
        rows=tuple(rows),
        meta={"seed": master_seed, "trials": n_trials, "lower_bound": lower_bound,
              "c0": c0},
    )


def surrogate_experiment(dataset, scenario: str, specs=DEFAULT_SURROGATE_SPECS,
                         n_trials: int = 10_000, master_seed: int = 0,
                         max_calls: int = DEFAULT_MAX_CALLS, n_jobs: int = 1) -> Table:
    """Mismatch study on a labeled dataset.

    The filter always runs the exponential pair fitted to the dataset's two
    pools.  The truth-side generators vary by scenario, named
    "<spit-source>-<nonspit-source>" with source "model" (the fitted
    exponential, so truth matches the filter) or "data" (resampling the raw
    pool, so truth need not match).  One report row per (accuracy, truth
    class) cell.
    """
    from .ingestion import LabeledDataset

    if not isinstance(dataset, LabeledDataset):
        raise ParameterError("dataset must be a LabeledDataset with both pools populated")
    if scenario not in SCENARIOS:
        raise ParameterError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")

    from .ingestion import dataset_to_models

    pair, _kl = dataset_to_models(dataset)
    spit_pool = dataset.spit_durations
    nonspit_pool = dataset.nonspit_durations
    spit_kind, nonspit_kind = scenario.split("-")
    truth_sources = {
        Verdict.SPIT: (ExponentialSource(rate=pair.lambda0) if spit_kind == "model"
                       else EmpiricalSource(pool=spit_pool)),
        Verdict.NONSPIT: (ExponentialSource(rate=pair.lambda1) if nonspit_kind == "model"
                          else EmpiricalSource(pool=nonspit_pool)),
    }

    columns = ("scenario", "alpha_beta", "truth", "n_trials", "n_errors",
               "error_rate", "mean_stop", "std_stop", "undecided_rate")
    rows = []
    cell = 0
    for s in specs:
        spec = make_accuracy(float(s), float(s))
        for truth_class in (Verdict.SPIT, Verdict.NONSPIT):
            config = TrialConfig(
                truth_model=truth_sources[truth_class],
                filter_model=pair,
                spec=spec,
                truth_class=truth_class,
                max_calls=max_calls,
                seed=derive_entropy(master_seed, cell),
            )
            rep = monte_carlo(config, n_trials, n_jobs=n_jobs)
            rows.append((scenario, float(s), truth_class.name, n_trials,
                         rep.n_errors, rep.error_rate, rep.mean_stop,
                         rep.std_stop, rep.undecided_rate))
            cell += 1
    return Table(
        title="surrogate-mismatch",
        columns=columns,
        rows=tuple(rows),
        meta={"seed": master_seed, "trials": n_trials, "scenario": scenario,
              "lambda0": pair.lambda0, "lambda1": pair.lambda1,
              "max_calls": max_calls},
    )
