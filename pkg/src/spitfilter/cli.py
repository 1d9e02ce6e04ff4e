"""Operator command line: fit, plan, simulate, filter.

Exit codes: 0 success, 2 usage error, 3 input or data error, 4 internal
error.  The SPITFILTER_SEED environment variable supplies the default seed
when --seed is not given.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import replace as dc_replace

from . import __version__
from .engine import EngineAction, FilterEngine
from .errors import ParameterError, SpitFilterError
from .ingestion import (DEFAULT_FRACTION, DEFAULT_THRESHOLD_S, dataset_manifest,
                        dataset_to_models, label_by_duration_rule, label_explicit,
                        parse_cdr)
from .models import ExponentialPair, kl_numbers
from .planning import CostSpec, optimize_accuracy
from .simulator import (DEFAULT_MAX_CALLS, DEFAULT_RATIOS, DEFAULT_SPECS,
                        DEFAULT_SURROGATE_SPECS, SCENARIOS, reproduce_table1,
                        reproduce_table2, surrogate_experiment)
from .sprt import make_accuracy

EVENTLOG_HEADER = f"# spitfilter-eventlog v1 spitfilter={__version__}"


def _resolve_seed(value):
    if value is not None:
        return value
    raw = os.environ.get("SPITFILTER_SEED", "").strip()
    if not raw:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ParameterError(f"SPITFILTER_SEED must be an integer, got {raw!r}")


def _read_records(path: str):
    """Parse a CDR file (or '-' for stdin); row errors go to stderr."""
    if path == "-":
        result = parse_cdr(sys.stdin)
    else:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            result = parse_cdr(fh)
    for err in result.errors:
        print(f"line {err.line}: {err.message}", file=sys.stderr)
    return result


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_dataset(args, records):
    """Label parsed records, honoring explicit labels when present."""
    labeled = bool(records) and records[0].label is not None
    if labeled:
        if args.threshold is not None or args.fraction is not None:
            raise ParameterError(
                "input carries explicit labels; --threshold/--fraction do not apply")
        return label_explicit(records)
    threshold = DEFAULT_THRESHOLD_S if args.threshold is None else args.threshold
    fraction = DEFAULT_FRACTION if args.fraction is None else args.fraction
    return label_by_duration_rule(records, threshold_s=threshold, fraction=fraction,
                                  seed=_resolve_seed(args.seed))


def _format_kv(pairs, seed) -> str:
    lines = [f"# spitfilter v{__version__} seed={seed}"]
    width = max(len(k) for k, _ in pairs)
    for k, v in pairs:
        lines.append(f"{k:<{width}}  {v!r}" if isinstance(v, float) else f"{k:<{width}}  {v}")
    return "\n".join(lines) + "\n"


def cmd_fit(args) -> int:
    seed = _resolve_seed(args.seed)
    result = _read_records(args.input)
    dataset = _load_dataset(args, result.records)
    pair, kl = dataset_to_models(dataset)
    manifest = dataset_manifest(dataset, pair, kl)
    manifest["seed"] = seed
    manifest["version"] = __version__
    manifest["skipped_rows"] = result.n_skipped
    if args.json:
        _emit(json.dumps(manifest, indent=2, sort_keys=True) + "\n", args.out)
    else:
        _emit(_format_kv(sorted(manifest.items()), seed), args.out)
    return 0


def cmd_plan(args) -> int:
    seed = _resolve_seed(args.seed)
    if args.dataset is not None:
        if args.lambda0 is not None or args.lambda1 is not None:
            raise ParameterError("give either --dataset or --lambda0/--lambda1, not both")
        result = _read_records(args.dataset)
        pair, kl = dataset_to_models(_load_dataset(args, result.records))
    else:
        if args.lambda0 is None or args.lambda1 is None:
            raise ParameterError("need --lambda0 and --lambda1 (or --dataset)")
        pair = ExponentialPair(lambda0=args.lambda0, lambda1=args.lambda1)
        kl = kl_numbers(pair)
    cost = CostSpec(c0=args.c0, c1=args.c1, n_calls=args.n_calls,
                    prior_spit=args.prior_spit)
    plan = optimize_accuracy(cost, kl, lower_bound=args.lower_bound)

    payload = {
        "lambda0": pair.lambda0,
        "lambda1": pair.lambda1,
        "kappa0": kl.kappa0,
        "kappa1": kl.kappa1,
        "alpha_star": plan.alpha_star,
        "beta_star": plan.beta_star,
        "expected_loss": plan.expected_loss,
        "e_t_spit": plan.e_t_spit,
        "e_t_nonspit": plan.e_t_nonspit,
    }
    try:
        spec = make_accuracy(plan.alpha_star, plan.beta_star)
        payload["log_a"] = spec.log_a
        payload["log_b"] = spec.log_b
        payload["wald_a"] = math.exp(spec.log_a)
        payload["wald_b"] = math.exp(spec.log_b)
    except ParameterError:
        payload["note"] = "optimum not usable as test thresholds (alpha + beta >= 1)"
    if cost.c0 == 0.0 and cost.c1 == 0.0:
        payload["note"] = "objective is flat; returning the smallest corner"
    if args.json:
        payload["seed"] = seed
        payload["version"] = __version__
        _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    else:
        _emit(_format_kv(list(payload.items()), seed), args.out)
    return 0


def _parse_float_list(text, fallback):
    if text is None:
        return fallback
    try:
        values = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ParameterError(f"expected a comma-separated list of numbers, got {text!r}")
    if not values:
        raise ParameterError("empty list")
    return values


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args.seed)
    if args.table == "1":
        ratios = _parse_float_list(args.ratios, DEFAULT_RATIOS)
        specs = _parse_float_list(args.specs, DEFAULT_SPECS)
        table = reproduce_table1(ratios=ratios, specs=specs)
        table = dc_replace(table, meta={**table.meta, "seed": seed})
    elif args.table == "2":
        ratios = _parse_float_list(args.ratios, (0.1, 0.2, 0.3, 0.4))
        trials = 100_000 if args.trials is None else args.trials
        table = reproduce_table2(ratios=ratios, n_trials=trials, master_seed=seed,
                                 lower_bound=args.lower_bound, n_jobs=args.jobs)
    else:
        if args.dataset is None:
            raise ParameterError("simulate --table surrogate needs --dataset")
        result = _read_records(args.dataset)
        dataset = _load_dataset(args, result.records)
        specs = _parse_float_list(args.specs, DEFAULT_SURROGATE_SPECS)
        trials = 10_000 if args.trials is None else args.trials
        max_calls = DEFAULT_MAX_CALLS if args.max_calls is None else args.max_calls
        table = surrogate_experiment(dataset, args.scenario, specs=specs,
                                     n_trials=trials, master_seed=seed,
                                     max_calls=max_calls, n_jobs=args.jobs)
    _emit(table.to_json() if args.json else table.to_csv(), args.out)
    return 0


def cmd_filter(args) -> int:
    model = ExponentialPair(lambda0=args.lambda0, lambda1=args.lambda1)
    spec = make_accuracy(args.alpha, args.beta)
    if args.resume is not None:
        engine = FilterEngine.restore(args.resume, model, spec)
    else:
        engine = FilterEngine(model, spec)
    result = _read_records(args.input)

    out = io.StringIO()
    out.write(EVENTLOG_HEADER + "\n")
    writer = csv.writer(out, lineterminator="\n")
    for record in result.records:
        action = engine.on_call_request(record.source_id)
        writer.writerow([record.timestamp, record.source_id, "REQUEST", action.value])
        if action is EngineAction.ACCEPT:
            engine.on_call_completed(record.source_id, record.duration)
            writer.writerow([record.timestamp, record.source_id, "COMPLETE",
                             repr(record.duration)])
    _emit(out.getvalue(), args.log)
    if args.snapshot_out is not None:
        engine.save_snapshot(args.snapshot_out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spitfilter",
        description="Sequential screening of outbound call sources by call duration.")
    parser.add_argument("--version", action="version", version=f"spitfilter {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit per-class duration models from a call-record CSV")
    fit.add_argument("input", help="CSV with source_id,timestamp,duration[,label] ('-' reads stdin)")
    fit.add_argument("--threshold", type=float, default=None,
                     help=f"short-call cutoff in seconds (default {DEFAULT_THRESHOLD_S:g})")
    fit.add_argument("--fraction", type=float, default=None,
                     help=f"fraction of short calls labeled SPIT (default {DEFAULT_FRACTION:g})")
    fit.add_argument("--seed", type=int, default=None, help="labeling seed")
    fit.add_argument("--json", action="store_true", help="machine-readable output")
    fit.add_argument("--out", default=None, help="write output to this path")
    fit.set_defaults(func=cmd_fit)

    plan = sub.add_parser("plan", help="choose loss-minimizing error probabilities")
    plan.add_argument("--c0", type=float, required=True, help="cost per accepted SPIT call")
    plan.add_argument("--c1", type=float, required=True, help="cost per blocked NON-SPIT call")
    plan.add_argument("--n-calls", type=int, required=True, help="call horizon N")
    plan.add_argument("--prior-spit", type=float, default=0.5)
    plan.add_argument("--lower-bound", type=float, default=1e-4)
    plan.add_argument("--lambda0", type=float, default=None, help="SPIT duration rate (1/s)")
    plan.add_argument("--lambda1", type=float, default=None, help="NON-SPIT duration rate (1/s)")
    plan.add_argument("--dataset", default=None, help="fit the model from this CSV instead")
    plan.add_argument("--threshold", type=float, default=None)
    plan.add_argument("--fraction", type=float, default=None)
    plan.add_argument("--seed", type=int, default=None)
    plan.add_argument("--json", action="store_true")
    plan.add_argument("--out", default=None)
    plan.set_defaults(func=cmd_plan)

    sim = sub.add_parser("simulate", help="run the Monte Carlo study tables")
    sim.add_argument("--table", required=True, choices=["1", "2", "surrogate"],
                     help="1: analytic stopping times; 2: optimized filter; "
                          "surrogate: model-mismatch study")
    sim.add_argument("--trials", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--jobs", type=int, default=1, help="worker threads for trials")
    sim.add_argument("--ratios", default=None, help="comma-separated rate ratios")
    sim.add_argument("--specs", default=None,
                     help="comma-separated symmetric error probabilities")
    sim.add_argument("--lower-bound", type=float, default=1e-4)
    sim.add_argument("--dataset", default=None, help="CSV for the surrogate study")
    sim.add_argument("--threshold", type=float, default=None)
    sim.add_argument("--fraction", type=float, default=None)
    sim.add_argument("--scenario", default="data-data", choices=list(SCENARIOS))
    sim.add_argument("--max-calls", type=int, default=None)
    sim.add_argument("--json", action="store_true")
    sim.add_argument("--out", default=None)
    sim.set_defaults(func=cmd_simulate)

    flt = sub.add_parser("filter", help="replay call records through the engine")
    flt.add_argument("input", help="CSV path ('-' reads stdin)")
    flt.add_argument("--lambda0", type=float, required=True)
    flt.add_argument("--lambda1", type=float, required=True)
    flt.add_argument("--alpha", type=float, required=True)
    flt.add_argument("--beta", type=float, required=True)
    flt.add_argument("--resume", default=None, help="restore engine state from this snapshot")
    flt.add_argument("--snapshot-out", default=None, help="write the final snapshot here")
    flt.add_argument("--log", default=None, help="write the event log here instead of stdout")
    flt.set_defaults(func=cmd_filter)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SpitFilterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
