"""Time the compiled trial kernel against the pure-numpy fallback.

Runs the same seeded workloads through both backends, checks the outputs
are bitwise identical, and prints wall times with the speedup.

Usage: python benchmarks/bench_backends.py [--repeat N]
"""

import argparse
import importlib
import math
import time

import numpy as np

from spitfilter.models import ExponentialPair
from spitfilter.sprt import make_accuracy


def _workloads():
    out = []
    for ratio, alpha, n_trials in ((0.1, 0.001, 200_000), (0.5, 0.001, 50_000),
                                   (0.9, 0.01, 2_000)):
        pair = ExponentialPair(lambda0=1.0, lambda1=ratio)
        spec = make_accuracy(alpha, alpha)
        args = dict(entropy=12345, first_trial=0, n_trials=n_trials,
                    lam_truth=1.0, offset=pair.llr_offset, slope=pair.llr_slope,
                    log_a=spec.log_a, log_b=spec.log_b, max_steps=10**6)
        out.append((f"exponential ratio={ratio} a=b={alpha}", "run_trials_exponential", args))

    pool_rng = np.random.default_rng(7)
    pair = ExponentialPair(lambda0=1.0, lambda1=0.3)
    spec = make_accuracy(0.001, 0.001)
    increments = pair.llr_offset + pair.llr_slope * pool_rng.exponential(1.0, 50_000)
    args = dict(entropy=12345, first_trial=0, n_trials=100_000,
                increments=np.ascontiguousarray(increments),
                log_a=spec.log_a, log_b=spec.log_b, max_steps=10**6)
    out.append(("empirical pool (50k samples) ratio=0.3", "run_trials_pool", args))
    return out


def _time(fn, kwargs, repeat):
    best = math.inf
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(**kwargs)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3, help="best-of-N timing")
    opts = parser.parse_args()

    py = importlib.import_module("spitfilter._kernel_py")
    try:
        c = importlib.import_module("spitfilter._kernel")
    except ImportError:
        raise SystemExit("compiled kernel not built; nothing to compare")

    width = max(len(name) for name, _, _ in _workloads())
    print(f"{'workload':<{width}}  {'trials':>8}  {'c [s]':>8}  {'python [s]':>10}  "
          f"{'speedup':>7}  identical")
    for name, fn_name, kwargs in _workloads():
        t_c, out_c = _time(getattr(c, fn_name), kwargs, opts.repeat)
        t_py, out_py = _time(getattr(py, fn_name), kwargs, opts.repeat)
        same = (np.array_equal(out_c[0], out_py[0])
                and np.array_equal(out_c[1], out_py[1]))
        print(f"{name:<{width}}  {kwargs['n_trials']:>8}  {t_c:>8.3f}  {t_py:>10.3f}  "
              f"{t_py / t_c:>6.1f}x  {'yes' if same else 'NO'}")
        if not same:
            raise SystemExit("backend outputs diverged")


if __name__ == "__main__":
    main()
