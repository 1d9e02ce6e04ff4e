"""Pure-numpy trial kernel.

Semantically and bitwise identical to the compiled kernel in _kernel.pyx:
both draw from numpy's own C routines (inverse-CDF exponentials, raw
uniforms), so the per-trial random streams agree exactly.  This kernel
processes each trial in growing blocks; the running log-ratio carry is
folded into the first increment of every block so that np.cumsum matches
sequential accumulation bit for bit.

Each trial owns the stream PCG64(SeedSequence(entropy, spawn_key=(index,))),
making results independent of trial order and of how trials are chunked
across workers.
"""

from __future__ import annotations

import numpy as np

BLOCK_MIN = 64
BLOCK_MAX = 65536


def _trial_generator(entropy, index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy, spawn_key=(index,))))


def run_trials_exponential(entropy, first_trial: int, n_trials: int,
                           lam_truth: float, offset: float, slope: float,
                           log_a: float, log_b: float, max_steps: int):
    """Run SPRT trials with durations drawn from Exp(lam_truth).

    Per observation: x = -log1p(-u) / lam_truth, increment = offset + slope*x,
    decide SPIT when the running sum <= log_a, NON-SPIT when >= log_b.
    Returns (verdicts, stops): verdict codes 0 undecided / 1 SPIT / 2 NON-SPIT
    and the observation count at decision (max_steps when undecided).
    """
    verdicts = np.zeros(n_trials, dtype=np.int8)
    stops = np.full(n_trials, max_steps, dtype=np.int64)
    for i in range(n_trials):
        gen = _trial_generator(entropy, first_trial + i)
        carry = 0.0
        done = 0
        block = BLOCK_MIN
        while done < max_steps:
            b = min(block, max_steps - done)
            x = gen.standard_exponential(b, method="inv")
            x /= lam_truth
            inc = slope * x
            inc += offset
            inc[0] += carry
            cum = np.cumsum(inc)
            hit = (cum <= log_a) | (cum >= log_b)
            k = int(np.argmax(hit))
            if hit[k]:
                verdicts[i] = 1 if cum[k] <= log_a else 2
                stops[i] = done + k + 1
                break
            carry = float(cum[-1])
            done += b
            block = min(block * 2, BLOCK_MAX)
    return verdicts, stops


def run_trials_pool(entropy, first_trial: int, n_trials: int,
                    increments, log_a: float, log_b: float, max_steps: int):
    """Run SPRT trials drawing pre-transformed increments from a pool.

    Per observation: j = int(u * len(pool)) with u uniform in [0, 1), then
    the running sum advances by increments[j].
    """
    pool = np.ascontiguousarray(increments, dtype=np.float64)
    if pool.ndim != 1 or pool.size == 0:
        raise ValueError("increment pool must be a non-empty 1-d array")
    m = pool.size
    verdicts = np.zeros(n_trials, dtype=np.int8)
    stops = np.full(n_trials, max_steps, dtype=np.int64)
    for i in range(n_trials):
        gen = _trial_generator(entropy, first_trial + i)
        carry = 0.0
        done = 0
        block = BLOCK_MIN
        while done < max_steps:
            b = min(block, max_steps - done)
            idx = (gen.random(b) * m).astype(np.int64)
            inc = pool[idx]
            inc[0] += carry
            cum = np.cumsum(inc)
            hit = (cum <= log_a) | (cum >= log_b)
            k = int(np.argmax(hit))
            if hit[k]:
                verdicts[i] = 1 if cum[k] <= log_a else 2
                stops[i] = done + k + 1
                break
            carry = float(cum[-1])
            done += b
            block = min(block * 2, BLOCK_MAX)
    return verdicts, stops
