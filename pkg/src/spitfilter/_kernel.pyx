# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trial kernel.

Draws observations scalar by scalar from numpy's own C random routines and
accumulates the running log ratio in C.  Because the exponential inverse-CDF
code is the exact routine Generator.standard_exponential(method="inv") calls,
and the arithmetic is compiled with -ffp-contract=off, results are bitwise
identical to the pure-numpy kernel in _kernel_py.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_exponential_inv_fill

cnp.import_array()

cdef const char *CAPSULE_NAME = "BitGenerator"


cdef bitgen_t *_bitgen(object bit_generator) except NULL:
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, CAPSULE_NAME):
        raise ValueError("object does not expose a BitGenerator capsule")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, CAPSULE_NAME)


def run_trials_exponential(object entropy, long first_trial, long n_trials,
                           double lam_truth, double offset, double slope,
                           double log_a, double log_b, long max_steps):
    """See _kernel_py.run_trials_exponential; same contract, same bits."""
    verdicts = np.zeros(n_trials, dtype=np.int8)
    stops = np.full(n_trials, max_steps, dtype=np.int64)
    if n_trials == 0:
        return verdicts, stops
    cdef cnp.int8_t[::1] vmv = verdicts
    cdef cnp.int64_t[::1] smv = stops
    cdef bitgen_t *rng
    cdef double lam, e, x, inc
    cdef long i, t
    cdef int v
    for i in range(n_trials):
        bg = np.random.PCG64(np.random.SeedSequence(entropy, spawn_key=(first_trial + i,)))
        rng = _bitgen(bg)
        lam = 0.0
        t = 0
        v = 0
        with nogil:
            while t < max_steps:
                random_standard_exponential_inv_fill(rng, 1, &e)
                x = e / lam_truth
                inc = offset + slope * x
                lam = lam + inc
                t = t + 1
                if lam <= log_a:
                    v = 1
                    break
                if lam >= log_b:
                    v = 2
                    break
        if v != 0:
            vmv[i] = v
            smv[i] = t
    return verdicts, stops


def run_trials_pool(object entropy, long first_trial, long n_trials,
                    object increments, double log_a, double log_b, long max_steps):
    """See _kernel_py.run_trials_pool; same contract, same bits."""
    pool_arr = np.ascontiguousarray(increments, dtype=np.float64)
    if pool_arr.ndim != 1 or pool_arr.size == 0:
        raise ValueError("increment pool must be a non-empty 1-d array")
    verdicts = np.zeros(n_trials, dtype=np.int8)
    stops = np.full(n_trials, max_steps, dtype=np.int64)
    if n_trials == 0:
        return verdicts, stops
    cdef const double[::1] pool = pool_arr
    cdef double m = <double> pool_arr.size
    cdef cnp.int8_t[::1] vmv = verdicts
    cdef cnp.int64_t[::1] smv = stops
    cdef bitgen_t *rng
    cdef double lam, u
    cdef cnp.npy_intp j
    cdef long i, t
    cdef int v
    for i in range(n_trials):
        bg = np.random.PCG64(np.random.SeedSequence(entropy, spawn_key=(first_trial + i,)))
        rng = _bitgen(bg)
        lam = 0.0
        t = 0
        v = 0
        with nogil:
            while t < max_steps:
                u = rng.next_double(rng.state)
                j = <cnp.npy_intp> (u * m)
                lam = lam + pool[j]
                t = t + 1
                if lam <= log_a:
                    v = 1
                    break
                if lam >= log_b:
                    v = 2
                    break
        if v != 0:
            vmv[i] = v
            smv[i] = t
    return verdicts, stops
