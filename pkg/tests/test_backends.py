"""Both trial kernels must produce identical bits, not just identical statistics."""

import os
import subprocess
import sys

import numpy as np
import pytest

from spitfilter import _backend, _kernel_py

cext = pytest.importorskip("spitfilter._kernel", reason="compiled kernel not built")

EXP_ARGS = dict(entropy=987654321, first_trial=0, n_trials=2_000, lam_truth=0.8,
                offset=-2.302585092994046, slope=0.9, log_a=-6.9, log_b=6.9,
                max_steps=1_000_000)


def test_default_backend_prefers_compiled():
    if os.environ.get("SPITFILTER_KERNEL", "auto") in ("", "auto", "c"):
        assert _backend.BACKEND == "c"


def test_exponential_paths_are_bitwise_equal():
    vc, sc = cext.run_trials_exponential(**EXP_ARGS)
    vp, sp = _kernel_py.run_trials_exponential(**EXP_ARGS)
    assert np.array_equal(vc, vp)
    assert np.array_equal(sc, sp)
    assert set(np.unique(vc)) <= {1, 2}


def test_exponential_path_role_inverted_slope():
    args = dict(EXP_ARGS, offset=2.302585092994046, slope=-0.9, n_trials=500)
    vc, sc = cext.run_trials_exponential(**args)
    vp, sp = _kernel_py.run_trials_exponential(**args)
    assert np.array_equal(vc, vp)
    assert np.array_equal(sc, sp)


def test_pool_paths_are_bitwise_equal():
    rng = np.random.default_rng(13)
    pool = rng.normal(-0.05, 0.6, size=10_000)
    args = dict(entropy=24680, first_trial=0, n_trials=2_000, increments=pool,
                log_a=-5.0, log_b=5.0, max_steps=1_000_000)
    vc, sc = cext.run_trials_pool(**args)
    vp, sp = _kernel_py.run_trials_pool(**args)
    assert np.array_equal(vc, vp)
    assert np.array_equal(sc, sp)


def test_pool_single_element():
    # degenerate pool: every draw indexes slot 0
    vc, sc = cext.run_trials_pool(1, 0, 16, np.array([-1.0]), -3.0, 3.0, 100)
    vp, sp = _kernel_py.run_trials_pool(1, 0, 16, np.array([-1.0]), -3.0, 3.0, 100)
    assert np.array_equal(vc, vp)
    assert np.array_equal(sc, sp)
    assert np.all(vc == 1)
    assert np.all(sc == 3)  # three -1.0 steps reach the lower line


def test_chunks_splice_to_the_full_run():
    full_v, full_s = cext.run_trials_exponential(**EXP_ARGS)
    pieces_v, pieces_s = [], []
    for first, count in ((0, 700), (700, 300), (1000, 1000)):
        args = dict(EXP_ARGS, first_trial=first, n_trials=count)
        v, s = _kernel_py.run_trials_exponential(**args)
        pieces_v.append(v)
        pieces_s.append(s)
    assert np.array_equal(full_v, np.concatenate(pieces_v))
    assert np.array_equal(full_s, np.concatenate(pieces_s))


def test_undecided_trials_report_the_cap():
    args = dict(EXP_ARGS, n_trials=64, log_a=-1e9, log_b=1e9, max_steps=5)
    for impl in (cext, _kernel_py):
        v, s = impl.run_trials_exponential(**args)
        assert np.all(v == 0)
        assert np.all(s == 5)


def test_repeat_calls_are_identical():
    v1, s1 = cext.run_trials_exponential(**EXP_ARGS)
    v2, s2 = cext.run_trials_exponential(**EXP_ARGS)
    assert np.array_equal(v1, v2)
    assert np.array_equal(s1, s2)


def test_env_var_forces_python_backend():
    code = ("import spitfilter._backend as b; "
            "print(b.BACKEND); print(b.kernel.__name__)")
    env = dict(os.environ, SPITFILTER_KERNEL="py")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "spitfilter._kernel_py"]


def test_env_var_rejects_unknown_value():
    env = dict(os.environ, SPITFILTER_KERNEL="fortran")
    out = subprocess.run([sys.executable, "-c", "import spitfilter._backend"],
                         env=env, capture_output=True, text=True)
    assert out.returncode != 0
