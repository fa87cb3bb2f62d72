import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from preavg import _loops
from preavg._accel import HAS_NUMBA, thread_cap

needs_numba = pytest.mark.skipif(not HAS_NUMBA, reason="numba backend not active")


@needs_numba
@given(st.integers(5, 300), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_windowed_sum_parity(n, m, seed):
    rng = np.random.default_rng(seed)
    x, w = rng.standard_normal(n), rng.standard_normal(m)
    assert np.allclose(_loops._windowed_sum_jit(x, w), _loops.windowed_sum_numpy(x, w), rtol=1e-12, atol=1e-13)


@needs_numba
@given(st.floats(0.0, 0.2), st.floats(0.1, 10.0), st.floats(0.0, 0.2), st.floats(0.0, 2.0),
       st.integers(0, 2**31 - 1))
def test_heston_parity(v0, kappa, vbar, xi, seed):
    z = np.random.default_rng(seed).standard_normal(500)
    a = _loops._heston_variance_jit(v0, kappa, vbar, xi, 1 / 500, z)
    b = _loops.heston_variance_numpy(v0, kappa, vbar, xi, 1 / 500, z)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-15)


@needs_numba
def test_window_dots_parity():
    rng = np.random.default_rng(0)
    noise = rng.standard_normal((7, 400))
    starts = rng.integers(0, 300, size=(7, 5))
    w = rng.standard_normal(100)
    assert np.allclose(_loops._window_dots_jit(noise, starts, w), _loops.window_dots_numpy(noise, starts, w),
                       rtol=1e-12, atol=1e-13)


def test_environment_flag_selects_numpy():
    env = {**os.environ, "PREAVG_DISABLE_NUMBA": "1"}
    code = ("from preavg import _loops; from preavg._accel import backend; "
            "print(backend(), _loops.heston_variance is _loops.heston_variance_numpy)")
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert res.stdout.split() == ["numpy", "True"]


def test_numpy_backend_gives_same_estimates():
    """End to end: a simulated estimate is reproduced under the numpy backend."""
    code = ("from preavg.estimators import SamplingGrid, estimate; "
            "from preavg.simulate import ModelSpec, HestonVol, simulate_path; "
            "s, _ = simulate_path(ModelSpec(HestonVol(0.04, 5.0, 0.04, 0.5, -0.5)), "
            "SamplingGrid.from_horizon(1.0, 1600), 3); "
            "print(repr(estimate(s, 'triangle', 'quadratic_variation').value))")
    vals = []
    for flag in ("0", "1"):
        env = {**os.environ, "PREAVG_DISABLE_NUMBA": flag}
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        vals.append(float(res.stdout))
    assert vals[0] == pytest.approx(vals[1], rel=1e-12)


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("PREAVG_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.setenv("PREAVG_THREADS", "lots")
    assert thread_cap() >= 1
