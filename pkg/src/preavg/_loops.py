"""Hot inner loops, each in a numba flavour and a numpy flavour.

The public names ``heston_variance`` and ``window_dots`` resolve to the numba
kernels when available (``windowed_sum`` always uses ``np.correlate``); the ``*_numpy`` twins are always
importable so tests and the benchmark can run both paths side by side.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import HAS_NUMBA, njit

__all__ = [
    "windowed_sum",
    "windowed_sum_numpy",
    "heston_variance",
    "heston_variance_numpy",
    "window_dots",
    "window_dots_numpy",
]


# -- out[i] = sum_j w[j] * x[i + j], i = 0 .. len(x) - len(w) ------------------


def windowed_sum_numpy(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.correlate(np.asarray(x, dtype=float), np.asarray(w, dtype=float), mode="valid")


@njit
def _windowed_sum_nb(x, w):
    n = x.shape[0] - w.shape[0] + 1
    k = w.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for j in range(k):
            acc += w[j] * x[i + j]
        out[i] = acc
    return out


def _windowed_sum_jit(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    return _windowed_sum_nb(np.ascontiguousarray(x, dtype=np.float64), np.ascontiguousarray(w, dtype=np.float64))


# -- full-truncation Euler for the CIR variance ---------------------------------


def heston_variance_numpy(v0, kappa, vbar, xi, dt, z):
    """Variance path v[0..n] from standard normals ``z`` (length n).

    Negative values are kept in the state and clipped to zero only inside the
    drift and diffusion coefficients.
    """
    n = z.shape[0]
    v = np.empty(n + 1)
    v[0] = v0
    sdt = math.sqrt(dt)
    cur = v0
    for i in range(n):
        vp = cur if cur > 0.0 else 0.0
        cur = cur + kappa * (vbar - vp) * dt + xi * math.sqrt(vp) * sdt * z[i]
        v[i + 1] = cur
    return v


@njit
def _heston_variance_nb(v0, kappa, vbar, xi, dt, z):
    n = z.shape[0]
    v = np.empty(n + 1)
    v[0] = v0
    sdt = math.sqrt(dt)
    cur = v0
    for i in range(n):
        vp = cur if cur > 0.0 else 0.0
        cur = cur + kappa * (vbar - vp) * dt + xi * math.sqrt(vp) * sdt * z[i]
        v[i + 1] = cur
    return v


def _heston_variance_jit(v0, kappa, vbar, xi, dt, z):
    return _heston_variance_nb(float(v0), float(kappa), float(vbar), float(xi), float(dt),
                               np.ascontiguousarray(z, dtype=np.float64))


# -- dot products of a weight vector with many noise windows --------------------


def window_dots_numpy(noise: np.ndarray, starts: np.ndarray, w: np.ndarray) -> np.ndarray:
    """out[b, k] = sum_m w[m] * noise[b, starts[b, k] + m]."""
    m = w.shape[0]
    idx = starts[:, :, None] + np.arange(m)[None, None, :]
    rows = np.arange(noise.shape[0])[:, None, None]
    return noise[rows, idx] @ w


@njit
def _window_dots_nb(noise, starts, w):
    nb, nk = starts.shape
    m = w.shape[0]
    out = np.empty((nb, nk))
    for b in range(nb):
        for k in range(nk):
            s = starts[b, k]
            acc = 0.0
            for j in range(m):
                acc += w[j] * noise[b, s + j]
            out[b, k] = acc
    return out


def _window_dots_jit(noise, starts, w):
    return _window_dots_nb(np.ascontiguousarray(noise, dtype=np.float64),
                           np.ascontiguousarray(starts, dtype=np.int64),
                           np.ascontiguousarray(w, dtype=np.float64))


# np.correlate is vectorised C and beats the plain compiled loop (see the
# benchmark), so the windowed sum uses it under both backends.
windowed_sum = windowed_sum_numpy

if HAS_NUMBA:
    heston_variance = _heston_variance_jit
    window_dots = _window_dots_jit
else:  # pragma: no cover - depends on environment flag
    heston_variance = heston_variance_numpy
    window_dots = window_dots_numpy
