"""Pre-averaged statistics computed from one equally spaced observed series."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from . import _loops
from ._accel import thread_cap
from .errors import ConfigError
from .kernels import (
    DiscreteWeights,
    WeightFunction,
    continuous_norm,
    gaussian_abs_moment,
    get_weight,
    solve_rho,
)

if TYPE_CHECKING:
    from .simulate import SimTruth

__all__ = [
    "SamplingGrid",
    "ObservedSeries",
    "PreaveragedSeries",
    "StatisticReport",
    "preaverage",
    "v_stat",
    "vbar_stat",
    "m_stat",
    "estimate",
    "window_factor",
    "centered_stat",
    "batch_v_stats",
    "read_csv",
    "write_csv",
    "TARGETS",
]

TARGETS = ("jump_power", "quadratic_variation", "integrated_power", "mixed_power")
CENTERED_FLAVORS = ("continuous_power", "jump_power_raw", "jump_power_corrected", "qv")


@dataclass(frozen=True)
class SamplingGrid:
    """Observation spacing and the pre-averaging window it induces.

    The window length is theta / sqrt(delta) rounded to nearest, ties up.
    """

    delta: float
    n_obs: int
    theta: float = 1.0

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if self.theta <= 0:
            raise ConfigError(f"theta must be positive, got {self.theta}")
        if self.n_obs < 1:
            raise ConfigError(f"n_obs must be positive, got {self.n_obs}")
        k = self.k_n
        if k < 2:
            raise ConfigError(f"window length {k} < 2; increase theta or sampling frequency")
        if k >= self.n_obs:
            raise ConfigError(f"window length {k} not below the number of increments {self.n_obs}")

    @classmethod
    def from_horizon(cls, horizon: float, n_obs: int, theta: float = 1.0) -> "SamplingGrid":
        return cls(horizon / n_obs, int(n_obs), theta)

    @property
    def k_n(self) -> int:
        return int(math.floor(self.theta / math.sqrt(self.delta) + 0.5))

    @property
    def u_n(self) -> float:
        return self.k_n * self.delta

    @property
    def horizon(self) -> float:
        return self.n_obs * self.delta

    def index(self, t: float) -> int:
        """[t / delta], robust to the last ulp."""
        x = t / self.delta
        r = round(x)
        return int(r) if abs(x - r) < 1e-9 * max(1.0, abs(x)) else int(math.floor(x))

    def summary(self) -> dict:
        return {"delta": self.delta, "n_obs": self.n_obs, "theta": self.theta,
                "k_n": self.k_n, "horizon": self.horizon}


@dataclass(frozen=True, eq=False)
class ObservedSeries:
    values: np.ndarray
    grid: SamplingGrid
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] != self.grid.n_obs + 1:
            raise ConfigError(f"expected {self.grid.n_obs + 1} observations, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ConfigError("observations must be finite")
        object.__setattr__(self, "values", v)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def preaverage(self, g: WeightFunction | str) -> "PreaveragedSeries":
        g = get_weight(g)
        pre = self._cache.get(g)
        if pre is None:
            pre = preaverage(self, g)
            self._cache[g] = pre
        return pre

    def scaled(self, c: float) -> "ObservedSeries":
        return ObservedSeries(c * self.values, self.grid)


@dataclass(frozen=True)
class PreaveragedSeries:
    zbar: np.ndarray
    zhat: np.ndarray
    weights: DiscreteWeights


def preaverage(series: ObservedSeries, g: WeightFunction | str, method: str = "fast") -> PreaveragedSeries:
    """Pre-averaged increments and their squared-increment companions.

    ``method="naive"`` runs the literal double loop in Python; ``"fast"`` uses
    the compiled window kernel (or ``np.correlate`` without numba).
    """
    g = get_weight(g)
    grid = series.grid
    k = grid.k_n
    if grid.n_obs < k:
        raise ConfigError(f"series of {grid.n_obs} increments shorter than one window ({k})")
    w = DiscreteWeights.build(g, k)
    dz = series.increments
    # Weights g_1..g_k act on increments i+1..i+k; g_k = 0 keeps the range i+1..i+k-1.
    if method == "naive":
        n = grid.n_obs - k + 1
        zbar = np.array([sum(w.g_vals[j] * dz[i + j - 1] for j in range(1, k)) for i in range(n)])
        zhat = np.array([sum((w.g_diffs[j - 1] * dz[i + j - 1]) ** 2 for j in range(1, k + 1)) for i in range(n)])
    elif method == "fast":
        zbar = _loops.windowed_sum(dz, w.g_vals[1:])
        zhat = _loops.windowed_sum(dz * dz, w.g_diffs**2)
    else:
        raise ValueError(f"unknown method {method!r}")
    return PreaveragedSeries(zbar, zhat, w)


def _window_end(series: ObservedSeries, t: float | None, extra: int = 1) -> int:
    """Number of summands for a sum over i = 0 .. [t/delta] - extra * k_n."""
    grid = series.grid
    m = grid.n_obs if t is None else grid.index(t)
    if t is not None and (t < 0 or m > grid.n_obs):
        raise ConfigError(f"t={t} outside [0, {grid.horizon}]")
    count = m - extra * grid.k_n + 1
    if count < 1:
        raise ConfigError(f"t={t} too short: need [t/delta] >= {extra} * k_n = {extra * grid.k_n}")
    return count


def _abspow(x: np.ndarray, p: float) -> np.ndarray:
    if p == 0:
        return np.ones_like(x)
    if p == 2:
        return x * x
    if p == 4:
        y = x * x
        return y * y
    return np.abs(x) ** p


def v_stat(series: ObservedSeries, g: WeightFunction | str, p: float, r: float, t: float | None = None) -> float:
    """sum_i |Zbar_i|^p |Zhat_i|^r over i = 0 .. [t/delta] - k_n, with 0^0 = 1."""
    if p < 0 or r < 0:
        raise ValueError("p and r must be nonnegative")
    n = _window_end(series, t)
    pre = series.preaverage(g)
    return float(np.sum(_abspow(pre.zbar[:n], p) * _abspow(pre.zhat[:n], r)))


def batch_v_stats(series: ObservedSeries, requests: Iterable[tuple], workers: int | None = None) -> list[float]:
    """Evaluate many ``(g, p, r, t)`` tuples sharing the pre-averaged arrays."""
    requests = list(requests)
    for g in {get_weight(req[0]) for req in requests}:
        series.preaverage(g)
    workers = workers or thread_cap()
    if workers <= 1 or len(requests) < 2:
        return [v_stat(series, *req) for req in requests]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda req: v_stat(series, *req), requests))


def vbar_stat(series: ObservedSeries, g: WeightFunction | str, p: int, t: float | None = None) -> float:
    """Bias-corrected combination sum_l rho_{p,l} V(Z, g, p - 2l, l)."""
    rho = solve_rho(p).rho
    n = _window_end(series, t)
    pre = series.preaverage(g)
    zb = pre.zbar[:n]
    zh = pre.zhat[:n]
    # One pass over l with a running power of zhat.
    acc = np.zeros_like(zb)
    zh_pow = np.ones_like(zh)
    for l in range(p // 2 + 1):
        acc += rho[l] * _abspow(zb, p - 2 * l) * zh_pow
        zh_pow = zh_pow * zh
    return float(np.sum(acc))


def m_stat(series: ObservedSeries, g: WeightFunction | str, h: WeightFunction | str, p: int,
           t: float | None = None) -> float:
    """Empirical conditional-covariance statistic for the pair (g, h)."""
    if p < 2 or p % 2:
        raise ValueError(f"p must be an even integer >= 2, got {p}")
    k = series.grid.k_n
    n = _window_end(series, t, extra=3)
    pg = series.preaverage(g)
    ph = series.preaverage(h)
    rho = solve_rho(p).rho
    half = p // 2
    zbg, zhg = pg.zbar, pg.zhat
    zbh, zhh = ph.zbar, ph.zhat
    i = np.arange(n)
    a_shift = np.zeros(n)   # sum_r rho_r Zhat(g)_i^r |Zbar(g)_{i+k}|^(p-2r)
    a_here = np.zeros(n)    # sum_r rho_r Zhat(g)_i^r |Zbar(g)_i|^(p-2r)
    b_avg = np.zeros(n)     # sum_r' rho_r' Zhat(h)_i^r' (1/k) sum_{j=1}^{2k} |Zbar(h)_{i+j}|^(p-2r')
    b_shift = np.zeros(n)   # sum_r' rho_r' Zhat(h)_i^r' |Zbar(h)_{i+k}|^(p-2r')
    for r in range(half + 1):
        zg_r = zhg[:n] ** r
        zh_r = zhh[:n] ** r
        a_shift += rho[r] * zg_r * _abspow(zbg[i + k], p - 2 * r)
        a_here += rho[r] * zg_r * _abspow(zbg[:n], p - 2 * r)
        powh = _abspow(zbh[: n + 2 * k], p - 2 * r)
        csum = np.concatenate(([0.0], np.cumsum(powh)))
        window = csum[i + 2 * k + 1] - csum[i + 1]
        b_avg += rho[r] * zh_r * window / k
        b_shift += rho[r] * zh_r * powh[i + k]
    return float(np.sum(a_shift * b_avg - 2.0 * a_here * b_shift))


@dataclass(frozen=True)
class StatisticReport:
    """A statistic and the affine map taking it to the reported estimate.

    value = scale * raw - offset, optionally truncated at zero.
    """

    name: str
    g: str
    p: float
    r: float
    t: float
    raw: float
    scale: float
    offset: float
    target: str
    grid: dict
    truncated: bool = False

    @property
    def value(self) -> float:
        v = self.scale * self.raw - self.offset
        return max(v, 0.0) if self.truncated else v

    def to_record(self) -> dict:
        return {
            "statistic": self.name,
            "g": self.g,
            "p": self.p,
            "r": self.r,
            "t": self.t,
            "value": self.value,
            "normalization": {"raw": self.raw, "scale": self.scale, "offset": self.offset,
                              "truncated": self.truncated, "target": self.target, "grid": self.grid},
        }


def window_factor(series: ObservedSeries, t: float) -> float:
    """[t/delta] / ([t/delta] - k_n + 1): share of increments lost at the edges."""
    m = series.grid.index(t)
    return m / (m - series.grid.k_n + 1)


def estimate(series: ObservedSeries, g: WeightFunction | str, target: str, t: float | None = None,
             p: float | None = None, truncate: bool = False, finite_sample: bool = False) -> StatisticReport:
    """Normalized estimate of one of the limit quantities.

    Targets: ``jump_power`` (p > 2), ``quadratic_variation``,
    ``integrated_power`` (p even), ``mixed_power`` (p > 0).

    ``finite_sample`` swaps k_n * gbar(p) for the discrete sum of g(j/k_n)^p
    and, for the two diffusive targets, rescales by ``window_factor``.
    """
    g = get_weight(g)
    grid = series.grid
    t = grid.horizon if t is None else float(t)
    k, delta, theta = grid.k_n, grid.delta, grid.theta
    g2 = continuous_norm(g, 2.0)
    disc = series.preaverage(g).weights if finite_sample else None
    if target == "quadratic_variation":
        p, r = 2, 0
        raw = vbar_stat(series, g, 2, t)
        scale = window_factor(series, t) / disc.norm(2.0) if finite_sample else 1.0 / (k * g2)
        label = "[X,X]_t"
    elif target == "jump_power":
        if p is None or p <= 2:
            raise ConfigError("jump_power needs p > 2")
        r = 0
        raw = v_stat(series, g, p, 0, t)
        scale = 1.0 / (disc.norm(float(p)) if finite_sample else k * continuous_norm(g, float(p)))
        label = f"sum_s<=t |dX_s|^{p:g}"
    elif target == "integrated_power":
        if p is None or p < 2 or float(p) % 2:
            raise ConfigError("integrated_power needs an even integer p >= 2")
        p, r = int(p), 0
        raw = vbar_stat(series, g, p, t)
        if finite_sample:
            scale = delta * window_factor(series, t) / (gaussian_abs_moment(p) * (disc.norm(2.0) * delta) ** (p / 2))
        else:
            scale = delta ** (1.0 - p / 4.0) / (gaussian_abs_moment(p) * (theta * g2) ** (p / 2.0))
        label = f"int_0^t |sigma_s|^{p}"
    elif target == "mixed_power":
        if p is None or p <= 0:
            raise ConfigError("mixed_power needs p > 0")
        if finite_sample:
            raise ConfigError("finite_sample has no meaning for mixed_power")
        r = 0
        raw = v_stat(series, g, p, 0, t)
        scale = delta ** (1.0 - p / 4.0)
        label = f"m_{p:g} int_0^t |theta g2 sigma^2 + g'2 alpha^2 / theta|^({p:g}/2)"
    else:
        raise ConfigError(f"unknown target {target!r}; choose from {', '.join(TARGETS)}")
    return StatisticReport(target, g.name, float(p), float(r), t, raw, scale, 0.0, label,
                           grid.summary(), truncate)


def centered_stat(series: ObservedSeries, truth: "SimTruth", g: WeightFunction | str, p: int,
                  flavor: str, t: float | None = None) -> float:
    """Exactly centred, delta^(-1/4)-scaled statistic using simulation truth."""
    g = get_weight(g)
    grid = series.grid
    t = grid.horizon if t is None else float(t)
    k, delta, theta = grid.k_n, grid.delta, grid.theta
    has_jumps = truth.n_jumps(t) > 0
    if flavor == "continuous_power":
        if has_jumps:
            raise ConfigError("continuous_power centring requires a path without jumps")
        if p < 2 or p % 2:
            raise ConfigError("continuous_power needs an even integer p >= 2")
        centre = gaussian_abs_moment(p) * (theta * continuous_norm(g, 2.0)) ** (p / 2) * truth.integrated_power(p, t)
        stat = delta ** (1.0 - p / 4.0) * vbar_stat(series, g, p, t)
    elif flavor in ("jump_power_raw", "jump_power_corrected"):
        if not has_jumps:
            raise ConfigError(f"{flavor} centring requires a path with jumps")
        centre = continuous_norm(g, float(p)) * truth.jump_power(p, t)
        if flavor == "jump_power_raw":
            if p <= 3:
                raise ConfigError("jump_power_raw needs p > 3")
            stat = v_stat(series, g, p, 0, t) / k
        else:
            if p < 4 or p % 2:
                raise ConfigError("jump_power_corrected needs an even integer p >= 4")
            stat = vbar_stat(series, g, p, t) / k
    elif flavor == "qv":
        centre = continuous_norm(g, 2.0) * truth.quadratic_variation(t)
        stat = vbar_stat(series, g, 2, t) / k
    else:
        raise ConfigError(f"unknown flavor {flavor!r}; choose from {', '.join(CENTERED_FLAVORS)}")
    return (stat - centre) / delta**0.25


# ---------------------------------------------------------------------------
# CSV / JSON


def read_csv(path: str | Path, theta: float = 1.0) -> ObservedSeries:
    """Two columns (time, value), equally spaced in time; a header row is optional."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    declared = None
    for line in lines:
        if line.startswith("# delta="):
            declared = _parse_float(line.split("=", 1)[1], path)
    rows = [row for row in csv.reader(lines) if row and not row[0].lstrip().startswith("#")]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    try:
        data = np.array([[float(a), float(b)] for a, b, *_ in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from exc
    if data.shape[0] < 3:
        raise ConfigError(f"{path}: need at least 3 rows, got {data.shape[0]}")
    times = data[:, 0]
    n = times.shape[0] - 1
    delta = (times[-1] - times[0]) / n
    if declared is not None:
        if abs(declared - delta) > 1e-9 * abs(delta):
            raise ConfigError(f"{path}: declared delta {declared!r} disagrees with the time column")
        delta = declared
    if not delta > 0:
        raise ConfigError(f"{path}: times must be strictly increasing")
    gaps = np.diff(times)
    bad = np.abs(gaps - delta) > 1e-9 * delta
    if np.any(bad):
        j = int(np.argmax(bad))
        raise ConfigError(f"{path}: row {j + 2} breaks equal spacing (gap {gaps[j]!r}, expected {delta!r})")
    return ObservedSeries(data[:, 1], SamplingGrid(delta, n, theta))


def _parse_float(s: str, path: Path) -> float:
    try:
        return float(s)
    except ValueError as exc:
        raise ConfigError(f"{path}: bad delta header {s!r}") from exc


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_csv(series: ObservedSeries, path: str | Path) -> None:
    """Full-precision CSV so that read_csv round-trips bit for bit."""
    times = np.arange(series.grid.n_obs + 1) * series.grid.delta
    with Path(path).open("w", newline="") as fh:
        fh.write(f"# delta={series.grid.delta!r}\n")
        w = csv.writer(fh)
        w.writerow(["time", "value"])
        for a, b in zip(times, series.values):
            w.writerow([repr(float(a)), repr(float(b))])


def write_reports(reports: Sequence[StatisticReport], path: str | Path) -> None:
    Path(path).write_text(json.dumps([r.to_record() for r in reports], indent=2))
