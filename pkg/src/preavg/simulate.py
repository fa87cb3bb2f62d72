"""Noisy Ito-semimartingale paths with the ground truth needed to check limits.

The latent log-price is simulated by Euler-Maruyama on a grid ``substeps``
times finer than the observation grid; the noise is drawn at observation
times conditionally on the latent state there.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _loops
from .errors import ConfigError
from .estimators import ObservedSeries, SamplingGrid
from .kernels import WeightFunction, get_weight, psd_sqrt, psi_matrices, signed_power

__all__ = [
    "ConstantVol",
    "HestonVol",
    "PiecewiseVol",
    "CompoundPoissonJumps",
    "FixedJumps",
    "GaussianNoise",
    "RoundingNoise",
    "MixtureNoise",
    "ModelSpec",
    "JumpRecord",
    "SimTruth",
    "simulate_path",
    "noise_moments",
    "sample_jump_limit",
    "replication_seed",
]


# ---------------------------------------------------------------------------
# model specification


@dataclass(frozen=True)
class ConstantVol:
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")


@dataclass(frozen=True)
class HestonVol:
    """CIR variance: dv = kappa (vbar - v) dt + xi sqrt(v) dB, corr(dB, dW) = rho."""

    v0: float
    kappa: float
    vbar: float
    xi: float
    rho: float = 0.0

    def __post_init__(self):
        if self.v0 < 0 or self.vbar < 0 or self.kappa < 0 or self.xi < 0:
            raise ConfigError("Heston parameters v0, kappa, vbar, xi must be nonnegative")
        if not -1.0 <= self.rho <= 1.0:
            raise ConfigError("leverage rho must lie in [-1, 1]")


@dataclass(frozen=True)
class PiecewiseVol:
    """sigma = values[i] on [times[i-1], times[i]), with times[-1] = +inf implied."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.times) + 1:
            raise ConfigError("piecewise volatility needs len(values) == len(times) + 1")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ConfigError("piecewise volatility times must increase")
        if any(v < 0 for v in self.values):
            raise ConfigError("volatility values must be nonnegative")


@dataclass(frozen=True)
class CompoundPoissonJumps:
    """Jumps at rate ``rate``; size = +-|N(mean, sd^2)| with a fair random sign."""

    rate: float
    mean: float = 0.0
    sd: float = 0.1

    def __post_init__(self):
        if self.rate < 0:
            raise ConfigError("jump rate must be nonnegative")
        if self.sd < 0:
            raise ConfigError("jump size sd must be nonnegative")


@dataclass(frozen=True)
class FixedJumps:
    times: tuple[float, ...]
    sizes: tuple[float, ...]

    def __post_init__(self):
        if len(self.times) != len(self.sizes):
            raise ConfigError("fixed jumps need as many sizes as times")


@dataclass(frozen=True)
class GaussianNoise:
    """Conditionally Gaussian noise with alpha_t = c0 + c1 * sigma_t."""

    c0: float
    c1: float = 0.0

    def __post_init__(self):
        if self.c0 < 0 or self.c1 < 0:
            raise ConfigError("noise coefficients must be nonnegative")


@dataclass(frozen=True)
class RoundingNoise:
    """Z = a [(X + U) / a] with U uniform on [0, a)."""

    level: float

    def __post_init__(self):
        if not self.level > 0:
            raise ConfigError("rounding level must be positive")


@dataclass(frozen=True)
class MixtureNoise:
    """Gaussian noise with probability ``weight``, rounding noise otherwise."""

    weight: float
    gaussian: GaussianNoise
    rounding: RoundingNoise

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ConfigError("mixture weight must lie in [0, 1]")


_VOL = {"constant": ConstantVol, "heston": HestonVol, "piecewise": PiecewiseVol}
_JUMPS = {"compound_poisson": CompoundPoissonJumps, "fixed": FixedJumps}
_NOISE = {"gaussian": GaussianNoise, "rounding": RoundingNoise, "mixture": MixtureNoise}


def _build(kind_map: dict, spec: dict | None, what: str):
    if spec is None or spec.get("type", "none") == "none":
        return None
    spec = dict(spec)
    kind = spec.pop("type", None)
    if kind not in kind_map:
        raise ConfigError(f"unknown {what} type {kind!r}; choose from {', '.join(kind_map)} or none")
    cls = kind_map[kind]
    if cls is MixtureNoise:
        try:
            spec["gaussian"] = GaussianNoise(**spec["gaussian"])
            spec["rounding"] = RoundingNoise(**spec["rounding"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"mixture noise needs 'gaussian' and 'rounding' blocks: {exc}") from exc
    for key in ("times", "values", "sizes"):
        if key in spec:
            spec[key] = tuple(float(x) for x in spec[key])
    try:
        return cls(**spec)
    except TypeError as exc:
        raise ConfigError(f"bad {what} parameters: {exc}") from exc


def _dump(obj, kind_map: dict) -> dict:
    if obj is None:
        return {"type": "none"}
    name = next(k for k, v in kind_map.items() if isinstance(obj, v))
    d = asdict(obj)
    d["type"] = name
    return d


@dataclass(frozen=True)
class ModelSpec:
    volatility: ConstantVol | HestonVol | PiecewiseVol
    drift: float = 0.0
    jumps: CompoundPoissonJumps | FixedJumps | None = None
    noise: GaussianNoise | RoundingNoise | MixtureNoise | None = None
    x0: float = 0.0
    substeps: int = 1
    horizon: float = 1.0

    def __post_init__(self):
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ConfigError("substeps must be an integer >= 1")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        if not isinstance(d, dict):
            raise ConfigError("model spec must be a JSON object")
        unknown = set(d) - {"volatility", "drift", "jumps", "noise", "x0", "substeps", "horizon"}
        if unknown:
            raise ConfigError(f"unknown model keys: {sorted(unknown)}")
        if "volatility" not in d:
            raise ConfigError("model spec needs a 'volatility' block")
        return cls(
            volatility=_build(_VOL, d["volatility"], "volatility"),
            drift=float(d.get("drift", 0.0)),
            jumps=_build(_JUMPS, d.get("jumps"), "jumps"),
            noise=_build(_NOISE, d.get("noise"), "noise"),
            x0=float(d.get("x0", 0.0)),
            substeps=int(d.get("substeps", 1)),
            horizon=float(d.get("horizon", 1.0)),
        )

    def to_dict(self) -> dict:
        return {
            "volatility": _dump(self.volatility, _VOL),
            "drift": self.drift,
            "jumps": _dump(self.jumps, _JUMPS),
            "noise": _dump(self.noise, _NOISE),
            "x0": self.x0,
            "substeps": self.substeps,
            "horizon": self.horizon,
        }


# ---------------------------------------------------------------------------
# noise law


def _rounding_moments(level: float, x):
    f = np.asarray(x, dtype=float) / level
    f = f - np.floor(f)
    up, down = level * (1.0 - f), -level * f  # atoms, with probabilities f and 1 - f
    return tuple(f * up**r + (1.0 - f) * down**r for r in (1, 2, 3, 4))


def noise_moments(spec: ModelSpec, x, sigma=0.0):
    """Conditional moments (beta1..beta4) of the noise given X = x (and sigma)."""
    noise = spec.noise
    x = np.asarray(x, dtype=float)
    zero = np.zeros_like(x)
    if noise is None:
        out = (zero, zero, zero, zero)
    elif isinstance(noise, GaussianNoise):
        a2 = (noise.c0 + noise.c1 * np.asarray(sigma, dtype=float)) ** 2 + zero
        out = (zero, a2, zero, 3.0 * a2 * a2)
    elif isinstance(noise, RoundingNoise):
        out = _rounding_moments(noise.level, x)
    else:
        a2 = (noise.gaussian.c0 + noise.gaussian.c1 * np.asarray(sigma, dtype=float)) ** 2 + zero
        rnd = _rounding_moments(noise.rounding.level, x)
        w = noise.weight
        gauss = (zero, a2, zero, 3.0 * a2 * a2)
        out = tuple(w * gm + (1.0 - w) * rm for gm, rm in zip(gauss, rnd))
    if x.ndim == 0:
        return tuple(float(v) for v in out)
    return out


# ---------------------------------------------------------------------------
# truth container


@dataclass(frozen=True)
class JumpRecord:
    time: float          # grid node at which the jump enters the path
    arrival: float       # underlying arrival time
    size: float
    sigma_minus: float
    sigma_plus: float
    alpha_minus: float
    alpha_plus: float


@dataclass(frozen=True, eq=False)
class SimTruth:
    grid: SamplingGrid
    substeps: int
    latent: np.ndarray
    sigma_path: np.ndarray
    alpha_path: np.ndarray
    beta3_path: np.ndarray
    jumps: tuple[JumpRecord, ...]
    integrated: dict[int, np.ndarray]
    continuous_qv: np.ndarray
    sigma_fine: np.ndarray = field(repr=False)
    alpha_fine: np.ndarray = field(repr=False)

    def _idx(self, t: float | None) -> int:
        if t is None:
            return self.grid.n_obs
        i = self.grid.index(t)
        if i < 0 or i > self.grid.n_obs:
            raise ConfigError(f"t={t} outside the simulated horizon")
        return i

    def _jumps_until(self, t: float | None):
        tt = self.grid.horizon if t is None else t
        return [j for j in self.jumps if j.time <= tt * (1 + 1e-12)]

    def n_jumps(self, t: float | None = None) -> int:
        return len(self._jumps_until(t))

    def integrated_power(self, p: float, t: float | None = None) -> float:
        """int_0^t |sigma_s|^p ds (left-point rule on the fine grid)."""
        i = self._idx(t)
        if p in self.integrated:
            return float(self.integrated[p][i])
        h = self.grid.delta / self.substeps
        return float(np.sum(np.abs(self.sigma_fine[: i * self.substeps]) ** p) * h)

    def integral(self, fn, t: float | None = None) -> float:
        """int_0^t fn(sigma_s, alpha_s) ds on the fine grid."""
        i = self._idx(t)
        m = i * self.substeps
        h = self.grid.delta / self.substeps
        return float(np.sum(fn(self.sigma_fine[:m], self.alpha_fine[:m])) * h)

    def jump_power(self, p: float, t: float | None = None) -> float:
        return float(sum(abs(j.size) ** p for j in self._jumps_until(t)))

    def quadratic_variation(self, t: float | None = None) -> float:
        return float(self.continuous_qv[self._idx(t)]) + self.jump_power(2, t)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.summary(),
            "substeps": self.substeps,
            "latent": self.latent.tolist(),
            "sigma_path": self.sigma_path.tolist(),
            "alpha_path": self.alpha_path.tolist(),
            "beta3_path": self.beta3_path.tolist(),
            "jumps": [asdict(j) for j in self.jumps],
            "integrated": {str(k): v.tolist() for k, v in self.integrated.items()},
            "continuous_qv": self.continuous_qv.tolist(),
            "sigma_fine": self.sigma_fine.tolist(),
            "alpha_fine": self.alpha_fine.tolist(),
            "summary": {
                "quadratic_variation": self.quadratic_variation(),
                "integrated_sigma2": self.integrated_power(2),
                "integrated_sigma4": self.integrated_power(4),
                "n_jumps": self.n_jumps(),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimTruth":
        try:
            g = d["grid"]
            grid = SamplingGrid(float(g["delta"]), int(g["n_obs"]), float(g["theta"]))
            arr = lambda key: np.asarray(d[key], dtype=float)  # noqa: E731
            return cls(
                grid=grid,
                substeps=int(d["substeps"]),
                latent=arr("latent"),
                sigma_path=arr("sigma_path"),
                alpha_path=arr("alpha_path"),
                beta3_path=arr("beta3_path"),
                jumps=tuple(JumpRecord(**j) for j in d["jumps"]),
                integrated={int(k): np.asarray(v, dtype=float) for k, v in d["integrated"].items()},
                continuous_qv=arr("continuous_qv"),
                sigma_fine=arr("sigma_fine"),
                alpha_fine=arr("alpha_fine"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed truth JSON: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "SimTruth":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read truth file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# simulation


def replication_seed(master: int, *key: int) -> np.random.SeedSequence:
    """Independent stream for replication ``key`` under ``master``."""
    return np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))


def _vol_path(vol, n_fine: int, h: float, rng: np.random.Generator, z: np.ndarray):
    """Volatility on the fine grid and the driving Brownian increments (unit scale)."""
    if isinstance(vol, ConstantVol):
        return np.full(n_fine + 1, float(vol.sigma)), z
    if isinstance(vol, PiecewiseVol):
        tf = np.arange(n_fine + 1) * h
        vals = np.asarray(vol.values, dtype=float)
        return vals[np.searchsorted(np.asarray(vol.times), tf, side="right")], z
    zv = rng.standard_normal(n_fine)
    v = _loops.heston_variance(vol.v0, vol.kappa, vol.vbar, vol.xi, h, zv)
    sig = np.sqrt(np.clip(v, 0.0, None))
    dw = vol.rho * zv + math.sqrt(1.0 - vol.rho**2) * z
    return sig, dw


def _jump_times(jumps, horizon: float, rng: np.random.Generator):
    if jumps is None:
        return np.empty(0), np.empty(0)
    if isinstance(jumps, FixedJumps):
        times = np.asarray(jumps.times, dtype=float)
        if np.any((times <= 0) | (times > horizon)):
            raise ConfigError("fixed jump times must lie in (0, horizon]")
        return times, np.asarray(jumps.sizes, dtype=float)
    times = []
    if jumps.rate > 0:
        t = rng.exponential(1.0 / jumps.rate)
        while t <= horizon:
            times.append(t)
            t += rng.exponential(1.0 / jumps.rate)
    n = len(times)
    signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    sizes = signs * np.abs(jumps.mean + jumps.sd * rng.standard_normal(n))
    return np.asarray(times), sizes


def _alpha_fine(noise, sig: np.ndarray, x: np.ndarray) -> np.ndarray:
    if noise is None:
        return np.zeros_like(sig)
    if isinstance(noise, GaussianNoise):
        return noise.c0 + noise.c1 * sig
    if isinstance(noise, RoundingNoise):
        return np.sqrt(_rounding_moments(noise.level, x)[1])
    ag = noise.gaussian.c0 + noise.gaussian.c1 * sig
    b2 = noise.weight * ag**2 + (1.0 - noise.weight) * _rounding_moments(noise.rounding.level, x)[1]
    return np.sqrt(b2)


def _draw_noise(noise, x: np.ndarray, sig: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Observed values given latent x at observation nodes."""
    if noise is None:
        return x.copy()
    if isinstance(noise, GaussianNoise):
        return x + (noise.c0 + noise.c1 * sig) * rng.standard_normal(x.shape[0])
    if isinstance(noise, RoundingNoise):
        a = noise.level
        return a * np.floor((x + a * rng.random(x.shape[0])) / a)
    pick = rng.random(x.shape[0]) < noise.weight
    gauss = x + (noise.gaussian.c0 + noise.gaussian.c1 * sig) * rng.standard_normal(x.shape[0])
    a = noise.rounding.level
    rounded = a * np.floor((x + a * rng.random(x.shape[0])) / a)
    return np.where(pick, gauss, rounded)


def simulate_path(spec: ModelSpec, grid: SamplingGrid, seed=None,
                  powers: Sequence[int] = (2, 4, 6, 8)) -> tuple[ObservedSeries, SimTruth]:
    """One observed series and its truth.  Identical (spec, grid, seed) give identical output."""
    rng = np.random.default_rng(seed)
    s = int(spec.substeps)
    n_fine = grid.n_obs * s
    h = grid.delta / s
    horizon = grid.horizon

    z = rng.standard_normal(n_fine)
    sig, dw = _vol_path(spec.volatility, n_fine, h, rng, z)
    dx = spec.drift * h + sig[:-1] * math.sqrt(h) * dw
    x = np.empty(n_fine + 1)
    x[0] = spec.x0
    np.cumsum(dx, out=x[1:])
    x[1:] += spec.x0

    arrivals, sizes = _jump_times(spec.jumps, horizon, rng)
    jump_incr = np.zeros(n_fine + 1)
    nodes = np.clip(np.ceil(arrivals / h - 1e-9).astype(int), 1, n_fine) if arrivals.size else np.empty(0, int)
    for j, size in zip(nodes, sizes):
        jump_incr[j] += size
    if arrivals.size:
        x += np.cumsum(jump_incr)

    alpha_f = _alpha_fine(spec.noise, sig, x)
    records = []
    for j in sorted(set(int(n) for n in nodes)):
        first = float(arrivals[nodes == j].min())
        records.append(JumpRecord(j * h, first, float(jump_incr[j]), float(sig[j - 1]), float(sig[j]),
                                  float(alpha_f[j - 1]), float(alpha_f[j])))

    obs = np.arange(grid.n_obs + 1) * s
    x_obs, sig_obs = x[obs], sig[obs]
    values = _draw_noise(spec.noise, x_obs, sig_obs, rng)
    beta3 = noise_moments(spec, x_obs, sig_obs)[2]

    def cumulative(arr):
        c = np.concatenate(([0.0], np.cumsum(arr[:-1] * h)))
        return c[obs]

    integrated = {int(p): cumulative(np.abs(sig) ** p) for p in powers}
    cont_qv = integrated[2] if 2 in integrated else cumulative(sig**2)
    truth = SimTruth(grid, s, x_obs, sig_obs, alpha_f[obs], np.asarray(beta3, dtype=float),
                     tuple(records), integrated, cont_qv, sig, alpha_f)
    return ObservedSeries(values, grid), truth


# ---------------------------------------------------------------------------
# jump limit variable


def sample_jump_limit(truth: SimTruth, family: Sequence[WeightFunction | str], p: float,
                      t: float | None = None, theta: float | None = None, seed=None,
                      size: int | None = None) -> np.ndarray:
    """Draw(s) of the limit variable of the centred jump power statistics.

    Returns shape (d,) for a single draw or (size, d).
    """
    if truth.jumps is None:
        raise ConfigError("truth carries no jump records")
    family = tuple(get_weight(g) for g in family)
    d = len(family)
    theta = truth.grid.theta if theta is None else float(theta)
    n = 1 if size is None else int(size)
    out = np.zeros((n, d))
    jumps = truth._jumps_until(t)
    if jumps:
        roots = [psd_sqrt(m) for m in psi_matrices(family, p)]
        rng = np.random.default_rng(seed)
        st = math.sqrt(theta)
        for j in jumps:
            u_m, u_p, ub_m, ub_p = (rng.standard_normal((n, d)) @ r.T for r in roots)
            comb = st * j.sigma_minus * u_m + j.alpha_minus / st * ub_m + st * j.sigma_plus * u_p + j.alpha_plus / st * ub_p
            out += p * float(signed_power(j.size, p - 1.0)) * comb
    return out[0] if size is None else out
