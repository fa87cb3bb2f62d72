"""Replicated experiments over a grid ladder, and a Monte Carlo oracle for the kernels."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from . import _loops
from ._accel import thread_cap
from .errors import ConfigError
from .estimators import SamplingGrid, estimate
from .inference import feasible_variance, jump_test, qv_interval, studentized_power
from .kernels import continuous_norm, get_weight, mu_bar_coefficients, mu_bar_eval, solve_rho
from .simulate import ModelSpec, replication_seed, simulate_path

__all__ = [
    "ExperimentPlan",
    "ExperimentSummary",
    "run_experiment",
    "kernel_mc_oracle",
    "sample_kernel_process",
    "STATISTICS",
]


# ---------------------------------------------------------------------------
# statistics evaluated on one replication
#
# Each returns a dict with "value" and optionally "truth", "covers", "reject".


def _split(name: str) -> tuple[str, str | None]:
    base, _, arg = name.partition(":")
    return base, (arg or None)


def _int_arg(arg: str | None, name: str) -> int:
    try:
        return int(arg)
    except (TypeError, ValueError):
        raise ConfigError(f"statistic {name!r} needs an integer argument, e.g. {name.split(':')[0]}:4") from None


def _stat_qv(series, truth, plan, arg):
    value = estimate(series, plan.g, "quadratic_variation", finite_sample=plan.finite_sample).value
    return {"value": value, "truth": truth.quadratic_variation()}


def _stat_ivp(series, truth, plan, arg):
    p = _int_arg(arg, "ivp")
    value = estimate(series, plan.g, "integrated_power", p=p, finite_sample=plan.finite_sample).value
    return {"value": value, "truth": truth.integrated_power(p)}


def _stat_jump_power(series, truth, plan, arg):
    p = _int_arg(arg, "jump_power")
    value = estimate(series, plan.g, "jump_power", p=p, finite_sample=plan.finite_sample).value
    return {"value": value, "truth": truth.jump_power(p)}


def _stat_ci_ivp(series, truth, plan, arg):
    p = _int_arg(arg, "ci_ivp")
    res = studentized_power(series, plan.g, p, level=plan.level, truth=truth, finite_sample=plan.finite_sample)
    return {"value": res.estimate, "truth": truth.integrated_power(p), "covers": res.covers,
            "studentized": res.studentized}


def _stat_qv_ci(series, truth, plan, arg):
    mode = arg or "feasible"
    res = qv_interval(series, plan.g, level=plan.level, mode=mode, truth=truth, finite_sample=plan.finite_sample)
    return {"value": res.estimate, "truth": truth.quadratic_variation(), "covers": res.covers,
            "studentized": res.studentized}


def _stat_jump_test(series, truth, plan, arg):
    res = jump_test(series, plan.g, plan.h, level=1.0 - plan.level)
    return {"value": res.studentized if res.studentized is not None else float("nan"), "reject": res.reject}


def _stat_fvar(series, truth, plan, arg):
    p = _int_arg(arg, "fvar")
    g = get_weight(plan.g)
    theta = series.grid.theta
    coeffs = mu_bar_coefficients(g, g, p)
    target = theta ** (1 - p) * truth.integral(lambda s, a: mu_bar_eval(coeffs, theta * s, a))
    return {"value": feasible_variance(series, g, g, p), "truth": target}


STATISTICS: dict[str, Callable] = {
    "qv": _stat_qv,
    "ivp": _stat_ivp,
    "jump_power": _stat_jump_power,
    "ci_ivp": _stat_ci_ivp,
    "qv_ci": _stat_qv_ci,
    "jump_test": _stat_jump_test,
    "fvar": _stat_fvar,
}


# ---------------------------------------------------------------------------
# plan and summary


@dataclass
class ExperimentPlan:
    model: ModelSpec
    ladder: tuple[int, ...]
    statistics: tuple[str, ...]
    replications: int = 200
    seed: int = 0
    theta: float = 1.0
    g: str = "triangle"
    h: str = "sine"
    level: float = 0.95
    finite_sample: bool = False
    keep_raw: bool = False
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ladder = tuple(int(n) for n in self.ladder)
        self.statistics = tuple(self.statistics)
        if self.replications < 2:
            raise ConfigError("replications must be >= 2")
        if not self.ladder or any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ConfigError("grid ladder must be nonempty and strictly increasing in n")
        if not self.statistics:
            raise ConfigError("plan lists no statistics")
        for name in self.statistics:
            base, _ = _split(name)
            if base not in STATISTICS:
                raise ConfigError(f"unknown statistic {name!r}; known: {', '.join(sorted(STATISTICS))}")
        get_weight(self.g)
        get_weight(self.h)
        unknown = set(self.outputs) - {"summary_json", "summary_csv", "raw_csv"}
        if unknown:
            raise ConfigError(f"unknown output keys {sorted(unknown)}")

    def grids(self) -> list[SamplingGrid]:
        return [SamplingGrid.from_horizon(self.model.horizon, n, self.theta) for n in self.ladder]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        d = dict(d)
        if "model" not in d:
            raise ConfigError("plan needs a 'model' section")
        d["model"] = ModelSpec.from_dict(d["model"])
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown plan keys {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"malformed plan: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentPlan":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read plan {path}: {exc}") from None
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        d["ladder"] = list(self.ladder)
        d["statistics"] = list(self.statistics)
        return d


@dataclass
class ExperimentSummary:
    plan: dict
    rows: list[dict]
    regressions: dict[str, dict]
    failures: list[dict]
    raw: list[dict] | None = None

    def row(self, statistic: str, n: int) -> dict:
        for r in self.rows:
            if r["statistic"] == statistic and r["n"] == n:
                return r
        raise KeyError((statistic, n))

    def to_dict(self) -> dict:
        d = {"plan": self.plan, "rows": self.rows, "regressions": self.regressions, "failures": self.failures}
        if self.raw is not None:
            d["raw"] = self.raw
        return d

    def write(self, json_path=None, csv_path=None, raw_path=None) -> None:
        if json_path:
            Path(json_path).write_text(json.dumps(_jsonable(self.to_dict()), indent=2))
        if csv_path:
            cols = ["statistic", "n", "k_n", "replications", "valid", "mean", "truth_mean", "bias", "sd",
                    "rmse", "coverage", "rejection_rate"]
            with open(csv_path, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
                w.writeheader()
                for r in self.rows:
                    w.writerow({c: _fmt(r.get(c)) for c in cols})
        if raw_path:
            if self.raw is None:
                raise ConfigError("raw values were not retained; set keep_raw")
            cols = ["statistic", "n", "rep", "value", "truth", "covers", "reject"]
            with open(raw_path, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
                w.writeheader()
                for r in self.raw:
                    w.writerow({c: _fmt(r.get(c)) for c in cols})


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.12g}"
    return "" if v is None else v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# execution


def _one_replication(plan: ExperimentPlan, grid: SamplingGrid, grid_idx: int, rep: int):
    ss = replication_seed(plan.seed, grid_idx, rep)
    out: dict[str, dict] = {}
    fails: list[dict] = []
    try:
        series, truth = simulate_path(plan.model, grid, ss)
    except Exception as exc:  # recorded, never dropped
        fails.append({"statistic": None, "n": grid.n_obs, "rep": rep, "seed": [plan.seed, grid_idx, rep],
                      "error": f"{type(exc).__name__}: {exc}"})
        return out, fails
    for name in plan.statistics:
        base, arg = _split(name)
        try:
            out[name] = STATISTICS[base](series, truth, plan, arg)
        except Exception as exc:
            fails.append({"statistic": name, "n": grid.n_obs, "rep": rep, "seed": [plan.seed, grid_idx, rep],
                          "error": f"{type(exc).__name__}: {exc}"})
    return out, fails


def _aggregate(name: str, grid: SamplingGrid, results: list[dict | None]) -> dict:
    r_total = len(results)
    vals = np.array([np.nan if r is None else float(r["value"]) for r in results])
    truths = np.array([np.nan if r is None or r.get("truth") is None else float(r["truth"]) for r in results])
    ok = np.isfinite(vals)
    row = {"statistic": name, "n": grid.n_obs, "k_n": grid.k_n, "replications": r_total,
           "valid": int(ok.sum())}
    v = vals[ok]
    row["mean"] = float(v.mean()) if v.size else float("nan")
    has_truth = ok & np.isfinite(truths)
    if has_truth.sum() >= 2:
        err = vals[has_truth] - truths[has_truth]
        m = err.size
        bias = float(err.mean())
        sd = float(err.std(ddof=1))
        row.update(truth_mean=float(truths[has_truth].mean()), bias=bias, sd=sd,
                   rmse=float(math.sqrt(np.mean(err**2))), bias_se=sd / math.sqrt(m))
    else:
        row.update(truth_mean=float("nan"), bias=float("nan"), sd=float(v.std(ddof=1)) if v.size > 1 else float("nan"),
                   rmse=float("nan"), bias_se=float("nan"))
    for key, label in (("covers", "coverage"), ("reject", "rejection_rate")):
        flags = [r[key] for r in results if r is not None and r.get(key) is not None]
        if flags:
            row[label] = float(np.mean(flags))
            row[label + "_count"] = len(flags)
            row[label + "_abstained"] = r_total - len(flags)
    return row


def _regression(rows: list[dict]) -> dict | None:
    pts = [(r["n"], r["rmse"]) for r in rows if np.isfinite(r.get("rmse", np.nan)) and r["rmse"] > 0]
    if len(pts) < 2:
        return None
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    if len(pts) == 2:
        slope = float((y[1] - y[0]) / (x[1] - x[0]))
        return {"slope": slope, "intercept": float(y[0] - slope * x[0]), "r2": 1.0, "points": 2}
    fit = stats.linregress(x, y)
    return {"slope": float(fit.slope), "intercept": float(fit.intercept), "r2": float(fit.rvalue**2),
            "slope_se": float(fit.stderr), "points": len(pts)}


def run_experiment(plan: ExperimentPlan, workers: int | None = None, order: list[int] | None = None) -> ExperimentSummary:
    """Run every replication of every grid point and summarise.

    Replication ``rep`` at grid index ``i`` always draws from
    ``replication_seed(plan.seed, i, rep)``, and results are aggregated in
    replication order, so the summary does not depend on scheduling.
    ``order`` permutes the submission order (used to test exactly that).
    """
    workers = thread_cap() if workers is None else max(1, int(workers))
    reps = list(range(plan.replications)) if order is None else [int(i) for i in order]
    if sorted(reps) != list(range(plan.replications)):
        raise ConfigError("order must be a permutation of range(replications)")
    rows, failures, raw = [], [], [] if plan.keep_raw else None
    for gi, grid in enumerate(plan.grids()):
        slots: list = [None] * plan.replications
        if workers == 1:
            for rep in reps:
                slots[rep] = _one_replication(plan, grid, gi, rep)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futs = {rep: pool.submit(_one_replication, plan, grid, gi, rep) for rep in reps}
                for rep, fut in futs.items():
                    slots[rep] = fut.result()
        for rep in range(plan.replications):
            failures.extend(slots[rep][1])
        for name in plan.statistics:
            results = [slots[rep][0].get(name) for rep in range(plan.replications)]
            rows.append(_aggregate(name, grid, results))
            if raw is not None:
                for rep, r in enumerate(results):
                    if r is not None:
                        raw.append({"statistic": name, "n": grid.n_obs, "rep": rep, **r})
    regressions = {}
    for name in plan.statistics:
        reg = _regression([r for r in rows if r["statistic"] == name])
        if reg is not None:
            regressions[name] = reg
    summary = ExperimentSummary(plan.to_dict(), rows, regressions, failures, raw)
    if plan.outputs:
        summary.write(plan.outputs.get("summary_json"), plan.outputs.get("summary_csv"),
                      plan.outputs.get("raw_csv"))
    return summary


# ---------------------------------------------------------------------------
# Monte Carlo oracle for the Gaussian kernels


def _check_step(grid_step: float) -> int:
    if not 0 < grid_step <= 1.0 / 500:
        raise ConfigError(f"grid_step must lie in (0, 1/500], got {grid_step}")
    cells = round(1.0 / grid_step)
    if abs(cells * grid_step - 1.0) > 1e-9:
        raise ConfigError("1 / grid_step must be an integer")
    return cells


def _cell_weights(g, cells: int, derivative: bool) -> np.ndarray:
    mid = (np.arange(cells) + 0.5) / cells
    f = g.derivative(mid) if derivative else g(mid)
    return np.asarray(f, dtype=float) / math.sqrt(cells)


def sample_kernel_process(g, times, R: int, grid_step: float = 1 / 2000, seed=None,
                          derivative: bool = False) -> np.ndarray:
    """Draws of L(g)_t (or L'(g)_t) at ``times``: shape (R, len(times)).

    White noise is discretised into cells of width ``grid_step`` with the
    weight evaluated at cell midpoints.
    """
    g = get_weight(g)
    cells = _check_step(grid_step)
    times = np.asarray(times, dtype=float)
    starts = np.round(times * cells).astype(np.int64)
    if np.any(np.abs(starts / cells - times) > 1e-9) or np.any(starts < 0):
        raise ConfigError("times must be nonnegative multiples of grid_step")
    w = _cell_weights(g, cells, derivative)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((int(R), int(starts.max()) + cells))
    return _loops.window_dots(noise, np.broadcast_to(starts, (int(R), starts.size)).copy(), w)


def kernel_mc_oracle(g, h, p: int, eta: float, zeta: float, grid_step: float = 1 / 2000, R: int = 10_000,
                     seed=None, quantity: str = "mu_bar", q: int | None = None, strata: int = 8,
                     batch: int = 500) -> tuple[float, float]:
    """Monte Carlo estimate and standard error of mu_bar_2p(g, h) or m_{p,q}(g, h).

    Each replication draws two white noises on [0, 3] and evaluates the
    window at 1 against ``strata`` stratified times in [0, 2]; the product
    term of mu_bar uses the disjoint windows at 0 and 2.
    """
    g, h = get_weight(g), get_weight(h)
    cells = _check_step(grid_step)
    if R < 2 or strata < 1:
        raise ConfigError("need R >= 2 and strata >= 1")
    if quantity == "mu_bar":
        if p < 2 or p % 2:
            raise ConfigError("mu_bar needs an even integer p >= 2")
        rho = solve_rho(p).rho
        cg = 2.0 * zeta**2 * continuous_norm(g, 2.0, True)
        ch = 2.0 * zeta**2 * continuous_norm(h, 2.0, True)
        pg = lambda x: sum(rho[r] * cg**r * x ** (p - 2 * r) for r in range(p // 2 + 1))  # noqa: E731
        ph = lambda x: sum(rho[r] * ch**r * x ** (p - 2 * r) for r in range(p // 2 + 1))  # noqa: E731
    elif quantity == "m":
        q = p if q is None else int(q)
        if p < 0 or q < 0:
            raise ConfigError("p and q must be nonnegative")
        pg = lambda x: x**p  # noqa: E731
        ph = lambda x: x**q  # noqa: E731
    else:
        raise ConfigError(f"unknown quantity {quantity!r}; use mu_bar or m")

    wg, wgd = _cell_weights(g, cells, False), _cell_weights(g, cells, True)
    wh, whd = _cell_weights(h, cells, False), _cell_weights(h, cells, True)
    rng = np.random.default_rng(seed)
    span = 3 * cells
    samples = np.empty(int(R))
    done = 0
    while done < R:
        b = min(batch, R - done)
        w1 = rng.standard_normal((b, span))
        w2 = rng.standard_normal((b, span))
        # stratified lags: one uniform cell index per stratum of [0, 2)
        edges = np.linspace(0, 2 * cells, strata + 1).astype(np.int64)
        starts = edges[:-1] + (rng.random((b, strata)) * np.diff(edges)).astype(np.int64)
        fixed = np.tile(np.array([0, cells, 2 * cells], dtype=np.int64), (b, 1))

        def mix(starts_, w, wd):
            return eta * _loops.window_dots(w1, starts_, w) + zeta * _loops.window_dots(w2, starts_, wd)

        yg = mix(fixed, wg, wgd)        # g-windows at 0, 1, 2
        yh = mix(fixed, wh, whd)        # h-windows at 0, 1, 2
        ys = mix(starts, wh, whd)       # h-windows at stratified lags
        inner = 2.0 * np.mean(pg(yg[:, 1:2]) * ph(ys), axis=1)
        if quantity == "mu_bar":
            inner = inner - 2.0 * pg(yg[:, 0]) * ph(yh[:, 2])
        samples[done:done + b] = inner
        done += b
    return float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(R))
