"""Command line entry point: ``preavg {kernels,simulate,estimate,infer,mc}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .errors import ConfigError, NumericalError, PreavgError
from .estimators import SamplingGrid, estimate, read_csv, write_csv, write_reports
from .inference import jump_test, qv_interval, studentized_power
from .kernels import (
    continuous_norm,
    get_weight,
    mu_bar_coefficients,
    mu_bar_eval,
    psi_matrices,
    solve_rho,
)
from .montecarlo import ExperimentPlan, run_experiment
from .simulate import ModelSpec, SimTruth, simulate_path

log = logging.getLogger("preavg")

BUNDLED_PLANS = ("rate_check",)


class _UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UserError(f"{self.prog}: {message}")


def fmt(x) -> str:
    return f"{float(x):.12g}"


def _rational(x: float) -> str:
    f = Fraction(x).limit_denominator(1_000_000)
    if f.denominator > 1 and abs(float(f) - x) <= 1e-12 * abs(x):
        return f" ({f.numerator}/{f.denominator})"
    return ""


def _load_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, default=float))
    log.info("wrote %s", path)


# ---------------------------------------------------------------------------
# subcommands


def cmd_kernels(args) -> int:
    g = get_weight(args.g)
    family = [g] if args.h is None else [g, get_weight(args.h)]
    p = args.p
    lines = [f"weight {g.name}"]
    for q in sorted({2.0, float(p)}):
        v = continuous_norm(g, q)
        lines.append(f"gbar({q:g}) = {fmt(v)}{_rational(v)}")
        v = continuous_norm(g, q, derivative=True)
        lines.append(f"gbar'({q:g}) = {fmt(v)}{_rational(v)}")
    if p >= 2 and p % 2 == 0:
        rho = solve_rho(p)
        lines.append(f"rho_{p} = " + ", ".join(f"{r.numerator}/{r.denominator}" if r.denominator > 1 else str(r.numerator)
                                              for r in rho.exact))
        coeffs = mu_bar_coefficients(g, family[-1], p)
        lines.append(f"mu_bar_{2 * p}({g.name},{family[-1].name}; {fmt(args.eta)}, {fmt(args.zeta)}) = "
                     f"{fmt(mu_bar_eval(coeffs, args.eta, args.zeta))}")
        lines.append("  coefficients of eta^(2v) zeta^(2(p-v)), v = 0..p: "
                     + ", ".join(fmt(c) for c in coeffs))
    if p == 2 or p > 3:
        names = ("Psi_{p}+", "Psi_{p}-", "Psibar_{p}+", "Psibar_{p}-")
        mats = psi_matrices(family, p)
        order = (1, 0, 3, 2)  # returned as (-, +, bar -, bar +)
        for name, idx in zip(names, order):
            m = mats[idx]
            label = name.format(p=p)
            if m.shape == (1, 1):
                lines.append(f"{label} = {fmt(m[0, 0])}{_rational(m[0, 0])}")
            else:
                lines.append(f"{label} =")
                lines.extend("  " + "  ".join(fmt(v) for v in row) for row in m)
    else:
        lines.append(f"Psi matrices need p = 2 or p > 3 (got {p})")
    print("\n".join(lines))
    return 0


def _grid_from(cfg: dict, args) -> SamplingGrid:
    n = args.n if args.n is not None else cfg.get("n_obs")
    if n is None:
        raise ConfigError("number of observations missing: pass --n or set n_obs in the config")
    theta = args.theta if args.theta is not None else float(cfg.get("theta", 1.0))
    horizon = float(cfg.get("model", {}).get("horizon", 1.0))
    return SamplingGrid.from_horizon(horizon, int(n), theta)


def cmd_simulate(args) -> int:
    if not args.config:
        raise ConfigError("simulate needs --config <model.json>")
    cfg = _load_json(args.config)
    if "model" not in cfg:
        raise ConfigError("config needs a 'model' block (and n_obs, optionally theta)")
    spec = ModelSpec.from_dict(cfg["model"])
    grid = _grid_from(cfg, args)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    series, truth = simulate_path(spec, grid, int(seed))
    out = _out_dir(args)
    write_csv(series, out / "series.csv")
    truth.save(out / "truth.json")
    print(f"wrote {out / 'series.csv'} and {out / 'truth.json'} (n={grid.n_obs}, k_n={grid.k_n}, "
          f"jumps={truth.n_jumps()})")
    return 0


def _reports(series, args):
    reps = [estimate(series, args.g, "quadratic_variation")]
    p = args.p
    if p >= 2 and p % 2 == 0:
        reps.append(estimate(series, args.g, "integrated_power", p=p))
    if p > 2:
        reps.append(estimate(series, args.g, "jump_power", p=p))
    return reps


def _truth_values(truth: SimTruth, p: int) -> dict:
    d = {"quadratic_variation": truth.quadratic_variation()}
    if p >= 2 and p % 2 == 0 and p in truth.integrated:
        d["integrated_power"] = truth.integrated_power(p)
    if p > 2:
        d["jump_power"] = truth.jump_power(p)
    return d


def cmd_estimate(args) -> int:
    if not args.input:
        raise ConfigError("estimate needs --input <series.csv>")
    series = read_csv(args.input, theta=args.theta if args.theta is not None else 1.0)
    reports = _reports(series, args)
    truth = SimTruth.load(args.truth) if args.truth else None
    tv = _truth_values(truth, args.p) if truth else {}
    for r in reports:
        extra = f"   truth {fmt(tv[r.name])}" if r.name in tv else ""
        print(f"{r.name:<22s} {r.target:<32s} {fmt(r.value)}{extra}")
    if args.out:
        out = _out_dir(args)
        write_reports(reports, out / "estimates.json")
        if tv:
            _dump({"truth": tv}, out / "truth_values.json")
    return 0


def cmd_infer(args) -> int:
    if not args.input:
        raise ConfigError("infer needs --input <series.csv>")
    series = read_csv(args.input, theta=args.theta if args.theta is not None else 1.0)
    truth = SimTruth.load(args.truth) if args.truth else None
    results = []
    if args.p >= 2 and args.p % 2 == 0:
        results.append(studentized_power(series, args.g, args.p, level=args.level, truth=truth))
    results.append(qv_interval(series, args.g, level=args.level, mode="feasible", truth=truth))
    if truth is not None:
        results.append(qv_interval(series, args.g, level=args.level, mode="oracle", truth=truth))
    results.append(jump_test(series, args.g, args.h or "sine", level=1.0 - args.level))
    for r in results:
        if r.std_error is None:
            print(f"{r.name:<22s} {fmt(r.estimate)}   no interval: {', '.join(r.flags)}")
        elif r.name == "jump_test":
            print(f"{r.name:<22s} S={fmt(r.estimate)} z={fmt(r.studentized)} p={fmt(r.p_value)} "
                  f"reject={r.reject}")
        else:
            print(f"{r.name:<22s} {fmt(r.estimate)} [{fmt(r.lo)}, {fmt(r.hi)}] se={fmt(r.std_error)} "
                  f"({r.variance})")
    if args.out:
        _dump([r.to_record() for r in results], _out_dir(args) / "inference.json")
    if any("nonpositive_variance" in r.flags for r in results):
        log.warning("some variance estimates were not positive; see flags")
    return 0


def _load_plan(ref: str) -> ExperimentPlan:
    if ref in BUNDLED_PLANS:
        text = resources.files("preavg").joinpath("plans", f"{ref}.json").read_text()
        return ExperimentPlan.from_dict(json.loads(text))
    return ExperimentPlan.load(ref)


def cmd_mc(args) -> int:
    ref = args.plan or args.config
    if not ref:
        raise ConfigError(f"mc needs --plan <path or one of {', '.join(BUNDLED_PLANS)}>")
    plan = _load_plan(ref)
    if args.seed is not None:
        plan.seed = int(args.seed)
    if args.replications is not None:
        plan = ExperimentPlan.from_dict({**plan.to_dict(), "replications": args.replications})
    if args.theta is not None:
        plan.theta = float(args.theta)
    plan.outputs = {}
    out = _out_dir(args)
    summary = run_experiment(plan, workers=args.workers)
    summary.write(out / "summary.json", out / "summary.csv", (out / "raw.csv") if plan.keep_raw else None)
    for r in summary.rows:
        cov = f" coverage={fmt(r['coverage'])}" if "coverage" in r else ""
        rej = f" rejection={fmt(r['rejection_rate'])}" if "rejection_rate" in r else ""
        print(f"{r['statistic']:<14s} n={r['n']:<7d} mean={fmt(r['mean'])} bias={fmt(r['bias'])} "
              f"rmse={fmt(r['rmse'])}{cov}{rej}")
    for name, reg in summary.regressions.items():
        print(f"rate {name}: slope={fmt(reg['slope'])} intercept={fmt(reg['intercept'])} r2={fmt(reg['r2'])}")
    if summary.failures:
        print(f"{len(summary.failures)} replication failures recorded in summary.json", file=sys.stderr)
        return 2
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config or plan file")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--g", default="triangle", help="weight name or JSON file (default triangle)")
    common.add_argument("--h", default=None, help="second weight for covariances and the jump test")
    common.add_argument("--p", type=int, default=4, help="power (default 4)")
    common.add_argument("--theta", type=float, default=None, help="window constant theta (default 1)")
    common.add_argument("--level", type=float, default=0.95, help="confidence level (default 0.95)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="preavg", description="Pre-averaging estimators for noisy high-frequency data.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    k = sub.add_parser("kernels", parents=[common], help="print norms, rho table, mu_bar and Psi constants")
    k.add_argument("--eta", type=float, default=1.0)
    k.add_argument("--zeta", type=float, default=1.0)
    k.set_defaults(func=cmd_kernels)

    s = sub.add_parser("simulate", parents=[common], help="simulate one path; writes series.csv + truth.json")
    s.add_argument("--n", type=int, default=None, help="number of increments (overrides n_obs)")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", parents=[common], help="estimate QV and power functionals from a CSV")
    e.add_argument("--input", "-i", help="observations CSV")
    e.add_argument("--truth", help="truth JSON written by simulate")
    e.set_defaults(func=cmd_estimate)

    i = sub.add_parser("infer", parents=[common], help="confidence intervals and the jump test")
    i.add_argument("--input", "-i", help="observations CSV")
    i.add_argument("--truth", help="truth JSON (enables oracle QV interval and studentized values)")
    i.set_defaults(func=cmd_infer)

    m = sub.add_parser("mc", parents=[common], help="run a Monte Carlo experiment plan")
    m.add_argument("--plan", help=f"plan JSON path or bundled name ({', '.join(BUNDLED_PLANS)})")
    m.add_argument("--replications", "-R", type=int, default=None)
    m.add_argument("--workers", type=int, default=None, help="thread count (default PREAVG_THREADS or CPUs)")
    m.set_defaults(func=cmd_mc)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        achieved = getattr(exc, "achieved", None)
        if achieved is not None:
            print(f"  achieved tolerance: {achieved:.3g}", file=sys.stderr)
        return 2
    except (PreavgError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
