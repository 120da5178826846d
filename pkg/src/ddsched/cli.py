"""Command-line experiment driver.

Exit codes: 0 success (a missing interior optimum is a valid answer),
1 numerical failure, 2 usage or configuration error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from collections.abc import Sequence
from pathlib import Path

from . import __version__
from .config import (
    OUTPUT_DIR_ENV,
    ExperimentConfig,
    parse_dist,
    parse_family,
    parse_grid,
    parse_list,
    parse_number,
    read_ini,
    resolve,
)
from .cost_model import mean_cost_rate, random_schedule_cost
from .errors import DomainError, NumericalError
from .optimizer import (
    asymptotic_interval,
    fit_asymptotic_slope,
    linear_size_family,
    solve_optimal_interval,
    sweep_table,
)
from .report import Table, render
from .simulator import Fixed, Renewal, compare_policies, describe, estimate_cost_rate

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE, EXIT_VALIDATION = 0, 1, 2, 3

# Published optimal intervals for the saturating-exponential example model,
# keyed by (n, lambda as text).
PUBLISHED_INTERVALS: list[tuple[int, str, float]] = [
    (50, "1", 0.214699),
    (100, "1", 0.148555),
    (200, "1", 0.103495),
    (500, "1", 0.064189),
    (1000, "1", 0.045402),
    (50, "1/30", 2.0223),
    (100, "1/30", 1.0973),
    (200, "1/30", 0.6832),
    (500, "1/30", 0.3942),
    (1000, "1/30", 0.2675),
]
TABLE_REL_TOL = 1e-3
SIMULATE_SIGMA_LIMIT = 5.0
SLOPE_TARGET, SLOPE_TOL = -1.0 / 3.0, 0.03
CLOSED_FORM_REL_TOL = 1e-6


class ValidationFailure(Exception):
    """Raised after output is written when a --check style test fails."""


def _meta(cfg: ExperimentConfig, **extra) -> dict:
    return {
        "artifact": f"ddsched {__version__}",
        "command": cfg.command,
        "config_sha256": cfg.digest(),
        "config": cfg.relevant(),
        **extra,
    }


def _interval(cfg: ExperimentConfig, model) -> float:
    if cfg["t"]:
        return cfg.number("t")
    res = solve_optimal_interval(model, t_max=cfg.number("t_max"), rel_tol=cfg.number("rel_tol"))
    if not res.converged:
        raise DomainError("model has no interior optimum; pass --t explicitly")
    return res.t_star


def cmd_cost(cfg: ExperimentConfig) -> Table:
    grid = parse_grid(cfg["grid"])
    if cfg["family"]:
        key, raw = parse_family(cfg["family"])
    else:
        key, raw = "n", [cfg["n"]]
    series = []
    for text in raw:
        if key == "n":
            n, lam_text = parse_number(text), cfg["lambda"]
        else:
            n, lam_text = cfg.number("n"), text
        series.append((f"{key}={text}", n, lam_text, cfg.model(n=n, lam=parse_number(lam_text))))

    layout = cfg["layout"]
    if layout == "long":
        rows = [
            [label, n, parse_number(lam), float(T), mean_cost_rate(model, float(T))]
            for label, n, lam, model in series
            for T in grid
        ]
        return Table(["series", "n", "lambda", "T", "cost"], rows, _meta(cfg))
    if layout == "wide":
        rows = [[float(T)] + [mean_cost_rate(m, float(T)) for *_, m in series] for T in grid]
        return Table(["T"] + [s[0] for s in series], rows, _meta(cfg))
    raise DomainError(f"layout must be long or wide, got {layout!r}")


def cmd_optimize(cfg: ExperimentConfig) -> Table:
    model = cfg.model()
    res = solve_optimal_interval(model, t_max=cfg.number("t_max"), rel_tol=cfg.number("rel_tol"))
    lo, hi = res.bracket if res.bracket else (None, None)
    guess = asymptotic_interval(model.n, model.lam) if model.lam > 0 else None
    row = [model.n, model.lam, res.status, res.t_star, res.cost_at_optimum, lo, hi, res.iterations, res.residual, guess]
    cols = ["n", "lambda", "status", "t_star", "cost_at_optimum", "bracket_lo", "bracket_hi", "iterations", "residual", "asymptotic_guess"]
    return Table(cols, [row], _meta(cfg))


def first_order_residual(n: float, lam: float, t: float) -> float:
    """Relative defect of ``lam * n * (1 - (1 + t) * exp(-t)) = 1``."""
    return abs(lam * n * (-math.expm1(-t) - t * math.exp(-t)) - 1.0)


def cmd_table(cfg: ExperimentConfig) -> Table:
    entries = PUBLISHED_INTERVALS
    if cfg["lambda_only"]:
        want = cfg.number("lambda_only")
        entries = [e for e in entries if parse_number(e[1]) == want]
    models = [cfg.model(n=float(n), lam=parse_number(lam)) for n, lam, _ in entries]
    results = sweep_table(models, t_max=cfg.number("t_max"), rel_tol=cfg.number("rel_tol"))
    rows = []
    for (n, _, published), row in zip(entries, results):
        t = row.result.t_star
        rel = abs(t - published) / published if t is not None else None
        foc = first_order_residual(row.n, row.lam, t) if t is not None else None
        ok = rel is not None and rel <= TABLE_REL_TOL
        rows.append([n, row.lam, row.result.status, t, published, rel, ok, foc])
    table = Table(
        ["n", "lambda", "status", "t_star", "published", "rel_error", "within_tol", "first_order_residual"],
        rows,
        _meta(cfg, tolerance=TABLE_REL_TOL),
    )
    if cfg.flag("check") and not all(r[6] for r in rows):
        misses = ", ".join(f"n={r[0]} lambda={r[1]:.6g}" for r in rows if not r[6])
        raise ValidationFailure(f"rows outside relative {TABLE_REL_TOL}: {misses}", table)
    return table


def cmd_simulate(cfg: ExperimentConfig) -> Table:
    model = cfg.model()
    T = _interval(cfg, model)
    spec = cfg["policy"]
    if spec == "fixed":
        policy, analytic = Fixed(T), mean_cost_rate(model, T)
    else:
        dist = parse_dist(spec, T)
        policy, analytic = Renewal(dist), random_schedule_cost(model, dist)
    est = estimate_cost_rate(model, policy, cfg.integer("cycles"), cfg.integer("seed"), cfg.integer("workers"))
    z = (est.mean_cost_rate - analytic) / est.std_error if est.std_error > 0 else (0.0 if est.mean_cost_rate == analytic else math.inf)
    row = [describe(policy), T, est.cycles, est.seed, est.mean_cost_rate, est.std_error, analytic, z, est.total_sim_time]
    table = Table(
        ["policy", "mean_interval", "cycles", "seed", "estimate", "std_error", "analytic", "z_score", "total_sim_time"],
        [row],
        _meta(cfg),
    )
    if abs(z) > SIMULATE_SIGMA_LIMIT:
        raise ValidationFailure(f"simulation deviates from analytic value by {z:.2f} sigma", table)
    return table


def cmd_compare(cfg: ExperimentConfig) -> Table:
    model = cfg.model()
    T = _interval(cfg, model)
    dists = [parse_dist(d, T) for d in cfg["dists"].split(",") if d.strip()]
    rows = compare_policies(model, T, dists, cfg.integer("cycles"), cfg.integer("seed"), cfg.integer("workers"))
    cols = [
        "policy", "analytic", "simulated", "std_error", "delta_analytic",
        "delta_simulated", "sigma_combined", "statistical_violation", "analytic_violation",
    ]
    table = Table(cols, [[getattr(r, c) for c in cols] for r in rows], _meta(cfg, mean_interval=T))
    if any(r.analytic_violation for r in rows):
        raise ValidationFailure("analytic random-schedule cost fell below the fixed-interval cost", table)
    return table


def closed_form_linear_optimum(n: float, lam: float, c: float, c1: float) -> float:
    """Optimal interval of the linear relative size model with ``C_D = 2 n**2``."""
    return (3.0 / (lam * c * c1 * c1 * n)) ** (1.0 / 3.0)


def cmd_asymptotic(cfg: ExperimentConfig) -> Table:
    lam, c, c1 = cfg.number("lambda"), cfg.number("c"), cfg.number("c1")
    ns = parse_list(cfg["n_values"])
    fit = fit_asymptotic_slope(
        linear_size_family(c1=c1, c=c), ns, lam, t_max=cfg.number("t_max"), rel_tol=cfg.number("rel_tol")
    )
    rows = []
    for n, (_, y) in zip(sorted(ns), fit.points):
        t_star, closed = math.exp(y), closed_form_linear_optimum(n, lam, c, c1)
        rows.append([n, lam * n, t_star, closed, abs(t_star - closed) / closed])
    table = Table(
        ["n", "lambda_n", "t_star", "closed_form", "rel_error"],
        rows,
        _meta(cfg, slope=fit.slope, intercept=fit.intercept, max_residual=fit.max_residual),
    )
    if cfg.flag("check"):
        if abs(fit.slope - SLOPE_TARGET) > SLOPE_TOL:
            raise ValidationFailure(f"slope {fit.slope:.4f} is outside -1/3 +- {SLOPE_TOL}", table)
        if any(r[4] > CLOSED_FORM_REL_TOL for r in rows):
            raise ValidationFailure("optimal interval departs from the closed form", table)
    return table


COMMANDS = {
    "cost": (cmd_cost, "cost-rate curves C(T) over a grid of detection intervals"),
    "optimize": (cmd_optimize, "optimal detection interval of one model"),
    "table": (cmd_table, "optimal intervals for the published (n, lambda) pairs"),
    "simulate": (cmd_simulate, "Monte Carlo estimate of the long-run cost rate"),
    "compare": (cmd_compare, "fixed vs random detection intervals with matched mean"),
    "asymptotic": (cmd_asymptotic, "log-log slope of T* against lambda*n"),
}

# flag -> config key
_FLAGS = {
    "--model": "model", "--n": "n", "--lambda": "lambda", "--size": "size", "--rate": "rate",
    "--coeffs": "coeffs", "--c": "c", "--preset": "preset", "--detection-cost": "detection_cost",
    "--t-max": "t_max", "--rel-tol": "rel_tol", "--grid": "grid", "--family": "family",
    "--layout": "layout", "--lambda-only": "lambda_only", "--t": "t", "--policy": "policy",
    "--dists": "dists", "--cycles": "cycles", "--seed": "seed", "--workers": "workers",
    "--n-values": "n_values", "--c1": "c1",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [model] and [<command>] sections")
    for flag, key in _FLAGS.items():
        common.add_argument(flag, dest=key, default=None, metavar=key.upper())
    common.add_argument("--relative", dest="relative", action="store_const", const="true", default=None,
                        help="polynomial coefficients describe the blocked fraction n_D/n")
    common.add_argument("--check", dest="check", action="store_const", const="true", default=None,
                        help="exit 3 when reference values are missed")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", help=f"output file, '-' for stdout (default: stdout, or ${OUTPUT_DIR_ENV}/<command>.<format>)")
    common.add_argument("--emit-config", help="write the resolved configuration as an INI file")

    parser = argparse.ArgumentParser(prog="ddsched", description="Deadlock detection scheduling experiments.")
    parser.add_argument("--version", action="version", version=f"ddsched {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def _destination(args) -> Path | None:
    if args.out == "-":
        return None
    if args.out:
        return Path(args.out)
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir:
        return Path(env_dir) / f"{args.command}.{args.format}"
    return None


def _emit(table: Table, args) -> None:
    text = render(table, args.format)
    dest = _destination(args)
    if dest is None:
        sys.stdout.write(text)
    else:
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_text(text, encoding="utf-8")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {key: getattr(args, key) for key in list(_FLAGS.values()) + ["relative", "check"]}
    try:
        file_values = read_ini(args.config, args.command) if args.config else {}
        cfg = resolve(args.command, file_values, flags)
        if args.emit_config:
            Path(args.emit_config).write_text(cfg.to_ini(), encoding="utf-8")
        table = COMMANDS[args.command][0](cfg)
    except ValidationFailure as exc:
        message, table = exc.args
        _emit(table, args)
        print(f"ddsched: validation failed: {message}", file=sys.stderr)
        return EXIT_VALIDATION
    except DomainError as exc:
        print(f"ddsched: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"ddsched: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _emit(table, args)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
