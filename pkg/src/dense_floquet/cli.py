"""Command-line front end.

Every subcommand shares the model flags (--omega, --gamma, --sigma, --cutoff,
--path-cutoff) and an optional JSON config file; flags override file values.
Outputs start with a provenance header echoing the full configuration, so a
file can be regenerated from itself.  Exit codes: 0 ok, 1 computation error,
2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from . import diophantine as dio
from . import oracle, resolvent, rs_series, solver
from .checks import run_checks
from .errors import FloquetError
from .lattice import ModelParams, critical_set

MODEL_FLAGS = {
    "omega": "omega",
    "gamma": "gamma",
    "sigma": "sigma",
    "cutoff": "n2_cutoff",
    "path_cutoff": "path_cutoff",
}


@dataclass
class RunConfig:
    model: ModelParams
    command: str
    options: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    output_path: str | None = None
    output_format: str = "csv"
    workers: int | None = None

    def provenance(self) -> dict:
        return {
            "program": "dense-floquet",
            "version": __version__,
            "command": self.command,
            "model": self.model.to_dict(),
            "solver": self.solver,
            "options": self.options,
        }


# ---------------------------------------------------------------------------
# argument parsing


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("model")
    g.add_argument("--config", help="JSON file with 'model', 'solver' and 'workers' entries")
    g.add_argument("--omega", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--cutoff", type=int, help="largest |n2| scanned")
    g.add_argument("--path-cutoff", type=int, help="largest path length")
    g.add_argument("--workers", type=int, help="worker processes (default: FLOQUET_WORKERS or CPU count)")
    g.add_argument("--output", "-o", help="write to this file instead of stdout")
    g.add_argument("--format", choices=("csv", "json"), help="output format")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="dense-floquet",
        description="Perturbed eigenvalue 0 of K + beta V with dense point spectrum.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("xi", parents=[common], help="RS coefficients by both formulas")
    p.add_argument("--order", type=int, nargs="+", default=[2, 4, 6])

    p = sub.add_parser("dioph", parents=[common], help="measure of the excluded lambda set")
    p.add_argument("--delta-min", type=float, default=2.0 ** -12)
    p.add_argument("--delta-max", type=float, default=0.25)

    p = sub.add_parser("curve", parents=[common], help="fixed-point curve lambda(beta)")
    p.add_argument("--lambda-max", type=float, default=0.01)
    p.add_argument("--grid", type=int, default=50)
    p.add_argument("--kmax", type=int, default=6)

    p = sub.add_parser("asym", parents=[common], help="remainder slopes of the RS truncations")
    p.add_argument("--orders", type=int, nargs="+", default=[2, 4])
    p.add_argument("--beta-min", type=float, default=1e-3)
    p.add_argument("--beta-max", type=float, default=1e-2)
    p.add_argument("--steps", type=int, default=15)
    p.add_argument("--kmax", type=int, default=6)

    p = sub.add_parser("oracle", parents=[common], help="finite-matrix eigenvalue branch")
    p.add_argument("--beta-min", type=float, default=0.005)
    p.add_argument("--beta-max", type=float, default=0.05)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--n1", type=int, default=40)
    p.add_argument("--n2", type=int, default=12)

    p = sub.add_parser("resolvent", parents=[common], help="table of G_k(lambda)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--kmax", type=int, default=6)

    sub.add_parser("check", parents=[common], help="run the invariant suite")
    return parser


def make_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> RunConfig:
    file_cfg: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
    model = dict(file_cfg.get("model", {}))
    for flag, key in MODEL_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            model[key] = value
    if "sigma" in model and "rho" not in file_cfg.get("model", {}):
        model.pop("rho", None)
    try:
        params = ModelParams.from_dict(model)
    except (TypeError, ValueError) as exc:
        parser.error(str(exc))
    skip = {"config", "command", "workers", "output", "format", *MODEL_FLAGS}
    options = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    fmt = args.format or file_cfg.get("format") or ("json" if args.command == "xi" else "csv")
    workers = args.workers if args.workers is not None else file_cfg.get("workers")
    return RunConfig(
        params, args.command, options, dict(file_cfg.get("solver", {})), args.output, fmt, workers
    )


# ---------------------------------------------------------------------------
# commands; each returns (columns, rows)


def _solver_config(cfg: RunConfig, k_max: int | None = None) -> solver.SolverConfig:
    extra = dict(cfg.solver)
    config = solver.compute_lambda_star(
        cfg.model,
        C_hat=extra.pop("C_hat", None),
        k_max=k_max if k_max is not None else extra.pop("k_max", 6),
        bisection_tol=extra.pop("bisection_tol", 1e-13),
    )
    extra.pop("k_max", None)
    if extra:
        raise FloquetError(f"unknown solver settings {sorted(extra)}")
    return config


def cmd_xi(cfg: RunConfig):
    out = []
    for M in cfg.options["order"]:
        a = rs_series.xi_via_trees(M, cfg.model).value
        b = rs_series.xi_via_trace(M, cfg.model).value
        out.append({"order": M, "tree_value": a, "trace_value": b, "abs_diff": abs(a - b)})
    return ["order", "tree_value", "trace_value", "abs_diff"], out


def cmd_dioph(cfg: RunConfig):
    o = cfg.options
    deltas = []
    d = o["delta_max"]
    while d >= o["delta_min"] * (1 - 1e-12):
        deltas.append(d)
        d /= 2
    rows = [
        {"delta": r.parameter, "measured_complement": r.measured, "bound": r.analytic_bound,
         "fraction": r.fraction}
        for r in dio.lambda_density(deltas, cfg.model)
    ]
    return ["delta", "measured_complement", "bound", "fraction"], rows


def cmd_curve(cfg: RunConfig):
    o = cfg.options
    config = _solver_config(cfg, o["kmax"])
    sign = math.copysign(1.0, config.G2_at_0)
    grid = sign * np.linspace(o["lambda_max"] / o["grid"], o["lambda_max"], o["grid"])
    res = solver.lambda_curve(config, cfg.model, lambda_grid=grid, workers=solver.worker_count(cfg.workers))
    rows = [
        {"beta": p.beta, "lambda": p.lam, "residual": p.residual, "in_lambda_set": p.in_lambda_set}
        for p in res.points
    ]
    rows += [{"beta": math.nan, "lambda": h, "residual": math.nan, "in_lambda_set": False} for h in res.holes]
    for lam, msg in res.errors:
        sys.stderr.write(json.dumps({"lambda": lam, "error": msg}) + "\n")
    return ["beta", "lambda", "residual", "in_lambda_set"], rows


def cmd_asym(cfg: RunConfig):
    o = cfg.options
    config = _solver_config(cfg, o["kmax"])
    betas = np.geomspace(o["beta_min"], o["beta_max"], o["steps"])
    fits = solver.asymptotic_check(o["orders"], betas, config, cfg.model)
    return ["order", "slope", "intercept"], [
        {"order": f.order, "slope": f.slope, "intercept": f.intercept} for f in fits
    ]


def cmd_oracle(cfg: RunConfig):
    o = cfg.options
    betas = np.linspace(o["beta_min"], o["beta_max"], o["steps"])
    pts = oracle.oracle_branch(list(betas), cfg.model, o["n1"], o["n2"])
    return ["beta", "eigenvalue", "residual", "overlap"], [asdict(p) for p in pts]


def cmd_resolvent(cfg: RunConfig):
    o = cfg.options
    g = resolvent.G_coefficients(o["lam"], o["kmax"], cfg.model)
    rows = [{"order": k, "value": g[k]} for k in range(2, 2 * o["kmax"] + 1)]
    return ["order", "value"], rows


COMMANDS = {
    "xi": cmd_xi,
    "dioph": cmd_dioph,
    "curve": cmd_curve,
    "asym": cmd_asym,
    "oracle": cmd_oracle,
    "resolvent": cmd_resolvent,
}


# ---------------------------------------------------------------------------
# output


def render(cfg: RunConfig, columns: Sequence[str], rows: list[dict]) -> str:
    if cfg.output_format == "json":
        return json.dumps({"provenance": cfg.provenance(), "rows": rows}, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# {json.dumps(cfg.provenance(), sort_keys=True)}\n")
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.output_path:
        with open(cfg.output_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = make_config(args, parser)
    try:
        if cfg.command == "check":
            results = run_checks(cfg.model)
            rows = [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results]
            _emit(cfg, render(cfg, ["name", "passed", "detail"], rows))
            return 0 if all(r.passed for r in results) else 1
        if cfg.command != "xi":
            critical_set(cfg.model)  # rejects frequencies with F(n) = 0 inside the cutoff
        columns, rows = COMMANDS[cfg.command](cfg)
    except FloquetError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    _emit(cfg, render(cfg, columns, rows))
    return 0
