"""Quick invariant suite behind the ``check`` subcommand.

Each check is a small function returning (passed, detail).  The suite is a
fast subset of the test-suite properties, sized to finish in well under a
minute on the default configuration.
"""
from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass
from typing import Callable

from . import combinatorics as comb
from . import diophantine as dio
from . import oracle, resolvent, rs_series, solver
from .errors import NoSolution
from .lattice import ModelParams, critical_set, locality_gap


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _xi2(params):
    got = rs_series.xi_via_trees(2, params).value
    want = rs_series.xi2_closed_form(params.omega)
    g2 = resolvent.G_coefficients(0.0, 1, params)[2]
    err = max(abs(got - want), abs(g2 - want)) / abs(want)
    return err <= 1e-12, f"relative error {err:.2e}"


def _dual_formula(params):
    worst = 0.0
    for M in (2, 4, 6):
        a = rs_series.xi_via_trees(M, params).value
        b = rs_series.xi_via_trace(M, params).value
        worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    return worst <= 1e-10, f"max relative difference {worst:.2e} for M <= 6"


def _parity(params):
    odd = [rs_series.xi_via_trace(M, params).value for M in (3, 5, 7)]
    odd += [rs_series.xi_via_trees(M, params).value for M in (3, 5, 7)]
    g = resolvent.G_coefficients(0.01, 4, params)
    ok = all(x == 0.0 for x in odd) and all(x == 0.0 for x in g.odd)
    return ok, "odd xi_M and odd G coefficients vanish" if ok else f"nonzero odd terms {odd}"


def _tree_rotation(_params):
    for N in range(1, 8):
        for sigma in comb.compositions(N - 1, N):
            hits = sum(comb.is_tree(comb.rotate(sigma, m)) for m in range(N))
            if hits != 1:
                return False, f"{sigma} has {hits} tree rotations"
    return True, "exactly one rotation for every composition, N <= 7"


def _critical_set(params):
    S = critical_set(params, min(params.n2_cutoff, 100))
    half = params.omega / 2
    for n in S:
        f = params.omega * n.n1 + n.n2 ** 2
        if not (-half < f <= half) or n.n1 > 0:
            return False, f"{n} violates the critical window"
    lookup = {n.n2: n.n1 for n in S}
    for n in S[:-1]:
        d, _ = locality_gap(n, lookup)
        if d < n.n2 / 2 - params.omega:
            return False, f"locality gap too small at {n}"
    return True, f"{len(S)} critical rows checked"


def _lambda_density(params):
    reports = dio.lambda_density([2.0 ** -k for k in range(2, 9)], params)
    bad = [r for r in reports if not r.measured < r.analytic_bound]
    return not bad, "measure below bound for delta = 2^-2..2^-8" if not bad else f"{bad[0]}"


def _telescope(_params):
    rng = random.Random(12345)
    worst = -math.inf
    for _ in range(200):
        ell = rng.randint(1, 10)
        worst = max(worst, dio.telescope_identity_check([rng.uniform(0.01, 10) for _ in range(ell + 1)]))
    return worst <= 1e-12, f"largest residual {worst:.3g}"


def _fixed_point_vs_oracle(params):
    config = solver.compute_lambda_star(params)
    betas = [0.01, 0.02]
    pts = oracle.oracle_branch(betas, params)
    worst = 0.0
    for b, p in zip(betas, pts):
        lam = solver.lambda_at_beta(b, config, params).lam
        worst = max(worst, abs(lam - p.eigenvalue) / abs(p.eigenvalue) / (1e-5 + 10 * b ** 4))
    return worst <= 1.0, f"error / tolerance = {worst:.2e}"


def _basic_residual(params):
    lam = 0.05
    config = solver.compute_lambda_star(params)
    beta = 0.9 * resolvent.domain_radius(lam, config.C_hat, params)
    res = resolvent.basic_residual(beta, lam, 12, params)
    return res <= 1e-8, f"residual {res:.2e} at beta = {beta:.3g}, lambda = {lam}"


def _two_point_identity(params):
    res = resolvent.two_point_identity_check(1e-3, 0.01, 0.02, params).residual
    return res <= 1e-9, f"residual {res:.2e}"


def _beta_pm(params):
    config = solver.compute_lambda_star(params)
    sign = math.copysign(1.0, config.G2_at_0)
    bm, bp = solver.beta_pm(sign * 0.004, config, params)
    try:
        solver.beta_pm(-sign * 0.004, config, params)
        wrong_sign = False
    except NoSolution:
        wrong_sign = True
    ok = wrong_sign and bm == -bp and bp > 0
    return ok, f"beta_+ = {bp:.6g}; opposite sign rejected: {wrong_sign}"


def _compensation(_params):
    demo = ModelParams(omega=math.sqrt(3))
    chk = resolvent.path_norm_check(8, 0.01, demo, b=2)
    ok = chk.max_abs_diff <= 1e-10 * max(1.0, chk.norm_naive) and chk.short_loop_paths > 0
    return ok, f"{chk.short_loop_paths} loop paths, max difference {chk.max_abs_diff:.2e}"


CHECKS: list[tuple[str, Callable]] = [
    ("xi2_closed_form", _xi2),
    ("dual_formula", _dual_formula),
    ("parity", _parity),
    ("tree_rotation", _tree_rotation),
    ("critical_set", _critical_set),
    ("lambda_measure_bound", _lambda_density),
    ("telescope_inequality", _telescope),
    ("fixed_point_vs_oracle", _fixed_point_vs_oracle),
    ("basic_equation_residual", _basic_residual),
    ("two_point_identity", _two_point_identity),
    ("beta_pm_structure", _beta_pm),
    ("compensation_exactness", _compensation),
]


def run_checks(params: ModelParams) -> list[CheckResult]:
    out = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn(params)
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out
