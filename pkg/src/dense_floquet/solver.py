"""Fixed-point solutions of lambda = G(beta, lambda) and the curve lambda(beta).

For lambda of the same sign as G_2(0), G(., lambda) - lambda starts at
-lambda for beta = 0 and overshoots before B(lambda) = 2 (|lambda|/|G_2(0)|)^(1/2),
so bisection on [0, B(lambda)] finds beta_+(lambda).  Evenness in beta gives
beta_- = -beta_+.

The admissibility bound lambda_star derived from the sampled C_hat is very
conservative.  Solves are therefore accepted on the wider operational range
|lambda| <= omega/3 whenever the 64-point scan finds exactly one sign change
and lambda passes the cutoff Lambda test; every point records whether it
also lies in the certified range |lambda| <= lambda_star.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ._numerics import bisect_root
from .diophantine import excluded_intervals, in_lambda_set
from .errors import (
    FloquetError,
    InsufficientRange,
    NoAdmissibleLambdaStar,
    NoSignChange,
    NoSolution,
    PreconditionViolated,
)
from .lattice import ModelParams
from .resolvent import G2_closed_form, G_coefficients, estimate_C_hat, operator_norm_V
from .rs_series import xi_coefficients

SCAN_POINTS = 64


@dataclass(frozen=True)
class SolverConfig:
    lambda_star: float
    lambda_star_star: float
    C_hat: float
    G2_at_0: float
    bisection_tol: float = 1e-13
    k_max: int = 6
    v_norm: float = 4.0

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)

    def B(self, lam: float) -> float:
        return 2.0 * math.sqrt(abs(lam) / abs(self.G2_at_0))


@dataclass(frozen=True)
class CurvePoint:
    beta: float
    lam: float
    residual: float
    in_lambda_set: bool
    certified: bool = False


def default_C_hat_lambdas(params: ModelParams, depth: int = 20) -> list[float]:
    """lambda = +-(omega/3) 2^-j, j = 0..depth, the sample grid for C_hat."""
    top = params.omega / 3
    return [s * top * 2.0 ** -j for j in range(depth + 1) for s in (1.0, -1.0)]


def lambda_star_bullets(lam_star: float, C_hat: float, params: ModelParams, v_norm: float) -> list[bool]:
    """The four smallness conditions on lambda_star, in order."""
    omega, rho = params.omega, params.rho
    g0 = G2_closed_form(0.0, omega)
    ag = abs(g0)
    grid = np.linspace(-lam_star, lam_star, 65)
    first = all(abs(G2_closed_form(x, omega) - g0) <= ag / 2 for x in grid)
    x = 2 * lam_star / omega
    second = x ** (1 - rho) <= ag / (8 * omega * C_hat ** 2)
    third = math.sqrt(lam_star) <= ag ** 1.5 / (16 * v_norm * C_hat ** 2)
    fourth = x ** (rho / 2) <= ag / (2 * v_norm * C_hat)
    return [first, second, third, fourth]


def compute_lambda_star(
    params: ModelParams,
    C_hat: float | None = None,
    k_max: int = 6,
    bisection_tol: float = 1e-13,
    max_halvings: int = 200,
) -> SolverConfig:
    """Largest lambda_star = (omega/3) 2^-j satisfying all four bullets."""
    if C_hat is None:
        C_hat = estimate_C_hat(default_C_hat_lambdas(params), 8, params)
    if not C_hat > 0:
        raise ValueError(f"C_hat must be positive, got {C_hat}")
    g0 = G2_closed_form(0.0, params.omega)
    if g0 == 0.0:
        raise PreconditionViolated("G_2(0) vanishes")
    v_norm = operator_norm_V()
    lam = params.omega / 3
    for _ in range(max_halvings):
        if all(lambda_star_bullets(lam, C_hat, params, v_norm)):
            return SolverConfig(lam, lam, C_hat, g0, bisection_tol, k_max, v_norm)
        lam /= 2
    raise NoAdmissibleLambdaStar(f"no lambda_star above {lam:.3g} for C_hat = {C_hat:.4g}")


def _phi_beta(lam: float, config: SolverConfig, params: ModelParams) -> Callable[[float], float]:
    series = G_coefficients(lam, config.k_max, params)
    return lambda b: series.evaluate(b) - lam


def beta_pm(lam: float, config: SolverConfig, params: ModelParams) -> tuple[float, float]:
    """(beta_-(lambda), beta_+(lambda)) solving lambda = G(beta, lambda) in [-B, B]."""
    if lam == 0.0:
        raise PreconditionViolated("lambda = 0 corresponds to beta = 0 only")
    if math.copysign(1.0, lam) != math.copysign(1.0, config.G2_at_0):
        raise NoSolution(f"sgn(lambda) = -sgn(G_2(0)); no fixed point for lambda = {lam}")
    if abs(lam) > params.omega / 3:
        raise PreconditionViolated(f"|lambda| = {abs(lam)} exceeds omega/3")
    phi = _phi_beta(lam, config, params)
    B = config.B(lam)
    scan = np.linspace(0.0, B, SCAN_POINTS)
    vals = np.array([phi(b) for b in scan])
    signs = np.sign(vals)
    changes = int(np.count_nonzero(signs[1:] * signs[:-1] < 0))
    if changes != 1:
        raise NoSignChange(f"{changes} sign changes of G - lambda on [0, B({lam})]")
    i = int(np.flatnonzero(signs[1:] * signs[:-1] < 0)[0])
    root = bisect_root(phi, float(scan[i]), float(scan[i + 1]))
    return -root, root


def fixed_point_residual(beta: float, lam: float, config: SolverConfig, params: ModelParams) -> float:
    return abs(lam - G_coefficients(lam, config.k_max, params).evaluate(beta))


def lambda_at_beta(beta: float, config: SolverConfig, params: ModelParams) -> CurvePoint:
    """Solve lambda = G(beta, lambda) for lambda by bisection.

    G(beta, lambda) - lambda equals G(beta, 0) at lambda = 0 and changes sign
    before 2 G(beta, 0) when beta is small; the bracket is widened if needed.
    """
    if beta == 0.0:
        return CurvePoint(0.0, 0.0, 0.0, True, True)

    def phi(lam):
        return G_coefficients(lam, config.k_max, params).evaluate(beta) - lam

    g0 = phi(0.0)
    hi = 2.0 * g0
    for _ in range(8):
        if abs(hi) > params.omega / 3:
            hi = math.copysign(params.omega / 3, hi)
        if (phi(hi) > 0) != (g0 > 0):
            break
        if abs(hi) >= params.omega / 3:
            raise NoSignChange(f"no fixed point with |lambda| <= omega/3 at beta = {beta}")
        hi *= 2
    lo, hi = (0.0, hi) if hi > 0 else (hi, 0.0)
    lam = bisect_root(phi, lo, hi)
    return _point(beta, lam, config, params)


def _point(beta: float, lam: float, config: SolverConfig, params: ModelParams) -> CurvePoint:
    return CurvePoint(
        beta, lam, fixed_point_residual(beta, lam, config, params),
        bool(in_lambda_set(lam, params)), abs(lam) <= config.lambda_star_star,
    )


# ---------------------------------------------------------------------------
# curves


@dataclass
class CurveResult:
    points: list[CurvePoint]
    holes: list[float] = field(default_factory=list)
    errors: list[tuple[float, str]] = field(default_factory=list)
    envelope: tuple[float, float] = (math.nan, math.nan)


def _solve_lambda(args) -> tuple[float, tuple[float, float] | str]:
    lam, config, params = args
    try:
        return lam, beta_pm(lam, config, params)
    except FloquetError as exc:
        return lam, f"{type(exc).__name__}: {exc}"


def _solve_beta(args):
    beta, config, params = args
    try:
        return beta, lambda_at_beta(beta, config, params)
    except FloquetError as exc:
        return beta, f"{type(exc).__name__}: {exc}"


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("FLOQUET_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _ordered_map(fn, items, workers: int):
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def lambda_curve(
    config: SolverConfig,
    params: ModelParams,
    lambda_grid: Sequence[float] | None = None,
    beta_grid: Sequence[float] | None = None,
    workers: int | None = 1,
) -> CurveResult:
    """Points (beta_+-(lambda), lambda) over a lambda grid, or lambda(beta) over a beta grid.

    The origin is always included.  Lambda-grid values outside cutoff Lambda
    are recorded as holes; per-point failures are collected, not raised.
    Output is sorted by beta whatever the worker count.
    """
    if (lambda_grid is None) == (beta_grid is None):
        raise ValueError("pass exactly one of lambda_grid and beta_grid")
    points = [CurvePoint(0.0, 0.0, 0.0, True, True)]
    result = CurveResult(points)
    n = worker_count(workers)
    if lambda_grid is not None:
        todo = []
        for lam in lambda_grid:
            if lam == 0.0:
                continue
            if not in_lambda_set(lam, params):
                result.holes.append(float(lam))
                continue
            todo.append(float(lam))
        for lam, out in _ordered_map(_solve_lambda, [(x, config, params) for x in todo], n):
            if isinstance(out, str):
                result.errors.append((lam, out))
                continue
            for b in out:
                points.append(_point(b, lam, config, params))
    else:
        grid = sorted({abs(float(b)) for b in beta_grid if b != 0.0})
        for beta, out in _ordered_map(_solve_beta, [(b, config, params) for b in grid], n):
            if isinstance(out, str):
                result.errors.append((beta, out))
                continue
            points.append(out)
            points.append(replace(out, beta=-out.beta))
    points.sort(key=lambda p: p.beta)
    result.envelope = quadratic_envelope(points)
    return result


def quadratic_envelope(points: Sequence[CurvePoint]) -> tuple[float, float]:
    """(A, B) with A |b1^2 - b2^2| <= |lam1 - lam2| <= B |b1^2 - b2^2| over consecutive beta >= 0 points."""
    pos = sorted((p for p in points if p.beta >= 0), key=lambda p: p.beta)
    ratios = []
    for p, q in zip(pos, pos[1:]):
        db = q.beta ** 2 - p.beta ** 2
        if db > 0:
            ratios.append(abs(q.lam - p.lam) / db)
    if not ratios:
        return math.nan, math.nan
    return min(ratios), max(ratios)


def piecewise_linear_extension(xs: Sequence[float], ys: Sequence[float]) -> Callable:
    """Continuous extension of a function known on a sorted closed set, linear across the gaps."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    order = np.argsort(xs)
    xs, ys = xs[order], ys[order]
    return lambda x: np.interp(x, xs, ys)


# ---------------------------------------------------------------------------
# density of I at 0


@dataclass(frozen=True)
class DensityReport:
    delta: float
    fraction: float
    lambda_top: float
    holes: int
    cutoff_used: int


def beta_plus(lam: float, config: SolverConfig, params: ModelParams) -> float:
    return beta_pm(lam, config, params)[1]


def density_of_I(
    delta_list: Sequence[float], config: SolverConfig, params: ModelParams
) -> list[DensityReport]:
    """|I cap [0, delta]| / delta, with I the image of cutoff Lambda under beta_+.

    beta_+ is increasing, so the gaps of I in [0, delta] are exactly the
    images of the excluded lambda intervals below lambda(delta); only their
    endpoints need solving.  The fraction is an upper estimate, since Lambda
    is approximated from above by its cutoff version.
    """
    sign = math.copysign(1.0, config.G2_at_0)
    reports = []
    for delta in delta_list:
        top = lambda_at_beta(delta, config, params).lam
        lo, hi = (0.0, top) if sign > 0 else (top, 0.0)
        holes = excluded_intervals(lo, hi, params)
        missing = []
        for a, b in holes:
            ends = [abs(x) for x in (a, b)]
            images = [0.0 if e == 0.0 else beta_plus(sign * e, config, params) for e in ends]
            missing.append(abs(images[1] - images[0]))
        frac = 1.0 - math.fsum(missing) / delta
        reports.append(DensityReport(delta, frac, top, len(holes), params.n2_cutoff))
    return reports


# ---------------------------------------------------------------------------
# asymptotic order of the RS truncations


@dataclass(frozen=True)
class SlopeFit:
    order: int
    slope: float
    intercept: float
    points: int
    remainder_sign: int


def asymptotic_check(
    orders: Sequence[int],
    beta_grid: Sequence[float],
    config: SolverConfig,
    params: ModelParams,
    require_in_lambda: bool = True,
) -> list[SlopeFit]:
    """Least-squares slope of log|lambda(beta) - sum_{m<=M} xi_m beta^m| against log beta."""
    pts = [lambda_at_beta(b, config, params) for b in sorted(beta_grid) if b > 0]
    if require_in_lambda:
        pts = [p for p in pts if p.in_lambda_set]
    if len(pts) < 3 or math.log10(pts[-1].beta / pts[0].beta) < 1.0:
        raise InsufficientRange("usable beta grid spans less than one decade")
    xi = xi_coefficients(max(orders), params)
    beta = np.array([p.beta for p in pts])
    lam = np.array([p.lam for p in pts])
    fits = []
    for M in orders:
        partial = sum(xi[m] * beta ** m for m in range(2, M + 1))
        rem = lam - partial
        ok = rem != 0.0
        slope, intercept = np.polyfit(np.log(beta[ok]), np.log(np.abs(rem[ok])), 1)
        signs = np.sign(rem[ok])
        sgn = int(signs[0]) if np.all(signs == signs[0]) else 0
        fits.append(SlopeFit(int(M), float(slope), float(intercept), int(ok.sum()), sgn))
    return fits
