"""Non-resonance sets for the frequency and the spectral parameter.

Omega(gamma) collects frequencies with |F(n)| >= omega*gamma*psi(n2); Lambda
collects spectral parameters with
|F(n) - lambda| >= omega*gamma*(2|lambda|/omega)^rho * psi_tilde(|n2|).
Both involve infinitely many constraints, so every verdict here is taken up
to ``n2_cutoff``.  Checking fewer constraints admits more points, hence
cutoff verdicts describe supersets and measured density fractions are upper
estimates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import zeta

from ._numerics import bisect_root
from .errors import DegenerateFrequency, PreconditionViolated
from .lattice import LatticeIndex, ModelParams, critical_rows, eigenvalue, is_critical, locality_gap


@dataclass(frozen=True)
class WeightSequences:
    """psi(k) = k^-sigma / 2 (psi(0) = 1) and psi_tilde(k) = k^-tau / 4."""

    sigma: float
    tau: float = 2.0

    def psi(self, k):
        k = np.asarray(k, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(k == 0, 1.0, k ** -self.sigma / 2)
        return out if out.ndim else float(out)

    def psi_tilde(self, k):
        k = np.asarray(k, dtype=float)
        out = k ** -self.tau / 4
        return out if out.ndim else float(out)

    @property
    def psi_sum(self) -> float:
        """sum_{k >= 1} psi(k) = zeta(sigma) / 2."""
        return float(zeta(self.sigma, 1)) / 2

    def psi_tilde_tail(self, k0: int) -> float:
        """sum_{k >= k0} psi_tilde(k)."""
        return float(zeta(self.tau, k0)) / 4

    @property
    def c_psi(self) -> float:
        """sup_k psi_tilde(k/2) / psi_tilde(k); equals 2^tau for a power law."""
        return 2.0 ** self.tau

    @classmethod
    def from_params(cls, params: ModelParams) -> "WeightSequences":
        return cls(params.sigma, params.tau)


@dataclass(frozen=True)
class Verdict:
    """A set-membership answer valid only up to ``cutoff``."""

    holds: bool
    cutoff: int
    witness: LatticeIndex | None = None

    def __bool__(self) -> bool:
        return self.holds


@dataclass(frozen=True)
class DiophantineReport:
    quantity: str
    measured: float
    analytic_bound: float
    cutoff_used: int
    parameter: float = math.nan
    fraction: float = math.nan
    extra: dict = field(default_factory=dict)

    @property
    def bound_holds(self) -> bool:
        return self.measured < self.analytic_bound


# ---------------------------------------------------------------------------
# Omega(gamma)


def _omega_violations(omegas: np.ndarray, gamma: float, sigma: float, cutoff: int) -> np.ndarray:
    """Boolean mask: True where some n with 1 <= n2 <= cutoff violates the Omega(gamma) bound."""
    bad = np.zeros(omegas.shape, dtype=bool)
    for n2 in range(1, cutoff + 1):
        e = float(n2 * n2)
        thr = omegas * gamma * n2 ** -sigma / 2
        centre = np.floor(-e / omegas)
        for off in (-1.0, 0.0, 1.0, 2.0):
            f = omegas * (centre + off) + e
            bad |= np.abs(f) < thr
    return bad


def in_omega_set(omega: float, gamma: float, params: ModelParams) -> Verdict:
    """Is |F(n)| >= omega*gamma*psi(n2) for every n with 1 <= n2 <= n2_cutoff?"""
    w = WeightSequences.from_params(params)
    for n2 in range(1, params.n2_cutoff + 1):
        thr = omega * gamma * w.psi(n2)
        centre = math.floor(-(n2 * n2) / omega)
        for n1 in range(centre - 1, centre + 3):
            if abs(omega * n1 + n2 * n2) < thr:
                return Verdict(False, params.n2_cutoff, LatticeIndex(n1, n2))
    return Verdict(True, params.n2_cutoff)


def omega_complement_measure(
    a: float, gamma: float, grid: int, params: ModelParams
) -> DiophantineReport:
    """Grid estimate of |]0, a] \\ Omega(gamma)| against 16 a gamma sum psi.

    Requires gamma <= d_E / a <= 1 with d_E = min_k E(k) = 1.
    """
    d_e = 1.0
    if not (gamma <= d_e / a <= 1.0):
        raise PreconditionViolated(f"need gamma <= 1/a <= 1, got a={a}, gamma={gamma}")
    w = WeightSequences.from_params(params)
    omegas = a * (np.arange(grid) + 0.5) / grid
    bad = _omega_violations(omegas, gamma, params.sigma, params.n2_cutoff)
    measured = a * bad.mean()
    bound = 16 * a * w.psi_sum * gamma
    return DiophantineReport(
        "omega_complement", float(measured), bound, params.n2_cutoff, parameter=gamma,
        fraction=1.0 - float(bad.mean()), extra={"a": a, "grid": grid},
    )


# ---------------------------------------------------------------------------
# Lambda


def lambda_threshold_coeff(n2, params: ModelParams):
    """c(n2) with the Lambda bound written as |F(n) - lambda| >= c(n2) |lambda|^rho."""
    w = WeightSequences.from_params(params)
    return params.omega * params.gamma * (2 / params.omega) ** params.rho * w.psi_tilde(n2)


def in_lambda_set(lam: float, params: ModelParams) -> Verdict:
    """Is lambda in Lambda, checking rows 1 <= n2 <= n2_cutoff?"""
    if lam == 0.0:
        return Verdict(True, params.n2_cutoff)
    omega = params.omega
    n2 = np.arange(1, params.n2_cutoff + 1)
    thr = lambda_threshold_coeff(n2, params) * abs(lam) ** params.rho
    e = n2.astype(float) ** 2
    x = np.floor((lam - e) / omega)
    reach = int(math.ceil(float(thr.max()) / omega)) + 1
    for off in range(-reach, reach + 2):
        f = omega * (x + off) + e
        viol = np.abs(f - lam) < thr
        if viol.any():
            i = int(np.argmax(viol))
            return Verdict(False, params.n2_cutoff, LatticeIndex(int(x[i] + off), int(n2[i])))
    return Verdict(True, params.n2_cutoff)


def _excluded_pieces(f: float, c: float, rho: float) -> list[tuple[float, float]]:
    """Open intervals of lambda with |f - lambda| < c |lambda|^rho, for f > 0."""
    pieces = []
    # lambda in [0, f]: f - lam - c lam^rho is strictly decreasing
    left = bisect_root(lambda t: f - t - c * t ** rho, 0.0, f)
    # lambda >= f: lam - f - c lam^rho is convex and negative at f
    hi = f + c * max(f, 1.0) ** rho + 1.0
    while hi - f - c * hi ** rho <= 0:
        hi = 2 * hi
    right = bisect_root(lambda t: t - f - c * t ** rho, f, hi)
    pieces.append((left, right))
    # lambda = -t < 0: f + t - c t^rho is convex in t, minimal at t*
    tstar = (c * rho) ** (1 / (1 - rho))
    if f + tstar - c * tstar ** rho < 0:
        q = lambda t: f + t - c * t ** rho
        t1 = bisect_root(q, 0.0, tstar)
        hi = 2 * tstar
        while q(hi) <= 0:
            hi *= 2
        t2 = bisect_root(q, tstar, hi)
        pieces.append((-t2, -t1))
    return pieces


def excluded_intervals(lo: float, hi: float, params: ModelParams) -> list[tuple[float, float]]:
    """Merged, sorted intervals of [lo, hi] \\ Lambda (rows up to n2_cutoff).

    Each row n2 excludes explicit intervals around the few F(n) near the
    window; their endpoints solve |F - lambda| = c(n2)|lambda|^rho exactly.
    """
    omega, rho = params.omega, params.rho
    pieces = []
    for n2 in range(1, params.n2_cutoff + 1):
        c = float(lambda_threshold_coeff(n2, params))
        margin = c * max(abs(lo), abs(hi), 1.0) ** rho + c
        e = n2 * n2
        first = math.floor((lo - margin - e) / omega)
        last = math.ceil((hi + margin - e) / omega)
        for n1 in range(first, last + 1):
            f = omega * n1 + e
            if f == 0.0:
                raise DegenerateFrequency(f"F({n1}, {n2}) = 0")
            for a, b in _excluded_pieces(abs(f), c, rho):
                a, b = (a, b) if f > 0 else (-b, -a)
                a, b = max(a, lo), min(b, hi)
                if a < b:
                    pieces.append((a, b))
    pieces.sort()
    merged: list[tuple[float, float]] = []
    for a, b in pieces:
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


def excluded_measure_bound(delta: float, params: ModelParams) -> float:
    """2 omega (2 delta)^rho * sum over k with psi(k) < 2 delta of psi_tilde(k)."""
    w = WeightSequences.from_params(params)
    # psi(k) < 2 delta  <=>  k > (4 delta)^(-1/sigma)
    k0 = math.floor((4 * delta) ** (-1 / params.sigma)) + 1
    while w.psi(k0 - 1) < 2 * delta and k0 > 1:
        k0 -= 1
    while w.psi(k0) >= 2 * delta:
        k0 += 1
    return 2 * params.omega * (2 * delta) ** params.rho * w.psi_tilde_tail(k0)


def lambda_density(delta_list: Sequence[float], params: ModelParams) -> list[DiophantineReport]:
    """Exact measure of [-delta*omega, delta*omega] \\ Lambda for each delta in (0, 1/4]."""
    reports = []
    for delta in delta_list:
        if not 0 < delta <= 0.25:
            raise PreconditionViolated(f"delta must lie in (0, 1/4], got {delta}")
        half = delta * params.omega
        holes = excluded_intervals(-half, half, params)
        measured = math.fsum(b - a for a, b in holes)
        reports.append(
            DiophantineReport(
                "lambda_complement", measured, excluded_measure_bound(delta, params), params.n2_cutoff,
                parameter=delta, fraction=1.0 - measured / (2 * half),
                extra={"holes": len(holes)},
            )
        )
    return reports


def density_hypothesis(params: ModelParams) -> bool:
    """tau > 1 + sigma (1 - rho); with rho = 1/sigma this is sigma < 2."""
    return params.tau > 1 + params.sigma * (1 - params.rho)


# ---------------------------------------------------------------------------
# constants of the small-denominator estimates


def small_divisor_constant(params: ModelParams) -> float:
    """Smallest C1 > 1 with omega*gamma*psi_tilde(n2) >= C1^(-L(n)) on the critical set.

    For C1 > 1, max(C1^-n2, C1^-d(n)) = C1^-L(n), so the optimum is the
    closed form max_n (omega*gamma*psi_tilde(n2))^(-1/L(n)); rows whose upper
    neighbour lies beyond the cutoff are skipped.
    """
    w = WeightSequences.from_params(params)
    rows = critical_rows(params)
    best = 1.0
    for n2, n1 in rows.items():
        if n2 + 1 not in rows:
            continue
        _, ell = locality_gap((n1, n2), rows)
        level = params.omega * params.gamma * w.psi_tilde(n2)
        if level < 1.0:
            best = max(best, level ** (-1.0 / ell))
    return best


def telescope_identity_check(deltas: Sequence[float]) -> float:
    """|1/(D_1+..+D_l) - 1/(l D_0)| - max_k |1/D_k - 1/D_{k-1}|; nonpositive when the inequality holds."""
    d = [float(x) for x in deltas]
    if len(d) < 2 or min(d) <= 0:
        raise ValueError("need at least two positive numbers")
    ell = len(d) - 1
    lhs = abs(1 / math.fsum(d[1:]) - 1 / (ell * d[0]))
    rhs = max(abs(1 / d[k] - 1 / d[k - 1]) for k in range(1, ell + 1))
    return lhs - rhs


def delta_e(k):
    return 2 * k + 1


def c_delta(cutoff: int, tau: float = 2.0) -> float:
    """sup over 1 <= k <= cutoff of |1/dE(k+1) - 1/dE(k)| / psi_tilde(k)."""
    k = np.arange(1, cutoff + 1, dtype=float)
    diff = np.abs(1 / delta_e(k + 1) - 1 / delta_e(k))
    return float(np.max(diff / (k ** -tau / 4)))


@dataclass(frozen=True)
class CompensationCheck:
    lhs: float
    rhs: float
    c2_estimate: float
    c2_analytic: float
    scale: float


def c2_analytic(params: ModelParams) -> float:
    """Explicit constant from the compensation argument.

    The symmetric sum splits into 2(F(n)-lam)/((F(m)-lam)(F(m')-lam)), bounded
    with |F(m)-lam| >= omega/6, and a curvature term bounded by
    36 * 2 C_Delta C_psi psi_tilde(n2), then by membership of lambda in Lambda.
    """
    w = WeightSequences.from_params(params)
    return 72 / params.omega ** 2 + 72 * c_delta(params.n2_cutoff) * w.c_psi / (
        params.omega * params.gamma
    )


def compensation_bound_check(
    n: Sequence[int], m: Sequence[int], lam: float, params: ModelParams
) -> CompensationCheck:
    """Compare |1/(F(m)-lam) + 1/(F(m')-lam)| with (2|lam|/omega)^-rho |F(n)-lam|, m' = 2n - m."""
    n = LatticeIndex(*n)
    m = LatticeIndex(*m)
    omega = params.omega
    rows = critical_rows(params)
    if n.n2 < 1 or not is_critical(n, params) or rows.get(n.n2) != n.n1:
        raise PreconditionViolated(f"{n} is not a critical index")
    if min(delta_e(n.n2), delta_e(n.n2 - 1)) < 4 * omega:
        raise PreconditionViolated(f"gap condition min(dE(n2), dE(n2-1)) >= 4 omega fails at {n}")
    if m == n or m.n2 < 1:
        raise PreconditionViolated(f"m = {m} must differ from n and have m2 >= 1")
    _, ell = locality_gap(n, rows)
    if 2 * max(abs(n.n1 - m.n1), abs(n.n2 - m.n2)) > ell:
        raise PreconditionViolated(f"m = {m} is outside the L(n) = {ell} neighbourhood of {n}")
    if lam == 0.0 or abs(lam) > omega / 3:
        raise PreconditionViolated(f"need 0 < |lambda| <= omega/3, got {lam}")
    if not in_lambda_set(lam, params):
        raise PreconditionViolated(f"lambda = {lam} is not in Lambda (cutoff {params.n2_cutoff})")
    mp = LatticeIndex(2 * n.n1 - m.n1, 2 * n.n2 - m.n2)
    lhs = abs(1 / (eigenvalue(m, params) - lam) + 1 / (eigenvalue(mp, params) - lam))
    scale = (2 * abs(lam) / omega) ** (-params.rho) * abs(eigenvalue(n, params) - lam)
    c2 = c2_analytic(params)
    return CompensationCheck(lhs, c2 * scale, lhs / scale, c2, scale)


def admissible_compensation_triples(
    params: ModelParams, lambdas: Sequence[float], limit: int = 100
) -> list[tuple[LatticeIndex, LatticeIndex, float]]:
    """Deterministic list of (n, m, lambda) satisfying the compensation hypotheses."""
    rows = critical_rows(params)
    lams = [x for x in lambdas if x != 0 and abs(x) <= params.omega / 3 and in_lambda_set(x, params)]
    out = []
    for n2 in sorted(rows):
        if n2 + 1 not in rows or min(delta_e(n2), delta_e(n2 - 1)) < 4 * params.omega:
            continue
        n = LatticeIndex(rows[n2], n2)
        _, ell = locality_gap(n, rows)
        r = ell // 2
        for d1 in range(-r, r + 1):
            for d2 in range(-r, r + 1):
                m = LatticeIndex(n.n1 + d1, n.n2 + d2)
                if m == n or m.n2 < 1:
                    continue
                for lam in lams:
                    out.append((n, m, lam))
                    if len(out) >= limit:
                        return out
    return out
