"""Acceptance gate: the twelve primary criteria at their stated tolerances.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""
from __future__ import annotations

import math
import time

import numpy as np
import pytest

from dense_floquet import combinatorics as comb
from dense_floquet import diophantine as dio
from dense_floquet import oracle as orc
from dense_floquet import resolvent as rv
from dense_floquet import rs_series as rs
from dense_floquet import solver as sv
from dense_floquet.errors import NoSolution
from dense_floquet.lattice import ModelParams

from .conftest import SQRT2, SQRT3

criterion = pytest.mark.criterion


@criterion(1, "xi_2 = G_2(0) = 4/(omega^2-1) to 1e-12 for omega in {sqrt2, sqrt3, 2.5}, < 1 s")
def test_closed_form_anchor():
    t0 = time.perf_counter()
    for omega in (SQRT2, SQRT3, 2.5):
        p = ModelParams(omega=omega)
        want = 4 / (omega ** 2 - 1)
        assert abs(rs.xi_via_trees(2, p).value - want) <= 1e-12 * abs(want)
        assert abs(rs.xi_via_trace(2, p).value - want) <= 1e-12 * abs(want)
        assert abs(rv.G_coefficients(0.0, 1, p)[2] - want) <= 1e-12 * abs(want)
    assert time.perf_counter() - t0 < 1.0


@criterion(2, "trees = trace to 1e-10 for M in {2,4,6,8}, omega = sqrt2, < 2 min")
def test_dual_formula(params):
    t0 = time.perf_counter()
    for M in (2, 4, 6, 8):
        a = rs.xi_via_trees(M, params).value
        b = rs.xi_via_trace(M, params).value
        assert abs(a - b) <= 1e-10 * abs(a)
    assert time.perf_counter() - t0 < 120


@criterion(3, "xi_M = 0 exactly for odd M <= 9, odd G coefficients vanish")
def test_parity(params):
    for M in (3, 5, 7, 9):
        assert comb.enumerate_closed_paths(M) == []
        assert rs.xi_via_trees(M, params).value == 0.0
        assert rs.xi_via_trace(M, params).value == 0.0
    for lam in (0.0, 0.01, -0.02):
        for method in ("transfer", "paths"):
            g = rv.G_coefficients(lam, 5, params, method=method)
            assert all(g[2 * k + 1] == 0.0 for k in range(1, 5))


@criterion(4, "exactly one cyclic rotation of each composition is a tree, N <= 8, < 30 s")
def test_rotation_exhaustive():
    t0 = time.perf_counter()
    for N in range(1, 9):
        trees = set(comb.enumerate_trees(N))
        for sigma in comb.compositions(N - 1, N):
            hits = [m for m in range(N) if comb.rotate(sigma, m) in trees]
            assert len(hits) == 1
            assert comb.rotate(sigma, comb.tree_rotation(sigma)) in trees
    assert time.perf_counter() - t0 < 30


@criterion(5, "fixed point vs oracle (40 x 12) within 1e-5 + 10 beta^4, < 1 min")
def test_oracle_agreement(solver_config, params):
    t0 = time.perf_counter()
    betas = [0.005, 0.01, 0.02, 0.05]
    pts = orc.oracle_branch(betas, params, N1=40, N2=12)
    for beta, pt in zip(betas, pts):
        lam = sv.lambda_at_beta(beta, solver_config, params).lam
        assert abs(lam - pt.eigenvalue) <= (1e-5 + 10 * beta ** 4) * abs(pt.eigenvalue)
    assert time.perf_counter() - t0 < 60


@criterion(6, "remainder slopes in [3.5, 4.5] and [5.5, 6.5] on [1e-3, 1e-2] cap I, < 2 min")
def test_asymptotics(solver_config, params):
    t0 = time.perf_counter()
    betas = np.geomspace(1e-3, 1e-2, 15)
    fits = sv.asymptotic_check([2, 4], betas, solver_config, params, require_in_lambda=True)
    assert 3.5 <= fits[0].slope <= 4.5
    assert 5.5 <= fits[1].slope <= 6.5
    assert time.perf_counter() - t0 < 120


@criterion(7, "basic-equation residual <= 1e-8 at M_max = 12 inside the domain for measured C_hat")
def test_basic_residual(solver_config, params):
    c_hat = solver_config.C_hat
    for lam in (1e-3, 0.01, 0.1, -0.01, -0.1, params.omega / 3):
        assert dio.in_lambda_set(lam, params)
        radius = rv.domain_radius(lam, c_hat, params)
        for beta in (radius / 4, radius / 2, radius):
            assert rv.basic_residual(beta, lam, 12, params) <= 1e-8


@criterion(8, "telescoping inequality on 1000 random tuples, l <= 10, margin >= -1e-12")
def test_telescope_random():
    rng = np.random.default_rng(20240601)
    for _ in range(1000):
        ell = int(rng.integers(1, 11))
        deltas = np.exp(rng.uniform(-5, 5, ell + 1))
        assert -dio.telescope_identity_check(deltas) >= -1e-12


@criterion(9, "two-point G identity residual <= 1e-9 on a 5 x 5 grid of admissible pairs, beta = 1e-3")
def test_two_point_identity(solver_config, params):
    beta = 1e-3
    lams = [1e-3, 3e-3, 0.01, 0.03, 0.1]
    for lam in lams:
        assert dio.in_lambda_set(lam, params)
        assert abs(lam) <= params.omega / 3
    for l1 in lams:
        for l2 in lams:
            # beta must lie inside the common convergence domain
            assert beta <= rv.domain_radius(min(l1, l2), solver_config.C_hat, params)
            r = rv.two_point_identity_check(beta, l1, l2, params)
            assert r.residual <= 1e-9


@criterion(10, "excluded measure of [-delta omega, delta omega] below the bound, delta = 2^-2..2^-12, cutoff 500, < 1 min")
def test_lambda_measure_bound():
    t0 = time.perf_counter()
    p = ModelParams(n2_cutoff=500)
    deltas = [2.0 ** -k for k in range(2, 13)]
    for r in dio.lambda_density(deltas, p):
        assert r.measured < r.analytic_bound
    assert time.perf_counter() - t0 < 60


@criterion(11, "NoSolution for the wrong sign, beta_- = -beta_+ to 1e-14, one sign change in 64 points")
def test_fixed_point_structure(solver_config, params):
    with pytest.raises(NoSolution):
        sv.beta_pm(-0.01, solver_config, params)
    lams = [solver_config.lambda_star / 2] + list(np.geomspace(1e-8, 0.05, 12))
    lams = [float(x) for x in lams if dio.in_lambda_set(float(x), params)]
    assert len(lams) >= 10
    for lam in lams:
        with pytest.raises(NoSolution):
            sv.beta_pm(-lam, solver_config, params)
        bm, bp = sv.beta_pm(lam, solver_config, params)
        assert abs(bm + bp) <= 1e-14
        series = rv.G_coefficients(lam, solver_config.k_max, params)
        scan = np.linspace(0.0, solver_config.B(lam), sv.SCAN_POINTS)
        vals = np.sign([series.evaluate(b) - lam for b in scan])
        assert np.count_nonzero(vals[1:] * vals[:-1] < 0) == 1


@criterion(12, "naive and compensated path sums agree to 1e-10 for M <= 10")
def test_compensation_exactness(params):
    cases = [(params, None), (ModelParams(omega=SQRT3), 2)]
    loops_seen = 0
    for p, b in cases:
        for M in range(1, 11):
            r = rv.path_norm_check(M, 0.01, p, b=b)
            assert r.max_abs_diff <= 1e-10 * max(r.norm_naive, 1e-300)
            assert math.isclose(r.norm_naive, r.norm_transfer, rel_tol=1e-10)
            loops_seen += r.short_loop_paths
    # the second case must actually exercise the regrouping
    assert loops_seen > 0
