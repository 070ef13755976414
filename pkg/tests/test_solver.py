from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dense_floquet import solver as sv
from dense_floquet.diophantine import in_lambda_set
from dense_floquet.errors import (
    InsufficientRange,
    NoAdmissibleLambdaStar,
    NoSignChange,
    NoSolution,
    PreconditionViolated,
)
from dense_floquet.lattice import ModelParams
from dense_floquet.resolvent import G2_closed_form, G_coefficients, operator_norm_V
from dense_floquet.rs_series import xi_coefficients


@pytest.fixture(scope="module")
def curve(solver_config, params):
    grid = np.linspace(2e-4, 0.01, 25)
    return sv.lambda_curve(solver_config, params, lambda_grid=grid)


# ---------------------------------------------------------------------------
# lambda_star


def test_lambda_star_bullets_hold(solver_config, params):
    cfg = solver_config
    assert 0 < cfg.lambda_star <= params.omega / 3
    assert cfg.lambda_star_star == cfg.lambda_star
    assert all(sv.lambda_star_bullets(cfg.lambda_star, cfg.C_hat, params, cfg.v_norm))
    assert cfg.G2_at_0 == pytest.approx(4.0)
    g0 = G2_closed_form(0.0, params.omega)
    assert abs(G2_closed_form(cfg.lambda_star, params.omega) - g0) <= abs(g0) / 2


def test_lambda_star_is_largest_on_halving_grid(solver_config, params):
    cfg = solver_config
    if cfg.lambda_star < params.omega / 3:
        assert not all(sv.lambda_star_bullets(2 * cfg.lambda_star, cfg.C_hat, params, cfg.v_norm))


def test_lambda_star_small_c_hat_gives_larger_lambda(params):
    small = sv.compute_lambda_star(params, C_hat=0.5)
    assert small.lambda_star > sv.compute_lambda_star(params, C_hat=5.0).lambda_star


def test_lambda_star_errors(params):
    with pytest.raises(NoAdmissibleLambdaStar):
        sv.compute_lambda_star(params, C_hat=1e150, max_halvings=50)
    with pytest.raises(ValueError):
        sv.compute_lambda_star(params, C_hat=-1.0)


def test_lambda_star_bullet_count(params):
    assert len(sv.lambda_star_bullets(1e-12, 1.0, params, operator_norm_V())) == 4


# ---------------------------------------------------------------------------
# beta_pm


def test_beta_pm_no_solution(solver_config, params):
    with pytest.raises(NoSolution):
        sv.beta_pm(-0.01, solver_config, params)
    with pytest.raises(PreconditionViolated):
        sv.beta_pm(0.0, solver_config, params)
    with pytest.raises(PreconditionViolated):
        sv.beta_pm(1.0, solver_config, params)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-6, 0.05))
def test_beta_pm_even_and_solves(solver_config, params, lam):
    bm, bp = sv.beta_pm(lam, solver_config, params)
    assert bm == -bp
    assert 0 < bp <= solver_config.B(lam)
    for b in (bm, bp):
        assert sv.fixed_point_residual(b, lam, solver_config, params) <= solver_config.bisection_tol


@pytest.mark.parametrize("lam", [1e-4, 1e-5, 1e-6, 1e-8])
def test_beta_pm_square_root_law(solver_config, params, lam):
    _, bp = sv.beta_pm(lam, solver_config, params)
    approx = math.sqrt(lam / solver_config.G2_at_0)
    assert abs(bp - approx) <= 0.1 * approx


def test_beta_pm_single_sign_change(solver_config, params):
    lam = 0.01
    series = G_coefficients(lam, solver_config.k_max, params)
    scan = np.linspace(0.0, solver_config.B(lam), 1001)
    vals = np.array([series.evaluate(b) - lam for b in scan])
    assert np.count_nonzero(np.sign(vals[1:]) * np.sign(vals[:-1]) < 0) == 1


def test_beta_pm_reports_broken_monotonicity(solver_config, params):
    # a grossly wrong G_2(0) makes B(lambda) too short for any sign change
    bad = solver_config.with_(G2_at_0=400.0)
    with pytest.raises(NoSignChange):
        sv.beta_pm(0.01, bad, params)


def test_lambda_at_beta_inverts_beta_pm(solver_config, params):
    for lam in (1e-4, 1e-3, 0.01):
        _, bp = sv.beta_pm(lam, solver_config, params)
        pt = sv.lambda_at_beta(bp, solver_config, params)
        assert pt.lam == pytest.approx(lam, rel=1e-10)
        assert pt.residual <= solver_config.bisection_tol


def test_lambda_at_beta_golden_values(solver_config, params):
    want = {0.005: 9.99675e-5, 0.01: 3.99481e-4, 0.02: 1.59175e-3, 0.05: 9.69116e-3}
    for beta, lam in want.items():
        pt = sv.lambda_at_beta(beta, solver_config, params)
        assert pt.lam == pytest.approx(lam, rel=1e-5)
        assert pt.lam > 0  # same sign as G_2(0)
    assert sv.lambda_at_beta(0.0, solver_config, params).lam == 0.0


def test_lambda_at_beta_is_even(solver_config, params):
    a = sv.lambda_at_beta(0.03, solver_config, params)
    b = sv.lambda_at_beta(-0.03, solver_config, params)
    assert a.lam == b.lam


# ---------------------------------------------------------------------------
# curves


def test_curve_contains_origin(curve):
    assert any(p.beta == 0.0 and p.lam == 0.0 for p in curve.points)
    assert not curve.errors


def test_curve_symmetric(curve):
    by_lam = {}
    for p in curve.points:
        by_lam.setdefault(p.lam, []).append(p.beta)
    for lam, betas in by_lam.items():
        if lam != 0.0:
            assert sorted(betas) == sorted(-b for b in betas)


def test_curve_beta_plus_increasing(curve):
    pos = sorted((p for p in curve.points if p.beta > 0), key=lambda p: p.lam)
    betas = [p.beta for p in pos]
    assert all(b2 > b1 for b1, b2 in zip(betas, betas[1:]))


def test_curve_envelope(curve):
    A, B = curve.envelope
    assert 0 < A <= B
    pos = sorted((p for p in curve.points if p.beta >= 0), key=lambda p: p.beta)
    for p, q in zip(pos, pos[1:]):
        d = q.beta ** 2 - p.beta ** 2
        assert A * d * (1 - 1e-12) <= abs(q.lam - p.lam) <= B * d * (1 + 1e-12)


def test_curve_records_holes(solver_config, params):
    from dense_floquet.diophantine import excluded_intervals

    a, b = excluded_intervals(1e-3, 0.05, params)[0]
    grid = [0.5 * (a + b), 0.01]
    res = sv.lambda_curve(solver_config, params, lambda_grid=grid)
    assert res.holes == [0.5 * (a + b)]
    assert len(res.points) == 3


def test_curve_collects_errors(solver_config, params):
    res = sv.lambda_curve(solver_config, params, lambda_grid=[-0.01, 0.01])
    assert [lam for lam, _ in res.errors] == [-0.01]
    assert "NoSolution" in res.errors[0][1]


def test_curve_beta_grid(solver_config, params):
    res = sv.lambda_curve(solver_config, params, beta_grid=[0.01, 0.02, -0.02])
    assert [p.beta for p in res.points] == [-0.02, -0.01, 0.0, 0.01, 0.02]
    with pytest.raises(ValueError):
        sv.lambda_curve(solver_config, params)


def test_curve_worker_count_does_not_change_output(solver_config, params):
    grid = np.linspace(1e-3, 0.01, 8)
    one = sv.lambda_curve(solver_config, params, lambda_grid=grid, workers=1)
    two = sv.lambda_curve(solver_config, params, lambda_grid=grid, workers=2)
    assert one.points == two.points
    assert one.holes == two.holes


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("FLOQUET_WORKERS", "3")
    assert sv.worker_count() == 3
    assert sv.worker_count(1) == 1
    monkeypatch.delenv("FLOQUET_WORKERS")
    assert sv.worker_count() >= 1


def test_certified_flag(solver_config, params):
    pt = sv.lambda_at_beta(1e-6, solver_config, params)
    assert pt.certified == (abs(pt.lam) <= solver_config.lambda_star_star)


def test_piecewise_linear_extension():
    f = sv.piecewise_linear_extension([0.0, 2.0, 1.0], [0.0, 4.0, 1.0])
    assert f(0.5) == pytest.approx(0.5)
    assert f(1.5) == pytest.approx(2.5)
    assert f(2.0) == 4.0


# ---------------------------------------------------------------------------
# density and asymptotics


def test_density_of_I(solver_config, params):
    deltas = [0.05 / 2 ** k for k in range(6)]
    reps = sv.density_of_I(deltas, solver_config, params)
    fr = [r.fraction for r in reps]
    assert all(0.0 <= f <= 1.0 for f in fr)
    assert all(b >= a for a, b in zip(fr, fr[1:]))
    assert reps[0].holes >= 1


def test_density_gap_is_quadratic_image(solver_config, params):
    from dense_floquet.diophantine import excluded_intervals

    (r,) = sv.density_of_I([0.05], solver_config, params)
    a, b = excluded_intervals(0.0, r.lambda_top, params)[0]
    gap = sv.beta_plus(b, solver_config, params) - sv.beta_plus(a, solver_config, params)
    # beta ~ sqrt(lambda / G_2(0)) across the gap
    want = math.sqrt(b / 4) - math.sqrt(a / 4)
    assert gap == pytest.approx(want, rel=0.05)
    assert not in_lambda_set(0.5 * (a + b), params)


def test_asymptotic_slopes(solver_config, params):
    betas = np.geomspace(1e-3, 1e-2, 15)
    fits = sv.asymptotic_check([2, 4], betas, solver_config, params)
    assert fits[0].slope >= 4 - 0.5 and fits[0].slope == pytest.approx(4, abs=0.1)
    assert fits[1].slope >= 6 - 0.5 and fits[1].slope == pytest.approx(6, abs=0.1)
    xi = xi_coefficients(6, params)
    assert fits[0].remainder_sign == int(np.sign(xi[4]))
    assert fits[1].remainder_sign == int(np.sign(xi[6]))


def test_asymptotic_insufficient_range(solver_config, params):
    with pytest.raises(InsufficientRange):
        sv.asymptotic_check([2], np.geomspace(1e-3, 5e-3, 5), solver_config, params)


def test_other_frequency_has_its_own_sign():
    # for omega < 1 the constant G_2(0) = 4 / (omega^2 - 1) is negative
    p = ModelParams(omega=0.7, gamma=0.05)
    g0 = G2_closed_form(0.0, p.omega)
    assert g0 < 0
    cfg = sv.SolverConfig(1e-3, 1e-3, 1.0, g0)
    bm, bp = sv.beta_pm(-1e-4, cfg, p)
    assert bm == -bp
    with pytest.raises(NoSolution):
        sv.beta_pm(1e-4, cfg, p)
