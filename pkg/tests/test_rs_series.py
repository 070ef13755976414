from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dense_floquet import rs_series as rs
from dense_floquet.combinatorics import enumerate_closed_paths
from dense_floquet.errors import OrderTooLarge, ZeroDenominator
from dense_floquet.lattice import ModelParams

from .conftest import GOLDEN, SQRT2, SQRT3


def naive_spectral_sum(mu, omega):
    """Direct loop over closed paths, plain left-to-right products."""
    total = 0.0
    for path in enumerate_closed_paths(len(mu) + 1):
        prod = 1.0
        for j, m in enumerate(mu, start=1):
            n = path[j]
            prod *= (omega * n[0] + n[1] ** 2) ** (-m)
        total += prod
    return total


def test_spectral_sum_examples():
    assert rs.spectral_sum((1,), ModelParams(omega=2.0)) == pytest.approx(-4 / 3, rel=1e-14)
    assert rs.spectral_sum((1,), ModelParams()) == pytest.approx(-4.0, rel=1e-14)
    assert rs.spectral_sum((1, 1), ModelParams()) == 0.0


@pytest.mark.parametrize("mu", [(1,), (2,), (1, 1, 1), (2, 1, 1), (1, 3, 1), (1, 1, 1, 1, 1)])
def test_spectral_sum_matches_naive_loop(mu):
    p = ModelParams(omega=SQRT3)
    want = naive_spectral_sum(mu, p.omega)
    assert rs.spectral_sum(mu, p) == pytest.approx(want, rel=1e-12, abs=1e-14)


def test_spectral_sum_rejects_nonpositive():
    with pytest.raises(ValueError):
        rs.spectral_sum((1, 0), ModelParams())


def test_zero_denominator_for_rational_frequency():
    # omega = 2 puts F(-2, 2) = 0 on a closed path of length 4
    with pytest.raises(ZeroDenominator):
        rs.spectral_sum((1, 1, 1), ModelParams(omega=2.0))


def test_xi_examples():
    for omega in (SQRT2, 2.0, 2.5):
        p = ModelParams(omega=omega)
        assert rs.xi_via_trees(2, p).value == pytest.approx(4 / (omega ** 2 - 1), rel=1e-12)
    assert rs.xi_via_trees(3, ModelParams()).value == 0.0
    assert rs.xi_via_trace(2, ModelParams(omega=2.0)).value == pytest.approx(4 / 3, rel=1e-12)
    assert rs.xi_via_trace(5, ModelParams()).value == 0.0


def test_xi_known_values_sqrt2(params):
    # internal golden values; trees and trace agree on each
    assert rs.xi_via_trees(4, params).value == pytest.approx(-52.0, rel=1e-12)
    assert rs.xi_via_trees(6, params).value == pytest.approx(1103.977874694, rel=1e-10)


@pytest.mark.parametrize("omega", [SQRT2, SQRT3, GOLDEN])
@pytest.mark.parametrize("M", [2, 4, 6, 8])
def test_trees_equal_trace(omega, M):
    p = ModelParams(omega=omega)
    a = rs.xi_via_trees(M, p).value
    b = rs.xi_via_trace(M, p).value
    assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


@pytest.mark.parametrize("M", [3, 5, 7, 9])
def test_odd_orders_vanish(params, M):
    assert rs.xi_via_trees(M, params).value == 0.0
    assert rs.xi_via_trace(M, params).value == 0.0


@settings(max_examples=10, deadline=None)
@given(st.floats(1.05, 10.0).filter(lambda w: abs(w - round(w)) > 1e-3))
def test_xi2_closed_form(omega):
    p = ModelParams(omega=omega)
    assert rs.xi_via_trees(2, p).value == pytest.approx(rs.xi2_closed_form(omega), rel=1e-12)


@pytest.mark.parametrize("M", [4, 6])
def test_summation_order_does_not_matter(params, M):
    """Rebuild xi_M from spectral sums computed over reversed path lists."""
    omega = params.omega

    def reversed_sum(mu):
        total = 0.0
        for path in reversed(enumerate_closed_paths(len(mu) + 1)):
            prod = 1.0
            for j, m in enumerate(mu, start=1):
                prod *= (omega * path[j][0] + path[j][1] ** 2) ** (-m)
            total += prod
        return total

    for mu in [(1,) * (M - 1), (2,) + (1,) * (M - 3)]:
        fwd = rs.spectral_sum(mu, params)
        assert reversed_sum(mu) == pytest.approx(fwd, rel=1e-10, abs=1e-12)


def test_order_limits(params):
    with pytest.raises(ValueError):
        rs.xi_via_trees(1, params)
    with pytest.raises(OrderTooLarge):
        rs.xi_via_trace(14, params)
    with pytest.raises(OrderTooLarge):
        rs.xi_via_trees(8, params.with_(path_cutoff=6))


def test_xi_coefficients_table(params):
    xi = rs.xi_coefficients(6, params)
    assert len(xi) == 7
    assert xi[0] == xi[1] == xi[3] == xi[5] == 0.0
    assert xi[2] == pytest.approx(4.0)


def test_closed_walk_counts():
    # closed walks of length 2k on the diagonal lattice: C(2k, k)^2
    for k in range(1, 5):
        assert rs.closed_walk_array(2 * k).shape[0] == math.comb(2 * k, k) ** 2


def test_trace_methods_tagged(params):
    assert rs.xi_via_trees(4, params).method == "trees"
    assert rs.xi_via_trace(4, params).method == "trace"
    assert np.isfinite(rs.xi_via_trace(8, params).value)
