"""Closed-form expansions and their agreement with the engines."""
import numpy as np
import pytest
from scipy.special import ndtri
from scipy.stats import norm

from regionboot.bp_engine import bp, dbp
from regionboot.errors import InvalidScale
from regionboot.oracle import (au_expansion, bp_expansion, dbp_expansion,
                               pv_expansion, reject_dbp, reject_nbp)
from regionboot.regions import (PolynomialRegion, TableRegion, project,
                                tangent_jet)
from regionboot.surface_jets import beta_summary, gamma_summary

from conftest import EXACT_Y1, ladder_slope

WORKED = beta_summary((0.2, 0.02, 0.002, 0.0), 1.85)
FLAT = beta_summary((0.0, 0.0, 0.0, 0.0), 1.85)


def boundary_summary(region, y):
    res = project(region, np.asarray(y, dtype=float))
    jet = tangent_jet(region, res.u_hat)
    return beta_summary(gamma_summary(jet), res.lambda_hat)


# -- hand values -----------------------------------------------------------------

def test_bp_expansion_flat():
    assert bp_expansion(FLAT, 1.0) == pytest.approx(norm.sf(1.85), abs=1e-15)
    assert bp_expansion(FLAT, 1.0) == pytest.approx(0.0322, abs=1e-4)


def test_bp_expansion_worked_example():
    value = bp_expansion(WORKED, 1.0)
    assert value == pytest.approx(0.021928236580625, abs=1e-10)
    assert value == pytest.approx(0.0219, abs=1e-4)
    assert value == pytest.approx(
        norm.sf(WORKED.beta0 + WORKED.beta1 + WORKED.beta2), abs=1e-15)


def test_au_expansion_worked_example():
    value = au_expansion(WORKED)
    assert value == pytest.approx(0.047340431956383, abs=1e-10)
    assert value == pytest.approx(0.0474, abs=1e-4)
    assert au_expansion(FLAT) == pytest.approx(norm.sf(1.85), abs=1e-15)


def test_pv_expansion_worked_example():
    value = pv_expansion(WORKED)
    assert value == pytest.approx(0.047604289158071, abs=1e-10)
    assert value == pytest.approx(0.0476, abs=1e-4)
    assert pv_expansion(FLAT) == pytest.approx(norm.sf(1.85), abs=1e-15)


def test_dbp_expansion_worked_example():
    value = dbp_expansion(WORKED, 1.0, 1.0, 0.0)
    assert value == pytest.approx(0.044514699563136, abs=1e-10)
    assert value == pytest.approx(0.0445, abs=1e-4)


def test_au_pv_gap_is_the_third_trace_term():
    gap = (-ndtri(pv_expansion(WORKED))) - (-ndtri(au_expansion(WORKED)))
    assert gap == pytest.approx(-2.0 * WORKED.beta2 + WORKED.beta3, abs=1e-12)
    assert gap == pytest.approx(-(4.0 / 3.0) * WORKED.gamma3, abs=1e-12)


# -- structural identities ---------------------------------------------------------

def test_au_equals_normalized_continuation():
    for g in (WORKED, FLAT, beta_summary((0.5, 0.25, 0.125, 0.03), 0.9)):
        assert au_expansion(g) == pytest.approx(
            bp_expansion(g, -1.0, normalized=True), abs=1e-14)


def test_pv_equals_double_expansion_at_minus_one():
    for g in (WORKED, FLAT, beta_summary((0.3, 0.09, 0.027, 0.01), 1.2)):
        assert pv_expansion(g) == dbp_expansion(g, 1.0, -1.0, 0.0)


def test_center_drift_vanishes_when_scales_cancel():
    for kt in (0.0, 0.3, -5.0):
        # tau2 = 1 cancels exactly; tau2 = 0.7 only up to sqrt round-off
        assert dbp_expansion(WORKED, 1.0, -1.0, kt) == dbp_expansion(
            WORKED, 1.0, -1.0, 0.0)
        assert dbp_expansion(WORKED, 0.7, -0.7, kt) == pytest.approx(
            dbp_expansion(WORKED, 0.7, -0.7, 0.0), abs=1e-13)


def test_dbp_expansion_rejects_bad_outer_scale():
    with pytest.raises(InvalidScale):
        dbp_expansion(WORKED, 0.0, 1.0)
    with pytest.raises(InvalidScale):
        dbp_expansion(WORKED, -1.0, 1.0)


def test_bp_expansion_raw_needs_positive_scale():
    with pytest.raises(InvalidScale):
        bp_expansion(WORKED, -1.0)
    # the normalized pivot is a polynomial, defined for any real scale
    assert 0.0 < bp_expansion(WORKED, -1.0, normalized=True) < 1.0


# -- rejection levels ---------------------------------------------------------------

def test_reject_nbp_flat_is_exact():
    for alpha in (0.01, 0.05, 0.2):
        assert reject_nbp((0.0, 0.0, 0.0, 0.0), alpha, 1.0) == pytest.approx(
            alpha, abs=1e-15)


def test_reject_nbp_first_order_inflation():
    value = reject_nbp((0.1, 0.0, 0.0, 0.0), 0.05, 1.0)
    assert value == pytest.approx(norm.cdf(ndtri(0.05) + 0.2), abs=1e-15)
    assert value == pytest.approx(0.074249502114906, abs=1e-10)
    assert value == pytest.approx(0.0743, abs=1e-4)


def test_reject_nbp_residual_at_minus_one():
    value = reject_nbp((0.1, 0.02, 0.002, 0.001), 0.05, -1.0)
    expect = norm.cdf(ndtri(0.05) + (4.0 / 3.0) * 0.002)
    assert value == pytest.approx(expect, abs=1e-15)
    assert reject_nbp((0.0, 0.0, 0.002, 0.0), 0.05, -1.0) == pytest.approx(
        0.050275632105355, abs=1e-10)


def test_reject_dbp_values():
    assert reject_dbp(0.0, 0.05, 1.0) == pytest.approx(0.05, abs=1e-15)
    for b3 in (-0.5, 0.0, 0.7):
        assert reject_dbp(b3, 0.05, -1.0) == pytest.approx(0.05, abs=1e-15)
    value = reject_dbp(-0.016, 0.05, 1.0)
    assert value == pytest.approx(0.053388156031523, abs=1e-10)
    assert value == pytest.approx(0.0534, abs=1e-4)


# -- agreement with the engines -------------------------------------------------------

def test_engine_tracks_expansions_on_custom_regions():
    """On shrinking spline regions the deterministic engine approaches the
    closed forms at the stated orders (the expansion targets come from the
    generating polynomial's analytic jet, since spline differentiation cannot
    deliver fourth derivatives)."""
    eps_values = (0.3, 0.22, 0.16, 0.12, 0.09)
    knots = np.linspace(-10.0, 10.0, 81)
    y = np.array([0.0, 1.6])
    errs_bp, errs_dbp = [], []
    for eps in eps_values:
        poly = PolynomialRegion(0.25 * eps, -0.20 * eps**2, 0.30 * eps**3)
        table = TableRegion(np.column_stack([knots, poly.h(knots)]))
        g = boundary_summary(poly, y)
        errs_bp.append(abs(bp(table, y).value - bp_expansion(g, 1.0)))
        errs_dbp.append(abs(dbp(table, y, tau2=0.7, nodes=64).value
                            - dbp_expansion(g, 0.7, 1.0)))
    assert ladder_slope(eps_values, errs_bp) >= 3.5
    assert ladder_slope(eps_values, errs_dbp) >= 3.0


def test_first_order_reconstruction_of_published_estimate(ef01):
    """The curvature read off the one-level probability reproduces the
    published first-order p-value; the analytic curvature at this boundary
    is several times larger, so the closed-form expansion is out of its
    regime here and is only sanity-bounded."""
    res = project(ef01, np.array(EXACT_Y1))
    zbp = -ndtri(bp(ef01, EXACT_Y1).value)
    gamma1_hat = zbp - res.lambda_hat
    assert gamma1_hat == pytest.approx(0.237, abs=0.002)
    assert norm.sf(2.0 * res.lambda_hat - zbp) == pytest.approx(0.053, abs=1e-3)
    g = boundary_summary(ef01, EXACT_Y1)
    assert g.gamma1 > 0.5
    assert 0.0 <= pv_expansion(g) < 0.01
