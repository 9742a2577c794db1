"""Closed-form tests: likelihood ratio, signed distance, confidence-set
inversion, and the three-sample comparison statistic with its exact null
distribution at the cone vertex."""
import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtr
from scipy.stats import chi2, norm

from conftest import EXACT_Y1, EXACT_Y2, ROUND_Y1, ROUND_Y2
from regionboot.classic_tests import (confset_pvalue, lr_pvalue, mcb_pvalue,
                                      mcb_statistic, mcb_tail, mcb_threshold,
                                      signed_lr_pvalue)

SQRT3 = np.sqrt(3.0)


def test_lr_is_chi_square_tail_of_squared_distance(ef01, cone):
    for region in (ef01, cone):
        for y in (ROUND_Y1, ROUND_Y2, (2.4, 0.9), (-1.1, 2.2)):
            lam = region.project(np.asarray(y, dtype=float)).lambda_hat
            assert lr_pvalue(region, y) == pytest.approx(
                chi2.sf(lam * lam, df=1), rel=1e-14)


def test_lr_worked_values(ef01, cone):
    assert lr_pvalue(ef01, ROUND_Y1) == pytest.approx(0.064, abs=1e-3)
    # vertex-footed observation: the distance is the plain Euclidean norm
    lam = np.hypot(*ROUND_Y1)
    p = lr_pvalue(cone, ROUND_Y1)
    assert p == pytest.approx(chi2.sf(lam * lam, df=1), rel=1e-14)
    assert p == pytest.approx(0.075, abs=1e-3)


def test_lr_interior_and_boundary(flat, cone):
    assert lr_pvalue(flat, (0.3, -2.0)) == 1.0
    assert lr_pvalue(flat, (1.0, 0.0)) == 1.0
    assert lr_pvalue(cone, (0.0, 0.0)) == 1.0


def test_signed_lr_worked_values(ef01, cone):
    assert signed_lr_pvalue(ef01, ROUND_Y1) == pytest.approx(0.032, abs=1e-3)
    # flank-footed observation: signed distance is (u + sqrt(3) v) / 2
    lam = (ROUND_Y2[0] + SQRT3 * ROUND_Y2[1]) / 2.0
    p = signed_lr_pvalue(cone, ROUND_Y2)
    assert p == pytest.approx(float(ndtr(-lam)), rel=1e-14)
    assert p == pytest.approx(0.039, abs=1e-3)


def test_signed_lr_interior_level(flat):
    # two units inside the boundary
    assert signed_lr_pvalue(flat, (0.3, -2.0)) == pytest.approx(
        float(ndtr(2.0)), abs=1e-12)
    assert signed_lr_pvalue(flat, (1.0, 0.0)) == pytest.approx(0.5, abs=1e-14)


def test_fold_identity_outside(ef01, cone):
    """For observations outside the region the two-sided p-value doubles
    the one-sided one; inside, the fold saturates at 1 instead."""
    for region in (ef01, cone):
        for y in (ROUND_Y1, ROUND_Y2, (0.4, 2.6)):
            assert lr_pvalue(region, y) == pytest.approx(
                2.0 * signed_lr_pvalue(region, y), rel=1e-14)
    assert lr_pvalue(ef01, (0.0, -2.0)) == 1.0
    assert 2.0 * signed_lr_pvalue(ef01, (0.0, -2.0)) > 1.0


def test_confset_worked_values(ef01, cone):
    assert confset_pvalue(ef01, ROUND_Y1) == pytest.approx(0.181, abs=1e-3)
    lam = np.hypot(*ROUND_Y1)
    p = confset_pvalue(cone, ROUND_Y1)
    assert p == pytest.approx(np.exp(-lam * lam / 2.0), rel=1e-14)
    assert p == pytest.approx(0.205, abs=1e-3)


def test_confset_chi2_identity():
    # closed form for two dimensions: exp(-x/2) is the chi-square(2) tail
    for lam in (0.3, 1.0, 1.848, 2.5, 3.4):
        assert np.exp(-lam * lam / 2.0) == pytest.approx(
            chi2.sf(lam * lam, df=2), rel=1e-13)


def test_confset_interior(flat, cone):
    assert confset_pvalue(flat, (0.3, -2.0)) == 1.0
    assert confset_pvalue(cone, (0.0, 0.0)) == 1.0


def test_mcb_statistic_worked_values():
    assert mcb_statistic(ROUND_Y1) == pytest.approx(2.498, abs=1e-3)
    assert mcb_statistic(ROUND_Y2) == pytest.approx(2.493, abs=1e-3)


def test_mcb_statistic_exact_points():
    """Both table observations were chosen so the statistic is exactly 2.5."""
    assert mcb_statistic(EXACT_Y1) == pytest.approx(2.5, abs=1e-12)
    assert mcb_statistic(EXACT_Y2) == pytest.approx(2.5, abs=1e-12)


def test_mcb_statistic_is_scaled_flank_distance(cone):
    # for flank-footed y the statistic equals sqrt(2) times the signed
    # distance to the cone
    for y in (ROUND_Y2, (2.0, 0.1), (4.0, -0.5)):
        lam = cone.project(np.asarray(y, dtype=float)).lambda_hat
        assert mcb_statistic(y) == pytest.approx(np.sqrt(2.0) * lam,
                                                 abs=1e-12)


def test_mcb_coordinate_identity():
    """The projected two-coordinate form reproduces the max of the pairwise
    standardized mean differences exactly."""
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = rng.uniform(0.5, 50.0)
        eta = rng.normal(0.0, 2.0, size=3)
        u = np.sqrt(n / 2.0) * (eta[2] - eta[1])
        v = np.sqrt(n / 6.0) * (eta[1] + eta[2] - 2.0 * eta[0])
        t = np.sqrt(n) * max(eta[1] - eta[0], eta[2] - eta[0])
        assert mcb_statistic((u, v)) == pytest.approx(t, abs=1e-12)


def test_mcb_tail_at_zero():
    assert float(mcb_tail(0.0)[0]) == pytest.approx(2.0 / 3.0, abs=1e-11)


def test_mcb_tail_frozen_quadrature_values():
    # reference values from 40-digit quadrature of the squared-cdf form
    assert float(mcb_tail(1.0)[0]) == pytest.approx(
        0.36629795422192024, abs=1e-12)
    assert float(mcb_tail(2.5)[0]) == pytest.approx(
        0.068634758739552826, abs=1e-12)


def test_mcb_tail_vectorized_and_decreasing():
    grid = np.linspace(-3.0, 4.0, 40)
    vals = mcb_tail(grid)
    assert vals.shape == (40,)
    assert np.all(np.diff(vals) < 0.0)
    assert np.all(vals > 0.0) and np.all(vals < 1.0)


def test_mcb_pvalue_worked_values():
    p1, p2 = mcb_pvalue(ROUND_Y1), mcb_pvalue(ROUND_Y2)
    assert p1 == pytest.approx(0.069, abs=1e-3)
    assert p2 == pytest.approx(0.069, abs=1e-3)
    assert p1 == pytest.approx(0.068797045114265654, abs=1e-12)
    assert p2 == pytest.approx(0.069282801845913511, abs=1e-12)
    for y in (EXACT_Y1, EXACT_Y2):
        assert mcb_pvalue(y) == pytest.approx(0.068634758739552826,
                                              abs=1e-12)


def test_mcb_threshold_worked_values():
    assert abs(mcb_threshold(2.0 / 3.0)) <= 1e-9
    t = mcb_threshold(0.069)
    assert t == pytest.approx(2.5, abs=5e-3)
    assert t == pytest.approx(2.4963581133124535, abs=1e-9)
    assert mcb_threshold(0.05) == pytest.approx(2.7101026261880179, abs=1e-9)


def test_mcb_threshold_round_trip_and_monotone():
    levels = (0.01, 0.05, 0.1, 0.3, 0.6)
    thresholds = [mcb_threshold(a) for a in levels]
    for a, t in zip(levels, thresholds):
        assert float(mcb_tail(t)[0]) == pytest.approx(a, abs=1e-9)
    assert np.all(np.diff(thresholds) < 0.0)


def test_mcb_threshold_rejects_bad_levels():
    for a in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            mcb_threshold(a)


@pytest.mark.parametrize("alpha", [0.05, 0.1])
def test_mcb_vertex_rejection_level(alpha):
    """Independent route: integrate the rejection probability of the
    calibrated threshold over the null at the vertex and recover alpha."""
    t = mcb_threshold(alpha)

    def slice_mass(u):
        return norm.pdf(u) * ndtr(-(2.0 * t - np.sqrt(2.0) * u)
                                  / np.sqrt(6.0))

    half, err = quad(slice_mass, 0.0, np.inf, limit=200)
    assert err < 1e-7
    assert 2.0 * half == pytest.approx(alpha, abs=1e-9)
