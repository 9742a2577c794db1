"""Coefficient algebra of quartic boundary expansions."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regionboot.surface_jets import (GeometricSummary, LocalFrame, NormalShift,
                                     SurfaceJet, _symmetrize, beta_summary,
                                     contour_jet, curvatures_at,
                                     gamma_summary, gaussian_moment, kappa,
                                     local_jet, shift_surface)

from conftest import ladder_slope, random_jet

EPS_WINDOW = (0.22, 0.16, 0.12, 0.09, 0.065)


# -- construction --------------------------------------------------------------

def test_jet_requires_positive_dimension():
    with pytest.raises(ValueError):
        SurfaceJet(q=0, h2=np.zeros((0, 0)), h3=np.zeros((0,) * 3),
                   h4=np.zeros((0,) * 4))


def test_jet_rejects_asymmetric_coefficients():
    h2 = np.array([[0.3, 0.5], [0.1, 0.2]])
    with pytest.raises(ValueError):
        SurfaceJet(q=2, h2=h2, h3=np.zeros((2,) * 3), h4=np.zeros((2,) * 4))


def test_jet_rejects_wrong_shapes():
    with pytest.raises(ValueError):
        SurfaceJet(q=2, h2=np.zeros((2, 2)), h3=np.zeros((2, 2)),
                   h4=np.zeros((2,) * 4))


def test_jet_round_trips_through_dict():
    jet = random_jet(2, 1.0, seed=7)
    back = SurfaceJet.from_dict(jet.to_dict())
    # construction re-symmetrizes, which may reassociate additions by one ulp
    for name in ("h0", "h1", "h2", "h3", "h4"):
        np.testing.assert_allclose(getattr(jet, name), getattr(back, name),
                                   atol=1e-15)


def test_normal_shift_symmetrizes_quadratic_part():
    shift = NormalShift(1.0, lambda2=np.array([[0.0, 0.4], [0.0, 0.0]]), q=2)
    np.testing.assert_allclose(shift.lambda2, shift.lambda2.T, atol=0.0)


@given(st.floats(-0.8, 0.8), st.floats(-0.5, 0.5), st.floats(-0.4, 0.4),
       st.floats(-1.0, 1.0))
@settings(max_examples=25, deadline=None)
def test_one_dim_height_matches_quartic(h2, h3, h4, u):
    jet = SurfaceJet.one_dim(h2, h3, h4)
    expect = h2 * u**2 + h3 * u**3 + h4 * u**4
    assert jet.height(np.array([u])) == pytest.approx(expect, abs=1e-14)


# -- curvature traces ----------------------------------------------------------

def test_gamma_zero_jet():
    jet = SurfaceJet(q=2, h2=np.zeros((2, 2)), h3=np.zeros((2,) * 3),
                     h4=np.zeros((2,) * 4))
    assert gamma_summary(jet) == (0.0, 0.0, 0.0, 0.0)


def test_gamma_two_dim_diagonal():
    jet = SurfaceJet(q=2, h2=np.diag([0.1, 0.1]), h3=np.zeros((2,) * 3),
                     h4=np.zeros((2,) * 4))
    g = gamma_summary(jet)
    assert g == pytest.approx((0.2, 0.02, 0.002, 0.0), abs=1e-15)


def test_gamma_one_dim_powers():
    jet = SurfaceJet.one_dim(0.5, 0.07, 0.03)
    g = gamma_summary(jet)
    assert g == pytest.approx((0.5, 0.25, 0.125, 0.03), abs=1e-15)


@given(st.floats(-1.5, 1.5), st.floats(-1.0, 1.0))
@settings(max_examples=25, deadline=None)
def test_gamma_one_dim_trace_powers_property(c, h4):
    g1, g2, g3, _ = gamma_summary(SurfaceJet.one_dim(c, 0.0, h4))
    assert g2 == pytest.approx(g1**2, abs=1e-13)
    assert g3 == pytest.approx(g1**3, abs=1e-13)


def test_gamma2_nonnegative_and_gamma3_bound():
    for seed in range(8):
        jet = random_jet(3, 1.0, seed=seed)
        _, g2, g3, _ = gamma_summary(jet)
        assert g2 >= 0.0
        # trace power inequality for symmetric matrices
        assert abs(g3) <= g2**1.5 + 1e-12


# -- bias coefficients ---------------------------------------------------------

def test_beta_flat():
    g = beta_summary((0.0, 0.0, 0.0, 0.0), 1.2)
    assert (g.beta0, g.beta1, g.beta2, g.beta3) == (1.2, 0.0, 0.0, 0.0)


def test_beta_hand_values():
    g = beta_summary((0.2, 0.02, 0.002, 0.0), 1.85)
    assert g.beta0 == pytest.approx(1.85, abs=0.0)
    assert g.beta1 == pytest.approx(0.2 - 1.85 * 0.02 + (4.0 / 3.0) * 1.85**2 * 0.002,
                                    abs=1e-15)
    assert g.beta1 == pytest.approx(0.172126666666667, abs=1e-12)
    assert g.beta2 == pytest.approx(-0.0066666666666667, abs=1e-12)
    assert g.beta3 == pytest.approx(-0.016, abs=1e-15)


def test_beta_summary_preserves_gammas():
    g = beta_summary((0.3, 0.09, 0.027, 0.004), 0.7)
    assert isinstance(g, GeometricSummary)
    assert g.gammas == (0.3, 0.09, 0.027, 0.004)
    assert g.lambda0 == 0.7


def sphere_jet(q, radius):
    """Quartic expansion of a radius-R sphere cap: |u|^2/2R + |u|^4/8R^3."""
    eye = np.eye(q)
    h2 = eye / (2.0 * radius)
    h4 = np.zeros((q,) * 4)
    for i, j, k, l in itertools.product(range(q), repeat=4):
        h4[i, j, k, l] = (eye[i, j] * eye[k, l] + eye[i, k] * eye[j, l]
                          + eye[i, l] * eye[j, k]) / (24.0 * radius**3)
    return SurfaceJet(q=q, h2=h2, h3=np.zeros((q,) * 3), h4=h4)


def test_sphere_has_vanishing_beta3():
    jet = sphere_jet(2, 1.7)
    g = beta_summary(gamma_summary(jet), 1.0)
    assert abs(g.beta3) <= 1e-14


# -- local re-expansion --------------------------------------------------------

def test_local_jet_at_origin_is_identity():
    jet = random_jet(2, 1.0, seed=3)
    lj = local_jet(jet, np.zeros(2))
    assert lj.h0 == 0.0
    np.testing.assert_allclose(lj.h1, 0.0, atol=1e-15)
    np.testing.assert_allclose(lj.h2, jet.h2, atol=1e-15)
    np.testing.assert_allclose(lj.h3, jet.h3, atol=1e-15)
    np.testing.assert_allclose(lj.h4, jet.h4, atol=1e-15)


def test_local_jet_hand_value():
    jet = SurfaceJet.one_dim(0.3, 0.0, 0.0)
    lj = local_jet(jet, np.array([0.2]))
    assert lj.h2[0, 0] == pytest.approx(0.29784, abs=1e-12)
    assert lj.h0 == 0.0
    np.testing.assert_allclose(lj.h1, 0.0, atol=1e-15)


def test_local_jet_traces_match_curvatures():
    """Contracting the re-expanded jet with the frame metric reproduces the
    pointwise curvature traces."""
    for q, seed in ((1, 41), (2, 42)):
        jet = random_jet(q, 1.0, seed=seed)
        u = np.full(q, 0.17)
        lj = local_jet(jet, u)
        fr = LocalFrame.at(jet, u)
        dg = lj.h2 @ fr.g_inv
        got = (np.trace(dg), np.trace(dg @ dg), np.trace(dg @ dg @ dg),
               np.einsum("ijkl,ij,kl->", lj.h4, fr.g_inv, fr.g_inv))
        expect = curvatures_at(jet, u)
        np.testing.assert_allclose(got, expect, atol=1e-12)


def test_curvatures_at_origin_equals_gamma_summary():
    for q in (1, 2, 3):
        jet = random_jet(q, 1.0, seed=60 + q)
        np.testing.assert_allclose(curvatures_at(jet, np.zeros(q)),
                                   gamma_summary(jet), atol=0.0)


def test_circle_curvature_is_constant():
    """The quartic circle jet keeps its first trace constant up to the cubic
    truncation error of the expansion."""
    radius = 2.0
    jet = SurfaceJet.one_dim(1.0 / (2.0 * radius), 0.0, 1.0 / (8.0 * radius**3))
    assert curvatures_at(jet, np.zeros(1))[0] == pytest.approx(0.25, abs=0.0)
    values = [curvatures_at(jet, np.array([u]))[0]
              for u in np.linspace(-0.2, 0.2, 9)]
    np.testing.assert_allclose(values, 1.0 / (2.0 * radius), atol=1e-4)


def test_beta3_matches_curvature_laplacian():
    """Half the Laplacian of the first trace at the origin equals beta3."""
    step = 1e-3
    for q, seed in ((1, 31), (2, 32)):
        jet = random_jet(q, 0.05, seed=seed, mags=(1.0, 1.0, 1.0))
        lap = 0.0
        base = curvatures_at(jet, np.zeros(q))[0]
        for i in range(q):
            e = np.zeros(q)
            e[i] = step
            lap += (curvatures_at(jet, e)[0] - 2.0 * base
                    + curvatures_at(jet, -e)[0]) / step**2
        g = beta_summary(gamma_summary(jet), 1.0)
        assert 0.5 * lap == pytest.approx(g.beta3, abs=1e-8)


# -- normal shifts and contour surfaces ----------------------------------------

def test_shift_zero_is_identity():
    jet = random_jet(2, 1.0, seed=5)
    s = shift_surface(jet, NormalShift(0.0, q=2))
    assert s.h0 == jet.h0
    np.testing.assert_allclose(s.h2, jet.h2, atol=0.0)
    np.testing.assert_allclose(s.h3, jet.h3, atol=0.0)
    np.testing.assert_allclose(s.h4, jet.h4, atol=0.0)


def test_shift_flat_plane():
    flat = SurfaceJet.one_dim(0.0, 0.0, 0.0)
    s = shift_surface(flat, NormalShift(0.75))
    assert s.h0 == pytest.approx(-0.75, abs=0.0)
    for name in ("h1", "h2", "h3", "h4"):
        np.testing.assert_allclose(getattr(s, name), 0.0, atol=0.0)


def test_shift_hand_value():
    jet = SurfaceJet.one_dim(0.3, 0.0, 0.0)
    s = shift_surface(jet, NormalShift(1.0))
    assert s.h2[0, 0] == pytest.approx(0.228, abs=1e-12)
    assert s.h0 == pytest.approx(-1.0, abs=0.0)


def test_contour_identity_at_zero_scale():
    jet = random_jet(1, 1.0, seed=9)
    s, shift = contour_jet(jet, 0.0, 0.0)
    assert shift.lambda0 == 0.0
    np.testing.assert_allclose(s.h2, jet.h2, atol=1e-15)
    np.testing.assert_allclose(s.h3, jet.h3, atol=1e-15)
    np.testing.assert_allclose(s.h4, jet.h4, atol=1e-15)


def test_contour_flat_is_parallel_plane():
    flat = SurfaceJet.one_dim(0.0, 0.0, 0.0)
    s, shift = contour_jet(flat, 1.3, 0.8)
    assert s.h0 == pytest.approx(-1.3, abs=0.0)
    np.testing.assert_allclose(s.h2, 0.0, atol=0.0)
    assert shift.lambda0 == pytest.approx(1.3, abs=0.0)
    assert kappa(flat, 1.3, np.array([0.6])) == 0.0


def test_contour_hand_value():
    jet = SurfaceJet.one_dim(0.3, 0.0, 0.0)
    s, _ = contour_jet(jet, 1.0, 1.0)
    assert s.h2[0, 0] == pytest.approx(0.0660, abs=1e-12)


def test_kappa_zero_at_origin():
    jet = random_jet(2, 1.0, seed=13)
    assert kappa(jet, 1.7, np.zeros(2)) == 0.0


def test_kappa_hand_value():
    jet = SurfaceJet.one_dim(0.3, 0.1, 0.0)
    assert kappa(jet, 2.0, np.array([0.5])) == pytest.approx(-0.0705, abs=1e-12)


def test_kappa_vanishes_for_constant_curvature_family():
    """One-dimensional jets (c, 0, c^3) keep the first trace constant, so the
    contour offset never bends."""
    for c in (0.2, 0.35, -0.25):
        jet = SurfaceJet.one_dim(c, 0.0, c**3)
        for theta in (0.25, 0.5, -0.4):
            assert abs(kappa(jet, 1.5, np.array([theta]))) <= 1e-12


def test_kappa_truncation_ladder():
    """The polynomial offset agrees with exact curvature differences to
    fourth order in the coefficient scale."""
    lam0 = 0.8
    eps_values = (0.3, 0.22, 0.16, 0.12, 0.09)
    for q, seed, expect in ((1, 51, 3.8), (2, 52, 3.9)):
        errs = []
        for e in eps_values:
            jet = random_jet(q, e, seed=seed)
            th = np.full(q, 0.35)
            c_th = curvatures_at(jet, th)
            c_0 = curvatures_at(jet, np.zeros(q))
            exact = (c_th[0] - c_0[0]) - lam0 * (c_th[1] - c_0[1])
            errs.append(abs(kappa(jet, lam0, th) - exact))
        assert ladder_slope(eps_values, errs) >= 3.5


# -- operator laws -------------------------------------------------------------

def test_contour_additivity():
    """Composing two contour maps matches the single map with summed scales.

    h0 and h4 agree exactly; h2 and h3 agree exactly as written; h1 agrees
    when the cross-condition sigma2*xi0 = tau2*lam0 holds.  Residuals of the
    composed exact operators vanish at fourth order in the ladder.
    """
    sigma2, tau2, lam0, xi0 = 1.0, 0.7, 0.8, 0.56
    for q, seed in ((1, 11), (2, 12)):
        errs = {"h1": [], "h2": [], "h3": []}
        for e in EPS_WINDOW:
            jet = random_jet(q, e, seed=seed)
            inner, _ = contour_jet(jet, lam0, sigma2)
            two_step, _ = contour_jet(inner, xi0, tau2)
            one_step, _ = contour_jet(jet, lam0 + xi0, sigma2 + tau2)
            assert abs(two_step.h0 - one_step.h0) <= 1e-15
            assert float(np.max(np.abs(two_step.h4 - one_step.h4))) <= 1e-15
            for name in errs:
                errs[name].append(float(np.max(np.abs(
                    getattr(two_step, name) - getattr(one_step, name)))) + 1e-300)
        for name in errs:
            assert ladder_slope(EPS_WINDOW, errs[name]) >= 3.5, (q, name)


def test_contour_inverse():
    """Applying the negative-scale map after the positive one recovers the jet
    at fourth order."""
    sigma2, lam0 = 1.0, 0.8
    for q, seed in ((1, 21), (2, 22)):
        errs = []
        for e in EPS_WINDOW:
            jet = random_jet(q, e, seed=seed)
            fwd, _ = contour_jet(jet, lam0, sigma2)
            back, _ = contour_jet(fwd, -lam0, -sigma2)
            err = max(abs(back.h0 - jet.h0),
                      float(np.max(np.abs(back.h1 - jet.h1))),
                      float(np.max(np.abs(back.h2 - jet.h2))),
                      float(np.max(np.abs(back.h3 - jet.h3))),
                      float(np.max(np.abs(back.h4 - jet.h4))))
            errs.append(err + 1e-300)
        assert ladder_slope(EPS_WINDOW, errs) >= 3.5, q


def rotate_jet(jet, rot):
    return SurfaceJet(
        q=jet.q,
        h2=np.einsum("ab,ai,bj->ij", jet.h2, rot, rot),
        h3=_symmetrize(np.einsum("abc,ai,bj,ck->ijk", jet.h3, rot, rot, rot)),
        h4=_symmetrize(np.einsum("abcd,ai,bj,ck,dl->ijkl", jet.h4,
                                 rot, rot, rot, rot)),
    )


def test_rotation_invariance():
    rng = np.random.default_rng(77)
    for q in (2, 3):
        jet = random_jet(q, 1.0, seed=70 + q)
        rot, _ = np.linalg.qr(rng.normal(size=(q, q)))
        rotated = rotate_jet(jet, rot)
        np.testing.assert_allclose(gamma_summary(rotated), gamma_summary(jet),
                                   atol=1e-10)
        u = rng.normal(size=q) * 0.1
        np.testing.assert_allclose(curvatures_at(rotated, rot.T @ u),
                                   curvatures_at(jet, u), atol=1e-10)


# -- frames --------------------------------------------------------------------

def test_frame_orthogonality_and_metric():
    for q in (1, 2, 3):
        jet = random_jet(q, 1.0, seed=80 + q)
        u = np.full(q, 0.3)
        fr = LocalFrame.at(jet, u)
        for i in range(q):
            assert abs(float(fr.f @ fr.b[i])) <= 1e-12
        np.testing.assert_allclose(fr.g, fr.g.T, atol=0.0)
        assert np.all(np.linalg.eigvalsh(fr.g) > 0.0)
        np.testing.assert_allclose(fr.g_inv @ fr.g, np.eye(q), atol=1e-12)


# -- gaussian moments ----------------------------------------------------------

def test_moment_pairs():
    assert gaussian_moment((0, 0)) == 1.0
    assert gaussian_moment((0, 1)) == 0.0


def test_moment_fourth_order():
    assert gaussian_moment((1, 1, 2, 2)) == 1.0
    assert gaussian_moment((1, 1, 1, 1)) == 3.0


def test_moment_odd_orders_vanish():
    assert gaussian_moment((1,)) == 0.0
    assert gaussian_moment((1, 1, 1, 1, 1)) == 0.0
    assert gaussian_moment((0, 1, 2)) == 0.0


def test_moment_sixth_order():
    assert gaussian_moment((1, 1, 1, 1, 1, 1)) == 15.0
    assert gaussian_moment((1, 1, 2, 2, 3, 3)) == 1.0
    assert gaussian_moment((1, 1, 1, 1, 2, 2)) == 3.0


@given(st.lists(st.integers(0, 2), min_size=2, max_size=6))
@settings(max_examples=40, deadline=None)
def test_moment_permutation_invariance(indices):
    value = gaussian_moment(tuple(indices))
    rng = np.random.default_rng(sum(indices) + len(indices))
    shuffled = list(indices)
    rng.shuffle(shuffled)
    assert gaussian_moment(tuple(shuffled)) == value


def test_moment_matches_monte_carlo():
    rng = np.random.default_rng(2025)
    q, n = 3, 400_000
    z = rng.normal(size=(n, q))
    worst = 0.0
    for order in (2, 3, 4, 5, 6):
        for idx in itertools.combinations_with_replacement(range(q), order):
            prod = np.prod(z[:, list(idx)], axis=1)
            se = prod.std(ddof=1) / np.sqrt(n)
            zscore = (prod.mean() - gaussian_moment(idx)) / max(se, 1e-300)
            worst = max(worst, abs(zscore))
    assert worst < 4.0
