"""Closed-form asymptotic values of the resampling p-values and their levels.

Everything here is an explicit function of a boundary point's geometric
summary: tail areas for the one-level, extrapolated, and two-level
procedures, and the rejection probability of each under a mean on the
boundary.  These serve as the analytic reference the sampling engines are
checked against.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import InvalidScale
from .surface_jets import GeometricSummary


def bp_expansion(g: GeometricSummary, sigma2: float, normalized: bool = False) -> float:
    """Tail-area expansion of the one-level resampling probability.

    With normalized=False this is the raw probability at resampling variance
    sigma2 > 0.  With normalized=True the pivot is rescaled by sigma first,
    which makes the expression a polynomial in sigma2 and therefore defined
    for any real sigma2 (the formal continuation used at -1).
    """
    if normalized:
        s2 = float(sigma2)
        return float(ndtr(-(g.beta0 + g.beta1 * s2 + g.beta2 * s2 * s2)))
    if sigma2 <= 0:
        raise InvalidScale("raw tail mass needs sigma2 > 0; use normalized=True")
    s = float(np.sqrt(sigma2))
    return float(ndtr(-(g.beta0 / s + g.beta1 * s + g.beta2 * s**3)))


def au_expansion(g: GeometricSummary) -> float:
    """Normalized tail mass continued to resampling variance -1."""
    return float(ndtr(-(g.beta0 - g.beta1 + g.beta2)))


def pv_expansion(g: GeometricSummary) -> float:
    """The target p-value whose rejection probability is level-exact to high order."""
    return float(ndtr(-(g.beta0 - g.beta1 - g.beta2 + g.beta3)))


def dbp_expansion(g: GeometricSummary, tau2: float = 1.0, sigma2: float = 1.0,
                  kappa_theta: float = 0.0) -> float:
    """Expansion of the two-level probability with outer variance tau2.

    kappa_theta shifts the value when the outer resampling is centered at a
    boundary point displaced from the projection: it is the curvature-drift
    polynomial evaluated at the tangent offset of the actual center.
    """
    if tau2 <= 0:
        raise InvalidScale("tau2 must be positive")
    t = float(np.sqrt(tau2))
    s2 = float(sigma2)
    arg = (g.beta0 / t - g.beta1 * t - g.beta2 * t**3 - g.beta3 * t * s2
           - (t * t + s2) / t * kappa_theta)
    return float(ndtr(-arg))


def reject_nbp(gammas, alpha: float, sigma2: float) -> float:
    """Level of the test that rejects when the normalized tail mass is below alpha.

    gammas are the four curvature traces at the true boundary mean.  At
    sigma2 = -1 the level is alpha up to the third-order curvature term.
    """
    g1, g2, g3, g4 = (float(g) for g in gammas)
    za = float(ndtri(alpha))
    s2 = float(sigma2)
    one = 1.0 + s2
    arg = (za
           + one * (g1 + za * g2 + (4.0 / 3.0) * za * za * g3 - g1 * g2)
           + one * one * (3.0 * g4 - (4.0 / 3.0) * g3)
           - s2 * (4.0 / 3.0) * g3)
    return float(ndtr(arg))


def reject_dbp(beta3: float, alpha: float, sigma2: float) -> float:
    """Level of the two-level test with inner variance sigma2 and outer variance 1.

    Only the curvature-of-curvature coefficient enters; the level is exactly
    alpha at sigma2 = -1.
    """
    za = float(ndtri(alpha))
    arg = za - (1.0 + float(sigma2)) * float(beta3)
    return float(ndtr(arg))
