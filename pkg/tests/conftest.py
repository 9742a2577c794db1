"""Shared fixtures and helpers for the regionboot test suite."""
import numpy as np
import pytest

from regionboot.regions import (BallRegion, ConeRegion, HyperbolaRegion,
                                PolynomialRegion)
from regionboot.surface_jets import SurfaceJet, _symmetrize

# The two observations of the worked three-sample example.  The display
# roundings (0.71, 1.63) and (3.18, 0.20) appear alongside; the exact points
# make the comparison statistic exactly 2.5 for both, which is what the
# published table values were computed from.
EXACT_Y1 = (1.0 / np.sqrt(2.0), np.sqrt(8.0 / 3.0))
EXACT_Y2 = (3.18, (5.0 - 3.18 * np.sqrt(2.0)) / np.sqrt(6.0))
ROUND_Y1 = (0.71, 1.63)
ROUND_Y2 = (3.18, 0.20)


@pytest.fixture(scope="session")
def ef01():
    return HyperbolaRegion(0.1)


@pytest.fixture(scope="session")
def cone():
    return ConeRegion()


@pytest.fixture(scope="session")
def ball2():
    return BallRegion(2.0)


@pytest.fixture(scope="session")
def flat():
    return PolynomialRegion(0.0, 0.0, 0.0)


def ladder_slope(eps, errs):
    """Log-log regression slope of |error| against epsilon."""
    eps = np.asarray(eps, dtype=float)
    errs = np.maximum(np.asarray(errs, dtype=float), 1e-300)
    return float(np.polyfit(np.log(eps), np.log(errs), 1)[0])


def random_jet(q, eps, seed, mags=(0.3, 0.25, 0.2)):
    """Class-S jet with coefficient magnitudes scaled like (eps, eps^2, eps^3)."""
    rng = np.random.default_rng(seed)
    return SurfaceJet(
        q=q,
        h2=_symmetrize(rng.normal(size=(q,) * 2)) * mags[0] * eps,
        h3=_symmetrize(rng.normal(size=(q,) * 3)) * mags[1] * eps**2,
        h4=_symmetrize(rng.normal(size=(q,) * 4)) * mags[2] * eps**3,
    )
