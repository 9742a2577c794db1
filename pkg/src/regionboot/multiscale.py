"""Scaling curves in the resampling variance and their extrapolation to -1.

The adjusted p-values are tail areas of a pivot extrapolated to negative
resampling variance: bp_curve / dbp_curve record the pivot over a grid of
variances, fit_poly fits a weighted polynomial in the variance, and au_k /
dau evaluate the fitted (or locally differentiated) pivot at variance -1.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, solve
from scipy.special import ndtr, ndtri

from ._quad import (TAYLOR_GRID, is_taylor_grid, norm_pdf, stencil_d1,
                    stencil_d2, z_from_tails)
from .bp_engine import bp, contour_tail_stats, dbp, graph_tail_stats, thread_count
from .errors import (InsufficientScales, InvalidScale, RankDeficient,
                     UnsupportedDim)
from .regions import BallRegion, Region

DEFAULT_GRID = tuple(np.round(np.linspace(0.5, 1.5, 13), 12))


@dataclass(frozen=True)
class ScalingCurve:
    """Pivot values over a grid of resampling variances.

    kind is "bp" (first-level pivot sigma * Phibar^-1 of the mass) or "dbp"
    (second-level pivot Phibar^-1 of the double-bootstrap probability).
    weights are inverse variances for Monte Carlo curves, ones otherwise.
    """

    scales: np.ndarray
    z: np.ndarray
    weights: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("scales", "z", "weights"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class FitResult:
    """Weighted polynomial fit of a pivot against the resampling variance."""

    coeffs: np.ndarray
    cov: np.ndarray
    dof: int
    rss: float

    def at(self, x: float) -> tuple[float, float]:
        """Fitted value and its stderr at variance x."""
        a = np.array([x**j for j in range(len(self.coeffs))])
        val = float(a @ self.coeffs)
        se = float(np.sqrt(max(a @ self.cov @ a, 0.0)))
        return val, se


def _clamped_tail_z(p: float, reps: int) -> tuple[float, float]:
    """Pivot and its variance from a Monte Carlo proportion.

    The implied count is clamped to [0.5, reps - 0.5] before inversion so
    empty or full cells stay finite; the variance follows from the delta
    rule through the normal quantile.
    """
    pc = min(max(p, 0.5 / reps), 1.0 - 0.5 / reps)
    zq = -ndtri(pc)
    var = pc * (1.0 - pc) / (reps * norm_pdf(zq) ** 2)
    return float(zq), float(var)


def bp_curve(region: Region, y, scales=None, backend: str = "quad",
             reps: int = 100_000, seed: int = 0, nodes: int = 96) -> ScalingCurve:
    """First-level pivot sigma * Phibar^-1(mass) across resampling variances."""
    y = np.asarray(y, dtype=float).reshape(2)
    scales = np.asarray(DEFAULT_GRID if scales is None else scales, dtype=float)
    if np.any(scales <= 0):
        raise InvalidScale("all scale variances must be positive")

    def one(i: int) -> tuple[float, float]:
        s2 = float(scales[i])
        sigma = np.sqrt(s2)
        if backend == "quad":
            if isinstance(region, BallRegion):
                est = bp(region, y, s2, backend="quad", nodes=nodes)
                zq = float(-ndtri(max(est.value, 1e-280)))
            else:
                _, _, zarr, _ = graph_tail_stats(region, y[:1], y[1:], sigma, nodes)
                zq = float(zarr[0])
            return sigma * zq, 1.0
        est = bp(region, y, s2, backend="mc", reps=reps, seed=seed, stream=i)
        zq, var = _clamped_tail_z(est.value, reps)
        return sigma * zq, 1.0 / (s2 * var)

    workers = thread_count()
    if backend == "mc" and workers > 1 and len(scales) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(one, range(len(scales))))
    else:
        pairs = [one(i) for i in range(len(scales))]
    z = np.array([p[0] for p in pairs])
    w = np.array([p[1] for p in pairs])
    meta = {"backend": backend, "reps": reps if backend == "mc" else 0,
            "seed": seed if backend == "mc" else None,
            "region": region.descriptor, "y": y.tolist()}
    return ScalingCurve(scales=scales, z=z, weights=w, kind="bp", meta=meta)


def dbp_curve(region: Region, y, scales=None, tau2: float = 1.0,
              backend: str = "quad", reps_outer: int = 10_000,
              reps_inner: int = 1_000, seed: int = 0, center=None,
              nodes: int = 96) -> ScalingCurve:
    """Second-level pivot Phibar^-1(DBP) across inner resampling variances.

    The outer variance stays fixed at tau2; on the quad backend the contour
    solve for each scale warm-starts from the previous one.
    """
    y = np.asarray(y, dtype=float).reshape(2)
    scales = np.asarray(DEFAULT_GRID if scales is None else scales, dtype=float)
    if np.any(scales <= 0):
        raise InvalidScale("all scale variances must be positive")
    if not region.is_graph:
        raise UnsupportedDim("the two-level contour solve needs a graph boundary")
    if center is None:
        center = region.project(y).mu_hat
    center = np.asarray(center, dtype=float).reshape(2)
    tau = float(np.sqrt(tau2))

    z = np.empty(len(scales))
    w = np.ones(len(scales))
    if backend == "quad":
        warm = None
        for i, s2 in enumerate(scales):
            sigma = float(np.sqrt(s2))
            _, _, z0, _ = graph_tail_stats(region, y[:1], y[1:], sigma, nodes)
            p, q, warm = contour_tail_stats(region, center[:1], center[1:], z0,
                                            tau, sigma, nodes, warm=warm)
            z[i] = float(z_from_tails(p, q)[0])
    else:
        for i, s2 in enumerate(scales):
            est = dbp(region, y, tau2=tau2, sigma2=float(s2), backend="mc",
                      reps_outer=reps_outer, reps_inner=reps_inner, seed=seed,
                      center=center, stream=16 + i, nodes=nodes)
            zq, var = _clamped_tail_z(est.value, reps_outer)
            z[i], w[i] = zq, 1.0 / var
    meta = {"backend": backend, "reps": reps_outer if backend == "mc" else 0,
            "seed": seed if backend == "mc" else None, "tau2": float(tau2),
            "region": region.descriptor, "y": y.tolist(),
            "center": center.tolist()}
    return ScalingCurve(scales=scales, z=z, weights=w, kind="dbp", meta=meta)


def fit_poly(curve: ScalingCurve, degree: int) -> FitResult:
    """Weighted least-squares polynomial in the variance, solved exactly.

    Uses the pivoted normal equations; duplicate scale points (which add no
    information to a polynomial design) raise RankDeficient, too few points
    raise InsufficientScales.
    """
    n = len(curve.scales)
    k = degree + 1
    if n < k:
        raise InsufficientScales(f"degree {degree} needs at least {k} scales, got {n}")
    if len(np.unique(curve.scales)) < n:
        raise RankDeficient("duplicate scale points in the design")
    v = np.vander(curve.scales, k, increasing=True)
    wts = curve.weights
    a = v.T @ (wts[:, None] * v)
    b = v.T @ (wts * curve.z)
    try:
        coeffs = solve(a, b, assume_a="sym")
        a_inv = solve(a, np.eye(k), assume_a="sym")
    except LinAlgError as exc:
        raise RankDeficient(f"normal equations are singular: {exc}") from exc
    if not np.all(np.isfinite(coeffs)):
        raise RankDeficient("normal equations produced non-finite coefficients")
    resid = curve.z - v @ coeffs
    rss = float(wts @ resid**2)
    dof = n - k
    if np.allclose(wts, 1.0):
        scale = rss / dof if dof > 0 else 0.0
        cov = a_inv * scale
    else:
        cov = a_inv
    return FitResult(coeffs=coeffs, cov=cov, dof=dof, rss=rss)


def _stencil_values(curve: ScalingCurve) -> np.ndarray:
    if not is_taylor_grid(curve.scales):
        raise InsufficientScales(
            f"the local model needs the five-point stencil {TAYLOR_GRID}")
    return curve.z


def au_k(curve: ScalingCurve, k: int, mode: str = "fit") -> float:
    """Adjusted p-value of order k from a first-level scaling curve.

    mode "fit" extrapolates a degree-(k-1) polynomial in the variance to -1;
    mode "taylor" differentiates the curve locally at variance 1 on the
    five-point stencil, which suits deterministic curves.
    """
    if curve.kind != "bp":
        raise ValueError("au_k needs a first-level (kind='bp') curve")
    if k < 2:
        raise ValueError("the extrapolation order k must be at least 2")
    if mode == "fit":
        fit = fit_poly(curve, degree=k - 1)
        val, _ = fit.at(-1.0)
        return float(ndtr(-val))
    if mode == "taylor":
        if k > 3:
            raise InsufficientScales("the five-point stencil supports k <= 3")
        z = _stencil_values(curve)
        val = z[2] - 2.0 * stencil_d1(z)
        if k == 3:
            val = val + 2.0 * stencil_d2(z)
        return float(ndtr(-val))
    raise ValueError(f"unknown mode {mode!r}")


def dau(curve: ScalingCurve, mode: str = "fit") -> float:
    """Adjusted p-value from a second-level scaling curve at variance -1."""
    if curve.kind != "dbp":
        raise ValueError("dau needs a second-level (kind='dbp') curve")
    if mode == "fit":
        fit = fit_poly(curve, degree=1)
        val, _ = fit.at(-1.0)
        return float(ndtr(-val))
    if mode == "taylor":
        z = _stencil_values(curve)
        val = z[2] - 2.0 * stencil_d1(z)
        return float(ndtr(-val))
    raise ValueError(f"unknown mode {mode!r}")
