"""Exact rejection probabilities of every method over boundary means.

For a mean on the region boundary, P(method rejects at level alpha) is an
integral over boundary slices: each tangent offset contributes the normal
mass above the v where the method's p-value crosses alpha.  The quad scheme
finds that crossing per slice by a safeguarded bracketing search on the
method's pivot and integrates deterministically; the mc scheme replays the
method on simulated observations.  The epsilon ladder shrinks a quartic
boundary family toward a half-space to read off how fast each method's
level error vanishes.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import chi2

from ._quad import SPAN, TAYLOR_GRID, norm_pdf, stencil_d1, stencil_d2, z_from_tails
from .bp_engine import (bp, contour_tail_stats, dbp, thread_count,
                        _graph_layout, _philox, _slice_layout,
                        _tails_from_layout)
from .classic_tests import (confset_pvalue, lr_pvalue, mcb_pvalue,
                            mcb_statistic, mcb_threshold, signed_lr_pvalue)
from .errors import (CenterOffBoundary, NonConvergence, NonMonotoneSlice,
                     UnsupportedDim)
from .multiscale import DEFAULT_GRID, au_k, bp_curve, dau, dbp_curve, fit_poly
from .oracle import pv_expansion
from .regions import (BallRegion, ConeRegion, PolynomialRegion, Region,
                      region_from_descriptor, tangent_jet)
from .surface_jets import beta_summary, gamma_summary

METHODS = ("bp", "au2", "au3", "dbp", "dau", "mcb",
           "lr", "signed_lr", "confset", "pv_oracle")

# exact-statistic reconstructions of the two worked observations
POINT_NEAR_APEX = (1.0 / np.sqrt(2.0), np.sqrt(8.0 / 3.0))
POINT_ON_FLANK = (3.18, (5.0 - 3.18 * np.sqrt(2.0)) / np.sqrt(6.0))


@dataclass(frozen=True)
class RejectionRow:
    """One cell of a rejection-probability table."""

    method: str
    u: float
    alpha: float
    prob: float
    scheme: str
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PValueReport:
    """A single p-value with everything needed to reproduce it."""

    method: str
    pvalue: float
    y: tuple
    region: dict
    backend: str
    replicates: int
    seed: int | None
    model: str | None
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LadderResult:
    """Level errors of one method along a shrinking boundary family."""

    method: str
    eps: tuple
    bias: tuple
    slope: float
    alpha: float
    rows: tuple


# -- pivot evaluators for the slice search ------------------------------------


def _signed_distance(region: Region, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    uh = region.project_batch(u, v)
    dist = np.hypot(u - uh, v + region.h(uh))
    outside = v > -region.h(u)
    return np.where(outside, dist, -dist)


def _make_zeta(method: str, region: Region, nodes: int,
               center_offset: float | None = None, contour_nodes: int = 32):
    """Pivot z(u, v) such that the method rejects iff z exceeds Phibar^-1(alpha).

    The evaluators cache quadrature layouts keyed on the identity of the u
    array: the slice search calls them with a fixed u and moving v, so after
    the first call only cheap tail sums remain.  The two-level evaluators
    additionally carry contour warm starts between calls, and run their
    nested solves at the coarser contour_nodes resolution.
    """
    sqrt_scales = np.sqrt(np.asarray(TAYLOR_GRID))
    cache: dict = {"u": None, "lay": {}}

    def layouts(u, scales):
        if cache["u"] is not u:
            cache["u"] = u
            cache["lay"] = {}
        lay = cache["lay"]
        for s in scales:
            if s not in lay:
                lay[s] = _slice_layout(region, u, float(s), nodes)
        return lay

    if method == "bp":
        def zeta(u, v):
            lay = layouts(u, (1.0,))[1.0]
            return _tails_from_layout(lay[0], lay[1], v, 1.0)[2]
        return zeta

    if method in ("au2", "au3"):
        def zeta(u, v):
            lay = layouts(u, sqrt_scales)
            zs = np.stack([s * _tails_from_layout(*lay[float(s)], v, float(s))[2]
                           for s in sqrt_scales])
            out = zs[2] - 2.0 * stencil_d1(zs)
            if method == "au3":
                out = out + 2.0 * stencil_d2(zs)
            return out
        return zeta

    if method in ("lr", "signed_lr", "confset"):
        def zeta(u, v):
            return _signed_distance(region, u, v)
        return zeta

    if method == "dbp":
        state = {"warm": None}

        def zeta(u, v):
            lay = layouts(u, (1.0,))[1.0]
            uh = region.project_batch(u, v)
            if center_offset is not None:
                uh = uh + center_offset
            cv = -region.h(uh)
            z0 = _tails_from_layout(lay[0], lay[1], v, 1.0)[2]
            p, q, warm = contour_tail_stats(region, uh, cv, z0, 1.0, 1.0,
                                            nodes=contour_nodes,
                                            warm=state["warm"],
                                            inner_nodes=contour_nodes)
            state["warm"] = warm
            return z_from_tails(p, q)
        return zeta

    if method == "dau":
        state = {"warm": [None] * len(TAYLOR_GRID)}

        def zeta(u, v):
            lay = layouts(u, sqrt_scales)
            uh = region.project_batch(u, v)
            if center_offset is not None:
                uh = uh + center_offset
            cv = -region.h(uh)
            zs = []
            for i, s in enumerate(sqrt_scales):
                s = float(s)
                z0 = _tails_from_layout(*lay[s], v, s)[2]
                p, q, warm = contour_tail_stats(region, uh, cv, z0, 1.0, s,
                                                nodes=contour_nodes,
                                                warm=state["warm"][i],
                                                inner_nodes=contour_nodes)
                state["warm"][i] = warm
                zs.append(z_from_tails(p, q))
            zs = np.stack(zs)
            return zs[2] - 2.0 * stencil_d1(zs)
        return zeta

    if method == "pv_oracle":
        def zeta(u, v):
            uh = region.project_batch(u, v)
            lam = _signed_distance(region, u, v)
            out = np.empty_like(lam)
            for i in range(lam.size):
                g = beta_summary(gamma_summary(tangent_jet(region, uh[i])), lam[i])
                out[i] = g.beta0 - g.beta1 - g.beta2 + g.beta3
            return out
        return zeta

    raise ValueError(f"no pivot evaluator for method {method!r}")


def _slice_crossings(zeta, region: Region, u: np.ndarray, level: float,
                     max_iter: int = 110) -> tuple[np.ndarray, dict]:
    """v per slice where the pivot crosses the level, by bracketed root search.

    Brackets span from well inside the region to above the highest boundary
    point reachable within the integration window; slices whose bracket does
    not straddle the level bail out to dense indicator integration.  Inside
    the loop, false-position steps with the stagnant endpoint's value halved
    when the same side repeats (plus an occasional forced bisection) keep
    convergence superlinear on every slice at once.
    """
    aa = -region.h(u) - 9.0
    neighborhood = u[:, None] + np.linspace(-SPAN, SPAN, 41)[None, :]
    bb = np.max(-region.h(neighborhood), axis=1) + 14.0
    za = zeta(u, aa) - level
    zb = zeta(u, bb) - level
    bad = (za >= 0.0) | (zb <= 0.0)
    if np.any(bad):
        raise NonMonotoneSlice(
            f"{int(bad.sum())} slices do not bracket the rejection level")

    detail = {}
    side = np.zeros(u.shape[0], dtype=np.int8)
    for it in range(max_iter):
        width = bb - aa
        if float(width.max()) < 1e-9:
            break
        gap = zb - za
        frac = np.where(gap > 0.0, -za / np.where(gap > 0.0, gap, 1.0), 0.5)
        frac = np.clip(np.nan_to_num(frac, nan=0.5), 0.01, 0.99)
        if it % 6 == 5:
            frac = np.full_like(frac, 0.5)
        mid = aa + frac * width
        zm = zeta(u, mid) - level
        neg = zm < 0.0
        zb = np.where(neg & (side == -1), 0.5 * zb, zb)
        za = np.where(~neg & (side == 1), 0.5 * za, za)
        aa = np.where(neg, mid, aa)
        za = np.where(neg, zm, za)
        bb = np.where(neg, bb, mid)
        zb = np.where(neg, zb, zm)
        side = np.where(neg, -1, 1).astype(np.int8)
    else:
        if float((bb - aa).max()) > 1e-7:
            raise NonConvergence("slice crossing search did not tighten to tolerance")
    detail["iterations"] = it + 1
    return 0.5 * (aa + bb), detail


def _dense_slice_mass(zeta, region: Region, u: np.ndarray, level: float,
                      mu_v: float, wphi: np.ndarray, samples: int = 1500) -> float:
    """Indicator integration for non-monotone slices (fallback path)."""
    aa = -region.h(u) - 9.0
    neighborhood = u[:, None] + np.linspace(-SPAN, SPAN, 41)[None, :]
    bb = np.max(-region.h(neighborhood), axis=1) + 14.0
    frac = np.linspace(0.0, 1.0, samples)
    rows = np.stack([zeta(u, aa + f * (bb - aa)) for f in frac], axis=1)
    vgrid = aa[:, None] + frac[None, :] * (bb - aa)[:, None]
    ind = (rows >= level).astype(float)
    ind[:, 0] *= 0.5
    ind[:, -1] *= 0.5
    dens = norm_pdf(vgrid - mu_v)
    dv = (bb - aa) / (samples - 1.0)
    inner = np.einsum("ms,ms->m", ind, dens) * dv
    tail = ndtr(-(bb - mu_v))
    return float(wphi @ (inner + tail))


# -- public operations ---------------------------------------------------------


def rejection_probability(method: str, region: Region, mu, alpha: float = 0.05,
                          scheme: str = "quad", reps: int = 100_000,
                          seed: int = 0, nodes: int = 96,
                          center_offset: float | None = None) -> RejectionRow:
    """P(the method's p-value falls below alpha) for a boundary mean mu.

    center_offset displaces the two-level methods' resampling center along
    the boundary (a robustness probe); it is ignored by every other method.
    The quad scheme is fully deterministic; mc replays the method on
    counter-keyed draws and reports a stderr in the detail dict.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if isinstance(region, BallRegion) or not region.is_graph:
        raise UnsupportedDim("rejection integration needs a graph boundary")
    mu = np.asarray(mu, dtype=float).reshape(2)
    gap = abs(mu[1] + float(region.h(np.array([mu[0]]))[0]))
    if gap > 1e-9 * (1.0 + float(np.max(np.abs(mu)))):
        raise CenterOffBoundary(f"mean {mu.tolist()} is not on the region boundary")

    if scheme == "quad":
        return _rejection_quad(method, region, mu, alpha, nodes, center_offset)
    if scheme == "mc":
        return _rejection_mc(method, region, mu, alpha, reps, seed, nodes,
                             center_offset)
    raise ValueError(f"unknown scheme {scheme!r}")


def _rejection_quad(method: str, region: Region, mu: np.ndarray, alpha: float,
                    nodes: int, center_offset: float | None) -> RejectionRow:
    t, w = _graph_layout(region, mu[:1], 1.0, nodes)
    t, w = t[0], w[0]
    u = mu[0] + t
    wphi = w * norm_pdf(t)
    detail: dict = {"nodes": int(u.size), "fallback": False}

    if method == "mcb":
        talpha = mcb_threshold(alpha)
        vstar = (2.0 * talpha - np.sqrt(2.0) * np.abs(u)) / np.sqrt(6.0)
        prob = float(wphi @ ndtr(-(vstar - mu[1])))
        detail["threshold"] = talpha
        return RejectionRow(method, float(mu[0]), alpha, prob, "quad", detail)

    if method == "lr":
        level = float(np.sqrt(chi2.isf(alpha, df=1)))
    elif method == "confset":
        level = float(np.sqrt(chi2.isf(alpha, df=2)))
    else:
        level = float(-ndtri(alpha))
    detail["level"] = level

    zeta = _make_zeta(method, region, nodes, center_offset)
    try:
        vstar, info = _slice_crossings(zeta, region, u, level)
        detail.update(info)
        prob = float(wphi @ ndtr(-(vstar - mu[1])))
    except NonMonotoneSlice as exc:
        warnings.warn(f"{method}: {exc}; integrating the indicator densely",
                      RuntimeWarning, stacklevel=3)
        detail["fallback"] = True
        prob = _dense_slice_mass(zeta, region, u, level, mu[1], wphi)
    return RejectionRow(method, float(mu[0]), alpha, prob, "quad", detail)


def _rejection_mc(method: str, region: Region, mu: np.ndarray, alpha: float,
                  reps: int, seed: int, nodes: int,
                  center_offset: float | None) -> RejectionRow:
    heavy = method in ("dbp", "dau", "pv_oracle")
    chunk = 4096 if heavy else (1 << 19)
    stream = 100 + METHODS.index(method)
    n_chunks = (reps + chunk - 1) // chunk
    level = None
    talpha = mcb_threshold(alpha) if method == "mcb" else None
    if method == "lr":
        level = float(np.sqrt(chi2.isf(alpha, df=1)))
    elif method == "confset":
        level = float(np.sqrt(chi2.isf(alpha, df=2)))
    elif method != "mcb":
        level = float(-ndtri(alpha))
    zeta = None
    if method not in ("mcb",):
        zeta = _make_zeta(method, region, nodes, center_offset)

    def one(ci: int) -> int:
        m = min(chunk, reps - ci * chunk)
        rng = _philox(seed, stream, ci)
        draws = mu[None, :] + rng.standard_normal((m, 2))
        if method == "mcb":
            ts = (np.sqrt(6.0) * draws[:, 1] + np.sqrt(2.0) * np.abs(draws[:, 0])) / 2.0
            return int(np.count_nonzero(ts > talpha))
        vals = zeta(draws[:, 0], draws[:, 1])
        return int(np.count_nonzero(vals > level))

    workers = thread_count()
    if workers == 1 or n_chunks == 1 or heavy:
        total = sum(one(ci) for ci in range(n_chunks))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            total = sum(pool.map(one, range(n_chunks)))
    prob = total / reps
    se = float(np.sqrt(max(prob * (1.0 - prob), 0.0) / reps))
    detail = {"stderr": se, "reps": reps, "seed": seed}
    return RejectionRow(method, float(mu[0]), alpha, prob, "mc", detail)


def table2(u_values=(0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0),
           methods=("bp", "au2", "au3", "dbp", "dau", "mcb"),
           alpha: float = 0.05, region: Region | None = None,
           scheme: str = "quad", reps: int = 100_000, seed: int = 0,
           nodes: int = 96, parallel: bool = True) -> list[RejectionRow]:
    """Rejection probabilities over a grid of boundary means.

    Defaults reproduce the cone geometry sweep: for each method and each
    tangent offset u the mean sits at (u, -h(u)).  Rows are independent and
    run in parallel; assembly order is (method, u) regardless of scheduling.
    """
    region = region if region is not None else ConeRegion()
    jobs = [(m, float(uu)) for m in methods for uu in u_values]

    def one(job):
        m, uu = job
        mu = np.array([uu, -float(region.h(np.array([uu]))[0])])
        return rejection_probability(m, region, mu, alpha=alpha, scheme=scheme,
                                     reps=reps, seed=seed, nodes=nodes)

    workers = thread_count()
    if parallel and workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, jobs))
    else:
        rows = [one(j) for j in jobs]
    return rows


def pvalue_report(region: Region, y, method: str, backend: str = "quad",
                  scales=None, reps: int = 100_000, seed: int = 0,
                  model: str | None = None, nodes: int = 96) -> PValueReport:
    """One method's p-value at one observation, with full provenance.

    model selects how scale curves are turned into extrapolated values:
    "taylor" (local stencil; default on the quad backend) or "fit"
    (weighted polynomial; default on mc).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    y = np.asarray(y, dtype=float).reshape(2)
    desc = region.descriptor
    ytup = (float(y[0]), float(y[1]))

    if method in ("lr", "signed_lr", "confset", "mcb", "pv_oracle"):
        if method == "lr":
            p = lr_pvalue(region, y)
        elif method == "signed_lr":
            p = signed_lr_pvalue(region, y)
        elif method == "confset":
            p = confset_pvalue(region, y)
        elif method == "mcb":
            p = mcb_pvalue(y)
        else:
            proj = region.project(y)
            g = beta_summary(gamma_summary(tangent_jet(region, proj.u_hat)),
                             proj.lambda_hat)
            p = pv_expansion(g)
        return PValueReport(method=method, pvalue=float(p), y=ytup, region=desc,
                            backend="exact", replicates=0, seed=None, model=None)

    if model is None:
        model = "taylor" if backend == "quad" else "fit"

    if method == "bp":
        est = bp(region, y, 1.0, backend=backend, reps=reps, seed=seed, nodes=nodes)
        detail = {"stderr": est.stderr} if backend == "mc" else {}
        return PValueReport(method=method, pvalue=est.value, y=ytup, region=desc,
                            backend=backend, replicates=est.replicates,
                            seed=est.seed, model=None, detail=detail)

    if method == "dbp":
        est = dbp(region, y, 1.0, 1.0, backend=backend, reps_outer=reps,
                  seed=seed, nodes=nodes)
        detail = {"stderr": est.stderr} if backend == "mc" else {}
        return PValueReport(method=method, pvalue=est.value, y=ytup, region=desc,
                            backend=backend, replicates=est.replicates,
                            seed=est.seed, model=None, detail=detail)

    if scales is None:
        scales = TAYLOR_GRID if model == "taylor" else DEFAULT_GRID

    if method in ("au2", "au3"):
        k = 2 if method == "au2" else 3
        curve = bp_curve(region, y, scales=scales, backend=backend, reps=reps,
                         seed=seed, nodes=nodes)
        p = au_k(curve, k, mode=model)
        detail = {}
        if model == "fit":
            z, se = fit_poly(curve, k - 1).at(-1.0)
            detail = {"z": z, "se_z": se}
        return PValueReport(method=method, pvalue=float(p), y=ytup, region=desc,
                            backend=backend,
                            replicates=reps * len(curve.scales) if backend == "mc" else 0,
                            seed=seed if backend == "mc" else None,
                            model=model, detail=detail)

    # dau
    curve = dbp_curve(region, y, scales=scales, tau2=1.0, backend=backend,
                      reps_outer=reps, seed=seed, nodes=nodes)
    p = dau(curve, mode=model)
    detail = {}
    if model == "fit":
        z, se = fit_poly(curve, 1).at(-1.0)
        detail = {"z": z, "se_z": se}
    return PValueReport(method="dau", pvalue=float(p), y=ytup, region=desc,
                        backend=backend,
                        replicates=reps * len(curve.scales) if backend == "mc" else 0,
                        seed=seed if backend == "mc" else None,
                        model=model, detail=detail)


def table1(methods=("lr", "signed_lr", "confset", "mcb",
                    "bp", "au2", "au3", "dbp", "dau"),
           backend: str = "quad", reps: int = 100_000, seed: int = 0,
           nodes: int = 96) -> list[PValueReport]:
    """P-values of every method at the two worked observations.

    Runs each method on the smooth boundary (apex rounding 0.1) and on the
    cone, at the near-apex and on-flank observations.  The comparison
    statistic (mcb) only applies to the cone geometry, so it is skipped for
    the smooth boundary.
    """
    reports = []
    for h0 in (0.1, 0.0):
        region = region_from_descriptor({"kind": "efron", "h0": h0})
        for y in (POINT_NEAR_APEX, POINT_ON_FLANK):
            for method in methods:
                if method == "mcb" and h0 != 0.0:
                    continue
                reports.append(pvalue_report(region, y, method, backend=backend,
                                             reps=reps, seed=seed, nodes=nodes))
    return reports


def epsilon_ladder(base_coeffs, eps_values, method: str, alpha: float = 0.05,
                   center_offset: float | None = None, nodes: int = 96,
                   parallel: bool = True) -> LadderResult:
    """Level error of one method along a shrinking quartic boundary family.

    The family is h(u) = c2*eps*u^2 + c3*eps^2*u^3 + c4*eps^3*u^4 with the
    mean at the origin, so curvature orders shrink together like powers of
    eps.  The returned slope is the log-log regression of |level - alpha|
    on eps: flatter slopes mean slower vanishing of the level error.
    """
    c2, c3, c4 = (float(c) for c in base_coeffs)
    eps_values = tuple(float(e) for e in eps_values)

    def one(eps: float) -> RejectionRow:
        region = PolynomialRegion(c2 * eps, c3 * eps**2, c4 * eps**3)
        return rejection_probability(method, region, np.array([0.0, 0.0]),
                                     alpha=alpha, scheme="quad", nodes=nodes,
                                     center_offset=center_offset)

    workers = thread_count()
    if parallel and workers > 1 and len(eps_values) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, eps_values))
    else:
        rows = [one(e) for e in eps_values]
    bias = tuple(r.prob - alpha for r in rows)
    if len(eps_values) < 2:
        slope = float("nan")
    else:
        logs = np.log(np.abs(np.array(bias)))
        slope = float(np.polyfit(np.log(np.array(eps_values)), logs, 1)[0])
    return LadderResult(method=method, eps=eps_values, bias=bias, slope=slope,
                        alpha=alpha, rows=tuple(rows))
