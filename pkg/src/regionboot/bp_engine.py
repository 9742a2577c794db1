"""Bootstrap and double-bootstrap probability of a region.

Two backends compute the same quantities: "quad" integrates the normal mass
deterministically (per-point Gauss-Legendre panels split at boundary
features), "mc" counts membership over counter-keyed Monte Carlo draws.
The quad path also exposes the tail statistics used by the contour and
rejection machinery: the normal pivot z = Phibar^-1(mass) assembled from
whichever tail sum is smaller, together with its v-slope.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ._quad import SPAN, TINY, ZCAP, norm_pdf, panel_nodes, z_from_tails
from .errors import CenterOffBoundary, InvalidScale, NonConvergence, UnsupportedDim
from .regions import BallRegion, Region

_CHUNK = 1 << 19


@dataclass(frozen=True)
class BootstrapEstimate:
    """A resampling probability with its sampling pedigree.

    stderr is zero for the deterministic backend.  tau2 is only set by the
    double bootstrap (outer resampling variance).
    """

    value: float
    stderr: float
    replicates: int
    backend: str
    seed: int | None
    sigma2: float
    tau2: float | None = None


def thread_count() -> int:
    """Worker count from REGIONBOOT_THREADS; 0 or unset means auto."""
    raw = os.environ.get("REGIONBOOT_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = min(8, os.cpu_count() or 1)
    return max(1, n)


def _philox(seed: int, stream: int, chunk: int) -> np.random.Generator:
    # counter-based keying: same results for any thread count or chunk order
    key = np.array([np.uint64(seed & (2**64 - 1)),
                    (np.uint64(stream) << np.uint64(32)) | np.uint64(chunk)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# -- deterministic graph-region machinery ------------------------------------


def _graph_layout(region: Region, yu: np.ndarray, sigma: float,
                  nodes: int) -> tuple[np.ndarray, np.ndarray]:
    yu = np.atleast_1d(yu)
    m = yu.shape[0]
    cuts = np.asarray(region.cuts(), dtype=float)
    tk = np.clip((cuts[None, :] - yu[:, None]) / sigma, -SPAN, SPAN)
    edges = np.sort(np.concatenate(
        [np.full((m, 1), -SPAN), tk, np.zeros((m, 1)), np.full((m, 1), SPAN)],
        axis=1), axis=1)
    return panel_nodes(edges, nodes)


def _slice_layout(region: Region, yu: np.ndarray, sigma: float,
                  nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Precomputed (-h at abscissas, weight*phi) for repeated height queries.

    The boundary heights and quadrature weights depend only on yu and sigma,
    so callers that vary yv alone (Newton solves, crossing searches) build
    this once and reuse it through _tails_from_layout.
    """
    t, w = _graph_layout(region, yu, sigma, nodes)
    hneg = -region.h(yu[:, None] + sigma * t)
    return hneg, w * norm_pdf(t)


def _tails_from_layout(hneg: np.ndarray, wphi: np.ndarray, yv: np.ndarray,
                       sigma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    arg = (hneg - np.asarray(yv)[:, None]) / sigma
    p = np.einsum("mk,mk->m", wphi, ndtr(arg))
    q = np.einsum("mk,mk->m", wphi, ndtr(-arg))
    z = z_from_tails(p, q)
    dens = np.einsum("mk,mk->m", wphi, norm_pdf(arg)) / sigma
    slope = dens / np.maximum(norm_pdf(np.clip(z, -ZCAP, ZCAP)), TINY)
    return p, q, z, np.maximum(slope, 0.05 / sigma)


def graph_tail_stats(region: Region, yu: np.ndarray, yv: np.ndarray, sigma: float,
                     nodes: int = 96) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Both tail masses, the pivot z, and dz/dv for graph regions, vectorized.

    The region mass is p = E Phi((-h(yu + sigma U) - yv)/sigma) over U ~ N(0,1);
    q is the complementary sum.  z comes from the smaller tail so it stays
    accurate far outside; the slope is floored to keep Newton steps stable
    where the pivot saturates.  Large batches are processed in blocks to
    bound the per-point panel memory.
    """
    yu = np.atleast_1d(np.asarray(yu, dtype=float))
    yv = np.atleast_1d(np.asarray(yv, dtype=float))
    per_point = (len(region.cuts()) + 3) * nodes
    block = max(256, 2_000_000 // per_point)
    if yu.shape[0] > block:
        parts = [graph_tail_stats(region, yu[i:i + block], yv[i:i + block],
                                  sigma, nodes)
                 for i in range(0, yu.shape[0], block)]
        return tuple(np.concatenate([p[k] for p in parts]) for k in range(4))
    hneg, wphi = _slice_layout(region, yu, sigma, nodes)
    return _tails_from_layout(hneg, wphi, yv, sigma)


def _ball_mass(region: BallRegion, yu: np.ndarray, yv: np.ndarray, sigma: float,
               nodes: int = 96) -> np.ndarray:
    """Normal mass of the disk via the angle substitution u = R sin(psi)."""
    yu = np.atleast_1d(np.asarray(yu, dtype=float))
    yv = np.atleast_1d(np.asarray(yv, dtype=float))
    r = region.radius
    edges = np.linspace(-np.pi / 2.0, np.pi / 2.0, 5)
    psi, w = panel_nodes(edges, nodes)
    u = r * np.sin(psi)
    half = r * np.cos(psi)
    vhi = -r + half
    vlo = -r - half
    dens = norm_pdf((u[None, :] - yu[:, None]) / sigma) * (half[None, :] / sigma)
    mass = ndtr((vhi[None, :] - yv[:, None]) / sigma) - ndtr((vlo[None, :] - yv[:, None]) / sigma)
    return np.einsum("k,mk->m", w, dens * mass)


def region_mass(region: Region, yu, yv, sigma: float, nodes: int = 96) -> np.ndarray:
    """Deterministic bootstrap mass for any built-in region shape."""
    if isinstance(region, BallRegion):
        return _ball_mass(region, yu, yv, sigma, nodes)
    p, _, _, _ = graph_tail_stats(region, yu, yv, sigma, nodes)
    return p


# -- Monte Carlo backend ------------------------------------------------------


def _mc_count(region: Region, y: np.ndarray, sigma: float, reps: int,
              seed: int, stream: int) -> int:
    n_chunks = (reps + _CHUNK - 1) // _CHUNK

    def one(ci: int) -> int:
        m = min(_CHUNK, reps - ci * _CHUNK)
        rng = _philox(seed, stream, ci)
        draws = y[None, :] + sigma * rng.standard_normal((m, 2))
        return int(np.count_nonzero(region.membership(draws)))

    workers = thread_count()
    if workers == 1 or n_chunks == 1:
        return sum(one(ci) for ci in range(n_chunks))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(one, range(n_chunks)))


def bp(region: Region, y, sigma2: float = 1.0, backend: str = "quad",
       reps: int = 100_000, seed: int = 0, stream: int = 0,
       nodes: int = 96) -> BootstrapEstimate:
    """Probability that a scale-sigma2 resample of y lands in the region.

    backend "quad" is deterministic (stderr 0); "mc" draws reps normal
    deviates through a counter-keyed generator, so results are bit-identical
    for a given (seed, stream) regardless of threading.
    """
    if sigma2 <= 0:
        raise InvalidScale(f"sigma2 must be positive, got {sigma2}")
    y = np.asarray(y, dtype=float).reshape(2)
    sigma = float(np.sqrt(sigma2))
    if backend == "quad":
        if region.q != 1:
            raise UnsupportedDim("deterministic integration is implemented for q = 1")
        p = float(region_mass(region, y[:1], y[1:], sigma, nodes)[0])
        return BootstrapEstimate(value=p, stderr=0.0, replicates=0,
                                 backend="quad", seed=None, sigma2=float(sigma2))
    if backend == "mc":
        count = _mc_count(region, y, sigma, reps, seed, stream)
        p = count / reps
        se = float(np.sqrt(max(p * (1.0 - p), 0.0) / reps))
        return BootstrapEstimate(value=p, stderr=se, replicates=reps,
                                 backend="mc", seed=seed, sigma2=float(sigma2))
    raise ValueError(f"unknown backend {backend!r}")


# -- double bootstrap ---------------------------------------------------------


def _check_center(region: Region, center: np.ndarray) -> np.ndarray:
    center = np.asarray(center, dtype=float).reshape(2)
    if isinstance(region, BallRegion):
        gap = abs(np.hypot(center[0], center[1] + region.radius) - region.radius)
    else:
        gap = abs(center[1] + float(region.h(np.array([center[0]]))[0]))
    if gap > 1e-9 * (1.0 + float(np.max(np.abs(center)))):
        raise CenterOffBoundary(f"resampling center {center.tolist()} is off the boundary")
    return center


def contour_tail_stats(region: Region, cu: np.ndarray, cv: np.ndarray,
                       z0: np.ndarray, tau: float, sigma: float,
                       nodes: int = 96, warm: np.ndarray | None = None,
                       inner_nodes: int | None = None
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Outer-level tail masses of the double bootstrap, vectorized over centers.

    For each center (cu, cv) and target pivot z0, finds the level curve
    v*(U) where the inner mass matches z0 (Newton in pivot space with an
    active set), then accumulates the outer normal mass above/below that
    curve.  Returns (p, q, vstar); vstar can warm-start a nearby call.
    inner_nodes controls the panel resolution of the inner mass only.
    """
    cu = np.atleast_1d(np.asarray(cu, dtype=float))
    cv = np.atleast_1d(np.asarray(cv, dtype=float))
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    innodes = nodes if inner_nodes is None else inner_nodes
    t, w = _graph_layout(region, cu, tau, nodes)
    m, j = t.shape
    uu = cu[:, None] + tau * t
    uf = uu.ravel()
    z0f = np.repeat(z0, j)
    if warm is not None and warm.shape == (m, j):
        vf = warm.ravel().copy()
    else:
        vf = (-region.h(uu) + sigma * np.clip(z0, -ZCAP, ZCAP)[:, None]).ravel()

    smax = 4.0 * (sigma + 1.0)
    out_weight = (w * norm_pdf(t)).ravel()
    # the outer masses cannot distinguish level heights beyond this horizon
    # around each center, so the solve is confined to it: points whose true
    # level lies outside pin to the edge, where their mass is already exact
    cvf = np.repeat(cv, j)
    vlo = cvf - 12.0 * tau
    vhi = cvf + 12.0 * tau
    vf = np.clip(vf, vlo, vhi)
    width = (len(region.cuts()) + 3) * innodes
    block = max(1024, 8_000_000 // width)
    for lo in range(0, vf.size, block):
        hi = min(lo + block, vf.size)
        hneg, wphi = _slice_layout(region, uf[lo:hi], sigma, innodes)
        vb = vf[lo:hi]
        zb = z0f[lo:hi]
        blo = vlo[lo:hi]
        bhi = vhi[lo:hi]
        act = np.arange(vb.size)
        raw = np.zeros(vb.size)
        damp = np.ones(vb.size)
        for _ in range(160):
            _, _, z, sl = _tails_from_layout(hneg[act], wphi[act], vb[act], sigma)
            step = np.clip((z - zb[act]) / sl, -smax, smax)
            # halve the applied step on sign reversal: the slope floor can
            # overstate flat-pivot slopes and send raw Newton into a cycle
            flip = step * raw[act] < 0.0
            damp[act] = np.where(flip, 0.5 * damp[act],
                                 np.minimum(1.0, 1.25 * damp[act]))
            raw[act] = step
            moved = np.clip(vb[act] - damp[act] * step, blo[act], bhi[act])
            still = np.abs(moved - vb[act]) > 1e-10
            vb[act] = moved
            act = act[still]
            if act.size == 0:
                break
        # residual non-converged points are tolerable only where the outer
        # weight cannot move the accumulated masses (deep panel tails)
        pinned = (vb == blo) | (vb == bhi)
        stuck = (np.abs(raw) > 1e-6) & ~pinned
        if np.any(stuck) and float(out_weight[lo:hi][stuck].sum()) > 1e-9:
            raise NonConvergence("inner contour inversion stalled")
        vf[lo:hi] = vb

    vstar = vf.reshape(m, j)
    wphi = w * norm_pdf(t)
    above = (vstar - cv[:, None]) / tau
    p = np.einsum("mk,mk->m", wphi, ndtr(-above))
    q = np.einsum("mk,mk->m", wphi, ndtr(above))
    return p, q, vstar


def dbp(region: Region, y, tau2: float = 1.0, sigma2: float = 1.0,
        backend: str = "quad", reps_outer: int = 10_000, reps_inner: int = 1_000,
        seed: int = 0, center=None, inner_backend: str = "quad",
        stream: int = 1, nodes: int = 96) -> BootstrapEstimate:
    """Probability that an outer resample has smaller region mass than y.

    Outer draws come from N(center, tau2 I) with the center defaulting to the
    projection of y onto the boundary; each draw's inner mass at scale sigma2
    is compared against the mass at y itself.  The quad backend inverts the
    inner mass along every outer slice instead of sampling.
    """
    if tau2 <= 0:
        raise InvalidScale(f"tau2 must be positive, got {tau2}")
    if sigma2 <= 0:
        raise InvalidScale(f"sigma2 must be positive, got {sigma2}")
    y = np.asarray(y, dtype=float).reshape(2)
    tau = float(np.sqrt(tau2))
    sigma = float(np.sqrt(sigma2))
    if center is None:
        center = region.project(y).mu_hat
    center = _check_center(region, center)

    if backend == "quad":
        if region.q != 1:
            raise UnsupportedDim("deterministic integration is implemented for q = 1")
        if isinstance(region, BallRegion):
            raise UnsupportedDim(
                "deterministic double bootstrap needs a graph boundary; use backend='mc'")
        _, _, z0, _ = graph_tail_stats(region, y[:1], y[1:], sigma, nodes)
        p, _, _ = contour_tail_stats(region, center[:1], center[1:], z0,
                                     tau, sigma, nodes)
        return BootstrapEstimate(value=float(p[0]), stderr=0.0, replicates=0,
                                 backend="quad", seed=None,
                                 sigma2=float(sigma2), tau2=float(tau2))

    if backend != "mc":
        raise ValueError(f"unknown backend {backend!r}")

    # reference inner mass at y, estimated once
    if inner_backend == "quad":
        base = bp(region, y, sigma2, backend="quad", nodes=nodes)
    else:
        base = bp(region, y, sigma2, backend="mc", reps=reps_inner,
                  seed=seed, stream=stream + 1)
    b0 = base.value

    use_pivot = not isinstance(region, BallRegion) and inner_backend == "quad"
    if use_pivot:
        _, _, z0a, _ = graph_tail_stats(region, y[:1], y[1:], sigma, nodes)
        z0 = float(z0a[0])

    n_chunks = (reps_outer + _CHUNK - 1) // _CHUNK

    def one(ci: int) -> int:
        m = min(_CHUNK, reps_outer - ci * _CHUNK)
        rng = _philox(seed, stream, ci)
        draws = center[None, :] + tau * rng.standard_normal((m, 2))
        if inner_backend == "quad":
            if use_pivot:
                _, _, z, _ = graph_tail_stats(region, draws[:, 0], draws[:, 1],
                                              sigma, nodes)
                return int(np.count_nonzero(z >= z0))
            masses = region_mass(region, draws[:, 0], draws[:, 1], sigma, nodes)
            return int(np.count_nonzero(masses <= b0))
        hits = 0
        for k in range(m):
            sub = _philox(seed, stream + 2, ci * _CHUNK + k)
            inner = draws[k][None, :] + sigma * sub.standard_normal((reps_inner, 2))
            frac = np.count_nonzero(region.membership(inner)) / reps_inner
            hits += int(frac <= b0)
        return hits

    workers = thread_count()
    if workers == 1 or n_chunks == 1:
        total = sum(one(ci) for ci in range(n_chunks))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            total = sum(pool.map(one, range(n_chunks)))
    p = total / reps_outer
    se = float(np.sqrt(max(p * (1.0 - p), 0.0) / reps_outer))
    return BootstrapEstimate(value=p, stderr=se, replicates=reps_outer,
                             backend="mc", seed=seed,
                             sigma2=float(sigma2), tau2=float(tau2))
