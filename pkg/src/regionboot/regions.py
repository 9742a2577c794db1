"""Null regions of the form v <= -h(u) and the geometry operations on them.

Every built-in region lives in the (u, v) plane: a scalar tangent coordinate
u, a normal coordinate v, and a boundary given by the graph of -h.  The ball
region is the one non-graph built-in; it keeps the same interface but answers
membership and projection questions radially.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import NonConvergence, NonSmoothPoint
from .surface_jets import SurfaceJet

_SQRT3 = np.sqrt(3.0)
_PROJ_TOL = 1e-10


@dataclass(frozen=True)
class ProjectionResult:
    """Closest boundary point to an observation.

    mu_hat is the foot point, lambda_hat the signed distance (positive when
    the observation lies outside the region), u_hat the tangent coordinate
    of the foot.
    """

    mu_hat: np.ndarray
    lambda_hat: float
    u_hat: float
    converged: bool
    iterations: int


class Region:
    """Base class: a null region bounded by v = -h(u)."""

    q = 1
    is_graph = True
    kind = "abstract"

    def __init__(self, descriptor: dict | None = None):
        self._descriptor = descriptor

    @property
    def descriptor(self) -> dict:
        return dict(self._descriptor) if self._descriptor else {"kind": self.kind}

    def h(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hp(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivs(self, u: float) -> tuple[float, float, float, float, float]:
        """(h, h', h'', h''', h'''') at a smooth boundary parameter u."""
        raise NotImplementedError

    def cuts(self) -> np.ndarray:
        """u-locations where quadrature panels must break (kinks, scale features)."""
        return np.array([0.0])

    def u_range(self) -> tuple[float, float]:
        """Search interval for multi-start projection."""
        return (-12.0, 12.0)

    def membership(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return pts[:, 1] <= -self.h(pts[:, 0])

    # -- projection ---------------------------------------------------------

    def _newton_steps(self, u: np.ndarray, yu: np.ndarray, yv: np.ndarray,
                      iters: int = 80) -> np.ndarray:
        """Clipped Newton on the stationarity equation of the squared distance."""
        for _ in range(iters):
            h = self.h(u)
            hp = self.hp(u)
            hpp = self.hpp(u)
            f = (u - yu) + (h + yv) * hp
            fp = 1.0 + hp * hp + (h + yv) * hpp
            step = f / np.where(np.abs(fp) > 1e-14, fp, 1e-14)
            u = u - np.clip(step, -0.5, 0.5)
        return u

    def hpp(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def project(self, y: np.ndarray) -> ProjectionResult:
        """Bracketed scan, golden-section refinement, then Newton polish."""
        yu, yv = float(y[0]), float(y[1])
        lo, hi = self.u_range()
        lo = min(lo, yu - 4.0)
        hi = max(hi, yu + 4.0)
        grid = np.linspace(lo, hi, 129)
        d2 = (grid - yu) ** 2 + (self.h(grid) + yv) ** 2
        i = int(np.argmin(d2))
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        iters = 0
        phi = (np.sqrt(5.0) - 1.0) / 2.0
        c, d = b - phi * (b - a), a + phi * (b - a)

        def obj(u):
            return (u - yu) ** 2 + (float(self.h(np.array([u]))[0]) + yv) ** 2

        fc, fd = obj(c), obj(d)
        while b - a > 1e-12 and iters < 200:
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - phi * (b - a)
                fc = obj(c)
            else:
                a, c, fc = c, d, fd
                d = a + phi * (b - a)
                fd = obj(d)
            iters += 1
        u = 0.5 * (a + b)
        u = float(self._newton_steps(np.array([u]), np.array([yu]), np.array([yv]), iters=20)[0])
        iters += 20
        h = float(self.h(np.array([u]))[0])
        hp = float(self.hp(np.array([u]))[0])
        resid = abs((u - yu) + (h + yv) * hp)
        scale = 1.0 + abs(yu) + abs(yv)
        if not np.isfinite(resid) or resid > 1e-6 * scale:
            raise NonConvergence(
                f"projection onto {self.kind} boundary did not converge at y={y!r}")
        mu = np.array([u, -h])
        dist = float(np.hypot(yu - u, yv + h))
        sign = 1.0 if yv > -float(self.h(np.array([yu]))[0]) else -1.0
        return ProjectionResult(mu_hat=mu, lambda_hat=sign * dist, u_hat=u,
                                converged=resid <= _PROJ_TOL * scale, iterations=iters)

    def project_batch(self, yu: np.ndarray, yv: np.ndarray) -> np.ndarray:
        """Multi-start Newton projection of many points; returns foot parameters."""
        yu = np.asarray(yu, dtype=float)
        yv = np.asarray(yv, dtype=float)
        lo, hi = self.u_range()
        starts = np.concatenate([np.linspace(lo, hi, 17), [0.0]])
        cand = np.empty((starts.size + 1, yu.size))
        for k, s in enumerate(starts):
            cand[k] = self._newton_steps(np.full(yu.shape, s), yu, yv)
        cand[-1] = self._newton_steps(yu.copy(), yu, yv)
        d2 = (cand - yu) ** 2 + (self.h(cand) + yv) ** 2
        best = np.argmin(d2, axis=0)
        return cand[best, np.arange(yu.size)]


class ConeRegion(Region):
    """Two straight half-lines meeting at the origin: h(u) = slope * |u|."""

    kind = "cone"

    def __init__(self, slope: float = 1.0 / _SQRT3, descriptor: dict | None = None):
        super().__init__(descriptor or {"kind": "cone", "slope": slope})
        if slope <= 0:
            raise ValueError("cone slope must be positive")
        self.slope = float(slope)

    def h(self, u):
        return self.slope * np.abs(u)

    def hp(self, u):
        return self.slope * np.sign(u)

    def derivs(self, u):
        if abs(u) < 1e-12:
            raise NonSmoothPoint("the cone vertex has no one-sided-consistent jet")
        return (self.slope * abs(u), self.slope * np.sign(u), 0.0, 0.0, 0.0)

    def hpp(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    def project(self, y):
        yu, yv = float(y[0]), float(y[1])
        s = self.slope
        nrm = np.hypot(1.0, s)
        best = None
        # positive-u branch first so that exact ties keep the u >= 0 foot
        for branch in (1.0, -1.0):
            t = (branch * yu - s * yv) / nrm
            if t >= 0.0:
                foot = np.array([branch * t / nrm, -s * t / nrm])
                d = float(np.hypot(yu - foot[0], yv - foot[1]))
                if best is None or d < best[0] - 1e-12:
                    best = (d, foot)
        if best is None:
            mu = np.array([0.0, 0.0])
        else:
            mu = best[1]
        u = float(mu[0])
        dist = float(np.hypot(yu - mu[0], yv - mu[1]))
        sign = 1.0 if yv > -s * abs(yu) else -1.0
        return ProjectionResult(mu_hat=mu, lambda_hat=sign * dist, u_hat=u,
                                converged=True, iterations=0)

    def project_batch(self, yu, yv):
        yu = np.asarray(yu, dtype=float)
        yv = np.asarray(yv, dtype=float)
        s = self.slope
        nrm = np.hypot(1.0, s)
        tp = (yu - s * yv) / nrm
        tm = (-yu - s * yv) / nrm
        up = np.where(tp >= 0.0, tp / nrm, 0.0)
        um = np.where(tm >= 0.0, -tm / nrm, 0.0)
        dp = (yu - up) ** 2 + (yv + s * np.abs(up)) ** 2
        dm = (yu - um) ** 2 + (yv + s * np.abs(um)) ** 2
        return np.where(dp <= dm, up, um)


class HyperbolaRegion(Region):
    """Smooth cone-like boundary h(u) = sqrt(h0^2 + u^2/3).

    h0 controls the rounding of the apex; h0 = 0 is not allowed here (use
    ConeRegion, which region_from_descriptor substitutes automatically).
    """

    kind = "efron"

    def __init__(self, h0: float, descriptor: dict | None = None):
        super().__init__(descriptor or {"kind": "efron", "h0": h0})
        if h0 <= 0:
            raise ValueError("h0 must be positive; h0 = 0 is the cone")
        self.h0 = float(h0)

    def h(self, u):
        return np.sqrt(self.h0**2 + np.square(u) / 3.0)

    def hp(self, u):
        return np.asarray(u) / (3.0 * self.h(u))

    def hpp(self, u):
        w = self.h(u)
        return self.h0**2 / (3.0 * w**3)

    def derivs(self, u):
        w = float(np.sqrt(self.h0**2 + u * u / 3.0))
        d1 = u / (3.0 * w)
        d2 = self.h0**2 / (3.0 * w**3)
        d3 = -self.h0**2 * u / (3.0 * w**5)
        d4 = self.h0**2 * (4.0 * u * u / 3.0 - self.h0**2) / (3.0 * w**7)
        return (w, d1, d2, d3, d4)

    def cuts(self):
        scales = self.h0 * 4.0 ** np.arange(0, 9)
        return np.sort(np.concatenate([[0.0], scales, -scales]))


class PolynomialRegion(Region):
    """Quartic graph boundary h(u) = c2 u^2 + c3 u^3 + c4 u^4."""

    kind = "poly"

    def __init__(self, c2: float, c3: float = 0.0, c4: float = 0.0,
                 descriptor: dict | None = None):
        super().__init__(descriptor or {"kind": "poly", "coeffs": [c2, c3, c4]})
        self.c = (float(c2), float(c3), float(c4))

    def h(self, u):
        u = np.asarray(u, dtype=float)
        c2, c3, c4 = self.c
        return u * u * (c2 + u * (c3 + u * c4))

    def hp(self, u):
        u = np.asarray(u, dtype=float)
        c2, c3, c4 = self.c
        return u * (2.0 * c2 + u * (3.0 * c3 + u * 4.0 * c4))

    def hpp(self, u):
        u = np.asarray(u, dtype=float)
        c2, c3, c4 = self.c
        return 2.0 * c2 + u * (6.0 * c3 + 12.0 * c4 * u)

    def derivs(self, u):
        c2, c3, c4 = self.c
        return (u * u * (c2 + u * (c3 + u * c4)),
                u * (2.0 * c2 + u * (3.0 * c3 + 4.0 * c4 * u)),
                2.0 * c2 + 6.0 * c3 * u + 12.0 * c4 * u * u,
                6.0 * c3 + 24.0 * c4 * u,
                24.0 * c4)


class BallRegion(Region):
    """Disk of the given radius tangent to the origin from below."""

    kind = "sphere"
    is_graph = False

    def __init__(self, radius: float, descriptor: dict | None = None):
        super().__init__(descriptor or {"kind": "sphere", "radius": radius})
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.center = np.array([0.0, -self.radius])

    def h(self, u):
        u = np.asarray(u, dtype=float)
        r = self.radius
        inside = np.clip(r * r - np.square(u), 0.0, None)
        return r - np.sqrt(inside)

    def hp(self, u):
        u = np.asarray(u, dtype=float)
        r = self.radius
        w = np.sqrt(np.clip(r * r - np.square(u), 1e-300, None))
        return u / w

    def hpp(self, u):
        u = np.asarray(u, dtype=float)
        r = self.radius
        w = np.sqrt(np.clip(r * r - np.square(u), 1e-300, None))
        return r * r / w**3

    def derivs(self, u):
        r = self.radius
        if abs(u) >= r:
            raise NonSmoothPoint("boundary parameter outside the upper arc")
        w = float(np.sqrt(r * r - u * u))
        return (r - w, u / w, r * r / w**3, 3.0 * r * r * u / w**5,
                3.0 * r * r * (r * r + 4.0 * u * u) / w**7)

    def membership(self, points):
        pts = np.atleast_2d(points)
        return np.hypot(pts[:, 0], pts[:, 1] + self.radius) <= self.radius

    def project(self, y):
        yu, yv = float(y[0]), float(y[1])
        d = np.hypot(yu, yv + self.radius)
        if d < 1e-14:
            mu = np.array([0.0, 0.0])
            u = 0.0
        else:
            mu = self.center + self.radius * (np.array([yu, yv]) - self.center) / d
            u = float(mu[0])
        return ProjectionResult(mu_hat=mu, lambda_hat=float(d - self.radius),
                                u_hat=u, converged=True, iterations=0)

    def project_batch(self, yu, yv):
        yu = np.asarray(yu, dtype=float)
        yv = np.asarray(yv, dtype=float)
        d = np.hypot(yu, yv + self.radius)
        safe = np.where(d > 1e-14, d, 1.0)
        return self.radius * yu / safe


class TableRegion(Region):
    """Boundary interpolated from (u, h) samples with a natural cubic spline."""

    kind = "custom"

    def __init__(self, table, descriptor: dict | None = None):
        tab = np.asarray(table, dtype=float)
        if tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 4:
            raise ValueError("table must be an (n, 2) array with n >= 4")
        order = np.argsort(tab[:, 0])
        self._knots = tab[order, 0]
        self._vals = tab[order, 1]
        self._spline = CubicSpline(self._knots, self._vals, bc_type="natural")
        self._d1 = self._spline.derivative(1)
        self._d2 = self._spline.derivative(2)
        super().__init__(descriptor or {"kind": "custom", "table": tab[order].tolist()})

    def h(self, u):
        u = np.clip(np.asarray(u, dtype=float), self._knots[0], self._knots[-1])
        return self._spline(u)

    def hp(self, u):
        u = np.clip(np.asarray(u, dtype=float), self._knots[0], self._knots[-1])
        return self._d1(u)

    def hpp(self, u):
        u = np.clip(np.asarray(u, dtype=float), self._knots[0], self._knots[-1])
        return self._d2(u)

    def u_range(self):
        return (float(self._knots[0]), float(self._knots[-1]))

    def cuts(self):
        return self._knots.copy()

    def derivs(self, u):
        # finite differences with one Richardson pass; the spline itself only
        # carries three exact derivatives and the fourth must be numerical
        e = 1e-2

        def f(x):
            return float(self._spline(np.clip(x, self._knots[0], self._knots[-1])))

        right = lambda s: (f(u + s) - f(u)) / s
        left = lambda s: (f(u) - f(u - s)) / s
        r1 = 2.0 * right(e / 2) - right(e)
        l1 = 2.0 * left(e / 2) - left(e)
        if abs(r1 - l1) > 1e-6:
            raise NonSmoothPoint(f"one-sided slopes disagree at u={u}")

        def d1(s):
            return (f(u + s) - f(u - s)) / (2.0 * s)

        def d2(s):
            return (f(u + s) - 2.0 * f(u) + f(u - s)) / s**2

        def d3(s):
            return (f(u + 2 * s) - 2.0 * f(u + s) + 2.0 * f(u - s) - f(u - 2 * s)) / (2.0 * s**3)

        def d4(s):
            return (f(u + 2 * s) - 4.0 * f(u + s) + 6.0 * f(u)
                    - 4.0 * f(u - s) + f(u - 2 * s)) / s**4

        rich = lambda g: (4.0 * g(e / 2) - g(e)) / 3.0
        return (f(u), rich(d1), rich(d2), rich(d3), rich(d4))


def region_from_descriptor(desc: dict) -> Region:
    """Build a region from its JSON-style descriptor."""
    kind = desc.get("kind")
    if kind == "efron":
        h0 = float(desc.get("h0", 0.0))
        if h0 == 0.0:
            return ConeRegion(descriptor=dict(desc))
        return HyperbolaRegion(h0, descriptor=dict(desc))
    if kind == "cone":
        return ConeRegion(slope=float(desc.get("slope", 1.0 / _SQRT3)),
                          descriptor=dict(desc))
    if kind == "sphere":
        return BallRegion(float(desc["radius"]), descriptor=dict(desc))
    if kind == "poly":
        if "coeffs" in desc:
            c = [float(x) for x in desc["coeffs"]]
        else:
            c = [float(desc.get(k, 0.0)) for k in ("c2", "c3", "c4")]
        c = (c + [0.0, 0.0, 0.0])[:3]
        return PolynomialRegion(*c, descriptor=dict(desc))
    if kind == "custom":
        return TableRegion(desc["table"], descriptor=dict(desc))
    raise ValueError(f"unknown region kind: {kind!r}")


def project(region: Region, y: np.ndarray) -> ProjectionResult:
    """Closest point on the region boundary together with the signed distance."""
    return region.project(np.asarray(y, dtype=float))


def jet_at(region: Region, u: float) -> SurfaceJet:
    """Quartic boundary expansion in graph form, recentered at parameter u.

    The returned jet has h0 = h(u) and h1 = h'(u); curvature coefficients are
    analytic for built-ins and Richardson finite differences for custom
    boundaries.  Raises NonSmoothPoint where one-sided slopes disagree.
    """
    h, d1, d2, d3, d4 = region.derivs(float(u))
    return SurfaceJet.one_dim(h2=d2 / 2.0, h3=d3 / 6.0, h4=d4 / 24.0, h0=h, h1=d1)


def tangent_jet(region: Region, u: float) -> SurfaceJet:
    """Centered jet of the boundary in the tangent-normal frame at parameter u.

    Rotates the graph expansion into the frame whose first axis is the
    boundary tangent at u, by series reversion of the arc coordinate; the
    result has h0 = h1 = 0 and exact curvature coefficients through fourth
    order.
    """
    _, d1, d2, d3, d4 = region.derivs(float(u))
    w = np.hypot(1.0, d1)
    b2, b3, b4 = d2 / (2.0 * w), d3 / (6.0 * w), d4 / (24.0 * w)
    a1, a2, a3 = w, d1 * d2 / (2.0 * w), d1 * d3 / (6.0 * w)
    c1 = 1.0 / a1
    c2 = -a2 / a1**3
    c3 = (2.0 * a2**2 - a1 * a3) / a1**5
    t2 = b2 * c1**2
    t3 = 2.0 * b2 * c1 * c2 + b3 * c1**3
    t4 = b2 * (c2**2 + 2.0 * c1 * c3) + 3.0 * b3 * c1**2 * c2 + b4 * c1**4
    return SurfaceJet.one_dim(h2=t2, h3=t3, h4=t4)
