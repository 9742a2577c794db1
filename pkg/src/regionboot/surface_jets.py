"""Local surface geometry for smooth region boundaries.

A boundary near a point of interest is represented as a graph v = -h(u) with
h expanded to fourth order.  Taylor coefficients carry no factorial
normalization and repeated indices sum:

    h(u) = h0 + h1[i] u[i] + h2[i,j] u[i] u[j]
         + h3[i,j,k] u[i] u[j] u[k] + h4[i,j,k,l] u[i] u[j] u[k] u[l]

so for one boundary dimension h2 = h''/2, h3 = h'''/6, h4 = h''''/24.  All
curvature summaries, surface shifts and contour re-expansions in this module
are polynomial identities in these coefficients.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np


def _symmetrize(a: np.ndarray) -> np.ndarray:
    k = a.ndim
    if k <= 1:
        return a
    out = np.zeros_like(a)
    for p in itertools.permutations(range(k)):
        out = out + np.transpose(a, p)
    return out / math.factorial(k)


def _frozen_array(obj, name: str, value: np.ndarray) -> None:
    value = np.array(value, dtype=float)
    value.setflags(write=False)
    object.__setattr__(obj, name, value)


@dataclass(frozen=True)
class SurfaceJet:
    """Fourth-order boundary expansion around a reference point.

    h2, h3, h4 are symmetrized on construction; inputs whose asymmetry
    exceeds 1e-12 (relative to their magnitude) are rejected.
    """

    q: int
    h2: np.ndarray
    h3: np.ndarray
    h4: np.ndarray
    h0: float = 0.0
    h1: np.ndarray | None = None

    def __post_init__(self):
        q = int(self.q)
        if q < 1:
            raise ValueError("q must be a positive integer")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "h0", float(self.h0))
        h1 = np.zeros(q) if self.h1 is None else np.array(self.h1, dtype=float)
        if h1.shape != (q,):
            raise ValueError(f"h1 must have shape ({q},)")
        _frozen_array(self, "h1", h1)
        for name, order in (("h2", 2), ("h3", 3), ("h4", 4)):
            raw = np.array(getattr(self, name), dtype=float)
            if raw.shape != (q,) * order:
                raise ValueError(f"{name} must have shape {(q,) * order}")
            sym = _symmetrize(raw)
            scale = max(1.0, float(np.max(np.abs(raw))) if raw.size else 1.0)
            if float(np.max(np.abs(raw - sym))) > 1e-12 * scale:
                raise ValueError(f"{name} is not symmetric within 1e-12")
            _frozen_array(self, name, sym)

    @classmethod
    def one_dim(cls, h2: float, h3: float, h4: float,
                h0: float = 0.0, h1: float = 0.0) -> "SurfaceJet":
        """Convenience constructor for a single boundary dimension."""
        return cls(q=1, h2=np.array([[h2]]), h3=np.array([[[h3]]]),
                   h4=np.array([[[[h4]]]]), h0=h0, h1=np.array([h1]))

    def height(self, u: np.ndarray) -> float:
        """Evaluate the quartic expansion at tangent offset u."""
        u = np.asarray(u, dtype=float).reshape(self.q)
        return float(
            self.h0
            + self.h1 @ u
            + np.einsum("ij,i,j->", self.h2, u, u)
            + np.einsum("ijk,i,j,k->", self.h3, u, u, u)
            + np.einsum("ijkl,i,j,k,l->", self.h4, u, u, u, u)
        )

    def gradient(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(self.q)
        return (
            self.h1
            + 2.0 * self.h2 @ u
            + 3.0 * np.einsum("ijk,j,k->i", self.h3, u, u)
            + 4.0 * np.einsum("ijkl,j,k,l->i", self.h4, u, u, u)
        )

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "h0": self.h0,
            "h1": self.h1.tolist(),
            "h2": self.h2.tolist(),
            "h3": self.h3.tolist(),
            "h4": self.h4.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SurfaceJet":
        return cls(q=d["q"], h2=np.asarray(d["h2"]), h3=np.asarray(d["h3"]),
                   h4=np.asarray(d["h4"]), h0=d.get("h0", 0.0),
                   h1=None if d.get("h1") is None else np.asarray(d["h1"]))


@dataclass(frozen=True)
class NormalShift:
    """Signed-distance field moving a surface along its normals.

    lambda0 is the constant offset, lambda1/lambda2 the first two Taylor
    coefficients of the offset as a function of the tangent coordinate
    (same no-factorial convention as SurfaceJet).
    """

    lambda0: float
    lambda1: np.ndarray | None = None
    lambda2: np.ndarray | None = None
    q: int = 1

    def __post_init__(self):
        object.__setattr__(self, "lambda0", float(self.lambda0))
        q = int(self.q)
        lam1 = np.zeros(q) if self.lambda1 is None else np.array(self.lambda1, dtype=float)
        lam2 = np.zeros((q, q)) if self.lambda2 is None else np.array(self.lambda2, dtype=float)
        if lam1.shape != (q,) or lam2.shape != (q, q):
            raise ValueError("lambda1/lambda2 shapes must match q")
        object.__setattr__(self, "q", q)
        _frozen_array(self, "lambda1", lam1)
        _frozen_array(self, "lambda2", 0.5 * (lam2 + lam2.T))


@dataclass(frozen=True)
class GeometricSummary:
    """Curvature traces and the derived bias coefficients of a boundary point.

    gamma1..gamma3 are the traces of increasing powers of the second
    fundamental form, gamma4 the fully contracted fourth-order coefficient.
    beta0 is the signed distance of the observation from the surface; beta1
    through beta3 are the polynomial combinations that drive the tail-area
    expansions of the resampling p-values.
    """

    gamma1: float
    gamma2: float
    gamma3: float
    gamma4: float
    beta0: float
    beta1: float
    beta2: float
    beta3: float

    @property
    def lambda0(self) -> float:
        return self.beta0

    @property
    def gammas(self) -> tuple[float, float, float, float]:
        return (self.gamma1, self.gamma2, self.gamma3, self.gamma4)


@dataclass(frozen=True)
class LocalFrame:
    """Tangent basis, normal, and induced metric of a graph surface at offset u.

    Rows of b are tangent vectors (e_i, -grad_i); f is the unnormalized
    upward normal (grad, 1); g is the induced metric I + grad grad^T.
    """

    u: np.ndarray
    grad: np.ndarray
    b: np.ndarray
    f: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray

    @classmethod
    def at(cls, jet: SurfaceJet, u: np.ndarray) -> "LocalFrame":
        q = jet.q
        u = np.asarray(u, dtype=float).reshape(q)
        grad = jet.gradient(u)
        b = np.hstack([np.eye(q), -grad[:, None]])
        f = np.concatenate([grad, [1.0]])
        g = np.eye(q) + np.outer(grad, grad)
        g_inv = np.linalg.inv(g)
        frame = cls(u=u.copy(), grad=grad, b=b, f=f, g=g, g_inv=g_inv)
        for name in ("u", "grad", "b", "f", "g", "g_inv"):
            getattr(frame, name).setflags(write=False)
        return frame


def gamma_summary(jet: SurfaceJet) -> tuple[float, float, float, float]:
    """Curvature traces (gamma1..gamma4) of a jet at its own origin."""
    d = jet.h2
    d2 = d @ d
    g1 = float(np.trace(d))
    g2 = float(np.trace(d2))
    g3 = float(np.trace(d2 @ d))
    g4 = float(np.einsum("iijj->", jet.h4))
    return (g1, g2, g3, g4)


def beta_summary(gammas: tuple[float, float, float, float], lam0: float) -> GeometricSummary:
    """Bias coefficients from curvature traces and a signed distance."""
    g1, g2, g3, g4 = (float(g) for g in gammas)
    lam0 = float(lam0)
    beta1 = g1 - lam0 * g2 + (4.0 / 3.0) * lam0**2 * g3
    beta2 = 3.0 * g4 - g1 * g2 - (4.0 / 3.0) * g3
    beta3 = 6.0 * g4 - 2.0 * g1 * g2 - 4.0 * g3
    return GeometricSummary(gamma1=g1, gamma2=g2, gamma3=g3, gamma4=g4,
                            beta0=lam0, beta1=beta1, beta2=beta2, beta3=beta3)


def local_jet(jet: SurfaceJet, u: np.ndarray) -> SurfaceJet:
    """Re-expand a centered jet (h0 = h1 = 0) around tangent offset u.

    Returns the jet of the same surface expressed in the tangent plane at u,
    correct through the orders retained by the quartic truncation; the new
    constant and slope vanish by construction.
    """
    q = jet.q
    u = np.asarray(u, dtype=float).reshape(q)
    h2, h3, h4 = jet.h2, jet.h3, jet.h4
    w = h2 @ (h2 @ u)
    quad = float(u @ (h2 @ h2) @ u)
    h2l = (h2
           + 3.0 * np.einsum("ijk,k->ij", h3, u)
           + 6.0 * np.einsum("ijkl,k,l->ij", h4, u, u)
           - 2.0 * quad * h2)
    h3l = (h3
           + 4.0 * np.einsum("ijkl,l->ijk", h4, u)
           - (4.0 / 3.0) * (np.einsum("ij,k->ijk", h2, w)
                            + np.einsum("ik,j->ijk", h2, w)
                            + np.einsum("jk,i->ijk", h2, w)))
    return SurfaceJet(q=q, h2=h2l, h3=h3l, h4=h4)


def curvatures_at(jet: SurfaceJet, u: np.ndarray) -> tuple[float, float, float, float]:
    """Metric-corrected curvature traces of a centered jet at tangent offset u.

    The second fundamental form is taken from the re-expanded jet at u and
    contracted against the inverse induced metric of the graph frame there,
    so the traces are exact functions of the quartic expansion rather than
    polynomial truncations.
    """
    frame = LocalFrame.at(jet, u)
    d = local_jet(jet, u).h2
    a = d @ frame.g_inv
    a2 = a @ a
    g1 = float(np.trace(a))
    g2 = float(np.trace(a2))
    g3 = float(np.trace(a2 @ a))
    g4 = float(np.einsum("ijkl,ij,kl->", jet.h4, frame.g_inv, frame.g_inv))
    return (g1, g2, g3, g4)


def shift_surface(jet: SurfaceJet, shift: NormalShift) -> SurfaceJet:
    """Coefficients of the surface displaced by a signed-distance field.

    Points of the new surface sit at distance lambda(u) along the unit
    normal of the original; the result is again a graph jet in the original
    frame, correct through the retained orders.
    """
    q = jet.q
    if shift.q != q:
        raise ValueError("shift dimension does not match jet")
    lam0 = shift.lambda0
    h2, h3, h4 = jet.h2, jet.h3, jet.h4
    h2sq = h2 @ h2
    s0 = jet.h0 - lam0
    s1 = jet.h1 - shift.lambda1 - 2.0 * lam0 * h2 @ (jet.h1 - shift.lambda1)
    s2 = h2 - shift.lambda2 - 2.0 * lam0 * h2sq + 4.0 * lam0**2 * h2sq @ h2
    mixed = (np.einsum("mi,mjk->ijk", h2, h3)
             + np.einsum("mj,mik->ijk", h2, h3)
             + np.einsum("mk,mij->ijk", h2, h3))
    s3 = h3 - 2.0 * lam0 * mixed
    return SurfaceJet(q=q, h2=s2, h3=s3, h4=h4, h0=s0, h1=s1)


def contour_jet(jet: SurfaceJet, lam0: float, sigma2: float) -> tuple[SurfaceJet, NormalShift]:
    """Level surface of the smoothed tail mass through the point at distance lam0.

    For a boundary smoothed with variance sigma2, the set of observations
    whose one-step resampling mass equals that of the reference point is
    itself a surface; the curvature of the original boundary bends it away
    from the parallel surface at the same distance.  Returns the jet of that
    level surface together with the normal displacement field that produces
    it from the original boundary.
    """
    q = jet.q
    lam0 = float(lam0)
    sigma2 = float(sigma2)
    h2, h3, h4 = jet.h2, jet.h3, jet.h4
    h2sq = h2 @ h2
    h2cu = h2sq @ h2
    g1 = float(np.trace(h2))
    e3 = np.einsum("mmi->i", h3)
    e4 = np.einsum("mmij->ij", h4)
    t = np.einsum("ml,mli->i", h2, h3)
    r = np.einsum("mll->m", h3)

    lam1 = sigma2 * (-3.0 * e3 + 6.0 * lam0 * t)
    lam2 = sigma2 * (-6.0 * e4 + 2.0 * g1 * h2sq + 4.0 * h2cu)
    shift = NormalShift(lambda0=lam0, lambda1=lam1, lambda2=lam2, q=q)

    s0 = jet.h0 - lam0
    s1 = (jet.h1 - 2.0 * lam0 * h2 @ jet.h1
          + sigma2 * (3.0 * e3 - 6.0 * lam0 * t - 6.0 * lam0 * h2 @ r))
    s2 = (h2 - 2.0 * lam0 * h2sq + 4.0 * lam0**2 * h2cu
          + sigma2 * (6.0 * e4 - 2.0 * g1 * h2sq - 4.0 * h2cu))
    mixed = (np.einsum("mi,mjk->ijk", h2, h3)
             + np.einsum("mj,mik->ijk", h2, h3)
             + np.einsum("mk,mij->ijk", h2, h3))
    s3 = h3 - 2.0 * lam0 * mixed
    return SurfaceJet(q=q, h2=s2, h3=s3, h4=h4, h0=s0, h1=s1), shift


def kappa(jet: SurfaceJet, lam0: float, theta: np.ndarray) -> float:
    """Quadratic curvature-drift polynomial at tangent offset theta.

    Measures how the mean-curvature combination driving the level-surface
    displacement varies along the boundary; its Laplacian at the origin
    equals twice the beta3 coefficient of beta_summary.
    """
    q = jet.q
    theta = np.asarray(theta, dtype=float).reshape(q)
    h2, h3, h4 = jet.h2, jet.h3, jet.h4
    h2sq = h2 @ h2
    g1 = float(np.trace(h2))
    e3 = np.einsum("mmi->i", h3)
    e4 = np.einsum("mmij->ij", h4)
    t = np.einsum("ml,mli->i", h2, h3)
    a = 3.0 * e3 - 6.0 * lam0 * t
    b = 6.0 * e4 - 2.0 * g1 * h2sq - 4.0 * h2sq @ h2
    return float(a @ theta + theta @ b @ theta)


def gaussian_moment(indices) -> float:
    """Moment E[U_{i1} ... U_{ik}] of a standard normal vector.

    indices are coordinate labels (repeats allowed).  Odd-length products
    vanish; even-length products sum over all pairings of matching labels.
    """
    idx = list(indices)
    if len(idx) % 2:
        return 0.0
    if not idx:
        return 1.0

    def rec(rest: tuple) -> float:
        if not rest:
            return 1.0
        head, tail = rest[0], rest[1:]
        total = 0.0
        for j, other in enumerate(tail):
            if head == other:
                total += rec(tail[:j] + tail[j + 1:])
        return total

    return float(rec(tuple(idx)))
