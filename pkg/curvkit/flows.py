"""Gradient curves, radial curves, gradient exponent and developments.

The flow testbeds are closed convex subsets of Euclidean space
(ConvexDomainSpace); developments work on any distance data. Each flow
comes with the comparison inequality it must satisfy, checked at runtime
with an explicit O(h) budget.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from curvkit.comparison import Verdict
from curvkit.metric_core import Witness
from curvkit.model_plane import (
    ModelSpace,
    angle_interval,
    model_angle,
    model_angles,
    model_sides,
    tg,
    varpi,
)
from curvkit.utils import VERDICT_TOL, DomainError, reject_nan

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-3


class ConvexDomainSpace:
    """A closed convex subset of E^m with its closest-point projection.

    kinds: ``plane`` (all of E^m), ``halfplane`` ({x : <normal, x> >= offset}),
    ``disk`` (closed ball), ``generic`` (user supplied membership and
    projection; tangent wedges by finite differences).
    """

    def __init__(self, kind="plane", dim=2, normal=None, offset=0.0, center=None, radius=1.0,
                 membership: Optional[Callable] = None, projection: Optional[Callable] = None):
        self.kind = kind
        self.dim = int(dim)
        self.model = ModelSpace(0.0, self.dim)
        if kind == "halfplane":
            n = np.asarray(normal if normal is not None else np.eye(self.dim)[-1], dtype=float)
            self.normal = n / np.linalg.norm(n)
            self.offset = float(offset)
        elif kind == "disk":
            self.center = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
            self.radius = float(radius)
            if self.radius <= 0:
                raise DomainError("disk radius must be positive")
        elif kind == "generic":
            if membership is None or projection is None:
                raise DomainError("generic domain needs membership and projection")
            self._membership, self._projection = membership, projection
        elif kind != "plane":
            raise DomainError(f"unknown domain kind {kind!r}")

    def __repr__(self):
        return f"ConvexDomainSpace(kind={self.kind!r}, dim={self.dim})"

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        if self.kind == "plane":
            return True
        if self.kind == "halfplane":
            return float(x @ self.normal) >= self.offset - tol
        if self.kind == "disk":
            return float(np.linalg.norm(x - self.center)) <= self.radius + tol
        return bool(self._membership(x))

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "plane":
            return x.copy()
        if self.kind == "halfplane":
            gap = self.offset - float(x @ self.normal)
            return x + max(gap, 0.0) * self.normal
        if self.kind == "disk":
            v = x - self.center
            n = float(np.linalg.norm(v))
            return x.copy() if n <= self.radius else self.center + v * (self.radius / n)
        return np.asarray(self._projection(x), dtype=float)

    def tangent_projection(self, x, v, eps=1e-7):
        """Projection of v onto the tangent wedge of the domain at x."""
        v = np.asarray(v, dtype=float)
        if self.kind == "plane":
            return v
        if self.kind == "halfplane":
            if float(x @ self.normal) - self.offset > 1e-12:
                return v
            return v - min(0.0, float(v @ self.normal)) * self.normal
        if self.kind == "disk":
            u = np.asarray(x, dtype=float) - self.center
            n = float(np.linalg.norm(u))
            if n < self.radius - 1e-12:
                return v
            u = u / n
            return v - max(0.0, float(v @ u)) * u
        x = np.asarray(x, dtype=float)
        return (self.project(x + eps * v) - x) / eps

    def distance(self, x, y):
        return self.model.distance(x, y)

    def audit(self, samples=200, seed=0, spread=3.0):
        """Projection must be idempotent and 1-Lipschitz."""
        rng = np.random.default_rng(seed)
        X = rng.normal(scale=spread, size=(samples, self.dim))
        Y = rng.normal(scale=spread, size=(samples, self.dim))
        PX = np.array([self.project(x) for x in X])
        PY = np.array([self.project(y) for y in Y])
        idem = max(float(np.linalg.norm(self.project(px) - px)) for px in PX)
        lip = np.linalg.norm(X - Y, axis=1) - np.linalg.norm(PX - PY, axis=1)
        margin = min(float(lip.min()), -idem)
        return Verdict("domain_audit", margin >= -1e-9, margin, Witness((int(np.argmin(lip)),), margin),
                       details={"idempotence_error": idem})


@dataclass
class Objective:
    """A lambda-concave function with a supergradient.

    ``argmax`` is the maximiser when it is known; gradient curves land on
    it instead of stepping past it.
    """

    name: str
    value: Callable
    gradient: Callable
    lam: float
    argmax: Optional[np.ndarray] = None


def quadratic(center=None, dim=2):
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    return Objective("quadratic", lambda x: -0.5 * float(np.sum((x - c) ** 2)), lambda x: -(x - c), -1.0, c)


def linear(g):
    g = np.asarray(g, dtype=float)
    return Objective("linear", lambda x: float(x @ g), lambda x: g.copy(), 0.0)


def neg_distance(p):
    p = np.asarray(p, dtype=float)

    def grad(x):
        v = x - p
        n = float(np.linalg.norm(v))
        return np.zeros_like(v) if n == 0 else -v / n

    return Objective("neg_distance", lambda x: -float(np.linalg.norm(x - p)), grad, 0.0, p)


OBJECTIVES = {"quadratic": quadratic, "linear": linear, "neg_distance": neg_distance}


@dataclass
class DiscreteCurve:
    params: np.ndarray
    points: np.ndarray
    margins: list = field(default_factory=list)

    def __len__(self):
        return len(self.params)

    def to_dict(self):
        return {"params": self.params.tolist(), "points": self.points.tolist(), "margins": list(self.margins)}


def gradient_curve(space, f, x0, h=DEFAULT_STEP, T=1.0):
    """Projected explicit Euler for x' = grad f(x)."""
    x = np.asarray(x0, dtype=float)
    reject_nan(x)
    if not space.contains(x, tol=1e-9):
        raise DomainError("starting point outside the domain")
    x = space.project(x)
    peak = getattr(f, "argmax", None)
    if peak is not None:
        peak = np.asarray(peak, dtype=float)
        if not space.contains(peak, tol=1e-12):
            peak = None
    steps = int(round(T / h))
    pts = [x]
    for _ in range(steps):
        g = np.asarray(f.gradient(x), dtype=float)
        reject_nan(g, f.value(x))
        v = space.tangent_projection(x, g)
        if peak is not None and float(np.linalg.norm(peak - x)) <= h * float(np.linalg.norm(v)):
            x = peak.copy()
            pts.append(x)
            continue
        x = space.project(x + h * v)
        pts.append(x)
    return DiscreteCurve(np.arange(steps + 1) * h, np.array(pts))


def contraction_check(space, f, x0, y0, h=DEFAULT_STEP, T=1.0, C=3.0):
    """|a(t) b(t)| <= exp(lambda t) |a(0) b(0)| with slack C*h."""
    a = gradient_curve(space, f, x0, h, T)
    b = gradient_curve(space, f, y0, h, T)
    d = np.linalg.norm(a.points - b.points, axis=1)
    bound = np.exp(f.lam * a.params) * d[0]
    slack = bound + C * h - d
    k = int(np.argmin(slack))
    margin = float(slack[k])
    return Verdict("contraction", margin >= -VERDICT_TOL, margin, Witness((k,), margin, f"t={a.params[k]:.4g}"),
                   details={"C": C, "h": h, "max_deviation": float(np.max(np.abs(d - bound)))})


def self_contracting_check(curve, h=0.0, max_points=1000):
    """|a(t1) a(t3)| >= |a(t2) a(t3)| for all t1 <= t2 <= t3."""
    P = np.asarray(curve.points if isinstance(curve, DiscreteCurve) else curve, dtype=float)
    if len(P) > max_points:
        P = P[np.unique(np.linspace(0, len(P) - 1, max_points).round().astype(int))]
    D = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
    margin, witness = math.inf, (0, 0, 0)
    for t3 in range(2, len(P)):
        col = D[:t3 + 1, t3]
        prefix = np.minimum.accumulate(col)
        gaps = prefix - col
        t2 = int(np.argmin(gaps))
        if gaps[t2] < margin:
            margin = float(gaps[t2])
            t1 = int(np.argmin(col[: t2 + 1]))
            witness = (t1, t2, t3)
    if not math.isfinite(margin):
        margin = 0.0
    return Verdict("self_contracting", margin >= -h - VERDICT_TOL, margin, Witness(witness, margin))


def _radial_speed(kappa, dist, s):
    if kappa == 0:
        return dist / s
    return float(tg(kappa, dist) / tg(kappa, s))


def radial_curve(space, p, x, kappa=0.0, h=DEFAULT_STEP, s_max=None):
    """(p, kappa)-radial curve started at x, parametrised by s with s(0) = |px|.

    The curve stops when s reaches s_max or varpi/2.
    """
    p = np.asarray(p, dtype=float)
    x = space.project(np.asarray(x, dtype=float))
    s0 = float(np.linalg.norm(x - p))
    limit = varpi(kappa) / 2
    if s0 <= 0 or s0 >= limit:
        raise DomainError("radial curve needs 0 < |px| < varpi/2")
    s_end = min(s_max if s_max is not None else s0 + 1.0, limit)
    s_end = min(s_end, limit - 1e-9) if math.isfinite(limit) else s_end
    params, pts = [s0], [x]
    s = s0
    while s < s_end - 1e-12:
        step = min(h, s_end - s)
        v = x - p
        r = float(np.linalg.norm(v))
        u = space.tangent_projection(x, v / r) if r > 0 else np.zeros_like(v)
        x = space.project(x + step * _radial_speed(kappa, r, s) * u)
        s += step
        params.append(s)
        pts.append(x)
    return DiscreteCurve(np.array(params), np.array(pts))


def _closed_gexp(space, kappa):
    return kappa == 0 and space.kind in ("plane", "halfplane")


def gradient_exponent(space, p, v, kappa=0.0, h=DEFAULT_STEP, closed_form=True):
    """gexp_p(v): endpoint of the radial curve leaving p in the direction of v.

    With ``closed_form`` the planes and half-planes at kappa = 0 return
    proj(p + v) directly, which the integrated curve reproduces.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0:
        return p.copy()
    if closed_form and _closed_gexp(space, kappa):
        return space.project(p + v)
    start = min(h, n)
    curve = radial_curve(space, p, p + start * v / n, kappa, h=h, s_max=n)
    return curve.points[-1]


def gexp_short_check(space, p, vectors, kappa=0.0, h=DEFAULT_STEP, closed_form=True):
    """|gexp v gexp w| <= side{angle(v, w); |v|, |w|} over all pairs."""
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    G = np.array([gradient_exponent(space, p, v, kappa, h, closed_form) for v in V])
    norms = np.linalg.norm(V, axis=1)
    margin, witness = math.inf, (0, 0)
    for i in range(len(V)):
        for j in range(i + 1, len(V)):
            if norms[i] == 0 or norms[j] == 0:
                side = max(norms[i], norms[j])
            else:
                cosang = np.clip(V[i] @ V[j] / (norms[i] * norms[j]), -1.0, 1.0)
                side = float(model_sides(kappa, math.acos(cosang), norms[i], norms[j]))
            m = side - float(np.linalg.norm(G[i] - G[j]))
            if m < margin:
                margin, witness = m, (i, j)
    slack = 0.0 if closed_form and _closed_gexp(space, kappa) else 10 * h
    return Verdict("gexp_short", margin >= -slack - VERDICT_TOL, margin, Witness(witness, margin),
                   kappa=kappa, details={"slack": slack})


def radial_comparison_check(space, p, x_rho, x_sigma, kappa=0.0, h=DEFAULT_STEP, s_max=None, grid=50):
    """|rho(r) sigma(s)| <= side{phi_min; r, s} on a grid, plus radial monotonicity."""
    p = np.asarray(p, dtype=float)
    rho = radial_curve(space, p, x_rho, kappa, h, s_max)
    sigma = radial_curve(space, p, x_sigma, kappa, h, s_max)
    u, w = rho.points[0] - p, sigma.points[0] - p
    phi = math.acos(float(np.clip(u @ w / (np.linalg.norm(u) * np.linalg.norm(w)), -1.0, 1.0)))
    ri = np.unique(np.linspace(0, len(rho) - 1, grid).round().astype(int))
    si = np.unique(np.linspace(0, len(sigma) - 1, grid).round().astype(int))
    r, s = rho.params[ri], sigma.params[si]
    D = np.linalg.norm(rho.points[ri][:, None, :] - sigma.points[si][None, :, :], axis=-1)
    side = model_sides(kappa, phi, r[:, None], s[None, :])
    gap = side - D
    k = np.unravel_index(int(np.argmin(gap)), gap.shape)
    margin = float(gap[k])
    slack = 10 * h
    A = model_angles(kappa, D, r[:, None], s[None, :])
    mono = min(np.nanmin(A[:-1, :] - A[1:, :], initial=math.inf),
               np.nanmin(A[:, :-1] - A[:, 1:], initial=math.inf))
    mono_slack = slack / min(r[0], s[0])
    passed = margin >= -slack and mono >= -mono_slack
    return Verdict("radial_comparison", passed, margin,
                   Witness((int(ri[k[0]]), int(si[k[1]])), margin, "rho index, sigma index"),
                   kappa=kappa, details={"phi_min": phi, "slack": slack, "monotone_margin": float(mono)})


def _resample(S, path, count):
    d = S.d
    arc = d[path[0], path]
    L = arc[-1]
    targets = np.linspace(0.0, L, count)
    idx = np.clip(np.searchsorted(arc, targets), 0, len(path) - 1)
    prev = np.clip(idx - 1, 0, len(path) - 1)
    pick = np.where(np.abs(arc[prev] - targets) <= np.abs(arc[idx] - targets), prev, idx)
    return np.asarray(path)[pick]


def geodesic_convexity_check(S, g1, g2, count=None, allowance=None):
    """Second differences of t -> |g1(t) g2(t)| stay above -allowance.

    The allowance defaults to the discretisation budget of the net.
    """
    count = count or max(len(g1), len(g2))
    a = _resample(S, g1, count)
    b = _resample(S, g2, count)
    f = S.d[a, b]
    if count < 3:
        return Verdict("geodesic_convexity", True, math.inf, None, vacuous=True)
    second = f[:-2] - 2 * f[1:-1] + f[2:]
    k = int(np.argmin(second))
    margin = float(second[k])
    if allowance is None:
        allowance = float(getattr(S, "budget", 0.0) or 0.0)
    return Verdict("geodesic_convexity", margin >= -allowance - VERDICT_TOL, margin, Witness((k + 1,), margin),
                   details={"allowance": allowance})


@dataclass
class Development:
    rho: np.ndarray
    theta: np.ndarray
    points: np.ndarray
    margins: np.ndarray
    verdict: Verdict

    @property
    def convex(self):
        return self.verdict.passed


def develop_curve(kappa, rho, chords, delta=0.0, tol=VERDICT_TOL):
    """Chain of model triangles (p, x_i-1, x_i) turning monotonically about p.

    rho[i] = |p x_i|, chords[i-1] = |x_i-1 x_i|. The convexity margin at an
    interior vertex is pi minus the sum of the two model angles there; with a
    positive ``delta`` the margin is computed from angle intervals.
    """
    rho = np.asarray(rho, dtype=float)
    chords = np.asarray(chords, dtype=float)
    reject_nan(rho, chords)
    if len(chords) != len(rho) - 1:
        raise DomainError("need one chord per consecutive pair")
    w = varpi(kappa)
    if (rho <= 0).any() or (rho >= w).any():
        raise DomainError("distances to p must lie in (0, varpi)")
    steps = []
    for i, c in enumerate(chords):
        a = model_angle(kappa, c, rho[i], rho[i + 1])
        if a is None:
            raise DomainError(f"undefined model triangle at segment {i}")
        steps.append(a)
    theta = np.concatenate([[0.0], np.cumsum(steps)])
    points = ModelSpace(kappa, 2).polar(rho, theta)
    if len(rho) < 3:
        verdict = Verdict("development", True, math.inf, None, kappa=kappa, vacuous=True)
        return Development(rho, theta, points, np.array([]), verdict)
    before = model_angles(kappa, rho[:-2], rho[1:-1], chords[:-1])
    after = model_angles(kappa, rho[2:], rho[1:-1], chords[1:])
    margins = math.pi - (before + after)
    if delta > 0:
        lo_b, _ = angle_interval(kappa, rho[:-2], rho[1:-1], chords[:-1], delta)
        lo_a, _ = angle_interval(kappa, rho[2:], rho[1:-1], chords[1:], delta)
        checked = math.pi - (lo_b + lo_a)
    else:
        checked = margins
    k = int(np.argmin(checked))
    margin = float(checked[k])
    verdict = Verdict("development", margin >= -tol, margin, Witness((k + 1,), margin, "vertex"), kappa=kappa,
                      details={"nominal_margin": float(margins.min()), "budget": delta})
    return Development(rho, theta, points, margins, verdict)


def develop_path(S, p, path, kappa=0.0, segments=4, keep=()):
    """Development of a vertex path of S with respect to p.

    The path is subsampled to about ``segments`` pieces; vertices listed in
    ``keep`` stay in the sample.
    """
    path = list(path)
    if p in path:
        raise DomainError("p lies on the path")
    take = set(np.linspace(0, len(path) - 1, min(len(path), segments + 1)).round().astype(int).tolist())
    take |= {path.index(v) for v in keep if v in path}
    verts = np.asarray(path)[sorted(take)]
    d = S.d
    slack = float(getattr(S, "slack", S.budget))
    return develop_curve(kappa, d[p, verts], d[verts[:-1], verts[1:]], delta=slack)
