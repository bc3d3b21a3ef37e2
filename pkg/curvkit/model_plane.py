"""Numerical kernel for the model space of constant curvature kappa.

Trig functions sn/cs/md, the cosine law in both directions, model triangles,
Alexandrov's lemma sign test and the hemisphere check. Points of the model
space are stored in ambient coordinates: flat m-space for kappa = 0, the
sphere of radius 1/sqrt(kappa) in (m+1)-space for kappa > 0 and the upper
sheet of the hyperboloid <v, v> = 1/kappa (Minkowski form) for kappa < 0.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from curvkit.utils import (
    ANGLE_TOL,
    BOUNDARY_TOL,
    LENGTH_TOL,
    ConsistencyFault,
    DomainError,
    reject_nan,
)

logger = logging.getLogger(__name__)


def varpi(kappa):
    """Diameter of the model space: pi/sqrt(kappa) for kappa > 0, inf otherwise."""
    reject_nan(kappa)
    return math.pi / math.sqrt(kappa) if kappa > 0 else math.inf


@dataclass(frozen=True)
class Curvature:
    kappa: float

    def __post_init__(self):
        reject_nan(self.kappa)

    @property
    def varpi(self):
        return varpi(self.kappa)


def _out(values, scalar):
    return float(values) if scalar else values


def sn(kappa, x):
    reject_nan(kappa, x)
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if kappa > 0:
        k = math.sqrt(kappa)
        out = np.sin(k * x) / k
    elif kappa < 0:
        k = math.sqrt(-kappa)
        out = np.sinh(k * x) / k
    else:
        out = x * 1.0
    return _out(out, scalar)


def cs(kappa, x):
    reject_nan(kappa, x)
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if kappa > 0:
        out = np.cos(math.sqrt(kappa) * x)
    elif kappa < 0:
        out = np.cosh(math.sqrt(-kappa) * x)
    else:
        out = np.ones_like(x)
    return _out(out, scalar)


def tg(kappa, x):
    return sn(kappa, x) / cs(kappa, x)


def md(kappa, x):
    """Modified distance: md'' + kappa*md = 1, md(0) = md'(0) = 0, frozen at 2/kappa past varpi."""
    reject_nan(kappa, x)
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("md expects nonnegative arguments")
    if kappa > 0:
        k = math.sqrt(kappa)
        out = np.where(x >= math.pi / k, 2.0 / kappa, 2.0 * np.sin(k * x / 2) ** 2 / kappa)
    elif kappa < 0:
        k = math.sqrt(-kappa)
        out = 2.0 * np.sinh(k * x / 2) ** 2 / (-kappa)
    else:
        out = x * x / 2.0
    return _out(out, scalar)


def md_inverse(kappa, v):
    """Inverse of md on [0, varpi]; values above 2/kappa map to varpi."""
    scalar = np.ndim(v) == 0
    v = np.maximum(np.asarray(v, dtype=float), 0.0)
    if kappa > 0:
        k = math.sqrt(kappa)
        out = 2.0 * np.arcsin(np.sqrt(np.clip(kappa * v / 2.0, 0.0, 1.0))) / k
    elif kappa < 0:
        k = math.sqrt(-kappa)
        out = 2.0 * np.arcsinh(np.sqrt(-kappa * v / 2.0)) / k
    else:
        out = np.sqrt(2.0 * v)
    return _out(out, scalar)


@dataclass(frozen=True)
class TriangleSides:
    a: float
    b: float
    c: float

    @property
    def perimeter(self):
        return self.a + self.b + self.c

    def defined(self, kappa):
        return model_angle(kappa, self.a, self.b, self.c) is not None


def model_angles(kappa, a, b, c, boundary_tol=BOUNDARY_TOL):
    """Vectorised model angle opposite a between sides b and c; NaN where undefined.

    Uses tan(phi/2) = sqrt(sn(s-b) sn(s-c) / (sn(s) sn(s-a))) with s the
    semi-perimeter, which stays accurate for thin triangles.
    """
    reject_nan(kappa, a, b, c)
    a, b, c = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(b, dtype=float), np.asarray(c, dtype=float)
    )
    slack = LENGTH_TOL * np.maximum(1.0, a + b + c)
    sa = (b + c - a) / 2
    sb = (a + c - b) / 2
    sc = (a + b - c) / 2
    s = (a + b + c) / 2
    ok = (b > 0) & (c > 0) & (sa >= -slack) & (sb >= -slack) & (sc >= -slack)
    if kappa > 0:
        w = varpi(kappa)
        ok &= (a + b + c < 2 * w - boundary_tol) & (b < w) & (c < w)
        # keep sn arguments inside [0, varpi) for masked-out entries too
        s = np.where(ok, s, 0.0)
    sa = np.where(ok, np.maximum(sa, 0.0), 0.0)
    sb = np.where(ok, np.maximum(sb, 0.0), 0.0)
    sc = np.where(ok, np.maximum(sc, 0.0), 0.0)
    num = np.sqrt(np.maximum(sn(kappa, sb) * sn(kappa, sc), 0.0))
    den = np.sqrt(np.maximum(sn(kappa, s) * sn(kappa, sa), 0.0))
    phi = 2.0 * np.arctan2(num, den)
    return np.where(ok, phi, np.nan)


def model_angle(kappa, a, b, c) -> Optional[float]:
    """Angle opposite a in the model triangle with sides a, b, c, or None when undefined."""
    phi = float(model_angles(kappa, a, b, c))
    return None if math.isnan(phi) else phi


def model_sides(kappa, phi, b, c):
    """Vectorised cosine law for b, c in [0, varpi]; no domain guard."""
    phi = np.asarray(phi, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    value = md(kappa, np.abs(b - c)) + 2.0 * sn(kappa, b) * sn(kappa, c) * np.sin(phi / 2) ** 2
    if kappa > 0:
        value = np.minimum(value, 2.0 / kappa)
    return md_inverse(kappa, value)


def model_side(kappa, phi, b, c):
    """Third side of the model triangle with angle phi between sides b and c.

    A negative side flips the angle: side{phi; b, -c} = side{pi - phi; b, c}.
    For kappa > 0 and b + c >= varpi the value at phi = pi is the continuous
    limit 2*varpi - (b + c).
    """
    reject_nan(kappa, phi, b, c)
    if c < 0:
        return model_side(kappa, math.pi - phi, b, -c)
    if b < 0:
        return model_side(kappa, math.pi - phi, -b, c)
    if phi < -ANGLE_TOL or phi > math.pi + ANGLE_TOL:
        raise DomainError(f"angle {phi} outside [0, pi]")
    phi = min(max(phi, 0.0), math.pi)
    w = varpi(kappa)
    if b >= w or c >= w:
        raise DomainError(f"sides must be shorter than varpi={w}")
    return float(model_sides(kappa, phi, b, c))


def extended_model_angle(kappa, a, b, c):
    """Model angle extended to all triples for kappa > 0.

    0 when a side sits on a shortest path through the other two, pi when
    no model triangle exists otherwise.
    """
    reject_nan(kappa, a, b, c)
    if kappa <= 0:
        raise DomainError("extended_model_angle needs kappa > 0")
    if b <= 0 or c <= 0:
        raise DomainError("extended_model_angle needs b, c > 0")
    phi = model_angle(kappa, a, b, c)
    if phi is not None:
        return phi
    tol = LENGTH_TOL * max(1.0, a + b + c)
    if abs(b + a - c) <= tol or abs(c + a - b) <= tol:
        return 0.0
    return math.pi


def _sign(value, tol):
    if value > tol:
        return 1
    if value < -tol:
        return -1
    return 0


def alexandrov_sign(kappa, a, b, a2, b2, x, tol=BOUNDARY_TOL):
    """Common sign of the two expressions in Alexandrov's lemma, or None when undefined.

    With z inside the segment [p r], |pz| = b, |zr| = b2, |pq| = a, |qr| = a2
    and |zq| = x, the expressions are
    angle{a; b, x} + angle{a2; b2, x} - pi and angle{a2; b + b2, a} - angle{x; a, b}.
    """
    reject_nan(kappa, a, b, a2, b2, x)
    if min(a, b, a2, b2, x) <= 0:
        raise DomainError("alexandrov_sign expects positive lengths")
    if kappa > 0 and a + a2 + b + b2 >= 2 * varpi(kappa) - BOUNDARY_TOL:
        return None
    angles = (
        model_angle(kappa, a, b, x),
        model_angle(kappa, a2, b2, x),
        model_angle(kappa, a2, b + b2, a),
        model_angle(kappa, x, a, b),
    )
    if any(t is None for t in angles):
        return None
    e1 = angles[0] + angles[1] - math.pi
    e2 = angles[2] - angles[3]
    s1, s2 = _sign(e1, tol), _sign(e2, tol)
    if s1 * s2 < 0:
        raise ConsistencyFault(
            f"Alexandrov lemma signs disagree: {e1:+.3e} vs {e2:+.3e} "
            f"(kappa={kappa}, a={a}, b={b}, a'={a2}, b'={b2}, x={x})"
        )
    return s1 if s1 != 0 else s2


class ModelSpace:
    """The m-dimensional model space of curvature kappa in ambient coordinates."""

    def __init__(self, kappa, dim=2):
        reject_nan(kappa)
        self.kappa = float(kappa)
        self.dim = int(dim)
        self.curved = self.kappa != 0
        self.ambient_dim = self.dim + (1 if self.curved else 0)
        self.radius = 1.0 / math.sqrt(abs(self.kappa)) if self.curved else math.inf
        self.varpi = varpi(self.kappa)
        # indices of the two coordinates spanning the tangent plane at the origin
        self._plane = (1, 2) if self.curved else (0, 1)

    def __repr__(self):
        return f"ModelSpace(kappa={self.kappa}, dim={self.dim})"

    def origin(self):
        o = np.zeros(self.ambient_dim)
        if self.curved:
            o[0] = self.radius
        return o

    def inner(self, u, w):
        u = np.asarray(u, dtype=float)
        w = np.asarray(w, dtype=float)
        prod = u * w
        if self.kappa < 0:
            return np.sum(prod[..., 1:], axis=-1) - prod[..., 0]
        return np.sum(prod, axis=-1)

    def normalize(self, v):
        v = np.array(v, dtype=float)
        if self.kappa > 0:
            n = np.linalg.norm(v, axis=-1, keepdims=True)
            return v * (self.radius / n)
        if self.kappa < 0:
            rest = np.sum(v[..., 1:] ** 2, axis=-1)
            v[..., 0] = np.sqrt(self.radius**2 + rest)
        return v

    def tangent_project(self, p, v):
        """Component of v tangent at p."""
        v = np.asarray(v, dtype=float)
        if not self.curved:
            return v
        return v - self.kappa * np.asarray(self.inner(p, v))[..., None] * p

    def tangent_norm(self, v):
        return np.sqrt(np.maximum(self.inner(v, v), 0.0))

    def at_origin(self, vec):
        """Embed a vector of R^m as a tangent vector at the origin."""
        vec = np.asarray(vec, dtype=float)
        if not self.curved:
            return vec
        pad = np.zeros(vec.shape[:-1] + (1,))
        return np.concatenate([pad, vec], axis=-1)

    def distance(self, u, w):
        u = np.asarray(u, dtype=float)
        w = np.asarray(w, dtype=float)
        if self.kappa > 0:
            diff = np.linalg.norm(u - w, axis=-1)
            tot = np.linalg.norm(u + w, axis=-1)
            return self.radius * 2.0 * np.arctan2(diff, tot)
        if self.kappa < 0:
            q = self.inner(u - w, u - w)
            return 2.0 * self.radius * np.arcsinh(np.sqrt(np.maximum(q, 0.0)) / (2.0 * self.radius))
        return np.linalg.norm(u - w, axis=-1)

    def pairwise(self, points):
        points = np.asarray(points, dtype=float)
        d = self.distance(points[:, None, :], points[None, :, :])
        d = (d + d.T) / 2.0
        np.fill_diagonal(d, 0.0)
        return d

    def exp(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        if not self.curved:
            return p + v
        n = np.asarray(self.tangent_norm(v))[..., None]
        safe = np.where(n > 0, n, 1.0)
        out = cs(self.kappa, n) * p + np.where(n > 0, sn(self.kappa, n) / safe, 0.0) * v
        return self.normalize(out)

    def log(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if not self.curved:
            return q - p
        d = np.asarray(self.distance(p, q))[..., None]
        u = self.tangent_project(p, q)
        nu = np.asarray(self.tangent_norm(u))[..., None]
        ok = (nu > 0) & (d > 0)
        return np.where(ok, u * (d / np.where(ok, nu, 1.0)), 0.0)

    def geodesic_point(self, p, q, t):
        if t < -1e-12 or t > 1 + 1e-12:
            raise DomainError(f"geodesic parameter {t} outside [0, 1]")
        d = float(self.distance(p, q))
        if d >= self.varpi - BOUNDARY_TOL and d > 0:
            raise DomainError("no unique geodesic between (nearly) antipodal points")
        return self.exp(p, min(max(t, 0.0), 1.0) * self.log(p, q))

    def tangent_basis(self, p):
        """Orthonormal basis (rows) of the tangent space at p."""
        p = np.asarray(p, dtype=float)
        basis = []
        for e in np.eye(self.ambient_dim):
            v = self.tangent_project(p, e)
            for u in basis:
                v = v - self.inner(u, v) * u
            n = float(self.tangent_norm(v))
            if n > 1e-8:
                basis.append(v / n)
            if len(basis) == self.dim:
                break
        return np.array(basis)

    def polar(self, r, theta):
        """Point at distance r from the origin in direction theta of the (e1, e2) plane."""
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        r, theta = np.broadcast_arrays(r, theta)
        v = np.zeros(r.shape + (self.ambient_dim,))
        i, j = self._plane
        v[..., i] = r * np.cos(theta)
        v[..., j] = r * np.sin(theta)
        return self.exp(np.broadcast_to(self.origin(), v.shape), v)

    def to_polar(self, points):
        points = np.asarray(points, dtype=float)
        o = np.broadcast_to(self.origin(), points.shape)
        r = self.distance(o, points)
        v = self.log(o, points)
        i, j = self._plane
        return r, np.arctan2(v[..., j], v[..., i])

    def rotate_about_origin(self, points, angle):
        points = np.array(points, dtype=float)
        i, j = self._plane
        c, s = math.cos(angle), math.sin(angle)
        x, y = points[..., i].copy(), points[..., j].copy()
        points[..., i] = c * x - s * y
        points[..., j] = s * x + c * y
        return points

    def orientation(self, a, b, c):
        """Signed orientation of three points of the model plane (dim 2)."""
        def lift(v):
            v = np.asarray(v, dtype=float)
            return np.append(v, 1.0) if not self.curved else v

        return float(np.linalg.det(np.array([lift(a), lift(b), lift(c)])))

    def sample_ball(self, n, radius, rng):
        """n points of the ball of the given radius about the origin."""
        dirs = rng.normal(size=(n, self.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        r = radius * rng.random(n) ** (1.0 / self.dim)
        return self.exp(np.broadcast_to(self.origin(), (n, self.ambient_dim)), self.at_origin(dirs * r[:, None]))


def _space_for(kappa, point):
    point = np.asarray(point, dtype=float)
    return ModelSpace(kappa, point.shape[-1] - (1 if kappa != 0 else 0))


def model_distance(kappa, P, Q):
    return float(_space_for(kappa, P).distance(P, Q))


def geodesic_point(kappa, P, Q, t):
    return _space_for(kappa, P).geodesic_point(P, Q, t)


@dataclass
class ModelConfig:
    """A list of points of the model space, stored in ambient coordinates."""

    kappa: float
    points: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    def __len__(self):
        return len(self.points)

    @property
    def space(self):
        return _space_for(self.kappa, self.points[0])

    def distances(self):
        return self.space.pairwise(self.points)


def lay_triangle(kappa, sides):
    """Realise the model triangle with sides (a, b, c).

    The first point is the vertex opposite a, the second sits at distance c
    from it along e1, the third at distance b on the positive side.
    """
    a, b, c = (sides.a, sides.b, sides.c) if isinstance(sides, TriangleSides) else sides
    reject_nan(a, b, c)
    space = ModelSpace(kappa, 2)
    o = space.origin()
    if b <= 0 or c <= 0:
        if abs(a - max(b, c)) > LENGTH_TOL * max(1.0, a) or min(b, c) < 0:
            raise DomainError(f"undefined model triangle {a, b, c}")
        return ModelConfig(kappa, np.vstack([o, space.polar(c, 0.0), space.polar(b, 0.0)]))
    phi = model_angle(kappa, a, b, c)
    if phi is None:
        raise DomainError(f"undefined model triangle {a, b, c} for kappa={kappa}")
    return ModelConfig(kappa, np.vstack([o, space.polar(c, 0.0), space.polar(b, phi)]))


def angle_interval(kappa, a, b, c, delta):
    """Range of the model angle when each side is perturbed by -delta, 0 or +delta.

    Perturbed triples are clamped back into the set of defined triangles, so
    the interval is NaN only where the nominal triangle is.
    """
    a, b, c = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(b, dtype=float), np.asarray(c, dtype=float)
    )
    nominal = model_angles(kappa, a, b, c)
    if delta <= 0:
        return nominal, nominal
    off = np.array([-delta, 0.0, delta])
    ap = a[..., None, None, None] + off[:, None, None]
    bp = np.maximum(b[..., None, None, None] + off[None, :, None], 1e-12)
    cp = np.maximum(c[..., None, None, None] + off[None, None, :], 1e-12)
    if kappa > 0:
        w = varpi(kappa)
        bp = np.minimum(bp, w - 4 * BOUNDARY_TOL)
        cp = np.minimum(cp, w - 4 * BOUNDARY_TOL)
        upper = np.minimum(bp + cp, 2 * w - bp - cp - 4 * BOUNDARY_TOL)
    else:
        upper = bp + cp
    ap = np.clip(ap, np.abs(bp - cp), np.maximum(upper, np.abs(bp - cp)))
    angles = model_angles(kappa, ap, bp, cp).reshape(a.shape + (27,))
    lo = np.fmin.reduce(angles, axis=-1)
    hi = np.fmax.reduce(angles, axis=-1)
    undefined = np.isnan(nominal)
    return np.where(undefined, np.nan, lo), np.where(undefined, np.nan, hi)


@dataclass
class HemisphereResult:
    center: np.ndarray
    open: bool
    margin: float
    length: float
    witness: Optional[np.ndarray] = None

    @property
    def contained(self):
        return self.margin >= -1e-6


def hemisphere_check(kappa, vertices, samples_per_edge=32):
    """Find a hemisphere containing a closed polyline on the model sphere.

    The centre is the midpoint of the chord joining the first vertex to the
    point half-way round the curve. A curve of length exactly 2*varpi only
    gets closed containment, with the centre taken as the normal of the
    best-fitting plane.
    """
    if kappa <= 0:
        raise DomainError("hemisphere_check needs kappa > 0")
    V = np.atleast_2d(np.asarray(vertices, dtype=float))
    if len(V) < 2:
        raise DomainError("a closed polyline needs at least two vertices")
    space = ModelSpace(kappa, V.shape[1] - 1)
    V = space.normalize(V)
    W = np.roll(V, -1, axis=0)
    lengths = space.distance(V, W)
    if np.any(lengths >= space.varpi - BOUNDARY_TOL):
        raise DomainError("polyline edge too long to define a unique arc")
    L = float(lengths.sum())
    if L > 2 * space.varpi + BOUNDARY_TOL:
        raise DomainError(f"polyline length {L:.6f} exceeds 2*varpi = {2 * space.varpi:.6f}")

    ts = np.linspace(0.0, 1.0, samples_per_edge, endpoint=False)
    samples = np.vstack([space.exp(v, ts[:, None] * space.log(v, w)) for v, w in zip(V, W)])

    R = space.radius
    if L < 2 * space.varpi - BOUNDARY_TOL:
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        i = int(np.searchsorted(cum, L / 2, side="right") - 1)
        i = min(i, len(V) - 1)
        t = (L / 2 - cum[i]) / lengths[i] if lengths[i] > 0 else 0.0
        half = space.geodesic_point(V[i], W[i], t)
        center = space.geodesic_point(V[0], half, 0.5) / R
        is_open = True
    else:
        _, _, vt = np.linalg.svd(samples)
        center = vt[-1]
        if np.sum(samples @ center) < 0:
            center = -center
        is_open = False
    cosines = samples @ center / R
    k = int(np.argmin(cosines))
    margin = float(cosines[k])
    if is_open and margin <= 0:
        logger.warning("hemisphere construction left a sample on the boundary circle")
        is_open = False
    witness = samples[k] if margin <= 0 else None
    return HemisphereResult(center=center, open=is_open, margin=margin, length=L, witness=witness)
