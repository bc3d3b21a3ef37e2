"""Ball intersections, Kirszbraun extension, barycentric simplices, webs and the Reshetnyak fold.

All targets are model spaces. Points are ambient coordinate vectors of a
ModelSpace (plain R^m vectors when kappa = 0).
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from curvkit.comparison import Verdict, is_cbb
from curvkit.metric_core import Witness
from curvkit.model_plane import ModelSpace, alexandrov_sign, md, model_angle, sn, varpi
from curvkit.utils import DomainError, FoldConfigurationError, NonShortMap, emitters, reject_nan

logger = logging.getLogger(__name__)

FEASIBLE_TOL = 1e-7


def _space_of(kappa, points):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return ModelSpace(kappa, points.shape[-1] - (1 if kappa != 0 else 0))


@dataclass
class BallSystem:
    kappa: float
    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.radii = np.asarray(self.radii, dtype=float).reshape(-1)
        reject_nan(self.kappa, self.centers, self.radii)
        if len(self.radii) != len(self.centers) and self.radii.size:
            raise DomainError("one radius per center")
        if (self.radii < 0).any() or not np.isfinite(self.radii).all():
            raise DomainError("radii must be finite and nonnegative")

    @property
    def space(self):
        return _space_of(self.kappa, self.centers)

    def __len__(self):
        return 0 if self.radii.size == 0 else len(self.centers)


@dataclass
class BallResult:
    point: np.ndarray
    value: float
    feasible: bool

    @property
    def margin(self):
        return -self.value


def _excess(space, centers, radii, q):
    return space.distance(centers, q) - radii


def ball_intersection(kappa, centers, radii, tol=FEASIBLE_TOL, iterations=500):
    """Minimise h(q) = max_i (|y_i q| - r_i); feasible iff the optimum is at most tol."""
    if kappa > 0:
        raise DomainError("ball_intersection is implemented for kappa <= 0 only")
    if len(radii) == 0:
        return BallResult(ModelSpace(kappa, 2).origin(), -math.inf, True)
    system = BallSystem(kappa, centers, radii)
    space = system.space
    Y, r = system.centers, system.radii

    # Polyak subgradient descent on the md surrogate, target value 0
    target = md(kappa, r)
    q = space.normalize(Y.mean(axis=0))
    best_q, best_h = q, float(np.max(_excess(space, Y, r, q)))
    for _ in range(iterations):
        d = space.distance(Y, q)
        g_val = md(kappa, d) - target
        top = g_val.max()
        if top <= 0:
            break
        active = np.flatnonzero(g_val >= top - 1e-10)
        logs = space.log(q, Y[active])
        dd = d[active]
        factor = np.where(dd > 0, sn(kappa, dd) / np.where(dd > 0, dd, 1.0), 1.0)
        grad = -(factor[:, None] * logs).mean(axis=0)
        gn = float(space.inner(grad, grad))
        if gn <= 1e-30:
            break
        q = space.exp(q, -(top / gn) * grad)
        h = float(np.max(_excess(space, Y, r, q)))
        if h < best_h:
            best_q, best_h = q, h

    # epigraph polish in the exponential chart at the warm start
    q0 = best_q
    basis = space.tangent_basis(q0)

    def point(u):
        return space.exp(q0, u @ basis)

    cons = [{"type": "ineq", "fun": lambda z: z[-1] - _excess(space, Y, r, point(z[:-1]))}]
    z0 = np.append(np.zeros(len(basis)), best_h)
    res = minimize(lambda z: z[-1], z0, method="SLSQP", constraints=cons,
                   options={"ftol": 1e-14, "maxiter": 500})
    cand = point(res.x[:-1])
    h = float(np.max(_excess(space, Y, r, cand)))
    if h < best_h:
        best_q, best_h = cand, h
    return BallResult(best_q, best_h, best_h <= tol)


def grid_ball_oracle(centers, radii, resolution=1e-3):
    """Brute-force feasibility in E^2: (feasible, grid minimum of h)."""
    C = np.asarray(centers, dtype=float).reshape(-1, 2)
    r = np.asarray(radii, dtype=float).reshape(-1)
    lo, hi = C.min(axis=0), C.max(axis=0)
    xs = np.arange(lo[0], hi[0] + resolution, resolution)
    ys = np.arange(lo[1], hi[1] + resolution, resolution)
    best = math.inf
    for x in xs:
        pts = np.column_stack([np.full(len(ys), x), ys])
        h = (np.linalg.norm(pts[:, None, :] - C[None, :, :], axis=-1) - r).max(axis=1)
        best = min(best, float(h.min()))
    return best <= resolution / math.sqrt(2), best


@dataclass
class ExtensionResult:
    point: Optional[np.ndarray]
    feasible: bool
    margin: float
    soundness_fault: bool = False


def kirszbraun_extend(M, p, xs, images, kappa=0.0, tol=FEASIBLE_TOL, check_source=True):
    """Extend the short map x_i -> y_i to p.

    An infeasible answer on a source passing is_cbb is recorded as a soundness fault.
    """
    if kappa > 0:
        raise DomainError("kirszbraun_extend needs kappa <= 0")
    xs = list(xs)
    Y = np.atleast_2d(np.asarray(images, dtype=float))
    if len(Y) != len(xs):
        raise DomainError("one image per source point")
    d = np.asarray(M.d)
    space = _space_of(kappa, Y)
    DY = space.pairwise(Y)
    for i, j in itertools.combinations(range(len(xs)), 2):
        stretch = DY[i, j] - d[xs[i], xs[j]]
        if stretch > tol:
            raise NonShortMap(f"|y{i} y{j}| exceeds |x{i} x{j}| by {stretch:.3e}")
    res = ball_intersection(kappa, Y, d[p, xs], tol=tol)
    if res.feasible:
        return ExtensionResult(res.point, True, res.margin)
    fault = False
    if check_source and is_cbb(M.sub([p] + xs), kappa).passed:
        fault = True
        logger.error("Extension infeasible although the source passes is_cbb (margin %.3e)", res.margin)
    return ExtensionResult(None, False, res.margin, fault)


# -- barycentric simplex --------------------------------------------------

@dataclass(frozen=True)
class SimplexWeights:
    values: tuple

    def __post_init__(self):
        w = np.asarray(self.values, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DomainError("weights must be a nonempty vector")
        if (w < -1e-12).any() or abs(w.sum() - 1.0) > 1e-9:
            raise DomainError(f"weights must be nonnegative and sum to 1, got {w}")
        w = np.maximum(w, 0.0)
        object.__setattr__(self, "values", tuple(w / w.sum()))

    def __len__(self):
        return len(self.values)

    @property
    def array(self):
        return np.asarray(self.values)


def _radius_guard(kappa, space, A):
    if kappa <= 0:
        return
    center = space.normalize(A.mean(axis=0))
    if (space.distance(A, center) >= varpi(kappa) / 2).any():
        raise DomainError("anchors must lie in a ball of radius below varpi/2")


def barycentric_point(kappa, anchors, weights, grad_tol=1e-9, max_iter=10000):
    """argmin_q sum_i w_i md(|a_i q|)."""
    A = np.atleast_2d(np.asarray(anchors, dtype=float))
    w = weights.array if isinstance(weights, SimplexWeights) else SimplexWeights(tuple(weights)).array
    if len(w) != len(A):
        raise DomainError("one weight per anchor")
    space = _space_of(kappa, A)
    _radius_guard(kappa, space, A)

    def value(q):
        return float(w @ md(kappa, space.distance(A, q)))

    def gradient(q):
        dd = space.distance(A, q)
        factor = np.where(dd > 0, sn(kappa, dd) / np.where(dd > 0, dd, 1.0), 1.0)
        return -((w * factor)[:, None] * space.log(q, A)).sum(axis=0)

    q = A[int(np.argmax(w))].copy()
    f = value(q)
    for _ in range(max_iter):
        g = gradient(q)
        gn2 = float(space.inner(g, g))
        if math.sqrt(max(gn2, 0.0)) < grad_tol:
            break
        t = 1.0
        cand = space.exp(q, -t * g)
        fc = value(cand)
        while fc > f - 0.5 * t * gn2 and t >= 1e-12:
            t /= 2
            cand = space.exp(q, -t * g)
            fc = value(cand)
        if fc > f:
            break
        q, f = cand, fc
    return q


def simplex_grid(k, N):
    """Compositions of N into k+1 parts, as weight vectors."""
    out = []
    for bars in itertools.combinations(range(N + k), k):
        parts, prev = [], -1
        for b in bars + (N + k,):
            parts.append(b - prev - 1)
            prev = b
        out.append(tuple(parts))
    return out


def barycentric_lipschitz_estimate(kappa, anchors, resolution=8):
    """max over grid neighbours of |s(w) s(w')| / |w - w'|_1."""
    A = np.atleast_2d(np.asarray(anchors, dtype=float))
    k = len(A) - 1
    if k == 0:
        return 0.0
    space = _space_of(kappa, A)
    N = int(resolution)
    cache = {}

    def image(c):
        if c not in cache:
            cache[c] = barycentric_point(kappa, A, np.asarray(c, dtype=float) / N)
        return cache[c]

    best = 0.0
    for c in simplex_grid(k, N):
        for i, j in itertools.permutations(range(k + 1), 2):
            if c[j] == 0:
                continue
            nb = list(c)
            nb[i] += 1
            nb[j] -= 1
            ratio = float(space.distance(image(c), image(tuple(nb)))) / (2.0 / N)
            best = max(best, ratio)
    return best


# -- webs -----------------------------------------------------------------

@dataclass
class WebResult:
    anchors: tuple
    web: list
    inner_web: list


def _pareto_minimal(F):
    n = len(F)
    keep = np.ones(n, dtype=bool)
    for v in range(n):
        dominated = (F <= F[v]).all(axis=1) & (F < F[v]).any(axis=1)
        keep[v] = not dominated.any()
    return np.flatnonzero(keep)


def web_compute(M, anchors, kappa=0.0, status_callback=None):
    """Pareto-minimal preimage of v -> (md |a_i v|)_i and the inner web."""
    emit_status, _ = emitters(status_callback)
    anchors = tuple(int(a) for a in anchors)
    if len(set(anchors)) != len(anchors) or not anchors:
        raise DomainError("anchors must be distinct and nonempty")
    d = np.asarray(M.d)
    F = md(kappa, d[list(anchors), :].T)
    web = set(_pareto_minimal(F).tolist())
    covered = set()
    for size in range(1, len(anchors)):
        for sub in itertools.combinations(range(len(anchors)), size):
            covered |= set(_pareto_minimal(F[:, list(sub)]).tolist())
    emit_status(f"web of {len(anchors)} anchors: {len(web)} vertices")
    return WebResult(anchors, sorted(web), sorted(web - covered))


# -- Reshetnyak fold ------------------------------------------------------

class FoldMap:
    """Short map from the model triangle (p~, x~, y~) onto the dotted quadrangle (p., x., z., y.).

    Two triangle pieces move isometrically, three circular sectors collapse
    onto segments and the remaining core goes to z.
    """

    def __init__(self, kappa, px, py, xy, xz, dot_pz):
        reject_nan(kappa, px, py, xy, xz, dot_pz)
        if not 0 <= xz <= xy:
            raise FoldConfigurationError("z must lie on [x y]")
        self.kappa = float(kappa)
        self.space = ModelSpace(kappa, 2)
        s = self.space
        self.px, self.py, self.xy, self.xz, self.yz = px, py, xy, xz, xy - xz
        self.dot_pz = dot_pz
        gamma = model_angle(kappa, xy, px, py)
        if gamma is None:
            raise FoldConfigurationError("undefined model triangle")
        self.gamma = gamma
        self.p = s.origin()
        self.x = s.polar(px, 0.0)
        self.y = s.polar(py, gamma)
        self.z = s.geodesic_point(self.x, self.y, xz / xy if xy > 0 else 0.0)
        self.pz = float(s.distance(self.p, self.z))
        if dot_pz > self.pz + 1e-12:
            raise FoldConfigurationError(f"|p.z.| = {dot_pz} exceeds |p~z~| = {self.pz}")
        sign = alexandrov_sign(kappa, px, xz, py, self.yz, dot_pz)
        if sign not in (0, 1):
            raise FoldConfigurationError(f"dotted quadrangle is not concave at z (sign {sign})")
        alpha = model_angle(kappa, xz, px, dot_pz)
        beta = model_angle(kappa, self.yz, py, dot_pz)
        if alpha is None or beta is None or alpha > gamma - beta + 1e-12:
            raise FoldConfigurationError("dotted angles do not fit inside the model angle at p~")
        self.alpha, self.beta = alpha, min(beta, gamma - alpha)
        self.z_a = s.polar(dot_pz, self.alpha)
        self.z_b = s.polar(dot_pz, gamma - self.beta)
        self.dot_p = s.origin()
        self.dot_z = s.polar(dot_pz, 0.0)
        self.dot_x = s.polar(px, -self.alpha)
        self.dot_y = s.polar(py, self.beta)

    def _same_side_as_p(self, a, b, w, eps):
        s = self.space
        ref = s.orientation(a, b, self.p)
        return math.copysign(1.0, ref) * s.orientation(a, b, w) >= -eps

    def region(self, w):
        s = self.space
        r, theta = s.to_polar(np.asarray(w, dtype=float))
        r = float(r)
        theta = float(theta) if r > 0 else 0.0
        eps = 1e-12
        if theta <= self.alpha + eps and self._same_side_as_p(self.x, self.z_a, w, eps):
            return "piece_x"
        if theta >= self.gamma - self.beta - eps and self._same_side_as_p(self.z_b, self.y, w, eps):
            return "piece_y"
        if r <= self.dot_pz + eps and self.alpha - eps <= theta <= self.gamma - self.beta + eps:
            return "sector_p"
        if float(s.distance(self.x, w)) <= self.xz + eps:
            return "sector_x"
        if float(s.distance(self.y, w)) <= self.yz + eps:
            return "sector_y"
        return "core"

    def __call__(self, w):
        s = self.space
        w = np.asarray(w, dtype=float)
        kind = self.region(w)
        if kind == "piece_x":
            return s.rotate_about_origin(w, -self.alpha)
        if kind == "piece_y":
            return s.rotate_about_origin(w, -(self.gamma - self.beta))
        if kind == "sector_p":
            return s.polar(float(s.distance(self.p, w)), 0.0)
        if kind == "sector_x":
            t = float(s.distance(self.x, w)) / self.xz if self.xz > 0 else 1.0
            return s.geodesic_point(self.dot_x, self.dot_z, min(t, 1.0))
        if kind == "sector_y":
            t = float(s.distance(self.y, w)) / self.yz if self.yz > 0 else 1.0
            return s.geodesic_point(self.dot_y, self.dot_z, min(t, 1.0))
        return self.dot_z.copy()

    def sample(self, n, rng):
        """n points of the triangle, by geodesic interpolation."""
        s = self.space
        pts = []
        for u, v in rng.random((n, 2)):
            edge = s.geodesic_point(self.x, self.y, u)
            pts.append(s.geodesic_point(self.p, edge, v))
        return np.array(pts)

    def audit(self, pairs=10000, seed=0, tol=1e-8):
        """Shortness on random pairs plus the corner identities."""
        s = self.space
        rng = np.random.default_rng(seed)
        P = self.sample(pairs, rng)
        Q = self.sample(pairs, rng)
        FP = np.array([self(w) for w in P])
        FQ = np.array([self(w) for w in Q])
        slack = s.distance(P, Q) - s.distance(FP, FQ)
        k = int(np.argmin(slack))
        corners = [(self.p, self.dot_p), (self.x, self.dot_x), (self.y, self.dot_y), (self.z, self.dot_z)]
        corner_err = max(float(s.distance(self(a), b)) for a, b in corners)
        margin = min(float(slack[k]), -corner_err if corner_err > tol else 0.0)
        return Verdict("reshetnyak_fold", margin >= -tol, margin, Witness((k,), margin, "pair index"),
                       kappa=self.kappa, details={"pairs": pairs, "corner_error": corner_err})


def reshetnyak_fold(kappa, px, py, xy, xz, dot_pz):
    return FoldMap(kappa, px, py, xy, xz, dot_pz)
