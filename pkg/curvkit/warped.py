"""Warped products over a 1-dimensional base: kappa-cones, suspensions, doublings."""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from curvkit.comparison import Verdict
from curvkit.metric_core import Witness, shortest_metric, validate_metric
from curvkit.model_plane import model_sides, varpi
from curvkit.utils import DomainError, emitters, reject_nan

logger = logging.getLogger(__name__)

STENCIL = 6


def cone_distance(kappa, s, t, alpha):
    """side_kappa{min(pi, alpha); s, t}: distance between (s, phi) and (t, psi) with |phi psi| = alpha."""
    reject_nan(kappa, s, t, alpha)
    if s < 0 or t < 0 or alpha < 0:
        raise DomainError("cone coordinates must be nonnegative")
    if kappa > 0 and max(s, t) > varpi(kappa) + 1e-12:
        raise DomainError("cone radius exceeds varpi")
    return float(model_sides(kappa, min(math.pi, alpha), s, t))


def cone_points(F, radii, kappa=0.0):
    """Labels (radius, fiber index) of the cone grid; radius 0 (and varpi for kappa > 0) collapse to one point."""
    w = varpi(kappa)
    pts = [(0.0, None)]
    far = False
    for r in sorted(set(float(r) for r in radii)):
        if r <= 0:
            continue
        if kappa > 0 and r >= w - 1e-12:
            far = True
            continue
        pts.extend((r, i) for i in range(F.n))
    if far:
        pts.append((w, None))
    return pts


def _cone_metric(F, radii, kappa):
    pts = cone_points(F, radii, kappa)
    r = np.array([p[0] for p in pts])
    idx = np.array([-1 if p[1] is None else p[1] for p in pts])
    fiber = np.asarray(F.d)
    alpha = np.where((idx[:, None] >= 0) & (idx[None, :] >= 0),
                     fiber[np.maximum(idx, 0)][:, np.maximum(idx, 0)], 0.0)
    alpha = np.minimum(math.pi, alpha)
    d = model_sides(kappa, alpha, r[:, None], r[None, :])
    d = (d + d.T) / 2
    np.fill_diagonal(d, 0.0)
    labels = ["tip" if (p[1] is None and p[0] == 0) else "antipode" if p[1] is None else f"{p[0]:g}:{F.labels[p[1]]}"
              for p in pts]
    return validate_metric(d, labels=labels, tol=1e-9), pts


def cone_space(F, radii, kappa=0.0):
    """kappa-cone over the fiber F sampled at the given radii; index 0 is the tip."""
    M, _ = _cone_metric(F, radii, kappa)
    return M


def suspension_space(F, angles):
    """Spherical suspension over F: index 0 is the north pole, the last index the south pole."""
    angles = list(angles) + [0.0, math.pi]
    M, _ = _cone_metric(F, angles, 1.0)
    return M


def cone_scalar_product(F, radii):
    """Largest |(|v|^2 + |w|^2 - |vw|^2)/2 - |v||w| cos alpha| over the Euclidean cone grid."""
    M, pts = _cone_metric(F, radii, 0.0)
    r = np.array([p[0] for p in pts])
    idx = np.array([-1 if p[1] is None else p[1] for p in pts])
    fiber = np.asarray(F.d)
    alpha = np.where((idx[:, None] >= 0) & (idx[None, :] >= 0),
                     fiber[np.maximum(idx, 0)][:, np.maximum(idx, 0)], 0.0)
    lhs = (r[:, None] ** 2 + r[None, :] ** 2 - M.d**2) / 2
    rhs = r[:, None] * r[None, :] * np.cos(np.minimum(math.pi, alpha))
    return float(np.max(np.abs(lhs - rhs)))


def doubling(S, A):
    """Two copies of S glued along the vertex set A."""
    A = sorted(set(int(a) for a in A))
    if not A:
        raise DomainError("doubling needs a nonempty gluing set")
    n = S.n_vertices
    in_a = np.zeros(n, dtype=bool)
    in_a[A] = True
    twin = np.arange(n)
    rest = np.flatnonzero(~in_a)
    twin[rest] = n + np.arange(len(rest))
    E = S.edges
    i, j = E[:, 0].astype(int), E[:, 1].astype(int)
    edges = np.vstack([E, np.column_stack([twin[i], twin[j], E[:, 2]])])
    tags = {"A": A, "copy1": list(range(n)), "copy2": [int(t) for t in twin]}
    coords = None
    if S.coords is not None:
        coords = np.vstack([S.coords, S.coords[rest]])
    D = shortest_metric(n + len(rest), edges, tags=tags, coords=coords, budget=S.budget, kind="double")
    D.budget_constant = S.budget_constant
    return D


# -- warped products with 1-dimensional base --------------------------------

_TAGS = {
    "id": lambda u: u,
    "sin": np.sin,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "exp": np.exp,
}


@dataclass
class WarpSpec:
    """Warping function f on the base interval [a, b].

    ``tag`` is one of id, sin, sinh, cosh, exp, const (with ``value``),
    const-1 or custom-sampled (``samples`` = (u_grid, f_values) with a
    declared ``lipschitz`` constant).
    """

    tag: str
    a: float = 0.0
    b: float = math.inf
    value: Optional[float] = None
    samples: Optional[tuple] = None
    lipschitz: Optional[float] = None

    def __post_init__(self):
        if self.tag == "const-1":
            self.tag, self.value = "const", 1.0
        if self.tag == "const" and (self.value is None or self.value < 0):
            raise DomainError("const warp needs a nonnegative value")
        if self.tag == "custom-sampled":
            if self.samples is None or self.lipschitz is None:
                raise DomainError("custom-sampled warp needs samples and a Lipschitz constant")
            u, f = (np.asarray(v, dtype=float) for v in self.samples)
            if (f < 0).any():
                raise DomainError("warping values must be nonnegative")
            self.samples = (u, f)
            self.a, self.b = float(u[0]), float(u[-1])
        elif self.tag not in _TAGS and self.tag != "const":
            raise DomainError(f"unknown warp tag {self.tag!r}")
        if self.tag == "sin" and not math.isfinite(self.b):
            self.b = math.pi

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.tag == "const":
            return np.full(u.shape, float(self.value))
        if self.tag == "custom-sampled":
            return np.interp(u, *self.samples)
        return _TAGS[self.tag](u)

    def closed_form(self, p, q, ell):
        """Exact distance where the warp is a model cone or a product, else None."""
        kappa = {"id": 0.0, "sin": 1.0, "sinh": -1.0}.get(self.tag)
        if kappa is not None and self.a == 0:
            return cone_distance(kappa, p, q, ell)
        if self.tag == "const":
            return math.hypot(p - q, self.value * ell)
        return None


@dataclass
class WarpDistance:
    value: float
    fine: float
    coarse: float
    budget: float
    exact: Optional[float] = None


def _grid_distance(spec, p, q, ell, n):
    lo, hi = min(p, q), max(p, q)
    window = (hi - lo) + ell * float(min(spec(p), spec(q)))
    ua, ub = max(spec.a, lo - window / 2), min(spec.b, hi + window / 2)
    u = np.union1d(np.linspace(ua, ub, n), [p, q])
    v = np.linspace(0.0, ell, n)
    nu, nv = len(u), len(v)
    node = np.arange(nu * nv).reshape(nu, nv)
    rows, cols, weights = [], [], []
    for di in range(0, STENCIL + 1):
        for dj in range(-STENCIL, STENCIL + 1):
            if (di == 0 and dj <= 0) or math.gcd(di, abs(dj)) != 1:
                continue
            i0 = np.arange(0, nu - di)
            j0 = np.arange(max(0, -dj), nv - max(0, dj))
            if i0.size == 0 or j0.size == 0:
                continue
            I, J = np.meshgrid(i0, j0, indexing="ij")
            du = u[I + di] - u[I]
            dv = v[J + dj] - v[J]
            f0, fm, f1 = spec(u[I]), spec((u[I] + u[I + di]) / 2), spec(u[I + di])
            seg = (np.hypot(du, f0 * dv) + 4 * np.hypot(du, fm * dv) + np.hypot(du, f1 * dv)) / 6
            rows.append(node[I, J].ravel())
            cols.append(node[I + di, J + dj].ravel())
            weights.append(seg.ravel())
    rows, cols, weights = (np.concatenate(x) for x in (rows, cols, weights))
    # zero-length moves across the zero set of f must stay edges
    weights = np.maximum(weights, 1e-15)
    graph = coo_matrix((weights, (rows, cols)), shape=(nu * nv, nu * nv)).tocsr()
    ip, iq = int(np.searchsorted(u, p)), int(np.searchsorted(u, q))
    dist = dijkstra(graph, directed=False, indices=node[ip, 0])
    return float(dist[node[iq, nv - 1]])


def warped_1d_distance(spec, p, q, ell, n=40, status_callback=None):
    """Distance between (p, phi) and (q, psi) in B x_f F with |phi psi|_F = ell.

    Shortest paths on two grids over [a, b] x [0, ell], combined by
    Richardson extrapolation; ``budget`` is the gap between the two grids.
    """
    emit_status, _ = emitters(status_callback)
    reject_nan(p, q, ell)
    if not (spec.a - 1e-12 <= p <= spec.b + 1e-12 and spec.a - 1e-12 <= q <= spec.b + 1e-12):
        raise DomainError("base coordinates outside the base interval")
    if ell < 0:
        raise DomainError("fiber distance must be nonnegative")
    exact = spec.closed_form(p, q, ell)
    if ell == 0:
        return WarpDistance(abs(p - q), abs(p - q), abs(p - q), 0.0, exact)
    coarse = _grid_distance(spec, p, q, ell, n)
    fine = _grid_distance(spec, p, q, ell, 2 * n)
    value = max(2 * fine - coarse, abs(p - q))
    budget = abs(coarse - fine)
    if spec.tag == "custom-sampled":
        # linear interpolation of an L-Lipschitz warp is off by at most L * spacing / 2
        spacing = float(np.max(np.diff(spec.samples[0]), initial=0.0))
        budget += spec.lipschitz * spacing / 2 * ell
    emit_status(f"warped distance {value:.6g} (coarse {coarse:.6g}, fine {fine:.6g})")
    return WarpDistance(value, fine, coarse, budget, exact)


def warp_monotone_check(spec_f, spec_g, pairs, n=40, tol=1e-9):
    """f <= g implies dist_f <= dist_g on every sampled (p, q, ell)."""
    worst, margin, witness, budget = math.inf, math.inf, (0,), 0.0
    for k, (p, q, ell) in enumerate(pairs):
        df = warped_1d_distance(spec_f, p, q, ell, n)
        dg = warped_1d_distance(spec_g, p, q, ell, n)
        slack = df.budget + dg.budget
        gap = dg.value - df.value
        if gap + slack < worst:
            worst, margin, witness, budget = gap + slack, gap, (k,), slack
    return Verdict("warp_monotone", worst >= -tol, margin, Witness(witness, margin, "pair index"),
                   details={"budget": budget})
