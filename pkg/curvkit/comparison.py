"""CBB(kappa) and CAT(kappa) comparison tests and their refinements.

Inputs are anything carrying a distance table ``d``: a FiniteMetric or a
SampledSpace. For sampled spaces the discretisation budget of the net is
added to the verdict tolerance.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from curvkit.metric_core import Witness, validate_metric
from curvkit.model_plane import (
    ModelConfig,
    ModelSpace,
    angle_interval,
    lay_triangle,
    model_angle,
    model_angles,
    model_sides,
    varpi,
)
from curvkit.utils import (
    DYKSTRA_MAX_ITER,
    PSD_FEASIBLE,
    PSD_INCONCLUSIVE,
    SEPARATOR_TOL,
    VERDICT_TOL,
    ConsistencyFault,
    DomainError,
    MetricViolation,
    emitters,
    finite_or_none,
    jsonable,
)

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
CHUNK = 4096


@dataclass
class Verdict:
    test: str
    passed: bool
    margin: float
    witness: Optional[Witness] = None
    kappa: Optional[float] = None
    vacuous: bool = False
    vacuous_count: int = 0
    heuristic: bool = False
    status: str = ""
    details: dict = field(default_factory=dict)
    certificate: object = None

    def __post_init__(self):
        if not self.status:
            if self.vacuous:
                self.status = "vacuous"
            else:
                self.status = "pass" if self.passed else "fail"

    def __bool__(self):
        return bool(self.passed)

    def to_dict(self):
        out = {
            "test": self.test,
            "kappa": finite_or_none(self.kappa),
            "pass": bool(self.passed),
            "status": self.status,
            "margin": finite_or_none(self.margin),
            "witness": self.witness.to_dict() if self.witness else None,
            "vacuous_count": int(self.vacuous_count),
            "heuristic": bool(self.heuristic),
        }
        if self.details:
            out["details"] = jsonable(self.details)
        return out


def _table(M):
    return np.asarray(M.d, dtype=float)


def _tolerance(M, tol):
    return tol + float(getattr(M, "budget", 0.0) or 0.0)


def _distinct(*indices):
    if len(set(int(i) for i in indices)) != len(indices):
        raise DomainError(f"indices must be distinct: {indices}")


def _vacuous(test, kappa, indices, note):
    return Verdict(test, True, math.inf, Witness(tuple(int(i) for i in indices), math.inf, note),
                   kappa=kappa, vacuous=True, vacuous_count=1)


# -- single quadruples ----------------------------------------------------

def cbb_four_point(M, p, x1, x2, x3, kappa, tol=VERDICT_TOL):
    """Sum of the three model angles at p is at most 2*pi."""
    _distinct(p, x1, x2, x3)
    d = _table(M)
    pairs = ((x1, x2), (x2, x3), (x3, x1))
    angles = [model_angle(kappa, d[i, j], d[p, i], d[p, j]) for i, j in pairs]
    if any(a is None for a in angles):
        return _vacuous("cbb_four_point", kappa, (p, x1, x2, x3), "undefined model angle")
    total = sum(angles)
    margin = TWO_PI - total
    return Verdict(
        "cbb_four_point", margin >= -_tolerance(M, tol), margin,
        Witness((int(p), int(x1), int(x2), int(x3)), margin, f"angle sum {total:.12f}"),
        kappa=kappa, details={"angles": angles},
    )


def _segment_margin(kappa, r1, r2, a1, a2, L, d12):
    """min over z in [p1 p2] of |x1 z| + |z x2| - d12, triangles laid on opposite sides."""

    def g(t):
        return float(model_sides(kappa, a1, r1, t * L) + model_sides(kappa, a2, r2, t * L)) - d12

    ts = np.linspace(0.0, 1.0, 65)
    vals = model_sides(kappa, a1, r1, ts * L) + model_sides(kappa, a2, r2, ts * L) - d12
    k = int(np.argmin(vals))
    lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
    res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return min(float(vals[k]), float(res.fun))


def cat_four_point(M, p1, p2, x1, x2, kappa, tol=VERDICT_TOL, cross_check=True):
    """CAT(kappa) four-point comparison, cross-checked against the segment form."""
    _distinct(p1, p2, x1, x2)
    d = _table(M)

    def ang(p, i, j):
        return model_angle(kappa, d[i, j], d[p, i], d[p, j])

    six = (ang(p1, x1, x2), ang(p1, p2, x1), ang(p1, p2, x2),
           ang(p2, x1, x2), ang(p2, p1, x1), ang(p2, p1, x2))
    indices = (p1, p2, x1, x2)
    if any(a is None for a in six):
        return _vacuous("cat_four_point", kappa, indices, "undefined model angle")
    m1 = six[1] + six[2] - six[0]
    m2 = six[4] + six[5] - six[3]
    margin = max(m1, m2)
    details = {"margin_at_p1": m1, "margin_at_p2": m2}
    if cross_check:
        g = _segment_margin(kappa, d[p1, x1], d[p1, x2], six[1], six[2], d[p1, p2], d[x1, x2])
        details["segment_margin"] = g
        if (margin < -1e-6 and g > 1e-6) or (margin > 1e-6 and g < -1e-6):
            raise ConsistencyFault(
                f"CAT criteria disagree on {indices}: angle margin {margin:+.3e}, segment margin {g:+.3e}"
            )
    return Verdict("cat_four_point", margin >= -_tolerance(M, tol), margin,
                   Witness(tuple(int(i) for i in indices), margin), kappa=kappa, details=details)


# -- exhaustive scans -----------------------------------------------------

def _angle_tensor(d, kappa):
    """A[p, i, j] = model angle at p between i and j."""
    return model_angles(kappa, d[None, :, :], d[:, :, None], d[:, None, :])


_REST = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))


def _cbb_chunk(A, Q):
    margins, labels = [], []
    for k, rest in enumerate(_REST):
        p, i, j, l = Q[:, k], Q[:, rest[0]], Q[:, rest[1]], Q[:, rest[2]]
        margins.append(TWO_PI - (A[p, i, j] + A[p, j, l] + A[p, i, l]))
        labels.append(np.column_stack([p, i, j, l]))
    return np.concatenate(margins), np.vstack(labels)


def _cat_chunk(A, Q, tol):
    per_label = []
    for k, rest in enumerate(_REST):
        p, i, j, l = Q[:, k], Q[:, rest[0]], Q[:, rest[1]], Q[:, rest[2]]
        x, y, z = A[p, i, j], A[p, j, l], A[p, i, l]
        per_label.append(np.minimum(np.minimum(x + y - z, y + z - x), x + z - y))
    m = np.column_stack(per_label)
    undefined = np.isnan(m)
    best = np.max(np.where(undefined, -np.inf, m), axis=1)
    relies_on_vacuous = undefined.any(axis=1) & ~(best >= -tol)
    margins = np.where(relies_on_vacuous, np.nan, best)
    return margins, Q


def _best(margins, labels):
    """Minimum non-NaN margin and the lexicographically smallest label attaining it."""
    ok = ~np.isnan(margins)
    if not ok.any():
        return math.inf, None
    m = margins[ok]
    lab = labels[ok]
    low = m.min()
    cand = lab[m == low]
    order = np.lexsort(cand.T[::-1])
    return float(low), tuple(int(v) for v in cand[order[0]])


def _scan(test, M, kappa, tol, jobs, progress_callback, status_callback):
    emit_status, emit_progress = emitters(status_callback, progress_callback)
    d = _table(M)
    n = len(d)
    tol_eff = _tolerance(M, tol)
    if n < 4:
        return Verdict(test, True, math.inf, None, kappa=kappa, vacuous=True,
                       details={"items": 0, "note": "fewer than four points"})
    A = _angle_tensor(d, kappa)
    total = math.comb(n, 4)
    emit_status(f"{test}: scanning {total} quadruples at kappa={kappa:g}")

    def run(Q):
        if test == "is_cbb":
            margins, labels = _cbb_chunk(A, Q)
        else:
            margins, labels = _cat_chunk(A, Q, tol_eff)
        return len(margins), int(np.isnan(margins).sum()), _best(margins, labels)

    combos = itertools.combinations(range(n), 4)
    results = []
    done = 0
    pool = ThreadPoolExecutor(max_workers=jobs) if jobs and jobs > 1 else None
    try:
        while True:
            window = []
            for _ in range(max(1, jobs or 1) * 4):
                block = list(itertools.islice(combos, CHUNK))
                if not block:
                    break
                window.append(np.array(block, dtype=np.int64))
            if not window:
                break
            results.extend(pool.map(run, window) if pool else map(run, window))
            done += sum(len(w) for w in window)
            emit_progress(100 * done / total)
    finally:
        if pool:
            pool.shutdown()

    items = sum(r[0] for r in results)
    vacuous_count = sum(r[1] for r in results)
    margin, label = math.inf, None
    for _, _, (m, lab) in results:
        if lab is not None and (m < margin or (m == margin and (label is None or lab < label))):
            margin, label = m, lab
    witness = Witness(label, margin, "p first" if test == "is_cbb" else "quadruple") if label else None
    all_vacuous = items > 0 and vacuous_count == items
    return Verdict(test, margin >= -tol_eff, margin, witness, kappa=kappa, vacuous=all_vacuous,
                   vacuous_count=vacuous_count, details={"items": items})


def is_cbb(M, kappa, tol=VERDICT_TOL, jobs=1, progress_callback=None, status_callback=None):
    """Check the CBB four-point comparison on every labelled quadruple."""
    return _scan("is_cbb", M, kappa, tol, jobs, progress_callback, status_callback)


def is_cat(M, kappa, tol=VERDICT_TOL, jobs=1, progress_callback=None, status_callback=None):
    """A quadruple passes if some point sees the other three at angles obeying the triangle inequalities."""
    return _scan("is_cat", M, kappa, tol, jobs, progress_callback, status_callback)


# -- curvature thresholds -------------------------------------------------

def _kappa_floor(d):
    pos = d[d > 0]
    if pos.size == 0:
        return -1.0
    return -min((32.0 / pos.min()) ** 2, (200.0 / pos.max()) ** 2)


def cbb_sup_kappa(M, tol=1e-4, jobs=1, status_callback=None):
    """Largest kappa with no non-vacuous CBB(kappa) failure; -inf if none, +inf if unbounded."""
    emit_status, _ = emitters(status_callback)
    if len(M.d) < 4:
        return math.inf
    floor = _kappa_floor(_table(M))

    def check(k):
        return is_cbb(M, k, jobs=jobs)

    if check(0.0).passed:
        lo, hi = 0.0, 1.0
        while True:
            v = check(hi)
            if not v.passed:
                break
            if v.vacuous:
                return math.inf
            lo, hi = hi, hi * 4
    else:
        lo, hi = -1.0, 0.0
        while not check(lo).passed:
            if lo < floor:
                return -math.inf
            lo, hi = lo * 4, lo
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if check(mid).passed:
            lo = mid
        else:
            hi = mid
        emit_status(f"cbb_sup_kappa bracket [{lo:.6g}, {hi:.6g}]")
    return lo


def cat_inf_kappa(M, tol=1e-4, jobs=1, status_callback=None):
    """Smallest kappa passing CAT(kappa); the lowest probed kappa when the floor is reached."""
    emit_status, _ = emitters(status_callback)
    if len(M.d) < 4:
        return -math.inf
    floor = _kappa_floor(_table(M))

    def check(k):
        return is_cat(M, k, jobs=jobs)

    if check(0.0).passed:
        lo, hi = -1.0, 0.0
        while check(lo).passed:
            if lo < floor:
                return lo
            lo, hi = lo * 4, lo
    else:
        lo, hi = 0.0, 1.0
        while True:
            v = check(hi)
            if v.passed and v.vacuous:
                return math.inf
            if v.passed:
                break
            lo, hi = hi, hi * 4
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if check(mid).passed:
            hi = mid
        else:
            lo = mid
        emit_status(f"cat_inf_kappa bracket [{lo:.6g}, {hi:.6g}]")
    return hi


# -- sampled-space comparisons --------------------------------------------

def _side(side):
    side = side.upper()
    if side not in ("CBB", "CAT"):
        raise DomainError(f"side must be CBB or CAT, got {side!r}")
    return side


def _slack(S):
    return float(getattr(S, "slack", 0.0) or 0.0)


def point_on_side_check(S, x, y, p, kappa, side="CBB", tol=VERDICT_TOL):
    """Compare the model angle at x towards y with the one towards each vertex of [xy]."""
    side = _side(side)
    path = S.geodesic(x, y)
    test = f"point_on_side_{side.lower()}"
    if p in path:
        return _vacuous(test, kappa, (x, y, p), "p lies on the geodesic")
    interior = np.array(path[1:-1], dtype=int)
    if interior.size == 0:
        return _vacuous(test, kappa, (x, y, p), "geodesic has no interior vertex")
    d = _table(S)
    delta = _slack(S)
    lo_y, hi_y = angle_interval(kappa, d[p, y], d[x, p], d[x, y], delta)
    lo_z, hi_z = angle_interval(kappa, d[p, interior], d[x, p], d[x, interior], delta)
    nominal_y = model_angles(kappa, d[p, y], d[x, p], d[x, y])
    nominal_z = model_angles(kappa, d[p, interior], d[x, p], d[x, interior])
    if side == "CBB":
        margins = hi_z - lo_y
        nominal = nominal_z - nominal_y
    else:
        margins = hi_y - lo_z
        nominal = nominal_y - nominal_z
    vacuous_count = int(np.isnan(margins).sum())
    if vacuous_count == len(margins):
        return _vacuous(test, kappa, (x, y, p), "all model angles undefined")
    k = int(np.nanargmin(margins))
    margin = float(margins[k])
    z = int(interior[k])
    return Verdict(
        test, margin >= -tol, margin,
        Witness((int(x), int(y), int(p), z), margin,
                f"angle toward y {float(nominal_y):.6f}, toward z {float(nominal_z[k]):.6f}"),
        kappa=kappa, vacuous_count=vacuous_count,
        details={"nominal_margin": float(np.nanmin(nominal)), "budget": delta},
    )


def adjacent_angle_check(S, x, y, p, kappa, side="CBB", tol=VERDICT_TOL):
    """Sum of the model angles at z between p and x and between p and y, for z on ]xy[.

    CBB needs the sum at most pi, CAT at least pi.
    """
    side = _side(side)
    test = f"adjacent_angle_{side.lower()}"
    path = S.geodesic(x, y)
    interior = np.array([z for z in path[1:-1] if z != p], dtype=int)
    if interior.size == 0:
        return _vacuous(test, kappa, (x, y, p), "geodesic has no interior vertex besides p")
    d = _table(S)
    delta = _slack(S)
    lo_x, hi_x = angle_interval(kappa, d[p, x], d[interior, p], d[interior, x], delta)
    lo_y, hi_y = angle_interval(kappa, d[p, y], d[interior, p], d[interior, y], delta)
    total = model_angles(kappa, d[p, x], d[interior, p], d[interior, x]) + \
        model_angles(kappa, d[p, y], d[interior, p], d[interior, y])
    if side == "CBB":
        margins = math.pi - (lo_x + lo_y)
        nominal = math.pi - total
    else:
        margins = hi_x + hi_y - math.pi
        nominal = total - math.pi
    vacuous_count = int(np.isnan(margins).sum())
    if vacuous_count == len(margins):
        return _vacuous(test, kappa, (x, y, p), "all model angles undefined")
    k = int(np.nanargmin(margins))
    margin = float(margins[k])
    return Verdict(
        test, margin >= -tol, margin,
        Witness((int(x), int(y), int(p), int(interior[k])), margin, f"adjacent angle sum {float(total[k]):.6f}"),
        kappa=kappa, vacuous_count=vacuous_count,
        details={"nominal_margin": float(np.nanmin(nominal)), "budget": delta},
    )


def _toward(S, path, scale):
    """First vertex of path at distance >= scale from its start, else its end."""
    start = path[0]
    for v in path[1:]:
        if S.distance(start, v) >= scale:
            return v
    return path[-1]


def hinge_angle(S, x, p, y, kappa, scale=None):
    """Model angle at x between the vertices of [xp] and [xy] at distance about ``scale``.

    Returns (nominal, lo, hi, (p_bar, y_bar)); the default scale is four
    times the slack of the net, so plain graphs use the neighbours of x.
    Both vertices are distinct from x, so the sides are positive.
    """
    if scale is None:
        scale = 4 * _slack(S)
    pb = _toward(S, S.geodesic(x, p), scale)
    yb = _toward(S, S.geodesic(x, y), scale)
    d = _table(S)
    lo, hi = angle_interval(kappa, d[pb, yb], d[x, pb], d[x, yb], _slack(S))
    nominal = model_angles(kappa, d[pb, yb], d[x, pb], d[x, yb])
    return float(nominal), float(lo), float(hi), (int(pb), int(yb))


def hinge_check(S, x, p, y, kappa, side="CBB", scale=None, adjacent=True, tol=VERDICT_TOL):
    """Hinge comparison at x for the geodesics [xp] and [xy].

    CBB: the hinge angle is at least the model angle at x of (p, x, y) and,
    with ``adjacent``, the hinges at every z on ]xy[ sharing the side [zp]
    add up to at most pi. CAT: the hinge angle is at most the model angle.
    The side form (model side of the hinge against |py|) is reported in
    the details.
    """
    side = _side(side)
    _distinct(x, p, y)
    test = f"hinge_{side.lower()}"
    d = _table(S)
    delta = _slack(S)
    angle, lo_a, hi_a, near = hinge_angle(S, x, p, y, kappa, scale)
    lo_m, hi_m = angle_interval(kappa, d[p, y], d[x, p], d[x, y], delta)
    model = model_angles(kappa, d[p, y], d[x, p], d[x, y])
    if math.isnan(angle) or np.isnan(model):
        return _vacuous(test, kappa, (x, p, y), "undefined model angle")
    hinge_margin = float(hi_a - lo_m) if side == "CBB" else float(hi_m - lo_a)
    margin, witness = hinge_margin, (int(x), int(p), int(y)) + near
    details = {"hinge_angle": angle, "model_angle": float(model), "hinge_margin": hinge_margin,
               "budget": delta,
               "model_side": float(model_sides(kappa, angle, d[x, p], d[x, y])), "side": float(d[p, y])}
    if side == "CBB" and adjacent:
        adjacent_margin = math.inf
        for z in S.geodesic(x, y)[1:-1]:
            if z == p:
                continue
            _, lo_y, _, _ = hinge_angle(S, z, p, y, kappa, scale)
            _, lo_x, _, _ = hinge_angle(S, z, p, x, kappa, scale)
            m = math.pi - (lo_y + lo_x)
            if m < adjacent_margin:
                adjacent_margin = m
                if m < margin:
                    margin, witness = m, (int(x), int(p), int(y), int(z))
        details["adjacent_margin"] = adjacent_margin
    return Verdict(test, margin >= -tol, margin, Witness(witness, margin, f"hinge angle {angle:.6f}"),
                   kappa=kappa, details=details)


@dataclass
class ThinFatResult:
    thin_margin: float
    fat_margin: float
    budget: float
    thin_witness: tuple
    fat_witness: tuple

    @property
    def thin(self):
        return self.thin_margin >= -self.budget - VERDICT_TOL

    @property
    def fat(self):
        return self.fat_margin >= -self.budget - VERDICT_TOL


def thin_fat_triangle(S, x, y, z, kappa, samples_per_side=6):
    """Distortion of the natural correspondence between a triangle of S and its model triangle."""
    d = _table(S)
    sides = _triangle_sides(d, x, y, z)
    model = lay_triangle(kappa, sides)
    space = model.space
    corner = {x: model.points[0], y: model.points[1], z: model.points[2]}
    verts, pts = [], []
    for u, v in ((x, y), (y, z), (z, x)):
        path = S.geodesic(u, v)
        take = np.unique(np.linspace(0, len(path) - 1, min(len(path), samples_per_side + 1)).round().astype(int))
        for k in take:
            w = path[k]
            t = d[u, w] / d[u, v] if d[u, v] > 0 else 0.0
            verts.append(w)
            pts.append(space.geodesic_point(corner[u], corner[v], t))
    verts = np.array(verts)
    DS = d[np.ix_(verts, verts)]
    DM = space.pairwise(np.array(pts))
    iu = np.triu_indices(len(verts), 1)
    thin = DM[iu] - DS[iu]
    fat = DS[iu] - DM[iu]
    kt, kf = int(np.argmin(thin)), int(np.argmin(fat))
    return ThinFatResult(
        float(thin[kt]), float(fat[kf]), _slack(S),
        (int(verts[iu[0][kt]]), int(verts[iu[1][kt]])),
        (int(verts[iu[0][kf]]), int(verts[iu[1][kf]])),
    )


def _triangle_sides(d, x, y, z):
    """Sides (a, b, c) opposite x, y, z."""
    return (float(d[y, z]), float(d[x, z]), float(d[x, y]))


# -- Sturm, decrypting matrix and (1+n)-point comparison ------------------

def copositivity_min(A, starts=200, seed=0):
    """Minimum of s^T A s over the standard simplex.

    Exact for n <= 4 by enumerating the KKT points of every face; beyond that a
    multistart SLSQP search. Returns (value, s, exact).
    """
    A = np.asarray(A, dtype=float)
    n = len(A)
    best_val, best_s = math.inf, None
    scale = max(1.0, float(np.abs(A).max()))
    max_face = n if n <= 4 else 2
    for size in range(1, max_face + 1):
        for J in itertools.combinations(range(n), size):
            J = list(J)
            K = np.zeros((size + 1, size + 1))
            K[:size, :size] = A[np.ix_(J, J)]
            K[:size, size] = 1.0
            K[size, :size] = 1.0
            rhs = np.zeros(size + 1)
            rhs[size] = 1.0
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            if np.linalg.norm(K @ sol - rhs) > 1e-9 * scale:
                continue
            sJ = sol[:size]
            if (sJ < -1e-12).any():
                continue
            sJ = np.maximum(sJ, 0.0)
            sJ /= sJ.sum()
            s = np.zeros(n)
            s[J] = sJ
            val = float(s @ A @ s)
            if val < best_val:
                best_val, best_s = val, s
    if n <= 4:
        return best_val, best_s, True

    rng = np.random.default_rng(seed)
    seeds = [np.eye(n)[i] for i in range(n)] + [np.full(n, 1.0 / n)]
    seeds += list(rng.dirichlet(np.ones(n), size=max(0, starts - len(seeds))))
    cons = [{"type": "eq", "fun": lambda s: s.sum() - 1.0, "jac": lambda s: np.ones(n)}]
    for s0 in seeds:
        res = minimize(lambda s: s @ A @ s, s0, jac=lambda s: 2 * A @ s, method="SLSQP",
                       bounds=[(0.0, 1.0)] * n, constraints=cons, options={"ftol": 1e-12, "maxiter": 200})
        s = np.maximum(res.x, 0.0)
        if s.sum() <= 0:
            continue
        s /= s.sum()
        val = float(s @ A @ s)
        if val < best_val:
            best_val, best_s = val, s
    return best_val, best_s, False


def sturm_matrix(M, p, xs):
    d = _table(M)
    xs = list(xs)
    dp = d[p, xs]
    dx = d[np.ix_(xs, xs)]
    return 0.5 * (dp[:, None] ** 2 + dp[None, :] ** 2 - dx**2)


def decrypting_matrix(M, points):
    """Squared distances s_ij = |a_i a_j|^2."""
    d = _table(M)
    pts = list(points)
    return d[np.ix_(pts, pts)] ** 2


def sturm_test(M, p, xs, tol=VERDICT_TOL, starts=200, seed=0):
    """Copositivity of m_ij = (|x_i p|^2 + |x_j p|^2 - |x_i x_j|^2) / 2."""
    xs = list(xs)
    if not xs:
        raise DomainError("sturm_test needs at least one point")
    m = sturm_matrix(M, p, xs)
    value, s, exact = copositivity_min(m, starts=starts, seed=seed)
    scale = max(1.0, float(np.abs(m).max()))
    passed = value >= -tol * scale
    witness = Witness((int(p),) + tuple(int(x) for x in xs), value,
                      "s=" + ",".join(f"{v:.6g}" for v in s))
    return Verdict("sturm_test", passed, value, witness, heuristic=not exact, certificate=s.tolist(),
                   details={"matrix": m})


def _proj_psd(X):
    X = (X + X.T) / 2
    w, V = np.linalg.eigh(X)
    return (V * np.maximum(w, 0.0)) @ V.T


def _proj_box(Y, C):
    Z = np.minimum((Y + Y.T) / 2, C)
    np.fill_diagonal(Z, 1.0)
    return Z


def dykstra_psd_box(C, max_iter=DYKSTRA_MAX_ITER, check_every=25, target=1e-10, stall=1e-14):
    """Alternating projections (Dykstra) between the PSD cone and {G_ii = 1, G_ij <= C_ij}.

    Runs until the PSD residual of the box iterate drops below ``target`` or
    the iterate moves less than ``stall`` over ``check_every`` sweeps;
    ``max_iter`` is only a safety cap. Returns the box-feasible iterate and
    its PSD residual max(0, -lambda_min).
    """
    X = np.array(C, dtype=float)
    P = np.zeros_like(X)
    Q = np.zeros_like(X)
    last = X.copy()
    for it in range(1, max_iter + 1):
        Y = _proj_psd(X + P)
        P = X + P - Y
        X = _proj_box(Y + Q, C)
        Q = Y + Q - X
        if it % check_every == 0:
            residual = max(0.0, -float(np.linalg.eigvalsh(X).min()))
            if residual < target:
                break
            if float(np.abs(X - last).max()) < stall:
                logger.debug("dykstra stalled after %d sweeps at residual %.3e", it, residual)
                break
            last = X.copy()
    else:
        logger.warning("dykstra hit the %d sweep cap", max_iter)
    residual = max(0.0, -float(np.linalg.eigvalsh(X).min()))
    return X, residual


def box_separator(C, X):
    """Separating matrix between the PSD cone and {G_ii = 1, G_ij <= C_ij}.

    W is the negative part of the box iterate X, so it is PSD and
    <W, G> >= 0 for every G in the cone. Over the box <W, G> is at most
    tr W + sum W_ij C_ij (W_ij >= 0) + sum |W_ij| (W_ij < 0), so a negative
    bound proves the two sets are disjoint. Returns (W, bound / tr W).
    """
    X = np.asarray(X, dtype=float)
    w, V = np.linalg.eigh((X + X.T) / 2)
    W = (V * np.maximum(-w, 0.0)) @ V.T
    t = float(np.trace(W))
    if t <= 0:
        return W, math.inf
    off = ~np.eye(len(W), dtype=bool)
    terms = np.where(W >= 0, W * np.asarray(C, dtype=float), -W)
    return W, (t + float(terms[off].sum())) / t


def _certificate(kappa, radii, G):
    w, V = np.linalg.eigh((G + G.T) / 2)
    F = V * np.sqrt(np.maximum(w, 0.0))
    norms = np.linalg.norm(F, axis=1, keepdims=True)
    F = np.where(norms > 0, F / np.where(norms > 0, norms, 1.0), np.eye(len(G))[: len(F)])
    n = len(G)
    space = ModelSpace(kappa, n)
    o = space.origin()
    pts = [o] + [space.exp(o, space.at_origin(r * xi)) for r, xi in zip(radii, F)]
    return ModelConfig(kappa, np.vstack(pts))


def one_plus_n_test(M, p, xs, kappa, tol=1e-6, max_iter=DYKSTRA_MAX_ITER):
    """Decide whether p, x_1..x_n admit a model array with |p~x~_i| = |px_i| and |x~_i x~_j| >= |x_i x_j|."""
    xs = list(xs)
    if not xs:
        raise DomainError("one_plus_n_test needs at least one point")
    _distinct(p, *xs)
    d = _table(M)
    radii = d[p, xs]
    if kappa > 0 and (radii >= varpi(kappa) / 2).any():
        raise DomainError("for kappa > 0 all |p x_i| must stay below varpi/2")
    n = len(xs)
    label = (int(p),) + tuple(int(x) for x in xs)
    theta = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        a = model_angle(kappa, d[xs[i], xs[j]], radii[i], radii[j])
        if a is None:
            return _vacuous("one_plus_n_test", kappa, label, f"undefined angle at p between {xs[i]} and {xs[j]}")
        theta[i, j] = theta[j, i] = a
    C = np.cos(theta)
    np.fill_diagonal(C, 1.0)

    lam = float(np.linalg.eigvalsh(C).min())
    if lam >= -1e-12:
        G, residual, method = C, 0.0, "direct"
    else:
        G, residual = dykstra_psd_box(C, max_iter=max_iter)
        method = "dykstra"
    details = {"residual": residual, "method": method, "min_eigenvalue": lam}

    if residual < PSD_FEASIBLE:
        cert = _certificate(kappa, radii, G)
        D = cert.distances()[1:, 1:]
        iu = np.triu_indices(n, 1)
        margin = float((D[iu] - d[np.ix_(xs, xs)][iu]).min()) if n > 1 else 0.0
        return Verdict("one_plus_n_test", True, margin, Witness(label, margin, "model array found"),
                       kappa=kappa, status="pass", certificate=cert, details=details)

    value, s, exact = copositivity_min(C)
    if value < -1e-12:
        details["dual"] = s
        return Verdict("one_plus_n_test", False, value,
                       Witness(label, value, "s=" + ",".join(f"{v:.6g}" for v in s)),
                       kappa=kappa, heuristic=not exact, status="fail", certificate=s.tolist(), details=details)
    W, bound = box_separator(C, G)
    details["separator_bound"] = bound
    if bound < -SEPARATOR_TOL:
        return Verdict("one_plus_n_test", False, bound, Witness(label, bound, "PSD cone separated from the box"),
                       kappa=kappa, status="fail", certificate=W.tolist(), details=details)
    details["band"] = "inconclusive" if residual <= PSD_INCONCLUSIVE else "unresolved"
    logger.info("one_plus_n_test inconclusive: residual %.3e, copositivity min %.3e", residual, value)
    return Verdict("one_plus_n_test", False, -residual, Witness(label, -residual, "no certificate either way"),
                   kappa=kappa, heuristic=True, status="inconclusive", details=details)


def pentagon_search(eps_grid=None, kappa=0.0):
    """Look for a pentagon-with-centre metric passing sturm_test but failing one_plus_n_test.

    Sides of the regular unit pentagon are stretched by (1 + e1), diagonals
    shrunk by (1 - e2), centre distances stay 1. Returns the first hit or None.
    Below a side stretch of about 0.62 every metric of the family that passes
    sturm_test admits a model array, so the default grid reaches past it.
    """
    if eps_grid is None:
        eps_grid = np.linspace(0.0, 0.7, 15)
    side, diag = 2 * math.sin(math.pi / 5), 2 * math.sin(2 * math.pi / 5)
    for e1 in eps_grid:
        for e2 in eps_grid:
            d = np.zeros((6, 6))
            d[0, 1:] = d[1:, 0] = 1.0
            for i, j in itertools.combinations(range(5), 2):
                gap = min(j - i, 5 - (j - i))
                d[i + 1, j + 1] = d[j + 1, i + 1] = side * (1 + e1) if gap == 1 else diag * (1 - e2)
            try:
                M = validate_metric(d)
            except MetricViolation:
                continue
            st = sturm_test(M, 0, range(1, 6))
            if not st.passed:
                continue
            op = one_plus_n_test(M, 0, list(range(1, 6)), kappa)
            if op.status == "fail":
                logger.info("pentagon hit at eps_side=%.3f eps_diagonal=%.3f", e1, e2)
                return {"eps_side": float(e1), "eps_diagonal": float(e2), "metric": M, "sturm": st,
                        "one_plus_n": op}
    return None


# -- other bounds ---------------------------------------------------------

def perimeter_bound_check(M, kappa, tol=VERDICT_TOL):
    """Every triple has perimeter at most 2*varpi."""
    if kappa <= 0:
        raise DomainError("perimeter bound needs kappa > 0")
    d = _table(M)
    n = len(d)
    if n < 3:
        return Verdict("perimeter_bound", True, math.inf, None, kappa=kappa, vacuous=True)
    T = np.array(list(itertools.combinations(range(n), 3)))
    per = d[T[:, 0], T[:, 1]] + d[T[:, 1], T[:, 2]] + d[T[:, 0], T[:, 2]]
    k = int(np.argmax(per))
    margin = 2 * varpi(kappa) - float(per[k])
    return Verdict("perimeter_bound", margin >= -_tolerance(M, tol), margin,
                   Witness(tuple(int(i) for i in T[k]), margin, f"perimeter {per[k]:.6f}"), kappa=kappa)


def two_n_plus_two_check(kappa, x, y, pairs, dist_xy, tol=VERDICT_TOL, metric=None, index=None,
                         max_sweeps=500):
    """Minimise |x z1| + sum |z_i z_i+1| + |z_n y| over z_i on the model segments [p_i q_i].

    When ``metric`` and ``index`` (keys x, y, p, q) are given, the model
    configuration is first checked against the source distances.
    """
    x = np.asarray(x, dtype=float)
    space = ModelSpace(kappa, x.shape[-1] - (1 if kappa != 0 else 0))
    P = [np.asarray(pq[0], dtype=float) for pq in pairs]
    Qs = [np.asarray(pq[1], dtype=float) for pq in pairs]
    y = np.asarray(y, dtype=float)
    for v in [x, y] + P + Qs:
        if np.linalg.norm(space.normalize(v) - v) > 1e-9 * max(1.0, np.linalg.norm(v)):
            raise DomainError("configuration point is not on the model space")
    if metric is not None and index is not None:
        _check_chain(space, metric, index, x, y, P, Qs)

    n = len(pairs)

    def points(t):
        return [space.geodesic_point(P[i], Qs[i], t[i]) for i in range(n)]

    def chain(t):
        zs = [x] + points(t) + [y]
        return float(sum(space.distance(a, b) for a, b in zip(zs[:-1], zs[1:])))

    t = np.full(n, 0.5)
    value = chain(t)
    for _ in range(max_sweeps if n else 0):
        before = value
        for i in range(n):
            def f(s, i=i):
                t[i] = s
                return chain(t)

            keep = t[i]
            res = minimize_scalar(f, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-8})
            options = [(float(res.fun), float(res.x)), (f(0.0), 0.0), (f(1.0), 1.0), (f(keep), keep)]
            best = min(options)
            t[i] = best[1]
            value = best[0]
        if before - value < 1e-12:
            break
    margin = value - float(dist_xy)
    return Verdict("two_n_plus_two", margin >= -tol, margin, Witness(tuple(range(n)), margin, "chain minimum"),
                   kappa=kappa, certificate=t.tolist(), details={"chain_minimum": value})


def _check_chain(space, M, index, x, y, P, Qs):
    d = _table(M)
    ix, iy, ip, iq = index["x"], index["y"], list(index["p"]), list(index["q"])
    checks = [(x, P[0], ix, ip[0]), (x, Qs[0], ix, iq[0]), (y, P[-1], iy, ip[-1]), (y, Qs[-1], iy, iq[-1])]
    for i in range(len(P)):
        checks.append((P[i], Qs[i], ip[i], iq[i]))
    for i in range(len(P) - 1):
        checks += [(P[i], P[i + 1], ip[i], ip[i + 1]), (Qs[i], Qs[i + 1], iq[i], iq[i + 1]),
                   (P[i], Qs[i + 1], ip[i], iq[i + 1]), (P[i + 1], Qs[i], ip[i + 1], iq[i])]
    for a, b, i, j in checks:
        if abs(float(space.distance(a, b)) - d[i, j]) > 1e-8 * max(1.0, d[i, j]):
            raise DomainError(f"model configuration does not reproduce |{i} {j}|")
