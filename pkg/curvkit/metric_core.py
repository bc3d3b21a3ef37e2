"""Finite metric spaces, sampled geodesic spaces and the generators of test corpora."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from curvkit.model_plane import ModelConfig, ModelSpace, model_sides, sn, varpi
from curvkit.utils import (
    METRIC_TOL,
    DisconnectedGraph,
    DomainError,
    MetricViolation,
    emitters,
)

logger = logging.getLogger(__name__)


@dataclass
class Witness:
    indices: tuple
    margin: float
    note: str = ""

    def to_dict(self):
        return {"indices": [int(i) for i in self.indices], "margin": self.margin, "note": self.note}


class FiniteMetric:
    """Validated symmetric distance table. Build it through validate_metric."""

    def __init__(self, d, labels=None):
        self.d = np.array(d, dtype=float)
        self.d.setflags(write=False)
        self.labels = list(labels) if labels is not None else [str(i) for i in range(len(self.d))]

    def __len__(self):
        return len(self.d)

    def __repr__(self):
        return f"FiniteMetric(n={self.n})"

    @property
    def n(self):
        return len(self.d)

    @property
    def diameter(self):
        return float(self.d.max()) if self.n else 0.0

    def sub(self, indices):
        idx = list(indices)
        return FiniteMetric(self.d[np.ix_(idx, idx)], [self.labels[i] for i in idx])


def validate_metric(table, labels=None, tol=METRIC_TOL, check_triangle=True):
    d = np.asarray(table, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise MetricViolation("shape", f"distance table must be square, got shape {d.shape}")
    n = len(d)
    if labels is not None and len(labels) != n:
        raise MetricViolation("shape", f"{len(labels)} labels for {n} points")
    if np.isnan(d).any():
        i, j = np.argwhere(np.isnan(d))[0]
        raise MetricViolation("nan", f"NaN distance at ({i}, {j})", Witness((int(i), int(j)), math.nan))
    scale = tol * max(1.0, float(np.abs(d).max()) if n else 1.0)
    if (d < -scale).any():
        i, j = np.argwhere(d < -scale)[0]
        raise MetricViolation("negative", f"negative distance at ({i}, {j})", Witness((int(i), int(j)), float(d[i, j])))
    if np.abs(np.diag(d)).max(initial=0.0) > scale:
        i = int(np.argmax(np.abs(np.diag(d))))
        raise MetricViolation("diagonal", f"nonzero self-distance at {i}", Witness((i,), float(d[i, i])))
    asym = np.abs(d - d.T)
    if (asym > scale).any():
        i, j = np.argwhere(asym > scale)[0]
        raise MetricViolation("asymmetry", f"d({i},{j}) != d({j},{i})", Witness((int(i), int(j)), float(-asym[i, j])))
    d = (d + d.T) / 2
    d = np.maximum(d, 0.0)
    np.fill_diagonal(d, 0.0)
    if check_triangle and n >= 3:
        best = None
        for k in range(n):
            excess = d - (d[:, k][:, None] + d[k, :][None, :])
            bad = np.argwhere(np.triu(excess > scale, 1))
            for i, j in bad:
                if k in (i, j):
                    continue
                cand = (int(i), int(j), int(k))
                if best is None or cand < best[0]:
                    best = (cand, float(-excess[i, j]))
                break
        if best is not None:
            (i, j, k), margin = best
            raise MetricViolation(
                "triangle",
                f"triangle inequality fails: d({i},{j}) > d({i},{k}) + d({k},{j})",
                Witness((i, j, k), margin, "long side first"),
            )
    return FiniteMetric(d, labels)


class SampledSpace:
    """Weighted graph with its shortest-path metric and deterministic geodesics.

    ``budget`` is the discretisation budget delta(h) of nets: graph distances
    exceed the surface distances by at most this much.
    """

    def __init__(self, n_vertices, edges, metric, tags=None, coords=None, budget=0.0,
                 budget_constant=None, kind="graph", mesh=None, exact=None, h=None):
        self.n_vertices = int(n_vertices)
        self.edges = np.asarray(edges, dtype=float).reshape(-1, 3)
        self.metric = metric
        self.tags: Dict[str, List[int]] = dict(tags or {})
        self.coords = None if coords is None else np.asarray(coords, dtype=float)
        self.budget = float(budget)
        self.budget_constant = budget_constant
        self.kind = kind
        self.mesh = mesh
        self.exact = exact
        self.h = h
        self._adjacency = None

    def __len__(self):
        return self.n_vertices

    def __repr__(self):
        return f"SampledSpace(kind={self.kind!r}, n={self.n_vertices}, budget={self.budget:.3g})"

    @property
    def slack(self):
        """Budget plus half the mesh size: graph geodesic vertices sit off the surface geodesic."""
        return self.budget + (self.h / 2 if self.h else 0.0)

    @property
    def d(self):
        return self.metric.d

    def distance(self, i, j):
        return float(self.metric.d[i, j])

    def adjacency(self):
        if self._adjacency is None:
            adj = [[] for _ in range(self.n_vertices)]
            for i, j, w in self.edges:
                adj[int(i)].append((int(j), w))
                adj[int(j)].append((int(i), w))
            self._adjacency = [sorted(a) for a in adj]
        return self._adjacency

    def geodesic(self, x, y):
        """Shortest path from x to y; ties go to the smallest vertex index."""
        D = self.metric.d
        adj = self.adjacency()
        path = [int(x)]
        u = int(x)
        guard = 0
        while u != y:
            target = D[u, y]
            tol = 1e-9 * max(1.0, target)
            nxt = None
            for v, w in adj[u]:
                if abs(w + D[v, y] - target) <= tol and D[v, y] < target:
                    nxt = v
                    break
            if nxt is None:
                raise DomainError(f"geodesic recovery stalled at vertex {u}")
            path.append(nxt)
            u = nxt
            guard += 1
            if guard > self.n_vertices:
                raise DomainError("geodesic recovery did not terminate")
        return path

    def to_graph(self):
        return {
            "vertices": list(range(self.n_vertices)),
            "edges": [[int(i), int(j), float(w)] for i, j, w in self.edges],
            "tags": {k: [int(v) for v in vs] for k, vs in self.tags.items()},
            "kind": self.kind,
            "budget": self.budget,
            "h": self.h,
        }


def _dedupe_edges(n, edges):
    edges = np.asarray(edges, dtype=float).reshape(-1, 3)
    if len(edges) == 0:
        return edges
    i = edges[:, 0].astype(int)
    j = edges[:, 1].astype(int)
    if (i < 0).any() or (j < 0).any() or (i >= n).any() or (j >= n).any():
        raise DomainError("edge endpoint outside the vertex range")
    keep = i != j
    lo, hi, w = np.minimum(i, j)[keep], np.maximum(i, j)[keep], edges[keep, 2]
    if (w <= 0).any() or not np.isfinite(w).all():
        raise DomainError("edge weights must be positive and finite")
    order = np.lexsort((w, hi, lo))
    lo, hi, w = lo[order], hi[order], w[order]
    first = np.ones(len(lo), dtype=bool)
    first[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
    return np.column_stack([lo[first], hi[first], w[first]])


def shortest_metric(n_vertices, edges, tags=None, coords=None, budget=0.0, kind="graph",
                    status_callback=None, **extra):
    """All-pairs shortest paths of a connected weighted graph."""
    emit_status, _ = emitters(status_callback)
    n = int(n_vertices)
    if n < 1:
        raise DomainError("graph needs at least one vertex")
    edges = _dedupe_edges(n, edges)
    graph = coo_matrix((edges[:, 2], (edges[:, 0].astype(int), edges[:, 1].astype(int))), shape=(n, n)).tocsr()
    n_comp, _ = connected_components(graph, directed=False)
    if n_comp > 1:
        raise DisconnectedGraph(f"graph has {n_comp} connected components")
    emit_status(f"Computing all-pairs shortest paths on {n} vertices...")
    d = dijkstra(graph, directed=False)
    metric = validate_metric(d, check_triangle=False, tol=1e-9)
    return SampledSpace(n, edges, metric, tags=tags, coords=coords, budget=budget, kind=kind, **extra)


def read_graph(doc, **kwargs):
    """Build a SampledSpace from a {vertices, edges, tags[, kind, budget, h]} document."""
    vertices = doc.get("vertices", [])
    n = len(vertices) if isinstance(vertices, list) else int(vertices)
    params = {"kind": doc.get("kind") or "graph", "budget": float(doc.get("budget") or 0.0), "h": doc.get("h")}
    params.update(kwargs)
    return shortest_metric(n, doc.get("edges", []), tags=doc.get("tags"), **params)


def sample_model_space(kappa, m, n, seed=0, radius=None):
    """n seeded points of the m-dimensional model space and their exact distance table.

    For kappa > 0 the points stay within a ball of radius below varpi/2.
    """
    rng = np.random.default_rng(seed)
    space = ModelSpace(kappa, m)
    if radius is None:
        radius = 0.45 * space.varpi if kappa > 0 else 1.0
    if kappa > 0 and radius >= space.varpi / 2:
        raise DomainError("sampling radius must stay below varpi/2")
    points = space.sample_ball(n, radius, rng)
    return validate_metric(space.pairwise(points)), ModelConfig(kappa, points)


def tripod_metric(leg=1.0):
    """Centre and three leaves of a star tree."""
    d = np.full((4, 4), 2 * leg)
    d[0, :] = d[:, 0] = leg
    np.fill_diagonal(d, 0.0)
    return validate_metric(d, labels=["center", "leaf1", "leaf2", "leaf3"])


def circle_metric(n, length=2 * math.pi):
    """n equally spaced points of a circle of the given length, intrinsic metric."""
    k = np.arange(n)
    gap = np.abs(k[:, None] - k[None, :]) * (length / n)
    return validate_metric(np.minimum(gap, length - gap))


# -- nets -----------------------------------------------------------------

@dataclass
class RingLayout:
    """Vertices of a kappa-cone laid out on rings of geodesic polar coordinates."""

    kappa: float
    angle: float
    closed: bool
    rho: np.ndarray
    theta: np.ndarray
    tags: Dict[str, List[int]] = field(default_factory=dict)

    def exact(self):
        dt = np.abs(self.theta[:, None] - self.theta[None, :])
        if self.closed:
            dt = np.minimum(dt, self.angle - dt)
        alpha = np.minimum(math.pi, dt)
        d = model_sides(self.kappa, alpha, self.rho[:, None], self.rho[None, :])
        d = (d + d.T) / 2
        np.fill_diagonal(d, 0.0)
        return d

    def planar(self):
        """Unrolled coordinates for plotting."""
        t = self.theta * (2 * math.pi / self.angle) if self.closed else self.theta
        return np.column_stack([self.rho * np.cos(t), self.rho * np.sin(t)])


def _rings(kappa, angle, closed, radius, h, seams=()):
    rho, theta = [0.0], [0.0]
    tags = {"tip": [0], "seam": [0], "boundary": []}
    n_rings = max(1, int(math.ceil(radius / h - 1e-9)))
    for j in range(1, n_rings + 1):
        r = min(j * h, radius)
        width = angle * abs(sn(kappa, r))
        if closed:
            count = max(1, int(math.ceil(width / h - 1e-9)))
            ts = np.arange(count) * (angle / count)
        else:
            count = max(1, int(math.ceil(width / h - 1e-9)))
            ts = np.linspace(0.0, angle, count + 1)
        if kappa > 0 and r >= varpi(kappa) - 1e-12:
            ts = np.array([0.0])
        start = len(rho)
        for t in ts:
            rho.append(r)
            theta.append(float(t))
            if any(abs(t - s) < 1e-12 for s in seams) or (not closed and (t == 0.0 or abs(t - angle) < 1e-12)):
                tags["seam"].append(len(rho) - 1)
        if j == n_rings:
            tags["boundary"].extend(range(start, len(rho)))
    return RingLayout(kappa, angle, closed, np.array(rho), np.array(theta), tags)


def _net_from_exact(d_exact, h, radius_factor, kind, tags, coords, mesh, status_callback=None):
    reach = max(radius_factor * math.sqrt(h), 2 * h)
    n = len(d_exact)
    i, j = np.nonzero(np.triu((d_exact <= reach) & (d_exact > 0), 1))
    edges = np.column_stack([i, j, d_exact[i, j]])
    space = shortest_metric(n, edges, tags=tags, coords=coords, kind=kind, status_callback=status_callback,
                            mesh=mesh, exact=d_exact)
    delta = float(np.max(space.d - d_exact)) if n > 1 else 0.0
    space.budget = max(delta, 0.0)
    space.h = h
    space.budget_constant = space.budget / h
    logger.info("net %s: %d vertices, h=%.3g, budget %.3g (C=%.3g)", kind, n, h, space.budget,
                space.budget_constant)
    return space


def net_of_surface(kind, h, kappa=None, angle=None, radius=2.0, sectors=None, closed=True,
                   radius_factor=1.0, status_callback=None):
    """Graph approximation of a surface with calibrated discretisation budget.

    kind is one of sphere, plane, hyperbolic, cone, glued, grid. Every kind
    except grid is a kappa-cone laid out on rings about its tip: the sphere of
    curvature kappa is the kappa-cone of a 2*pi circle with radius varpi, a
    cone has a flat metric and total angle ``angle``, a glued surface chains
    flat sectors with angles ``sectors`` (closed chains are cones).
    """
    if h <= 0:
        raise DomainError("mesh size must be positive")
    if kind == "grid":
        return grid_graph(radius, radius, h, radius_factor=radius_factor, status_callback=status_callback)
    seams = ()
    if kind == "sphere":
        kappa = 1.0 if kappa is None else kappa
        if kappa <= 0:
            raise DomainError("sphere needs kappa > 0")
        layout = _rings(kappa, 2 * math.pi, True, varpi(kappa), h)
    elif kind == "plane":
        layout = _rings(0.0, 2 * math.pi, True, radius, h)
    elif kind == "hyperbolic":
        kappa = -1.0 if kappa is None else kappa
        if kappa >= 0:
            raise DomainError("hyperbolic needs kappa < 0")
        layout = _rings(kappa, 2 * math.pi, True, radius, h)
    elif kind == "cone":
        if angle is None or angle <= 0:
            raise DomainError("cone needs a positive total angle")
        layout = _rings(0.0, angle, True, radius, h)
    elif kind == "glued":
        if not sectors or any(a <= 0 for a in sectors):
            raise DomainError("glued surface needs positive sector angles")
        seams = tuple(np.cumsum([0.0] + list(sectors))[:-1]) if closed else tuple(np.cumsum([0.0] + list(sectors)))
        layout = _rings(0.0, float(sum(sectors)), closed, radius, h, seams=seams)
    else:
        raise DomainError(f"unknown surface kind {kind!r}")
    return _net_from_exact(layout.exact(), h, radius_factor, kind, layout.tags, layout.planar(), layout,
                           status_callback)


def grid_graph(width, height, h, radius_factor=1.0, status_callback=None):
    """Flat lattice on [0, width] x [0, height]; the bottom row is tagged as boundary."""
    xs = np.arange(0.0, width + 1e-9, h)
    ys = np.arange(0.0, height + 1e-9, h)
    X, Y = np.meshgrid(xs, ys)
    coords = np.column_stack([X.ravel(), Y.ravel()])
    d = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=-1)
    tags = {
        "boundary": [int(i) for i in np.nonzero(coords[:, 1] < 1e-12)[0]],
        "corner": [0, len(xs) - 1, len(coords) - len(xs), len(coords) - 1],
    }
    return _net_from_exact(d, h, radius_factor, "grid", tags, coords, None, status_callback)


def pack_eps(M, eps):
    """Greedy maximal eps-packing: indices pairwise more than eps apart."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    d = M.d if hasattr(M, "d") else np.asarray(M)
    chosen = []
    free = np.ones(len(d), dtype=bool)
    for i in range(len(d)):
        if free[i]:
            chosen.append(i)
            free &= d[i] > eps
    return len(chosen), chosen


def packing_dimension(M, eps_grid):
    """Slope of log pack_eps against log 1/eps over the given eps values."""
    eps_grid = np.asarray(sorted(eps_grid), dtype=float)
    counts = np.array([pack_eps(M, e)[0] for e in eps_grid], dtype=float)
    slope = np.polyfit(np.log(1.0 / eps_grid), np.log(counts), 1)[0]
    return float(slope), counts.astype(int).tolist()
