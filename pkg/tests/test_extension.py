import math

import numpy as np
import pytest

from curvkit import extension
from curvkit.metric_core import validate_metric
from curvkit.model_plane import ModelSpace
from curvkit.utils import DomainError, FoldConfigurationError, NonShortMap


def _triangle(side):
    R = side / math.sqrt(3)
    return np.array([[R * math.cos(t), R * math.sin(t)] for t in (math.pi / 2, 7 * math.pi / 6, 11 * math.pi / 6)])


def test_equilateral_balls_meet_at_centroid():
    res = extension.ball_intersection(0.0, _triangle(math.sqrt(3)), [1.0, 1.0, 1.0])
    assert res.feasible
    np.testing.assert_allclose(res.point, [0.0, 0.0], atol=1e-4)


def test_equilateral_balls_too_small():
    res = extension.ball_intersection(0.0, _triangle(2.0), [1.0, 1.0, 1.0])
    assert not res.feasible
    assert res.margin == pytest.approx(-(2 / math.sqrt(3) - 1), abs=1e-6)


def test_hyperbolic_balls():
    space = ModelSpace(-1.0, 2)
    centers = np.array([space.polar(0.5, t) for t in (0.0, 2.1, 4.2)])
    res = extension.ball_intersection(-1.0, centers, [0.6, 0.6, 0.6])
    assert res.feasible
    assert float(np.max(space.distance(centers, res.point))) <= 0.6 + 1e-6


def test_ball_intersection_domain():
    with pytest.raises(DomainError):
        extension.ball_intersection(1.0, [[1.0, 0.0, 0.0]], [0.5])
    empty = extension.ball_intersection(0.0, np.zeros((0, 2)), [])
    assert empty.feasible


def test_grid_oracle_agrees():
    feasible, _ = extension.grid_ball_oracle(_triangle(2.0), [1.0, 1.0, 1.0], resolution=1e-2)
    assert not feasible
    feasible, best = extension.grid_ball_oracle(_triangle(math.sqrt(3)), [1.01, 1.01, 1.01], resolution=1e-2)
    assert feasible and best <= 0


def test_kirszbraun_extends_projection(rng):
    space = ModelSpace(0.0, 3)
    for _ in range(10):
        pts = rng.normal(size=(5, 3))
        M = validate_metric(space.pairwise(pts))
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        images = (pts[1:] @ q)[:, :2]
        res = extension.kirszbraun_extend(M, 0, [1, 2, 3, 4], images)
        assert res.feasible
        assert not res.soundness_fault
        reach = np.linalg.norm(images - res.point, axis=1)
        assert (reach <= M.d[0, 1:] + 1e-6).all()


def test_kirszbraun_rejects_long_map(euclidean_sample):
    M, config = euclidean_sample
    images = 2 * config.points[1:5]
    with pytest.raises(NonShortMap):
        extension.kirszbraun_extend(M, 0, [1, 2, 3, 4], images)


def test_barycentric_point_flat():
    anchors = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
    point = extension.barycentric_point(0.0, anchors, [1 / 3, 1 / 3, 1 / 3])
    np.testing.assert_allclose(point, [2 / 3, 2 / 3], atol=1e-7)
    corner = extension.barycentric_point(0.0, anchors, [0.0, 1.0, 0.0])
    np.testing.assert_allclose(corner, [2.0, 0.0], atol=1e-9)


def test_barycentric_point_hyperbolic_vertex():
    space = ModelSpace(-1.0, 2)
    anchors = np.array([space.polar(0.8, t) for t in (0.0, 2.0, 4.0)])
    point = extension.barycentric_point(-1.0, anchors, [1.0, 0.0, 0.0])
    assert float(space.distance(point, anchors[0])) < 1e-9


def test_simplex_weights_validation():
    assert extension.SimplexWeights((0.25, 0.75)).array.sum() == pytest.approx(1.0)
    with pytest.raises(DomainError):
        extension.SimplexWeights((0.5, 0.6))
    with pytest.raises(DomainError):
        extension.SimplexWeights((1.5, -0.5))


def test_simplex_grid():
    grid = extension.simplex_grid(2, 3)
    assert len(grid) == 10
    assert all(sum(c) == 3 for c in grid)


def test_lipschitz_of_collinear_anchors():
    anchors = np.array([[0.0], [1.0], [3.0]])
    assert extension.barycentric_lipschitz_estimate(0.0, anchors, resolution=4) == pytest.approx(1.5, abs=1e-6)


def test_web_of_a_segment():
    M = validate_metric(np.abs(np.subtract.outer(np.arange(5.0), np.arange(5.0))))
    res = extension.web_compute(M, [0, 4])
    assert res.web == [0, 1, 2, 3, 4]
    assert res.inner_web == [1, 2, 3]
    with pytest.raises(DomainError):
        extension.web_compute(M, [0, 0])


FOLD = dict(kappa=0.0, px=1.0, py=1.0, xy=math.sqrt(2), xz=math.sqrt(2) / 2, dot_pz=0.5)


def test_fold_map_corners_and_regions():
    fold = extension.reshetnyak_fold(**FOLD)
    assert fold.region(fold.p) == "piece_x"
    np.testing.assert_allclose(fold(fold.x), fold.dot_x, atol=1e-9)
    np.testing.assert_allclose(fold(fold.y), fold.dot_y, atol=1e-9)
    np.testing.assert_allclose(fold(fold.z), fold.dot_z, atol=1e-9)
    assert fold.alpha == pytest.approx(math.acos(0.75))


def test_fold_map_is_short():
    fold = extension.reshetnyak_fold(**FOLD)
    v = fold.audit(pairs=2000, seed=1)
    assert v.passed, v.margin
    assert v.details["corner_error"] < 1e-9


def test_fold_preconditions():
    with pytest.raises(FoldConfigurationError):
        extension.reshetnyak_fold(**{**FOLD, "dot_pz": 0.9})
    with pytest.raises(FoldConfigurationError):
        extension.reshetnyak_fold(**{**FOLD, "xz": 2.0})
