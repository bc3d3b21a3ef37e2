import math

import numpy as np
import pytest

from curvkit import metric_core
from curvkit.metric_core import (
    circle_metric,
    grid_graph,
    net_of_surface,
    pack_eps,
    packing_dimension,
    read_graph,
    sample_model_space,
    shortest_metric,
    validate_metric,
)
from curvkit.utils import DisconnectedGraph, DomainError, MetricViolation


def test_validate_metric_rejects_bad_tables():
    with pytest.raises(MetricViolation) as err:
        validate_metric([[0, 1], [2, 0]])
    assert err.value.kind == "asymmetry"
    with pytest.raises(MetricViolation) as err:
        validate_metric([[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    assert err.value.kind == "triangle"
    assert err.value.witness.indices == (0, 2, 1)
    with pytest.raises(MetricViolation) as err:
        validate_metric([[0, math.nan], [math.nan, 0]])
    assert err.value.kind == "nan"
    with pytest.raises(MetricViolation) as err:
        validate_metric([[0, 1, 2]])
    assert err.value.kind == "shape"


def test_tripod(tripod):
    assert tripod.labels == ["center", "leaf1", "leaf2", "leaf3"]
    assert tripod.diameter == 2.0
    sub = tripod.sub([1, 2])
    assert sub.labels == ["leaf1", "leaf2"]
    assert sub.d[0, 1] == 2.0


def test_circle_metric(circle4):
    assert circle4.d[0, 2] == pytest.approx(math.pi)
    assert circle4.d[0, 3] == pytest.approx(math.pi / 2)


def test_shortest_metric_and_geodesic():
    S = shortest_metric(3, [[0, 1, 1.0], [1, 2, 2.0], [0, 2, 5.0]])
    assert S.distance(0, 2) == 3.0
    assert S.geodesic(0, 2) == [0, 1, 2]


def test_geodesic_ties_go_to_smallest_index():
    S = shortest_metric(4, [[0, 2, 1.0], [2, 3, 1.0], [0, 1, 1.0], [1, 3, 1.0]])
    assert S.geodesic(0, 3) == [0, 1, 3]
    assert S.geodesic(3, 0) == [3, 1, 0]


def test_multi_edges_keep_lightest():
    S = shortest_metric(2, [[0, 1, 3.0], [1, 0, 2.0], [0, 0, 1.0]])
    assert S.distance(0, 1) == 2.0
    assert len(S.edges) == 1


def test_disconnected_graph():
    with pytest.raises(DisconnectedGraph):
        shortest_metric(4, [[0, 1, 1.0], [2, 3, 1.0]])
    with pytest.raises(DomainError):
        shortest_metric(2, [[0, 1, -1.0]])


def test_graph_document_roundtrip():
    S = grid_graph(0.4, 0.4, 0.2)
    doc = S.to_graph()
    T = read_graph(doc)
    np.testing.assert_allclose(T.d, S.d)
    assert T.tags == S.tags
    assert T.budget == S.budget
    assert T.h == 0.2
    assert T.kind == "grid"


def test_sample_model_space_is_seeded():
    a, _ = sample_model_space(1.0, 2, 10, seed=3)
    b, _ = sample_model_space(1.0, 2, 10, seed=3)
    np.testing.assert_array_equal(a.d, b.d)
    assert a.diameter < math.pi
    with pytest.raises(DomainError):
        sample_model_space(1.0, 2, 10, radius=2.0)


def test_sample_matches_configuration(hyperbolic_sample):
    M, config = hyperbolic_sample
    np.testing.assert_allclose(M.d, config.distances(), atol=1e-12)


def test_plane_net_budget():
    S = net_of_surface("plane", 0.2, radius=1.0)
    assert S.tags["tip"] == [0]
    assert S.budget >= 0
    assert S.budget == pytest.approx(float(np.max(S.d - S.exact)))
    assert S.budget_constant == pytest.approx(S.budget / 0.2)
    assert S.slack == pytest.approx(S.budget + 0.1)
    assert (S.d >= S.exact - 1e-12).all()


def test_net_arguments():
    with pytest.raises(DomainError):
        net_of_surface("cone", 0.2)
    with pytest.raises(DomainError):
        net_of_surface("sphere", 0.2, kappa=-1.0)
    with pytest.raises(DomainError):
        net_of_surface("plane", 0.0)


def test_glued_half_planes_give_a_plane():
    S = net_of_surface("glued", 0.25, sectors=[math.pi, math.pi], radius=1.0)
    P = net_of_surface("plane", 0.25, radius=1.0)
    np.testing.assert_allclose(S.exact, P.exact, atol=1e-12)
    assert float(np.max(np.abs(S.d - S.exact))) <= S.budget + 1e-12
    assert (S.d >= S.exact - 1e-12).all()
    np.testing.assert_allclose(S.d, P.d, atol=1e-12)
    assert S.tags["seam"][:1] == [0]


def test_sphere_net_budget_shrinks_with_the_mesh():
    budgets = [net_of_surface("sphere", h, kappa=1.0).budget for h in (0.4, 0.15, 0.08)]
    assert budgets[0] > budgets[1] > budgets[2] > 0
    assert budgets[2] < 0.6 * budgets[0]


def test_packing_dimension_of_a_plane_net():
    S = net_of_surface("plane", 0.1, radius=3.0)
    slope, counts = packing_dimension(S, [0.3, 0.6, 1.2])
    assert counts[0] > counts[1] > counts[2]
    assert 1.4 < slope < 2.3


def test_pack_eps():
    C = circle_metric(12)
    assert pack_eps(C, 0.6)[0] == 6
    assert pack_eps(C, 0.5)[0] == 12
    with pytest.raises(DomainError):
        pack_eps(C, 0.0)


def test_packing_dimension_of_a_circle():
    slope, counts = packing_dimension(circle_metric(360), [0.4, 0.2, 0.1])
    assert counts == [60, 30, 15]
    assert slope == pytest.approx(1.0, abs=0.05)


def test_grid_graph_tags():
    S = metric_core.grid_graph(1.0, 0.5, 0.25)
    assert S.n_vertices == 5 * 3
    assert S.tags["boundary"] == [0, 1, 2, 3, 4]
    assert S.tags["corner"] == [0, 4, 10, 14]
