import math

import numpy as np
import pytest

from curvkit import flows
from curvkit.flows import ConvexDomainSpace
from curvkit.metric_core import grid_graph, net_of_surface
from curvkit.utils import DomainError

L_FOLD = 2 * math.sin(5 * math.pi / 16)


def test_quadratic_flow_contracts():
    plane = ConvexDomainSpace("plane")
    v = flows.contraction_check(plane, flows.quadratic(), [1.0, 0.0], [0.0, 1.0], h=1e-3, T=1.0)
    assert v.passed
    assert v.details["max_deviation"] <= 3e-3


def test_halfplane_flow_stays_inside():
    half = ConvexDomainSpace("halfplane", normal=[0.0, 1.0])
    curve = flows.gradient_curve(half, flows.linear([0.3, -1.0]), [0.0, 0.5], h=1e-2, T=1.0)
    assert (curve.points[:, 1] >= -1e-12).all()
    np.testing.assert_allclose(curve.points[-1], [0.3, 0.0], atol=1e-9)
    v = flows.contraction_check(half, flows.linear([0.3, -1.0]), [0.0, 0.5], [1.0, 0.2], h=1e-2)
    assert v.passed


def test_flow_starts_inside():
    disk = ConvexDomainSpace("disk", radius=1.0)
    with pytest.raises(DomainError):
        flows.gradient_curve(disk, flows.quadratic(), [2.0, 0.0])


def test_neg_distance_flow_stops_at_target():
    plane = ConvexDomainSpace("plane")
    curve = flows.gradient_curve(plane, flows.neg_distance([1.0, 0.0]), [0.0, 0.0], h=1e-2, T=2.0)
    np.testing.assert_allclose(curve.points[-1], [1.0, 0.0], atol=1e-9)


def test_gradient_exponent_on_halfplane():
    half = ConvexDomainSpace("halfplane", normal=[0.0, 1.0])
    p = np.array([0.0, 1.0])
    np.testing.assert_allclose(flows.gradient_exponent(half, p, [1.0, -3.0]), half.project(p + [1.0, -3.0]))
    np.testing.assert_allclose(flows.gradient_exponent(half, p, [0.0, 0.0]), p)
    vectors = [[1.0, -3.0], [0.5, 0.5], [-2.0, -1.0], [0.0, 2.0]]
    assert flows.gexp_short_check(half, p, vectors).passed


def test_radial_curves_in_the_plane():
    plane = ConvexDomainSpace("plane")
    rho = flows.radial_curve(plane, [0.0, 0.0], [1.0, 0.0], h=1e-2, s_max=2.0)
    assert rho.params[-1] == pytest.approx(2.0)
    np.testing.assert_allclose(rho.points[-1], [2.0, 0.0], atol=1e-9)
    v = flows.radial_comparison_check(plane, [0.0, 0.0], [1.0, 0.0], [0.0, 1.0], h=1e-2, s_max=2.0)
    assert v.passed
    assert v.details["phi_min"] == pytest.approx(math.pi / 2)
    with pytest.raises(DomainError):
        flows.radial_curve(plane, [0.0, 0.0], [0.0, 0.0])


def test_arc_is_not_self_contracting():
    theta = np.linspace(0.0, 1.5 * math.pi, 301)
    arc = np.column_stack([np.cos(theta), np.sin(theta)])
    v = flows.self_contracting_check(arc)
    assert not v.passed
    assert v.margin == pytest.approx(math.sqrt(2) - 2, abs=1e-9)


def test_segment_is_self_contracting():
    seg = np.column_stack([np.linspace(0.0, 1.0, 50), np.zeros(50)])
    v = flows.self_contracting_check(seg)
    assert v.passed
    assert v.margin == pytest.approx(0.0, abs=1e-12)


def test_domain_audit():
    for space in (ConvexDomainSpace("disk", radius=1.5), ConvexDomainSpace("halfplane", dim=3)):
        v = space.audit(samples=100, seed=2)
        assert v.passed
        assert v.details["idempotence_error"] < 1e-12
    with pytest.raises(DomainError):
        ConvexDomainSpace("annulus")


def test_generic_domain_uses_finite_differences():
    box = ConvexDomainSpace("generic", membership=lambda x: bool((np.abs(x) <= 1).all()),
                            projection=lambda x: np.clip(x, -1.0, 1.0))
    np.testing.assert_allclose(box.tangent_projection(np.array([1.0, 0.0]), np.array([1.0, 1.0])), [0.0, 1.0],
                               atol=1e-9)


def test_development_of_a_bent_curve():
    dev = flows.develop_curve(0.0, [L_FOLD, 1.0, L_FOLD], [1.0, 1.0])
    assert not dev.convex
    assert dev.verdict.margin == pytest.approx(-math.pi / 4)
    assert dev.verdict.witness.indices == (1,)


def test_development_of_a_straight_line():
    dev = flows.develop_curve(0.0, [math.sqrt(2), 1.0, math.sqrt(2)], [1.0, 1.0])
    assert dev.convex
    assert dev.margins[0] == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(dev.points[0], [math.sqrt(2), 0.0])
    with pytest.raises(DomainError):
        flows.develop_curve(0.0, [1.0, 1.0], [1.0, 1.0])


def test_develop_path_on_a_grid():
    S = grid_graph(1.0, 1.0, 0.1)
    path = S.geodesic(0, 10)
    dev = flows.develop_path(S, 60, path)
    assert dev.convex
    with pytest.raises(DomainError):
        flows.develop_path(S, path[2], path)


def test_parallel_geodesics_on_a_grid():
    S = grid_graph(1.0, 1.0, 0.1)
    v = flows.geodesic_convexity_check(S, S.geodesic(0, 10), S.geodesic(110, 120))
    assert v.passed
    assert v.margin == pytest.approx(0.0, abs=1e-9)


def test_integrated_gradient_exponent_matches_projection():
    half = ConvexDomainSpace("halfplane", normal=[0.0, 1.0])
    p = np.array([0.0, 0.5])
    for vec in ([1.0, -2.0], [0.3, 0.4], [-1.0, -0.1], [2.0, -0.6]):
        g = flows.gradient_exponent(half, p, vec, h=1e-3, closed_form=False)
        np.testing.assert_allclose(g, half.project(p + np.asarray(vec)), atol=1e-9)
    vectors = [[1.0, -2.0], [0.5, 0.5], [-2.0, -1.0]]
    v = flows.gexp_short_check(half, p, vectors, h=1e-2, closed_form=False)
    assert v.passed
    assert v.details["slack"] == pytest.approx(0.1)


def test_custom_objective_lands_on_its_maximum():
    q = np.array([1.005, 0.0])

    def grad(x):
        v = q - x
        n = float(np.linalg.norm(v))
        return np.zeros_like(v) if n == 0 else 2 * v / n

    steep = flows.Objective("steep_cone", lambda x: -2 * float(np.linalg.norm(x - q)), grad, 0.0, argmax=q)
    plane = ConvexDomainSpace("plane")
    curve = flows.gradient_curve(plane, steep, [0.0, 0.0], h=1e-2, T=2.0)
    np.testing.assert_array_equal(curve.points[-1], q)
    blind = flows.Objective("steep_cone", steep.value, grad, 0.0)
    wobble = flows.gradient_curve(plane, blind, [0.0, 0.0], h=1e-2, T=2.0)
    assert np.linalg.norm(wobble.points[-1] - q) > 1e-3


def test_maximum_outside_the_domain_is_ignored():
    half = ConvexDomainSpace("halfplane", normal=[0.0, 1.0])
    f = flows.neg_distance([0.0, -1.0])
    curve = flows.gradient_curve(half, f, [0.0, 0.5], h=1e-2, T=1.0)
    np.testing.assert_allclose(curve.points[-1], [0.0, 0.0], atol=1e-9)


def test_meridians_on_a_sphere_net_are_not_convex():
    S = net_of_surface("sphere", 0.25, kappa=1.0)
    ring = np.flatnonzero(np.isclose(S.mesh.rho, 2.5))
    east = int(ring[np.argmin(np.abs(S.mesh.theta[ring] - math.pi / 2))])
    north = int(ring[np.argmin(np.abs(S.mesh.theta[ring]))])
    v = flows.geodesic_convexity_check(S, S.geodesic(0, north), S.geodesic(0, east), count=3)
    assert not v.passed
    assert v.details["allowance"] == pytest.approx(S.budget)
    assert v.margin < -1.0
    loose = flows.geodesic_convexity_check(S, S.geodesic(0, north), S.geodesic(0, east), count=3, allowance=3.0)
    assert loose.passed
