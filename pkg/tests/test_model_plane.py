import math

import numpy as np
import pytest

from curvkit.model_plane import (
    ModelSpace,
    TriangleSides,
    alexandrov_sign,
    angle_interval,
    cs,
    extended_model_angle,
    geodesic_point,
    hemisphere_check,
    lay_triangle,
    md,
    md_inverse,
    model_angle,
    model_angles,
    model_distance,
    model_side,
    sn,
    varpi,
)
from curvkit.utils import DomainError


def test_trig_functions():
    assert sn(1.0, math.pi / 2) == pytest.approx(1.0)
    assert cs(1.0, 0.0) == 1.0
    assert sn(0.0, 2.5) == 2.5
    assert md(0.0, 2.0) == pytest.approx(2.0)
    assert md(1.0, math.pi) == pytest.approx(2.0)
    assert md(-1.0, 1.3) == pytest.approx(math.cosh(1.3) - 1)
    assert varpi(4.0) == pytest.approx(math.pi / 2)
    assert varpi(-1.0) == math.inf


@pytest.mark.parametrize("kappa", [-1.0, 0.0, 1.0])
def test_md_inverse(kappa):
    x = np.linspace(0.0, 3.0, 31)
    np.testing.assert_allclose(md_inverse(kappa, md(kappa, x)), x, atol=1e-9)


def test_md_satisfies_its_ode():
    x = np.linspace(0.1, 1.4, 50)
    step = 1e-4
    for kappa in (-1.0, 0.0, 1.0):
        second = (md(kappa, x + step) - 2 * md(kappa, x) + md(kappa, x - step)) / step**2
        np.testing.assert_allclose(second + kappa * md(kappa, x), 1.0, atol=1e-6)


def test_cosine_law_examples():
    assert model_side(0.0, math.pi / 3, 1.0, 1.0) == pytest.approx(1.0)
    assert model_side(1.0, math.pi / 2, math.pi / 2, math.pi / 2) == pytest.approx(math.pi / 2)
    assert model_side(0.0, math.pi / 2, 3.0, 4.0) == pytest.approx(5.0)


def test_negative_side_flips_angle():
    assert model_side(0.0, 0.7, 1.0, -2.0) == pytest.approx(model_side(0.0, math.pi - 0.7, 1.0, 2.0))


def test_model_side_domain():
    with pytest.raises(DomainError):
        model_side(1.0, 0.5, 4.0, 1.0)
    with pytest.raises(DomainError):
        model_side(0.0, 4.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        model_angle(0.0, math.nan, 1.0, 1.0)


@pytest.mark.parametrize("kappa", [-1.0, 0.0, 1.0])
def test_angle_side_roundtrip(kappa, rng):
    for _ in range(200):
        b, c = rng.uniform(0.05, 1.4, 2)
        phi = rng.uniform(0.01, math.pi - 0.01)
        a = model_side(kappa, phi, b, c)
        assert model_angle(kappa, a, b, c) == pytest.approx(phi, abs=1e-9)


def test_undefined_angles():
    assert model_angle(0.0, 3.0, 1.0, 1.0) is None
    assert model_angle(1.0, 2.5, 2.0, 2.0) is None
    assert model_angle(0.0, 1.0, 0.0, 1.0) is None
    assert np.isnan(model_angles(0.0, [3.0], [1.0], [1.0])[0])


def test_degenerate_triangle_is_defined():
    assert model_angle(0.0, 2.0, 1.0, 1.0) == pytest.approx(math.pi)
    assert model_angle(0.0, 0.0, 1.0, 1.0) == pytest.approx(0.0)


def test_extended_model_angle():
    assert extended_model_angle(1.0, 3.0, 3.0, 3.0) == math.pi
    assert extended_model_angle(1.0, 2.0, 1.5, 3.5) == 0.0
    assert extended_model_angle(1.0, 2.0, 3.5, 1.5) == 0.0
    assert extended_model_angle(1.0, 4.0, 2.0, 2.0) == math.pi
    assert extended_model_angle(1.0, 1.0, 1.0, 1.0) == pytest.approx(model_angle(1.0, 1.0, 1.0, 1.0))


def test_extended_model_angle_bounds_smaller_curvatures():
    for a, b, c in [(3.0, 3.0, 3.0), (1.0, 2.0, 2.5), (2.5, 2.0, 2.5)]:
        top = extended_model_angle(1.0, a, b, c)
        for K in np.linspace(-2.0, 1.0, 13):
            phi = model_angle(K, a, b, c)
            if phi is not None:
                assert phi <= top + 1e-12


def test_extended_model_angle_needs_positive_curvature():
    with pytest.raises(DomainError):
        extended_model_angle(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        extended_model_angle(-1.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        extended_model_angle(1.0, 1.0, 0.0, 1.0)


def test_angles_grow_with_kappa():
    kappas = np.linspace(-2.0, 2.0, 9)
    angles = [model_angle(k, 1.0, 1.0, 1.0) for k in kappas]
    assert all(b > a for a, b in zip(angles, angles[1:]))
    assert model_angle(0.0, 1.0, 1.0, 1.0) == pytest.approx(math.pi / 3)


def test_alexandrov_sign():
    r = math.sqrt(0.5)
    assert alexandrov_sign(0.0, 1.0, r, 1.0, r, 0.5) == 1
    assert alexandrov_sign(0.0, 1.0, r, 1.0, r, 0.9) == -1
    assert alexandrov_sign(0.0, 1.0, r, 1.0, r, r) == 0
    assert alexandrov_sign(1.0, 2.0, 1.5, 2.0, 1.5, 1.0) is None


@pytest.mark.parametrize("kappa", [-1.0, 1.0])
def test_exp_log_roundtrip(kappa, rng):
    space = ModelSpace(kappa, 2)
    pts = space.sample_ball(20, 1.0, rng)
    p = pts[0]
    for q in pts[1:]:
        back = space.exp(p, space.log(p, q))
        np.testing.assert_allclose(back, q, atol=1e-9)
        assert float(space.tangent_norm(space.log(p, q))) == pytest.approx(float(space.distance(p, q)))


def test_polar_distance():
    for kappa in (-1.0, 0.0, 1.0):
        space = ModelSpace(kappa, 2)
        q = space.polar(0.7, 1.2)
        assert float(space.distance(space.origin(), q)) == pytest.approx(0.7)
        r, theta = space.to_polar(q)
        assert float(theta) == pytest.approx(1.2)


@pytest.mark.parametrize("kappa", [-1.0, 0.0, 1.0])
def test_lay_triangle(kappa):
    sides = TriangleSides(0.9, 0.8, 1.1)
    config = lay_triangle(kappa, sides)
    d = config.distances()
    assert d[1, 2] == pytest.approx(0.9)
    assert d[0, 2] == pytest.approx(0.8)
    assert d[0, 1] == pytest.approx(1.1)
    with pytest.raises(DomainError):
        lay_triangle(kappa, (3.0, 1.0, 1.0))


def test_angle_interval_contains_nominal():
    nominal = model_angle(0.0, 1.0, 1.2, 0.9)
    lo, hi = angle_interval(0.0, 1.0, 1.2, 0.9, 0.01)
    assert lo <= nominal <= hi
    lo2, hi2 = angle_interval(0.0, 1.0, 1.2, 0.9, 0.05)
    assert lo2 <= lo and hi2 >= hi
    lo0, hi0 = angle_interval(0.0, 1.0, 1.2, 0.9, 0.0)
    assert lo0 == hi0 == pytest.approx(nominal)


def test_hemisphere_check():
    space = ModelSpace(1.0, 2)
    triangle = np.array([space.polar(0.5, t) for t in (0.0, 2.0, 4.0)])
    res = hemisphere_check(1.0, triangle)
    assert res.open and res.contained
    with pytest.raises(DomainError):
        hemisphere_check(0.0, triangle)


def test_hemisphere_of_a_great_circle_is_closed():
    space = ModelSpace(1.0, 2)
    equator = np.array([space.polar(math.pi / 2, t) for t in (0.0, math.pi / 2, math.pi, 1.5 * math.pi)])
    res = hemisphere_check(1.0, equator)
    assert res.length == pytest.approx(2 * math.pi)
    assert not res.open
    assert res.contained
    assert abs(res.margin) < 1e-9


def test_hemisphere_of_a_tiny_circle_is_open():
    space = ModelSpace(1.0, 2)
    loop = np.array([space.polar(0.01, k * math.pi / 3) for k in range(6)])
    res = hemisphere_check(1.0, loop)
    assert res.open and res.contained
    assert res.margin > 0.99
    assert res.witness is None


def test_model_point_operations():
    P, Q = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    assert model_distance(1.0, P, Q) == pytest.approx(math.pi / 2)
    np.testing.assert_allclose(geodesic_point(1.0, P, Q, 0.5), [math.sqrt(0.5), math.sqrt(0.5), 0.0], atol=1e-12)
    np.testing.assert_allclose(geodesic_point(0.0, [0.0, 0.0], [2.0, 4.0], 0.25), [0.5, 1.0])
    with pytest.raises(DomainError):
        geodesic_point(1.0, P, -P, 0.5)
    with pytest.raises(DomainError):
        geodesic_point(0.0, [0.0, 0.0], [1.0, 0.0], 1.5)


def test_lay_flat_right_triangle():
    d = lay_triangle(0.0, TriangleSides(3.0, 4.0, 5.0)).distances()
    assert sorted([d[0, 1], d[0, 2], d[1, 2]]) == pytest.approx([3.0, 4.0, 5.0], abs=1e-10)
