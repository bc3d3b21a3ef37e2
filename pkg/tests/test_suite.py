import math

import pytest

from curvkit import suite


def test_trig_kernel_check(rng):
    out = suite.trig_kernel(rng, 500)
    assert out["pass"]
    assert out["monotone_margin"] >= 0


def test_counterexamples_check():
    out = suite.counterexamples()
    assert out["pass"]
    assert out["tripod_cbb_margin"] == pytest.approx(-math.pi)
    assert out["circle_cat_margin"] == pytest.approx(-math.pi)


def test_implication_check():
    out = suite.implication(0xA1E, 5)
    assert out["pass"]
    assert out["violations"] == 0


def test_implication_certifies_sphere_samples():
    out = suite.implication(0, 5)
    assert out["pass"]
    assert out["unresolved"] == []
    assert out["dykstra_instances"] >= 5
    assert out["max_residual"] < 1e-7


def test_flow_checks_integrate_the_gradient_exponent():
    out = suite.flow_checks()
    assert out["pass"]
    assert out["gexp_integrated_error"] < 1e-9
    assert out["gexp_error"] < 1e-12
