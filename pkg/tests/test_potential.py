import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpl.errors import DegenerateCritical, NotEven, TooManyCriticalPoints
from qpl.potential import PotentialSpec, evaluate, validate_cosine_type


def test_amo_report(amo):
    rep = validate_cosine_type(amo)
    assert rep.accepted and rep.even
    assert rep.z_max == pytest.approx(0.0, abs=1e-12)
    assert rep.z_min == pytest.approx(0.5, abs=1e-12)
    v2_max = evaluate(amo, rep.z_max)[2]
    assert v2_max == pytest.approx(-8 * math.pi**2, rel=1e-12)


def test_perturbed_accepted(perturbed):
    assert validate_cosine_type(perturbed).accepted


def test_too_many_critical_points():
    with pytest.raises(TooManyCriticalPoints):
        validate_cosine_type(PotentialSpec.trig([2.0, 0.8]))
    rep = validate_cosine_type(PotentialSpec.trig([2.0, 0.8]), strict=False)
    assert not rep.accepted and rep.reason


def test_degenerate_critical():
    # 2cos + 0.5cos2: v' = -4pi sin(2pi x)(1 + cos 2pi x) vanishes to second order at 1/2
    with pytest.raises((DegenerateCritical, TooManyCriticalPoints)):
        validate_cosine_type(PotentialSpec.trig([2.0, 0.5]))


def test_not_even():
    x = np.arange(256) / 256
    samples = np.cos(2 * np.pi * x) + 0.3 * np.sin(2 * np.pi * x)
    with pytest.raises(NotEven):
        validate_cosine_type(PotentialSpec.tabulated(samples, True))


def test_tabulated_amo_accepted():
    x = np.arange(512) / 512
    spec = PotentialSpec.tabulated(2 * np.cos(2 * np.pi * x), True)
    rep = validate_cosine_type(spec)
    assert rep.accepted
    assert rep.z_min == pytest.approx(0.5, abs=1e-6)


def test_amo_values(amo):
    v, d1, d2 = evaluate(amo, 0.0)
    assert (v, d1) == pytest.approx((2.0, 0.0), abs=1e-15)
    assert d2 == pytest.approx(-8 * math.pi**2)
    v, d1, d2 = evaluate(amo, 0.25)
    assert v == pytest.approx(0.0, abs=1e-15)
    assert d1 == pytest.approx(-4 * math.pi)
    assert d2 == pytest.approx(0.0, abs=1e-12)


@given(st.floats(-3, 3), st.lists(st.floats(-2, 2), min_size=1, max_size=4))
@settings(max_examples=60)
def test_derivatives_match_finite_differences(x, coeffs):
    spec = PotentialSpec.trig(coeffs)
    h = 1e-6
    v_plus, v_minus = evaluate(spec, x + h)[0], evaluate(spec, x - h)[0]
    _, d1, _ = evaluate(spec, x)
    scale = max(1.0, spec.sup_norm_derivative())
    assert abs((v_plus - v_minus) / (2 * h) - d1) <= 1e-6 * scale


@given(st.floats(-100, 100))
def test_periodicity(x):
    spec = PotentialSpec.trig([2.0, 0.3])
    # bit-for-bit once reduced; x + 1 itself may round differently from x
    assert evaluate(spec, x) == evaluate(spec, x % 1.0)
    assert np.allclose(evaluate(spec, x), evaluate(spec, x + 1), rtol=0, atol=1e-10)


def test_evenness_on_random_points(perturbed):
    xs = np.random.default_rng(3).random(10**4)
    assert np.max(np.abs(evaluate(perturbed, xs)[0] - evaluate(perturbed, -xs)[0])) <= 1e-12


def test_config_round_trip(perturbed, amo):
    for spec in (amo, perturbed):
        again = PotentialSpec.from_config(spec.to_config())
        xs = np.linspace(0, 1, 17)
        assert np.array_equal(evaluate(again, xs)[0], evaluate(spec, xs)[0])
