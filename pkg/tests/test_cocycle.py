import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpl.cocycle import (
    ProjectiveDirection,
    ScaledMatrix,
    angle_gaps,
    finite_scale_directions,
    lift_half_open,
    lyapunov_estimate,
    polar_directions,
    polar_reconstruct,
    rotation,
    schrodinger_step,
    transfer_product,
    transfer_products,
)
from qpl.errors import DegenerateNorm
from qpl.potential import PotentialSpec, evaluate
from qpl.precise import PreciseCocycle, bits_for_digits, precision


def test_step_examples(amo, golden):
    assert np.array_equal(schrodinger_step(0.0, 0.0, amo, 0.3).matrix(), [[0, -1], [1, 0]])
    assert np.allclose(schrodinger_step(0.0, 10.0, amo, 0.0).matrix(), [[-20, -1], [1, 0]])


@given(st.floats(-30, 30), st.floats(0, 20), st.floats(0, 1))
@settings(max_examples=100)
def test_step_unimodular(E, lam, x):
    M = schrodinger_step(E, lam, PotentialSpec.almost_mathieu(), x)
    assert M.det() == pytest.approx(1.0, rel=1e-10)
    assert 0.5 <= np.max(np.abs(M.core)) <= 2


def test_zero_length_is_identity(amo, golden):
    M = transfer_product(0.3, 1.0, 10.0, amo, golden, 0)
    assert np.array_equal(M.core, np.eye(2)) and M.log_scale == 0.0


def test_product_order(amo, golden):
    x, E, lam = 0.17, 1.3, 3.0
    a = golden.value
    direct = np.eye(2)
    for k in range(5):
        direct = schrodinger_step(E, lam, amo, x + k * a).matrix() @ direct
    assert np.allclose(transfer_product(x, E, lam, amo, golden, 5).matrix(), direct, rtol=1e-12)
    inv = np.eye(2)
    for k in range(1, 4):
        inv = np.linalg.inv(schrodinger_step(E, lam, amo, x - k * a).matrix()) @ inv
    assert np.allclose(transfer_product(x, E, lam, amo, golden, -3).matrix(), inv, rtol=1e-12)


def _rel(A, B):
    return float(np.max(np.abs(A.core * math.exp(A.log_scale - B.log_scale) - B.core)) / np.max(np.abs(B.core)))


@given(st.floats(0, 1), st.floats(-22, 22), st.integers(1, 60), st.integers(1, 60))
@settings(max_examples=100, deadline=None)
def test_cocycle_and_inverse_laws(x, E, m, n):
    spec, freq = PotentialSpec.almost_mathieu(), _golden()
    a = freq.value
    Am = transfer_product(x, E, 10.0, spec, freq, m)
    An = transfer_product((x + m * a) % 1, E, 10.0, spec, freq, n)
    assert _rel(An @ Am, transfer_product(x, E, 10.0, spec, freq, m + n)) <= 1e-8
    back = transfer_product(x, E, 10.0, spec, freq, -n)
    assert _rel(back, transfer_product((x - n * a) % 1, E, 10.0, spec, freq, n).inverse()) <= 1e-8


_G = {}


def _golden():
    from qpl.arithmetic import Frequency

    return _G.setdefault("g", Frequency.golden())


def test_long_products_stay_finite(amo, golden):
    core, ls = transfer_products(0.1, 0.5, 10.0, amo, golden, 10**5)
    assert np.isfinite(ls) and 0.5 <= np.max(np.abs(core)) <= 2
    assert ls / 10**5 == pytest.approx(math.log(10), rel=0.05)


def test_polar_examples():
    s, u, ln = polar_directions(ScaledMatrix.from_matrix(np.diag([2.0, 0.5])))
    assert s.angle == pytest.approx(math.pi / 2)
    assert u.angle == pytest.approx(0.0, abs=1e-15) or u.angle == pytest.approx(math.pi)
    assert ln == pytest.approx(math.log(2))
    with pytest.raises(DegenerateNorm):
        polar_directions(ScaledMatrix.from_matrix(rotation(0.7)))


def _random_sl2(rng):
    U = rotation(rng.uniform(0, np.pi))
    V = rotation(rng.uniform(0, np.pi))
    s = math.exp(rng.uniform(0.01, 5))
    return U @ np.diag([s, 1 / s]) @ V


def test_polar_against_svd_oracle():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        M = _random_sl2(rng)
        s, u, ln = polar_directions(ScaledMatrix.from_matrix(M))
        Uo, so, Vt = np.linalg.svd(M)
        s_ref = ProjectiveDirection(math.atan2(Vt[1, 1], Vt[1, 0]))
        u_ref = ProjectiveDirection(math.atan2(Uo[1, 0], Uo[0, 0]))
        assert s.distance(s_ref) <= 1e-9
        assert u.distance(u_ref) <= 1e-9
        assert ln == pytest.approx(math.log(so[0]), rel=1e-12)
        assert np.linalg.norm(M @ s.vector) * so[0] == pytest.approx(1.0, rel=1e-9)
        R = polar_reconstruct(s, u, ln)
        err = min(np.max(np.abs(R - M)), np.max(np.abs(R + M)))
        assert err <= 1e-9 * so[0]


def test_one_step_directions(amo, golden):
    # t - v(x) = 2 at lambda = 10: the step is [[20, -1], [1, 0]], s_1 within O(1/lambda) of vertical
    lam = 10.0
    x = 0.25
    E = lam * (evaluate(amo, x)[0] + 2.0)
    s1, u1 = finite_scale_directions(x, E, lam, amo, golden, 1)
    assert s1.distance(ProjectiveDirection(math.pi / 2)) <= 1.0 / lam
    s_ref, _, _ = polar_directions(schrodinger_step(E, lam, amo, x))
    assert s1.distance(s_ref) <= 1e-15


def test_polar_gauge_scale_one_angle(amo, golden):
    # conjugated coordinates: g_1(x) = atan(t - v(x)) up to O(lambda^-2)
    lam = 10.0
    xs = np.linspace(0.013, 0.987, 50)  # off the points where the step is a rotation
    for t in (-1.5, 0.0, 0.7):
        g = angle_gaps(xs, lam * t, lam, amo, golden, 1, "polar")
        ref = np.arctan(t - evaluate(amo, xs)[0])
        assert np.max(np.abs(g - ref)) <= 5.0 / lam**2


def test_raw_angle_symmetry(amo, golden):
    # even v: reflection n -> -n maps fiber 0 of phase x to fiber 0 of phase alpha - x
    xs = np.random.default_rng(0).random(20)
    for n in (1, 2, 5, 13):
        a = angle_gaps(xs, 3.0, 10.0, amo, golden, n, "raw")
        b = angle_gaps(np.mod(golden.value - xs, 1), 3.0, 10.0, amo, golden, n, "raw")
        assert np.max(np.abs(a - b)) <= 1e-12


def test_angle_gap_range(amo, golden):
    g = angle_gaps(np.linspace(0, 1, 200), 2.0, 10.0, amo, golden, 7)
    assert np.all(g > -np.pi / 2) and np.all(g <= np.pi / 2)
    assert lift_half_open(-np.pi / 2) == pytest.approx(np.pi / 2)


def test_sign_change_brackets_zero(amo, golden):
    xs = np.linspace(0.55, 0.95, 400)
    g = angle_gaps(xs, 3.0, 10.0, amo, golden, 1, "polar")
    assert np.any(np.sign(g[:-1]) != np.sign(g[1:]))


def test_lyapunov_examples(amo, golden):
    flat = PotentialSpec.trig([0.0])
    assert lyapunov_estimate(3.0, 1.0, flat, golden, 400, 4) == pytest.approx(math.log((3 + math.sqrt(5)) / 2), rel=1e-2)
    assert lyapunov_estimate(0.5, 10.0, amo, golden, 2000, 16) == pytest.approx(math.log(10), rel=0.05)
    E = 2 + 20 + 5.0
    assert lyapunov_estimate(E, 10.0, amo, golden, 500, 8) >= math.log(E - 20 - 1)


def test_scaled_matches_extended_precision(amo, golden):
    rng = np.random.default_rng(11)
    bits = bits_for_digits(80)
    with precision(bits):
        pc = PreciseCocycle(10.0, amo, golden, bits, gauge="raw")
        for _ in range(40):
            x, E = float(rng.random()), float(rng.uniform(-22, 22))
            n = int(rng.integers(1, 61)) * int(rng.choice([-1, 1]))
            M = transfer_product(x, E, 10.0, amo, golden, n)
            ref = np.array([float(v) for v in pc.product(x, E, n)]).reshape(2, 2)
            assert np.max(np.abs(M.matrix() - ref)) <= 1e-8 * np.max(np.abs(ref))
            assert M.log_norm == pytest.approx(pc.log_norm(x, E, n), rel=1e-10, abs=1e-12)
