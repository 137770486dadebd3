import math

import numpy as np
import pytest

from qpl.arithmetic import DiophantineParams
from qpl.eigen import (
    LocalizedEigenpair,
    decay_rate,
    energy_for_phase,
    fold_phase,
    goodness_check,
    limit_critical_point,
    stable_unstable_limits,
)
from qpl.errors import NoLocalizedState, NonCauchy, NotDiophantine
from qpl.induction import InductionParams, run_chain, scale_radius
from qpl.oracle import localized_state_near

LAM = 10.0


@pytest.fixture(scope="module")
def pair(amo, golden):
    return energy_for_phase(0.25, LAM, amo, golden)


def _synthetic(rate, n_max=100, C=1.0):
    sites = np.arange(-n_max, n_max + 1)
    log_abs = math.log(C) - rate * np.abs(sites)
    return LocalizedEigenpair(E=0.0, t=0.0, theta=0.0, c_inf=0.0, s_inf=None, u_inf=None, gap=0.0,
                              sites=sites, samples=np.exp(log_abs), log_abs=log_abs)


def test_matches_oracle(pair, amo, golden):
    E0, u0 = localized_state_near(0.25, LAM, amo, golden, 150)
    assert pair.accepted
    assert abs(pair.E - E0) <= 1e-8
    u = np.array([pair.value_at(n) for n in range(-150, 151)])
    assert abs(u @ u0) >= 0.99


def test_normalized(pair):
    assert float(np.sum(pair.samples**2)) == pytest.approx(1.0, abs=1e-10)


def test_decay_near_log_lambda(pair):
    assert 0.9 * math.log(LAM) <= pair.decay_rate <= 1.05 * math.log(LAM)


def test_reflection(amo, golden):
    a = energy_for_phase(0.3, LAM, amo, golden)
    b = energy_for_phase(0.7, LAM, amo, golden)
    assert a.E == pytest.approx(b.E, abs=1e-12)
    ua = np.abs([a.value_at(n) for n in range(-40, 41)])
    ub = np.abs([b.value_at(-n) for n in range(-40, 41)])
    assert np.allclose(ua, ub, atol=1e-12)


def test_energy_monotone_on_increasing_arc(amo, golden):
    # for the cosine, E grows as theta moves from 1/2 towards 1
    thetas = [0.56, 0.62, 0.68, 0.74, 0.8, 0.86, 0.92]
    Es = [energy_for_phase(th, LAM, amo, golden, n_max=80).E for th in thetas]
    assert all(b > a for a, b in zip(Es, Es[1:]))


def test_fold_phase_symmetric(amo):
    assert fold_phase(0.3, amo) % 1.0 == pytest.approx(fold_phase(0.7, amo) % 1.0, abs=1e-15)


def test_stable_unstable_meet_at_critical_point(pair, amo, golden):
    *_, gap, _trace = stable_unstable_limits(pair.c_inf, pair.E, LAM, amo, golden)
    assert gap <= 1e-8
    try:
        *_, off_gap, _ = stable_unstable_limits(pair.c_inf + 0.05, pair.E, LAM, amo, golden)
    except NonCauchy:
        return
    assert off_gap > 1e-4


def test_c_inf_within_scale_radius(amo, golden):
    c, chain = limit_critical_point(0.15, LAM, amo, golden)
    ref = run_chain(0.15, LAM, amo, golden, 3)
    assert abs(((c - ref[2].c[0]) + 0.5) % 1 - 0.5) <= scale_radius(3, golden, ref[0].N_base, ref[0].tau)


def test_c_inf_endpoints(amo, golden):
    # energies near the bottom (top) of the range of v sit near its minimum (maximum)
    c_lo, _ = limit_critical_point(-1.99, LAM, amo, golden)
    c_hi, _ = limit_critical_point(1.99, LAM, amo, golden)
    assert abs(c_lo - 0.5) < 0.05
    assert abs(((c_hi - 1.0) + 0.5) % 1 - 0.5) < 0.05


def test_decay_rate_synthetic():
    slope, ci = decay_rate(_synthetic(1.7))
    assert slope == pytest.approx(1.7, abs=1e-10)
    assert ci < 1e-8


def test_goodness():
    p = _synthetic(2.0, C=1.0)
    assert goodness_check(p, 1.0, 2.0)
    assert not goodness_check(p, 1.0, 2.1)
    flat = _synthetic(0.0)
    assert not goodness_check(flat, 1.0, 0.5)


def test_not_diophantine(amo, golden):
    with pytest.raises(NotDiophantine):
        energy_for_phase(0.0, LAM, amo, golden, dc=DiophantineParams(0.05, 2.0, 10**4))


def test_zero_coupling(amo, golden):
    with pytest.raises(NoLocalizedState) as exc:
        energy_for_phase(0.25, 0.0, amo, golden)
    assert exc.value.module == "eigen"


def test_perturbed(perturbed, golden):
    p = energy_for_phase(0.25, LAM, perturbed, golden)
    E0, _ = localized_state_near(0.25, LAM, perturbed, golden, 150)
    assert p.accepted and abs(p.E - E0) <= 1e-8
    assert p.decay_rate >= 0.9 * math.log(LAM)
