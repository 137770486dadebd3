import math

import numpy as np
import pytest

from qpl.lmeasure import (
    box_lmeasure_total,
    completeness_report,
    lmeasure_window,
    tail_bound,
    truncated_continuity_probe,
)

LAM = 10.0


@pytest.fixture(scope="module")
def window(amo, golden):
    return lmeasure_window(0.25, LAM, amo, golden, 10, 0.05, 2.0)


def test_tail_bound_closed_form():
    C, rate = 1.0, 2.0 * 0.9 * math.log(LAM)
    brute = math.fsum(2 * C * math.exp(-rate * m) for m in range(11, 400))
    assert tail_bound(10, LAM, C, rate) == pytest.approx(brute, rel=1e-12, abs=0)
    # C = 1, rate = ln(10)/2, N = 40
    example = tail_bound(40, LAM, 1.0, math.log(LAM) / 2)
    assert example == pytest.approx(9.25e-21, rel=1e-3, abs=0)


def test_tail_bound_squares_when_window_doubles():
    # with a prefactor of one, N -> 2N + 1 squares exp(-rate (N + 1))
    rate = 1.3
    q = 2.0 / (1 - math.exp(-rate))
    a = tail_bound(10, LAM, 1.0, rate) / q
    b = tail_bound(21, LAM, 1.0, rate) / q
    assert b == pytest.approx(a * a, rel=1e-12, abs=0)


def test_tail_bound_rejects_nonpositive_rate():
    with pytest.raises(ValueError):
        tail_bound(5, LAM, 1.0, 0.0)


def test_single_entry(amo, golden):
    rep = lmeasure_window(0.25, LAM, amo, golden, 0, 0.05, 2.0)
    assert len(rep.entries) == 1 and rep.entries[0].m == 0


def test_window_bounds(window):
    assert 0.0 <= window.total <= 1.0 + 1e-8
    assert len(window.entries) == 21
    assert window.collisions == ()
    Es = [e.E for e in window.accepted]
    assert len(set(np.round(Es, 9))) == len(Es)


def test_shift_covariance(window, amo, golden):
    shifted = lmeasure_window((0.25 + golden.value) % 1.0, LAM, amo, golden, 10, 0.05, 2.0)
    for m in range(-9, 11):
        a, b = window.entry(m), shifted.entry(m - 1)
        if a.accepted and b.accepted:
            assert a.E == pytest.approx(b.E, abs=1e-10)


def test_window_rejects_large_N(amo, golden):
    with pytest.raises(ValueError):
        lmeasure_window(0.25, LAM, amo, golden, 101, 0.05, 2.0)


def test_zero_coupling_defect(amo, golden):
    rep = completeness_report(0.25, 0.0, amo, golden, 5, 0.05, 2.0)
    assert rep["defect"] == pytest.approx(1.0)
    assert not rep["tail_certified"]


def test_continuity_probe(amo, golden):
    assert truncated_continuity_probe(0.25, 0.25, LAM, amo, golden, 10, 0.05, 2.0) == 0.0
    assert truncated_continuity_probe(0.25, 0.25 + 1e-6, LAM, amo, golden, 10, 0.05, 2.0) <= 1e-2


def test_box_total(amo, golden):
    assert box_lmeasure_total(0.25, LAM, amo, golden, 60) == pytest.approx(1.0, abs=1e-10)
    assert box_lmeasure_total(0.25, 0.0, amo, golden, 60) == pytest.approx(1.0, abs=1e-10)
