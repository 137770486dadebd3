import math

import numpy as np
import pytest

from qpl.arithmetic import Frequency
from qpl.errors import NoLocalizedState
from qpl.lmeasure import box_lmeasure_total
from qpl.oracle import approximate_spectrum, finite_box_eigensystem, localized_state_near, site_potential
from qpl.potential import PotentialSpec


def test_free_laplacian(amo, golden):
    N = 20
    box = finite_box_eigensystem(0.1, 0.0, amo, golden, N)
    k = np.arange(1, 2 * N + 2)
    assert np.allclose(box.eigenvalues, np.sort(2 * np.cos(k * np.pi / (2 * N + 2))), atol=1e-12)


def test_orthonormal_and_residual(amo, golden):
    theta, lam, N = 0.25, 10.0, 150
    box = finite_box_eigensystem(theta, lam, amo, golden, N)
    U = box.eigenvectors
    assert np.max(np.abs(U.T @ U - np.eye(U.shape[1]))) <= 1e-10
    pot = site_potential(theta, lam, amo, golden, box.sites)
    HU = pot[:, None] * U
    HU[1:] += U[:-1]
    HU[:-1] += U[1:]
    res = np.max(np.abs(HU - U * box.eigenvalues)[1:-1])
    assert res <= 1e-9 * (2 + 2 * lam)
    bound = 2 + lam * 2
    assert np.all(np.abs(box.eigenvalues) <= bound)


def test_reflection_symmetry_at_zero_phase(amo, golden):
    # small coupling keeps eigenvalues well separated; localized even/odd pairs are
    # degenerate to rounding and the solver may return any mixture
    box = finite_box_eigensystem(0.0, 0.5, amo, golden, 40)
    U = box.eigenvectors
    flipped = U[::-1]
    # each eigenvector is even or odd under n -> -n
    parity = np.sum(U * flipped, axis=0)
    assert np.allclose(np.abs(parity), 1.0, atol=1e-8)


def test_localized_eigenvalues_stable_in_box_size(amo, golden):
    a = finite_box_eigensystem(0.25, 10.0, amo, golden, 150)
    b = finite_box_eigensystem(0.25, 10.0, amo, golden, 200)
    inner = np.abs(a.sites) <= 100
    checked = 0
    for k in range(a.eigenvalues.size):
        if np.sum(a.eigenvectors[inner, k] ** 2) >= 0.99:
            assert np.min(np.abs(b.eigenvalues - a.eigenvalues[k])) <= 1e-8
            checked += 1
    assert checked > 150


def test_localized_state_decay(amo, golden):
    E, u = localized_state_near(0.25, 10.0, amo, golden, 150)
    sites = np.arange(-150, 151)
    # dense eigenvectors bottom out at rounding level; fit where |u| is resolved
    n = np.abs(sites[:-1])
    sel = (n >= 2) & (np.abs(u[:-1]) > 1e-12)
    y = -0.5 * np.log(u[:-1][sel] ** 2 + u[1:][sel] ** 2)
    slope = np.polyfit(n[sel], y, 1)[0]
    assert slope >= 0.9 * math.log(10)


def test_no_localized_state_at_zero_coupling(amo, golden):
    with pytest.raises(NoLocalizedState):
        localized_state_near(0.25, 0.0, amo, golden, 100)


def test_box_mass_identity(amo, golden):
    assert box_lmeasure_total(0.25, 10.0, amo, golden, 100) == pytest.approx(1.0, abs=1e-12)


def test_spectrum_cover(amo, golden):
    flat = approximate_spectrum(1.0, PotentialSpec.trig([0.0]), golden, 55)
    assert np.allclose(flat.intervals, [[-2.0, 2.0]])
    cover = approximate_spectrum(10.0, amo, golden, 377)
    assert cover.inf >= -22 and cover.sup <= 22
    assert 30 <= cover.measure <= 40
    assert np.all(cover.contains(cover.grid(50)))
    t = cover.t_intervals
    assert t.min() >= -2.2 and t.max() <= 2.2


def test_cover_refinement(amo, golden):
    coarse = approximate_spectrum(10.0, amo, golden, 377)
    fine = approximate_spectrum(10.0, amo, golden, 987)
    probe = fine.grid(400)
    assert np.all(coarse.contains(probe))
