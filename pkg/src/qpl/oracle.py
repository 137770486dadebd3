"""Finite-box diagonalization and periodic-approximant spectrum covers.

This module is the independent ground truth for the constructive pipeline:
it never touches the cocycle or the induction, only dense linear algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvalsh

from .arithmetic import Frequency, orbit
from .errors import NoLocalizedState
from .potential import PotentialSpec, evaluate

MAX_HALF_WIDTH = 5000
MIN_LOCALIZED_MASS = 0.5


@dataclass(frozen=True)
class FiniteBoxResult:
    """Dirichlet truncation of H on sites -N..N; eigenvectors are columns."""

    half_width: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    boundary: str = "dirichlet"

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.half_width, self.half_width + 1)

    def index_of(self, site: int) -> int:
        return site + self.half_width


def site_potential(theta, lam, spec: PotentialSpec, freq: Frequency, sites) -> np.ndarray:
    """lambda * v(theta + n alpha) for the integer sites ``n``."""
    return lam * evaluate(spec, orbit(theta, freq, sites))[0]


def finite_box_eigensystem(theta, lam, spec, freq, N: int) -> FiniteBoxResult:
    if not 1 <= N <= MAX_HALF_WIDTH:
        raise ValueError(f"N must lie in 1..{MAX_HALF_WIDTH}")
    sites = np.arange(-N, N + 1)
    diag = site_potential(theta, lam, spec, freq, sites)
    w, vecs = eigh_tridiagonal(diag, np.ones(2 * N), lapack_driver="stemr")
    # fix the sign so the largest-magnitude entry is positive: reproducible output
    pivot = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    return FiniteBoxResult(N, w, vecs)


def localized_state_near(theta, lam, spec, freq, N: int, site: int = 0):
    """The box eigenpair with the largest |u(site)|^2.

    Selecting on the single-site mass rather than the two-site mass keeps the
    state centred at ``site``; the two-site mass also rewards a neighbour
    state peaked at site + 1.
    """
    if N < 50:
        raise ValueError("N must be at least 50")
    box = finite_box_eigensystem(theta, lam, spec, freq, N)
    j = box.index_of(site)
    mass = box.eigenvectors[j] ** 2
    k = int(np.argmax(mass))
    if mass[k] < MIN_LOCALIZED_MASS:
        raise NoLocalizedState(
            f"largest mass at site {site} is {mass[k]:.3g} < {MIN_LOCALIZED_MASS}; no localized state there"
        )
    return float(box.eigenvalues[k]), box.eigenvectors[:, k].copy()


@dataclass(frozen=True)
class SpectrumCover:
    """Union of closed energy intervals containing the spectrum."""

    intervals: np.ndarray
    lam: float
    q: int
    padding: float

    @property
    def measure(self) -> float:
        return float(np.sum(self.intervals[:, 1] - self.intervals[:, 0]))

    @property
    def t_intervals(self) -> np.ndarray:
        if self.lam == 0:
            raise ValueError("t = E/lambda is undefined at lambda = 0")
        t = self.intervals / self.lam
        return np.sort(t, axis=1) if self.lam > 0 else np.sort(t, axis=1)[::-1]

    @property
    def inf(self) -> float:
        return float(self.intervals[0, 0])

    @property
    def sup(self) -> float:
        return float(self.intervals[-1, 1])

    def contains(self, E) -> np.ndarray:
        E = np.asarray(E, dtype=float)
        return np.any((E[..., None] >= self.intervals[:, 0]) & (E[..., None] <= self.intervals[:, 1]), axis=-1)

    def grid(self, count: int) -> np.ndarray:
        """``count`` energies evenly spaced by arc length along the cover, interior to each piece."""
        lengths = self.intervals[:, 1] - self.intervals[:, 0]
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        s = (np.arange(count) + 0.5) / count * cum[-1]
        k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(lengths) - 1)
        return self.intervals[k, 0] + (s - cum[k])


def _floquet_eigs(diag: np.ndarray, sign: float) -> np.ndarray:
    q = diag.size
    if q == 1:
        return diag + 2.0 * sign
    m = np.diag(diag) + np.diag(np.ones(q - 1), 1) + np.diag(np.ones(q - 1), -1)
    m[0, q - 1] += sign
    m[q - 1, 0] += sign
    return eigvalsh(m)


def merge_intervals(iv: np.ndarray, slack: float = 1e-9) -> np.ndarray:
    """Union of closed intervals; pieces closer than ``slack`` are joined."""
    iv = iv[np.argsort(iv[:, 0], kind="stable")]
    out = [list(iv[0])]
    for a, b in iv[1:]:
        if a <= out[-1][1] + slack:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return np.array(out)


def approximate_spectrum(lam, spec: PotentialSpec, freq: Frequency, q_denominator: int, grid: int = 16) -> SpectrumCover:
    """Periodic-approximant cover of the spectrum.

    Uses the convergent p/q with q = ``q_denominator``. Bands of the period-q
    operator are computed on ``grid`` phases in [0, 1/q) and padded for the
    phase discretization and for the distance |alpha - p/q| (square-root
    continuity of spectra in the frequency, with constant 6).
    """
    q = int(q_denominator)
    matches = [p for p, qq in freq.convergents if qq == q]
    p = matches[0] if matches else round(q * freq.value)
    lip = abs(lam) * spec.sup_norm_derivative()
    delta = abs(float(freq.exact_mpf() - p / q))
    pad_freq = 6.0 * math.sqrt(lip * delta / (2.0 * math.pi))
    pad_phase = lip / (2.0 * q * grid)
    pad = pad_freq + pad_phase
    sites = np.arange(q)
    lo = np.full(q, np.inf)
    hi = np.full(q, -np.inf)
    for g in range(grid):
        theta = g / (q * grid)
        diag = lam * evaluate(spec, np.mod(theta + sites * p / q, 1.0))[0]
        e0, e1 = _floquet_eigs(diag, 1.0), _floquet_eigs(diag, -1.0)
        lo = np.minimum(lo, np.minimum(e0, e1))
        hi = np.maximum(hi, np.maximum(e0, e1))
    bound = 2.0 + abs(lam) * spec.sup_norm()
    bands = np.column_stack([np.maximum(lo - pad, -bound), np.minimum(hi + pad, bound)])
    return SpectrumCover(merge_intervals(bands), float(lam), q, pad)
