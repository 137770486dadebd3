"""Windowed L-measure, its tail bound and the completeness report.

For a phase theta and |m| <= N the eigenvalue E_m(theta) belongs to the
eigenfunction of H_theta localized at site m. It is built at the shifted
phase theta + m alpha, where that eigenfunction sits at site 0, so its
values at sites 0 and 1 of the theta frame are u^{(m)}(-m) and u^{(m)}(1-m).
The weight of entry m is the average of their squares; the weights of all
eigenfunctions sum to one exactly when they form a complete basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .arithmetic import DiophantineParams, Frequency, orbit, phase_dc_check
from .eigen import DEFAULT_N_MAX, energy_for_phase
from .errors import QPLError
from .oracle import finite_box_eigensystem
from .parallel import pmap
from .potential import PotentialSpec

DEFAULT_KMAX = 10**4
MAX_WINDOW = 100
COLLISION_RESOLUTION = 1e-10


@dataclass(frozen=True)
class LMeasureEntry:
    m: int
    phase: float
    E: float
    weight: float
    diophantine_ok: bool
    accepted: bool
    status: str = "ok"

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "phase": self.phase,
            "E_m": self.E,
            "w_m": self.weight,
            "diophantine_ok": self.diophantine_ok,
            "accepted": self.accepted,
            "status": self.status,
        }


@dataclass(frozen=True)
class LMeasureReport:
    theta: float
    N: int
    entries: tuple
    total: float
    tail_bound: float
    target_set: tuple
    tail_constants: tuple = (math.nan, math.nan)
    collisions: tuple = field(default=())

    @property
    def accepted(self) -> list:
        return [e for e in self.entries if e.accepted]

    def entry(self, m: int) -> LMeasureEntry:
        return self.entries[m + self.N]

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "N": self.N,
            "total": self.total,
            "tail_bound": _finite_or_none(self.tail_bound),
            "tail_constants": {"C": _finite_or_none(self.tail_constants[0]),
                               "rate": _finite_or_none(self.tail_constants[1])},
            "target_set": {"gamma": self.target_set[0], "tau": self.target_set[1]},
            "collisions": [list(c) for c in self.collisions],
            "entries": [e.to_dict() for e in self.entries],
        }


def _finite_or_none(x):
    return x if isinstance(x, (int, float)) and math.isfinite(x) else None


def phase_to_energy_curve(theta, lam, spec, freq, **kw) -> float:
    """E(theta); theta and 1 - theta give the same value."""
    return energy_for_phase(theta, lam, spec, freq, **kw).E


def _entry(job, lam, spec, freq, dc, n_max, epsilon):
    m, phase = job
    chk = phase_dc_check(phase, freq, dc)
    if not chk.member:
        return LMeasureEntry(m, phase, math.nan, 0.0, False, False, "not_diophantine")
    try:
        pair = energy_for_phase(phase, lam, spec, freq, dc=dc, n_max=max(n_max, abs(m) + 20), check_phase=False)
    except QPLError as exc:
        return LMeasureEntry(m, phase, math.nan, 0.0, True, False, type(exc).__name__)
    w = 0.5 * (pair.value_at(-m) ** 2 + pair.value_at(1 - m) ** 2)
    status = "ok" if pair.accepted else "gate_failed"
    return LMeasureEntry(m, phase, pair.E, w, True, pair.accepted, status)


def lmeasure_window(theta, lam, spec: PotentialSpec, freq: Frequency, N: int, gamma: float, tau: float,
                    kmax: int = DEFAULT_KMAX, n_max: int = DEFAULT_N_MAX, epsilon: float = 0.1,
                    workers: int | None = None) -> LMeasureReport:
    if not 0 <= N <= MAX_WINDOW:
        raise ValueError(f"N must lie in 0..{MAX_WINDOW}")
    dc = DiophantineParams(gamma, tau, kmax)
    ms = np.arange(-N, N + 1)
    phases = orbit(theta, freq, ms)
    jobs = [(int(m), float(p)) for m, p in zip(ms, phases)]
    fn = partial(_entry, lam=lam, spec=spec, freq=freq, dc=dc, n_max=n_max, epsilon=epsilon)
    entries = tuple(pmap(fn, jobs, workers))
    accepted = [e for e in entries if e.accepted]
    total = float(math.fsum(e.weight for e in accepted))

    collisions = []
    Es = sorted((e.E, e.m) for e in accepted)
    for (e1, m1), (e2, m2) in zip(Es, Es[1:]):
        if e2 - e1 < COLLISION_RESOLUTION:
            collisions.append((m1, m2))

    # weights decay like u^2, i.e. at twice the eigenfunction rate
    if accepted and abs(lam) > 1:
        rate = 2.0 * (1.0 - epsilon) * math.log(abs(lam))
        C = max(e.weight * math.exp(rate * abs(e.m)) for e in accepted)
        tail = tail_bound(N, lam, C, rate)
    else:
        rate, C, tail = math.nan, math.nan, math.nan
    return LMeasureReport(float(theta), N, entries, total, tail, (gamma, tau), (C, rate), tuple(collisions))


def tail_bound(N: int, lam, C_goodness: float, gamma_rate: float) -> float:
    """Closed form of sum_{|m|>N} C exp(-gamma_rate |m|)."""
    if not gamma_rate > 0:
        raise ValueError("gamma_rate must be positive")
    q = math.exp(-gamma_rate)
    return 2.0 * C_goodness * math.exp(-gamma_rate * (N + 1)) / (1.0 - q)


def truncated_continuity_probe(theta, theta_prime, lam, spec, freq, N: int, gamma: float, tau: float, **kw) -> float:
    """|total(theta) - total(theta')| for the windowed L-measure."""
    a = lmeasure_window(theta, lam, spec, freq, N, gamma, tau, **kw)
    if theta_prime == theta:
        return 0.0
    b = lmeasure_window(theta_prime, lam, spec, freq, N, gamma, tau, **kw)
    return abs(a.total - b.total)


def completeness_report(theta, lam, spec, freq, N: int, gamma: float, tau: float, **kw) -> dict:
    """total, tail and defect = 1 - total - tail (the tail counts as zero when uncertified)."""
    rep = lmeasure_window(theta, lam, spec, freq, N, gamma, tau, **kw)
    tail = rep.tail_bound
    defect = 1.0 - rep.total - (tail if math.isfinite(tail) else 0.0)
    return {
        "total": rep.total,
        "tail": _finite_or_none(tail),
        "tail_certified": math.isfinite(tail),
        "defect": defect,
        "accepted": len(rep.accepted),
        "report": rep,
    }


def box_lmeasure_total(theta, lam, spec, freq, N: int) -> float:
    """Finite-box analogue: sum over the full eigenbasis of (u(0)^2 + u(1)^2)/2, exactly 1."""
    box = finite_box_eigensystem(theta, lam, spec, freq, N)
    U = box.eigenvectors
    return float(0.5 * (np.sum(U[box.index_of(0)] ** 2) + np.sum(U[box.index_of(1)] ** 2)))
