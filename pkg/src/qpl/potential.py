"""Even cosine-type potentials: evaluation and validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import DegenerateCritical, NotEven, PotentialError, TooManyCriticalPoints

TWO_PI = 2.0 * np.pi
EVEN_TOL = 1e-12
DEGENERACY_FLOOR = 1e-6
ROOT_XTOL = 1e-12


@dataclass(frozen=True)
class PotentialSpec:
    """A 1-periodic potential v together with v' and v''.

    ``cos_coeffs[k-1]`` multiplies cos(2 pi k x); trigonometric specs are even
    by construction. Tabulated specs interpolate uniform samples on [0, 1)
    with a periodic cubic spline.
    """

    kind: str
    cos_coeffs: tuple = ()
    samples: tuple = field(default=(), repr=False)
    parity_declared: bool = True
    _spline: object = field(default=None, repr=False, compare=False)

    @classmethod
    def almost_mathieu(cls) -> "PotentialSpec":
        return cls("almost_mathieu", (2.0,))

    @classmethod
    def trig(cls, cos_coeffs: Sequence[float]) -> "PotentialSpec":
        coeffs = tuple(float(c) for c in cos_coeffs)
        if not coeffs:
            raise PotentialError("trig potential needs at least one cosine coefficient")
        return cls("trig_polynomial", coeffs)

    @classmethod
    def tabulated(cls, samples: Sequence[float], parity_declared: bool = True) -> "PotentialSpec":
        y = np.asarray(samples, dtype=float)
        if y.ndim != 1 or y.size < 8:
            raise PotentialError("tabulated potential needs at least 8 uniform samples")
        x = np.arange(y.size + 1) / y.size
        spline = CubicSpline(x, np.append(y, y[0]), bc_type="periodic")
        return cls("tabulated", (), tuple(y), parity_declared, spline)

    @classmethod
    def from_config(cls, cfg: dict) -> "PotentialSpec":
        kind = cfg.get("type")
        if kind == "amo":
            return cls.almost_mathieu()
        if kind == "trig":
            return cls.trig(cfg["cos_coeffs"])
        if kind == "tabulated":
            return cls.tabulated(cfg["samples"], bool(cfg.get("even", True)))
        raise PotentialError(f"unknown potential type {kind!r}")

    def to_config(self) -> dict:
        if self.kind == "almost_mathieu":
            return {"type": "amo"}
        if self.kind == "trig_polynomial":
            return {"type": "trig", "cos_coeffs": list(self.cos_coeffs)}
        return {"type": "tabulated", "samples": list(self.samples), "even": self.parity_declared}

    @property
    def is_trig(self) -> bool:
        return self.kind != "tabulated"

    def __call__(self, x):
        return evaluate(self, x)[0]

    def value(self, x):
        return evaluate(self, x)[0]

    def sup_norm_derivative(self, grid: int = 4096) -> float:
        """max |v'| (exact bound for trig specs, grid estimate otherwise)."""
        if self.is_trig:
            return float(sum(TWO_PI * k * abs(c) for k, c in enumerate(self.cos_coeffs, 1)))
        x = (np.arange(grid) + 0.5) / grid
        return float(np.max(np.abs(evaluate(self, x)[1])))

    def sup_norm(self) -> float:
        if self.is_trig:
            return float(sum(abs(c) for c in self.cos_coeffs))
        return float(np.max(np.abs(self.samples)))


def evaluate(spec: PotentialSpec, x):
    """(v, v', v'') at ``x`` (scalar or array), after reduction mod 1."""
    x = np.mod(np.asarray(x, dtype=float), 1.0)
    # mod of a tiny negative number rounds to 1.0; keep the reduction in [0, 1)
    x = np.where(x >= 1.0, 0.0, x)
    if spec.is_trig:
        v = np.zeros_like(x)
        dv = np.zeros_like(x)
        d2v = np.zeros_like(x)
        for k, c in enumerate(spec.cos_coeffs, start=1):
            w = TWO_PI * k
            ang = w * x
            cs, sn = np.cos(ang), np.sin(ang)
            v += c * cs
            dv -= c * w * sn
            d2v -= c * w * w * cs
    else:
        s = spec._spline
        v, dv, d2v = s(x), s(x, 1), s(x, 2)
    if v.ndim == 0:
        return float(v), float(dv), float(d2v)
    return v, dv, d2v


@dataclass(frozen=True)
class CosineTypeReport:
    z_min: float
    z_max: float
    second_derivs: tuple
    even: bool
    accepted: bool
    critical_points: tuple = ()
    reason: str = ""


def validate_cosine_type(spec: PotentialSpec, grid: int = 10**4, strict: bool = True) -> CosineTypeReport:
    """Check the potential has exactly one nondegenerate minimum and maximum and is even.

    With ``strict`` the first failed condition raises; otherwise the report
    comes back with ``accepted=False`` and ``reason`` set.
    """
    if grid < 10**4:
        raise ValueError("grid must be at least 10^4")
    # half-step offset keeps symmetric critical points (0, 1/2) off the grid
    x = (np.arange(grid) + 0.5) / grid
    v, dv, d2v = evaluate(spec, x)
    scale = max(float(np.max(np.abs(d2v))), np.finfo(float).tiny)

    even_err = float(np.max(np.abs(v - evaluate(spec, -x)[0])))
    even = even_err <= EVEN_TOL * max(1.0, float(np.max(np.abs(v))))

    def fail(exc_type, msg, crit=(), d2=()):
        if strict:
            raise exc_type(msg)
        return CosineTypeReport(float("nan"), float("nan"), d2, even, False, crit, msg)

    if float(np.max(np.abs(d2v))) == 0.0:
        return fail(DegenerateCritical, "v is constant: every point is a degenerate critical point")

    nxt = np.roll(dv, -1)
    changes = np.flatnonzero(np.sign(dv) != np.sign(nxt))
    crit = []
    for j in changes:
        a, b = x[j], x[j] + 1.0 / grid
        c = brentq(lambda s: evaluate(spec, s)[1], a, b, xtol=ROOT_XTOL) % 1.0
        crit.append(0.0 if 1.0 - c < ROOT_XTOL else c)
    crit = tuple(sorted(crit))
    if len(crit) != 2:
        return fail(
            TooManyCriticalPoints,
            f"v' vanishes at {len(crit)} points on [0,1); cosine type needs exactly two",
            crit,
        )
    d2 = tuple(float(evaluate(spec, c)[2]) for c in crit)
    if min(abs(d) for d in d2) <= DEGENERACY_FLOOR * scale:
        return fail(DegenerateCritical, f"v'' at the critical points is {d2}; both must be nonzero", crit, d2)
    if d2[0] * d2[1] > 0:
        return fail(DegenerateCritical, "the two critical points must be one minimum and one maximum", crit, d2)
    if not even:
        return fail(NotEven, f"v(x) - v(-x) reaches {even_err:.3g}; the potential must be even", crit, d2)
    i_min = 0 if d2[0] > 0 else 1
    return CosineTypeReport(
        z_min=crit[i_min],
        z_max=crit[1 - i_min],
        second_derivs=(d2[i_min], d2[1 - i_min]),
        even=even,
        accepted=True,
        critical_points=crit,
    )
