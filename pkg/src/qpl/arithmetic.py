"""Continued fractions, Diophantine conditions and rotation return times.

Frequencies keep an exact description next to the float value so that
convergents stay correct far beyond double precision and so that the
high-precision verification path can regenerate alpha at any bit count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import mpmath
import numpy as np
from scipy.special import zeta

from .errors import CapExceeded, NonConvergent

DEFAULT_DEPTH = 45
DEFAULT_KMAX = 10**6
_MP_DPS = 60
_HI_BITS = 30


@dataclass(frozen=True)
class Frequency:
    """A rotation number alpha in (0, 1) with its continued fraction data.

    ``convergents[n-1]`` is ``(p_n, q_n)`` for n = 1..len; the trivial
    ``0/1`` convergent is not stored so the denominators strictly increase.
    """

    value: float
    partial_quotients: tuple
    convergents: tuple
    kind: str = "value"
    exact: object = field(default=None, repr=False, compare=False)

    @property
    def denominators(self) -> tuple:
        return tuple(q for _, q in self.convergents)

    def q(self, n: int) -> int:
        """Denominator q_n, 1-based as in the usual continued-fraction notation."""
        if n < 1 or n > len(self.convergents):
            raise IndexError(f"convergent index {n} outside 1..{len(self.convergents)}")
        return self.convergents[n - 1][1]

    def first_index_with_q_at_least(self, bound: int) -> int:
        for n, (_, q) in enumerate(self.convergents, start=1):
            if q >= bound:
                return n
        raise IndexError(f"no stored convergent with q >= {bound}")

    @property
    def is_rational(self) -> bool:
        p, q = self.convergents[-1]
        return self.kind == "rational" or (
            isinstance(self.exact, Fraction) and self.exact == Fraction(p, q)
        )

    # Split alpha = hi + lo with hi on a 2^-30 grid: k*hi is exact in double
    # for |k| < 2^23, so frac(k*alpha) is accurate to a few ulps.
    @property
    def hi_lo(self) -> tuple:
        x = _to_mpf(self.exact if self.exact is not None else self.value)
        with mpmath.workdps(_MP_DPS):
            hi = math.floor(float(x) * 2**_HI_BITS) / 2**_HI_BITS
            lo = float(x - mpmath.mpf(hi))
        return hi, lo

    def exact_mpf(self, dps: int = _MP_DPS):
        """alpha as an mpmath number at ``dps`` digits (only meaningful inside workdps)."""
        with mpmath.workdps(dps):
            if self.kind == "golden":
                return (mpmath.sqrt(5) - 1) / 2
            if isinstance(self.exact, Fraction):
                return mpmath.mpf(self.exact.numerator) / self.exact.denominator
            return mpmath.mpf(self.exact if self.exact is not None else self.value)

    def exact_gmpy(self, bits: int):
        """alpha as a gmpy2 mpfr at the current gmpy2 context precision ``bits``."""
        import gmpy2

        ctx = gmpy2.get_context()
        ctx.precision = bits
        if self.kind == "golden":
            return (gmpy2.sqrt(gmpy2.mpfr(5)) - 1) / 2
        if isinstance(self.exact, Fraction):
            return gmpy2.mpfr(self.exact.numerator) / self.exact.denominator
        if self.exact is not None and not isinstance(self.exact, float):
            return gmpy2.mpfr(mpmath.nstr(self.exact, 80, strip_zeros=False))
        return gmpy2.mpfr(self.value)

    # constructors
    @classmethod
    def golden(cls, depth: int = DEFAULT_DEPTH) -> "Frequency":
        with mpmath.workdps(_MP_DPS):
            x = (mpmath.sqrt(5) - 1) / 2
        return expand_continued_fraction(x, depth, kind="golden")

    @classmethod
    def from_value(cls, x, depth: int = DEFAULT_DEPTH) -> "Frequency":
        return expand_continued_fraction(x, depth)

    @classmethod
    def rational(cls, p: int, q: int) -> "Frequency":
        return expand_continued_fraction(Fraction(p, q), DEFAULT_DEPTH)

    @classmethod
    def from_config(cls, cfg: dict, depth: int = DEFAULT_DEPTH) -> "Frequency":
        kind = cfg.get("type")
        if kind == "golden":
            return cls.golden(depth)
        if kind == "value":
            return cls.from_value(float(cfg["x"]), depth)
        if kind == "rational":
            return cls.rational(int(cfg["p"]), int(cfg["q"]))
        raise NonConvergent(f"unknown frequency type {kind!r}")

    def to_config(self) -> dict:
        if self.kind == "golden":
            return {"type": "golden"}
        if self.kind == "rational":
            p, q = self.convergents[-1]
            return {"type": "rational", "p": p, "q": q}
        return {"type": "value", "x": self.value}


@dataclass(frozen=True)
class DiophantineParams:
    gamma: float
    tau: float
    kmax: int = DEFAULT_KMAX

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.tau > 1:
            raise ValueError("tau must exceed 1")
        if self.kmax < 1:
            raise ValueError("kmax must be a positive integer")


@dataclass(frozen=True)
class PhaseClassWindow:
    """Window minus the excluded sets {theta : ||2 theta + k alpha|| < gamma/(|k|+1)^tau}.

    The excluded pieces are stored as parallel arrays (k, start, end), already
    clipped to the window and in window coordinates.
    """

    gamma: float
    tau: float
    window: tuple
    kmax: int
    ks: np.ndarray = field(repr=False)
    starts: np.ndarray = field(repr=False)
    ends: np.ndarray = field(repr=False)
    excluded_measure: float = 0.0
    tail: float = 0.0

    @property
    def excluded_intervals(self) -> list:
        return [(int(k), (float(a), float(b))) for k, a, b in zip(self.ks, self.starts, self.ends)]


class PhaseCheck(NamedTuple):
    member: bool
    worst_k: int
    worst_margin: float


def _to_mpf(x):
    with mpmath.workdps(_MP_DPS):
        if isinstance(x, Fraction):
            return mpmath.mpf(x.numerator) / x.denominator
        if isinstance(x, str):
            return mpmath.mpf(x)
        return mpmath.mpf(x)


def expand_continued_fraction(alpha, depth: int, kind: str | None = None) -> Frequency:
    """Continued fraction of ``alpha`` to ``depth`` partial quotients.

    ``alpha`` may be a float, a :class:`fractions.Fraction` (exact, terminates
    exactly) or an mpmath number. Float input counts as rational once a
    convergent reproduces it to a few ulps.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if isinstance(alpha, Fraction):
        if not 0 < alpha < 1:
            raise NonConvergent(f"alpha={alpha} is outside (0, 1)")
        return _expand_exact(alpha, depth)

    x = _to_mpf(alpha)
    if not 0 < x < 1:
        raise NonConvergent(f"alpha={float(x)} is outside (0, 1)")
    if isinstance(alpha, float):
        tol = 4 * math.ulp(alpha)
        kind = kind or "value"
    else:
        tol = mpmath.mpf(10) ** (-_MP_DPS + 8)
        kind = kind or "value"

    quotients, convergents = [], []
    p_prev, q_prev, p, q = 1, 0, 0, 1
    with mpmath.workdps(_MP_DPS):
        r = x
        for _ in range(depth):
            inv = 1 / r
            a = int(mpmath.floor(inv))
            r = inv - a
            p_prev, q_prev, p, q = p, q, a * p + p_prev, a * q + q_prev
            quotients.append(a)
            convergents.append((p, q))
            if r == 0 or abs(x - mpmath.mpf(p) / q) <= tol:
                break
    return Frequency(
        value=float(x),
        partial_quotients=tuple(quotients),
        convergents=tuple(convergents),
        kind=kind,
        exact=alpha if isinstance(alpha, float) else x,
    )


def _expand_exact(alpha: Fraction, depth: int) -> Frequency:
    quotients, convergents = [], []
    p_prev, q_prev, p, q = 1, 0, 0, 1
    r = alpha
    for _ in range(depth):
        inv = 1 / r
        a = inv.numerator // inv.denominator
        r = inv - a
        p_prev, q_prev, p, q = p, q, a * p + p_prev, a * q + q_prev
        quotients.append(a)
        convergents.append((p, q))
        if r == 0:
            break
    return Frequency(
        value=float(alpha),
        partial_quotients=tuple(quotients),
        convergents=tuple(convergents),
        kind="rational",
        exact=alpha,
    )


def frac_multiples(freq: Frequency, ks) -> np.ndarray:
    """frac(k * alpha) in [0, 1) for integer array ``ks``."""
    ks = np.asarray(ks, dtype=np.int64)
    if isinstance(freq.exact, Fraction):
        p, q = freq.exact.numerator, freq.exact.denominator
        return np.mod(ks * p, q) / q
    hi, lo = freq.hi_lo
    y = np.mod(ks * hi, 1.0) + ks * lo
    return np.mod(y, 1.0)


def orbit(x, freq: Frequency, ns) -> np.ndarray:
    """Points frac(x + n alpha); broadcasts ``x`` against ``ns``."""
    return np.mod(np.asarray(x, dtype=float) + frac_multiples(freq, ns), 1.0)


def circle_dist(y) -> np.ndarray:
    """||y||_{R/Z}."""
    y = np.mod(y, 1.0)
    return np.minimum(y, 1.0 - y)


def frequency_dc_margin(freq: Frequency, tau: float, kmax: int) -> float:
    """min over 1 <= k <= kmax of ||k alpha|| * k^tau (the best gamma on the horizon)."""
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    ks = np.arange(1, kmax + 1, dtype=np.int64)
    d = circle_dist(frac_multiples(freq, ks))
    return float(np.min(d * ks.astype(float) ** tau))


def phase_dc_check(theta: float, freq: Frequency, params: DiophantineParams) -> PhaseCheck:
    """Check ||2 theta + k alpha|| > gamma / (|k|+1)^tau for all |k| <= kmax."""
    ks = np.arange(-params.kmax, params.kmax + 1, dtype=np.int64)
    d = circle_dist(np.mod(2.0 * theta, 1.0) + frac_multiples(freq, ks))
    margins = d * (np.abs(ks) + 1.0) ** params.tau
    j = int(np.argmin(margins))
    worst = float(margins[j])
    return PhaseCheck(member=worst > params.gamma, worst_k=int(ks[j]), worst_margin=worst)


def _in_target(y, target) -> np.ndarray:
    hit = np.zeros(np.shape(y), dtype=bool)
    for a, b in target:
        hit |= np.mod(y - a, 1.0) <= (b - a)
    return hit


def first_return_times(
    xs,
    target: Sequence,
    freq: Frequency,
    n_min: int,
    direction: str,
    cap: int,
    chunk: int = 8192,
) -> np.ndarray:
    """Vectorised :func:`first_return_time` over an array of base points."""
    if n_min < 1:
        raise ValueError("n_min must be >= 1")
    if cap <= n_min:
        raise ValueError("cap must exceed n_min")
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if not np.all(_in_target(xs, target)):
        raise ValueError("base point is not inside the target set")
    sign = 1 if direction == "forward" else -1
    out = np.full(xs.shape, -1, dtype=np.int64)
    todo = np.arange(xs.size)
    start = n_min
    while todo.size and start <= cap:
        stop = min(start + chunk, cap + 1)
        ns = np.arange(start, stop, dtype=np.int64)
        shifts = frac_multiples(freq, sign * ns)
        y = np.mod(xs[todo, None] + shifts[None, :], 1.0)
        hit = _in_target(y, target)
        found = hit.any(axis=1)
        out[todo[found]] = ns[np.argmax(hit[found], axis=1)]
        todo = todo[~found]
        start = stop
    if todo.size:
        raise CapExceeded(
            f"{todo.size} point(s) did not return to the target within {cap} steps"
        )
    return out


def first_return_time(x, target, freq, n_min, direction, cap) -> int:
    """Smallest n >= n_min with x +/- n alpha (mod 1) back in ``target``.

    ``target`` is a sequence of at most two closed intervals (a, b), read mod 1.
    """
    if len(target) > 2:
        raise ValueError("target is a union of at most two intervals")
    return int(first_return_times([x], target, freq, n_min, direction, cap)[0])


def excluded_halfwidths(gamma: float, tau: float, ks: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return gamma / (np.abs(ks) + 1.0) ** tau


def phase_set_measure(params: DiophantineParams, freq: Frequency, window) -> tuple:
    """Lebesgue measure of ``window`` intersected with the (gamma, tau) phase class.

    Exact interval subtraction over |k| <= kmax. The returned window object
    carries ``tail``, an upper bound on the measure removed by |k| > kmax, so
    ``measure - tail`` is a lower bound for the infinite-horizon set.
    """
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo or hi - lo > 1.0:
        raise ValueError("window must satisfy lo < hi <= lo + 1")
    ks = np.arange(-params.kmax, params.kmax + 1, dtype=np.int64)
    delta = excluded_halfwidths(params.gamma, params.tau, ks)
    base = np.mod(-frac_multiples(freq, ks), 1.0) / 2.0
    # ||2 theta - c|| < delta  <=>  theta within delta/2 of c/2 or c/2 + 1/2
    centers = np.concatenate([base, base + 0.5])
    half = np.concatenate([delta, delta]) / 2.0
    kk = np.concatenate([ks, ks])
    full = half >= 0.5
    if np.any(full):
        ks_full = kk[full]
        return 0.0, PhaseClassWindow(
            params.gamma, params.tau, (lo, hi), params.kmax,
            ks_full[:1], np.array([lo]), np.array([hi]), hi - lo, 0.0,
        )
    keep = half > 0
    centers, half, kk = centers[keep], half[keep], kk[keep]
    c0 = lo + np.mod(centers - lo, 1.0)
    c_all = np.concatenate([c0, c0 - 1.0, c0 + 1.0])
    h_all = np.concatenate([half, half, half])
    k_all = np.concatenate([kk, kk, kk])
    a = np.maximum(c_all - h_all, lo)
    b = np.minimum(c_all + h_all, hi)
    nonempty = b > a
    a, b, k_all = a[nonempty], b[nonempty], k_all[nonempty]
    order = np.argsort(a, kind="stable")
    a, b, k_all = a[order], b[order], k_all[order]
    excluded = _union_length(a, b)
    tail = 4.0 * params.gamma * float(zeta(params.tau, params.kmax + 2))
    win = PhaseClassWindow(
        params.gamma, params.tau, (lo, hi), params.kmax, k_all, a, b, excluded, tail
    )
    return (hi - lo) - excluded, win


def _union_length(a: np.ndarray, b: np.ndarray) -> float:
    """Length of a union of intervals sorted by left endpoint."""
    if a.size == 0:
        return 0.0
    run_max = np.maximum.accumulate(b)
    # a new component starts where a exceeds every earlier right endpoint
    starts = np.concatenate([[True], a[1:] > run_max[:-1]])
    idx = np.flatnonzero(starts)
    comp_end = np.maximum.reduceat(b, idx)
    return float(np.sum(comp_end - a[idx]))
