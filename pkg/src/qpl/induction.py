"""Multiscale induction on critical points of the angle functions.

Scale i keeps two critical points c_{i,1}, c_{i,2}, the critical intervals
I_{i,j} = [c_{i,j} - rho_i, c_{i,j} + rho_i] with rho_i = 1/(2^i q_{N+i-1}^{2 tau}),
and the first return times r_i^+/- of I_i = I_{i,1} u I_{i,2} to itself.
The next angle function is g_{i+1} = s_{r_i} - u_{r_i}, and c_{i+1,j} is its
zero inside I_{i,j}.

Index 1 is the critical point on the arc where v increases (minimum to
maximum); index 2 lives on the decreasing arc. With this orientation the
first critical point c_inf(t) increases with t.

Every state carries a double-precision chain. On request the critical points
are also polished in MPFR at a precision sized from the smallest bound they
are later tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import gmpy2
import numpy as np
from gmpy2 import mpfr
from scipy.optimize import brentq

from . import precise as hp
from .arithmetic import Frequency, circle_dist, first_return_times, frac_multiples
from .cocycle import angle_gaps, batch_log_norm, transfer_products
from .errors import LostCriticalPoint, NoBracketing
from .potential import PotentialSpec, validate_cosine_type

DEFAULT_TAU = 1.01
DEFAULT_EPSILON = 0.1
MIN_BASE_Q = 20
DEFAULT_GRID = 2048
RETURN_GRID = 64
CORE_RADIUS = 1e-10
MAX_WIDEN = 6
# zero crossings are only trusted where g is well away from the +-pi/2 branch cut
CROSSING_GUARD = np.pi / 4


@dataclass(frozen=True)
class InductionParams:
    tau: float = DEFAULT_TAU
    N_base: int | None = None
    grid: int = DEFAULT_GRID
    return_grid: int = RETURN_GRID
    gauge: str = "polar"
    cap: int = 10**6
    precise: bool = False

    def base_index(self, freq: Frequency) -> int:
        if self.N_base is not None:
            return self.N_base
        return freq.first_index_with_q_at_least(MIN_BASE_Q)


@dataclass(frozen=True)
class ScaleState:
    """One scale of the induction for a fixed scaled energy t = E/lambda."""

    i: int
    t: float
    c: tuple
    radius: float
    n: int
    r_plus: int
    r_minus: int
    r: int
    N_base: int
    tau: float
    domain_radius: float | None = None
    g_grid: np.ndarray = field(default=None, repr=False)
    g_samples: np.ndarray = field(default=None, repr=False)
    return_x: np.ndarray = field(default=None, repr=False)
    return_plus: np.ndarray = field(default=None, repr=False)
    return_minus: np.ndarray = field(default=None, repr=False)
    domain: tuple = ()
    contained: tuple = (True, True)
    c_precise: tuple | None = field(default=None, repr=False)
    c_error: tuple | None = field(default=None, repr=False)
    bits: int = 0

    @property
    def intervals(self) -> list:
        return [(cj - self.radius, cj + self.radius) for cj in self.c]

    def to_dict(self) -> dict:
        out = {
            "i": self.i,
            "t": self.t,
            "c": list(self.c),
            "radius": self.radius,
            "n": self.n,
            "r_plus": self.r_plus,
            "r_minus": self.r_minus,
            "r": self.r,
            "N_base": self.N_base,
            "contained": list(self.contained),
            "log10_symmetry_residual": symmetry_residual_log10(self),
        }
        if self.c_precise is not None:
            out["c_precise"] = [mpfr_str(c, 40) for c in self.c_precise]
            out["bits"] = self.bits
        return out


def mpfr_str(x, digits: int) -> str:
    """Scientific notation with ``digits`` significant digits."""
    if x == 0:
        return "0.0"
    mant, exp, _ = gmpy2.digits(x, 10, digits)
    sign = "-" if mant.startswith("-") else ""
    mant = mant.lstrip("-")
    return f"{sign}{mant[0]}.{mant[1:]}e{exp - 1:+d}"


def wrap_half(x):
    """Lift into [-1/2, 1/2)."""
    return np.mod(np.asarray(x, dtype=float) + 0.5, 1.0) - 0.5


def scale_radius(i: int, freq: Frequency, N_base: int, tau: float) -> float:
    return 1.0 / (2.0**i * float(freq.q(N_base + i - 1)) ** (2.0 * tau))


@lru_cache(maxsize=32)
def monotone_arcs(spec: PotentialSpec) -> tuple:
    """(increasing arc, decreasing arc) of v as unwrapped intervals."""
    rep = validate_cosine_type(spec)
    zmin, zmax = rep.z_min, rep.z_max
    up = (zmin, zmax if zmax > zmin else zmax + 1.0)
    down = (zmax, zmin if zmin > zmax else zmin + 1.0)
    return up, down


def _locate_zero(fun, xs: np.ndarray, vals: np.ndarray, center: float | None = None):
    """Sign change of ``vals`` refined by Brent's method.

    The crossing nearest the grid argmin of |g| wins, or the one nearest
    ``center`` when given.
    """
    ok = (np.abs(vals[:-1]) < CROSSING_GUARD) & (np.abs(vals[1:]) < CROSSING_GUARD)
    cross = np.flatnonzero(ok & (np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0))
    if cross.size == 0:
        return None
    if center is None:
        k = int(np.argmin(np.abs(vals)))
    else:
        k = int(np.argmin(np.abs(xs - center)))
    # leftmost among the crossings closest to the argmin
    j = int(cross[np.argmin(np.minimum(np.abs(cross - k), np.abs(cross + 1 - k)))])
    a, b = xs[j], xs[j + 1]
    if vals[j] == 0:
        return float(a)
    if vals[j + 1] == 0:
        return float(b)
    return brentq(fun, a, b, xtol=4e-16, rtol=8.9e-16, maxiter=200)


def _g_function(t, lam, spec, freq, n, gauge):
    E = lam * t

    def fun(x):
        return float(angle_gaps(x, E, lam, spec, freq, n, gauge))

    return fun


def _precise_bits(n: int, lam: float) -> int:
    # enough digits for 0.75 n log10(lam) (the contraction and evenness bounds) plus margin
    return hp.bits_for_digits(0.75 * n * math.log10(max(abs(lam), 10.0)) + 20)


def _polish(c: float, t: float, lam, spec, freq, n: int, gauge: str, bits: int):
    """MPFR zero of g_n near the double-precision zero ``c``."""
    with hp.precision(bits):
        cyc = hp.PreciseCocycle(lam, spec, freq, bits, gauge)
        E = mpfr(lam) * mpfr(t)
        f = lambda x: cyc.angle_gap(x, E, n)  # noqa: E731
        x0 = mpfr(c)
        delta = mpfr(1e-15)
        for _ in range(40):
            a, b = x0 - delta, x0 + delta
            fa, fb = f(a), f(b)
            if (fa > 0) != (fb > 0) or fa == 0 or fb == 0:
                break
            delta *= 4
        else:
            raise LostCriticalPoint("high-precision angle gap does not change sign near the double-precision zero")
        tol = mpfr(2) ** (-(bits - hp.GUARD_BITS // 2))
        root, width = hp.illinois_root(f, a, b, tol, fa, fb)
        # a root hit exactly in floating point still carries the working-precision error
        return root - gmpy2.floor(root), max(width, tol)


def _polish_pair(cs, t, lam, spec, freq, n, gauge, bits):
    roots = [_polish(cj, t, lam, spec, freq, n, gauge, bits) for cj in cs]
    return tuple(r for r, _ in roots), tuple(e for _, e in roots)


def _return_times(c, radius, freq, n_min, count, cap):
    offs = ((np.arange(count) + 0.5) / count * 2.0 - 1.0) * radius
    xs = np.mod(np.concatenate([cj + offs for cj in c]), 1.0)
    target = [(cj - radius, cj + radius) for cj in c]
    fwd = first_return_times(xs, target, freq, n_min, "forward", cap)
    bwd = first_return_times(xs, target, freq, n_min, "backward", cap)
    return xs, fwd, bwd


def _finish_state(i, t, c, n, lam, spec, freq, params, N_base, domain_radius, g_grid, g_samples,
                  c_precise, c_error, bits, domain, contained):
    radius = scale_radius(i, freq, N_base, params.tau)
    xs, fwd, bwd = _return_times(c, radius, freq, freq.q(N_base + i - 1), params.return_grid, params.cap)
    rp, rm = int(fwd.min()), int(bwd.min())
    return ScaleState(
        i=i, t=t, c=tuple(c), radius=radius, n=n,
        r_plus=rp, r_minus=rm, r=min(rp, rm), N_base=N_base, tau=params.tau,
        domain_radius=domain_radius, g_grid=g_grid, g_samples=g_samples,
        return_x=xs, return_plus=fwd, return_minus=bwd,
        domain=domain, contained=contained,
        c_precise=c_precise, c_error=c_error, bits=bits,
    )


def initialize_scale_one(t, lam, spec, freq, params: InductionParams | None = None) -> ScaleState:
    """Critical points of g_1 on the two monotonicity arcs of v."""
    params = params or InductionParams()
    N_base = params.base_index(freq)
    E = lam * t
    cs, grids, samples = [], [], []
    for a, b in monotone_arcs(spec):
        xs = np.linspace(a, b, params.grid)
        vals = angle_gaps(xs, E, lam, spec, freq, 1, params.gauge)
        root = _locate_zero(_g_function(t, lam, spec, freq, 1, params.gauge), xs, vals)
        if root is None:
            raise NoBracketing(
                f"t={t:.6g}: g_1 has no zero on the arc [{a:.4f}, {b:.4f}]; t lies outside the range of v"
            )
        cs.append(root % 1.0)
        grids.append(xs)
        samples.append(vals)
    c_precise, c_error, bits = None, None, 0
    if params.precise:
        bits = _precise_bits(1, lam)
        c_precise, c_error = _polish_pair(cs, t, lam, spec, freq, 1, params.gauge, bits)
    return _finish_state(1, t, cs, 1, lam, spec, freq, params, N_base, None,
                         np.array(grids), np.array(samples), c_precise, c_error, bits,
                         tuple(monotone_arcs(spec)), (True, True))


def advance_scale(state: ScaleState, lam, spec, freq, params: InductionParams | None = None) -> ScaleState:
    """Scale i -> i+1: zeros of g_{i+1} = s_{r_i} - u_{r_i} near each c_{i,j}.

    The search starts on I_{i,j}. At moderate lambda the first steps can move
    a zero slightly past rho_i, so without a zero the window doubles (up to
    MAX_WIDEN times, clipped to the scale-i domain) and the crossing nearest
    c_{i,j} is taken. ``contained`` records whether c_{i+1,j} stayed in I_{i,j}.
    """
    params = params or InductionParams(tau=state.tau, N_base=state.N_base)
    n = state.r
    rho = state.radius
    E = lam * state.t
    cs, grids, samples, windows, inside = [], [], [], [], []
    fun = _g_function(state.t, lam, spec, freq, n, params.gauge)
    for j, cj in enumerate(state.c):
        lo_dom, hi_dom = _unwrap_domain(state.domain[j], cj) if state.domain else (-np.inf, np.inf)
        root = None
        for k in range(MAX_WIDEN + 1):
            half = rho * 2.0**k
            lo, hi = max(cj - half, lo_dom), min(cj + half, hi_dom)
            xs = np.linspace(lo, hi, params.grid)
            vals = angle_gaps(xs, E, lam, spec, freq, n, params.gauge)
            root = _locate_zero(fun, xs, vals, None if k == 0 else cj)
            if root is not None or (lo <= lo_dom and hi >= hi_dom):
                break
        if root is None:
            raise LostCriticalPoint(
                f"t={state.t:.12g}: g_{state.i + 1} has no zero near c_{state.i},{j + 1}; "
                "t is probably outside the spectrum"
            )
        cs.append(root % 1.0)
        inside.append(bool(abs(root - cj) <= rho))
        grids.append(xs)
        samples.append(vals)
        windows.append((float(lo), float(hi)))
    c_precise, c_error, bits = None, None, 0
    if params.precise:
        bits = _precise_bits(n, lam)
        c_precise, c_error = _polish_pair(cs, state.t, lam, spec, freq, n, params.gauge, bits)
    return _finish_state(state.i + 1, state.t, cs, n, lam, spec, freq, params, state.N_base, rho,
                         np.array(grids), np.array(samples), c_precise, c_error, bits,
                         tuple(windows), tuple(inside))


def _unwrap_domain(dom, c):
    """Shift the interval ``dom`` by an integer so that it contains ``c``."""
    lo, hi = dom
    shift = math.floor(c - lo)
    if not lo + shift <= c <= hi + shift:
        shift = round(c - 0.5 * (lo + hi))
    return lo + shift, hi + shift


def run_chain(t, lam, spec, freq, scales: int, params: InductionParams | None = None) -> list:
    params = params or InductionParams()
    chain = [initialize_scale_one(t, lam, spec, freq, params)]
    while len(chain) < scales:
        chain.append(advance_scale(chain[-1], lam, spec, freq, params))
    return chain


# ---------------------------------------------------------------- estimates


def symmetry_residual_log10(state: ScaleState) -> float:
    """log10 of an upper bound for |c_{i,1} + c_{i,2}| on the circle.

    With MPFR critical points the bound adds both root-bracket widths.
    """
    if state.c_precise is not None:
        with hp.precision(state.bits):
            s = state.c_precise[0] + state.c_precise[1]
            s = abs(s - gmpy2.floor(s + mpfr("0.5"))) + state.c_error[0] + state.c_error[1]
            return float(gmpy2.log10(s))
    d = abs(float(wrap_half(state.c[0] + state.c[1])))
    return math.log10(d) if d > 0 else -math.inf


def _log10_shift(prev: ScaleState, nxt: ScaleState, j: int) -> float:
    if prev.c_precise is not None and nxt.c_precise is not None:
        with hp.precision(max(prev.bits, nxt.bits)):
            d = nxt.c_precise[j] - prev.c_precise[j]
            d = abs(d - gmpy2.floor(d + mpfr("0.5"))) + prev.c_error[j] + nxt.c_error[j]
            return float(gmpy2.log10(d))
    d = abs(float(wrap_half(nxt.c[j] - prev.c[j])))
    return math.log10(d) if d > 0 else -math.inf


def separation_check(state: ScaleState, freq: Frequency, tau: float | None = None):
    """||c_{i,1} - c_{i,2} - k alpha|| >= q_{N+i-1}^{-2 tau} for |k| <= q_{N+i-1}."""
    tau = state.tau if tau is None else tau
    q = freq.q(state.N_base + state.i - 1)
    ks = np.arange(-q, q + 1)
    d = circle_dist(state.c[0] - state.c[1] - frac_multiples(freq, ks))
    bound = float(q) ** (-2.0 * tau)
    k = int(np.argmin(d))
    return bool(d[k] >= bound), int(ks[k])


def evenness_check(state: ScaleState, lam: float, constant: float = 10.0) -> dict:
    """|c_{i,1} + c_{i,2}| <= constant * lambda^{-r_{i-1}/2} (r_0 = 1)."""
    lhs = symmetry_residual_log10(state)
    rhs = math.log10(constant) - 0.5 * state.n * math.log10(abs(lam))
    return {"i": state.i, "log10_residual": lhs, "log10_bound": rhs, "ok": bool(lhs <= rhs)}


def _cubic_ratio(state: ScaleState) -> float:
    """min |g_i(x)| / |x - c_{i,j}|^3 over the stored grid, outside the core."""
    best = math.inf
    for j, cj in enumerate(state.c):
        xs, g = state.g_grid[j], state.g_samples[j]
        dist = np.abs(wrap_half(xs - cj))
        keep = dist > CORE_RADIUS
        # the branch cut at +-pi/2 is not part of the function
        keep &= np.abs(g) < CROSSING_GUARD
        if np.any(keep):
            best = min(best, float(np.min(np.abs(g[keep]) / dist[keep] ** 3)))
    return best


def _growth_ratio(state: ScaleState, lam, spec, freq) -> float:
    """min over the return grid of log||A_{+-r^+-(x)}(x)|| / (r^+-(x) ln lambda)."""
    ln_lam = math.log(abs(lam))
    E = lam * state.t
    worst = math.inf
    for sign, times in ((1, state.return_plus), (-1, state.return_minus)):
        for r in np.unique(times):
            xs = state.return_x[times == r]
            cores, ls = transfer_products(xs, E, lam, spec, freq, sign * int(r))
            ratio = batch_log_norm(cores, ls) / (int(r) * ln_lam)
            worst = min(worst, float(np.min(ratio)))
    return worst


def _c0_gap_log10(prev: ScaleState, nxt: ScaleState, lam, spec, freq, gauge, samples: int, digits: float):
    """log10 sup |g_{i+1} - g_i| over a grid of I_i, in MPFR when the bound needs it."""
    rho = prev.radius
    offs = np.linspace(-rho, rho, samples)
    E = lam * prev.t
    if digits < 12:
        worst = 0.0
        for cj in prev.c:
            xs = cj + offs
            a = angle_gaps(xs, E, lam, spec, freq, nxt.n, gauge)
            b = angle_gaps(xs, E, lam, spec, freq, prev.n, gauge)
            worst = max(worst, float(np.max(np.abs(np.mod(a - b + np.pi / 2, np.pi) - np.pi / 2))))
        return math.log10(worst) if worst > 0 else -math.inf
    bits = hp.bits_for_digits(digits + 10)
    worst = None
    with hp.precision(bits):
        cyc = hp.PreciseCocycle(lam, spec, freq, bits, gauge)
        Em = mpfr(lam) * mpfr(prev.t)
        for cj in prev.c:
            for o in offs:
                x = mpfr(cj) + mpfr(o)
                d = abs(cyc.lift(cyc.angle_gap(x, Em, nxt.n) - cyc.angle_gap(x, Em, prev.n)))
                worst = d if worst is None else max(worst, d)
        return float(gmpy2.log10(worst)) if worst != 0 else -math.inf


def verify_scale_estimates(
    prev: ScaleState,
    nxt: ScaleState,
    lam: float,
    spec: PotentialSpec,
    freq: Frequency,
    epsilon: float = DEFAULT_EPSILON,
    gauge: str = "polar",
    c0_samples: int = 16,
) -> dict:
    """The four scale-to-scale estimates in their numeric forms, as a report.

    (1) |c_{i+1,j} - c_{i,j}| <= C lambda^{-0.7 r_{i-1}}, fitted C <= 10
    (2) log||A_{+-r(x)}(x)|| / (r(x) ln lambda) >= 1 - epsilon on the return grid of I_i
    (3) min |g_i| / |x - c_{i,j}|^3 > 0 outside a 1e-10 core
    (4) sup_{I_i} |g_{i+1} - g_i| <= C lambda^{-1.2 r_{i-1}}, fitted C <= 10, when separated
    """
    log_lam = math.log10(abs(lam))
    r_prev = prev.n
    shifts = [_log10_shift(prev, nxt, j) for j in range(2)]
    exp1 = 0.7 * r_prev * log_lam
    log_c1 = max(shifts) + exp1
    growth = _growth_ratio(prev, lam, spec, freq)
    cubic = min(_cubic_ratio(prev), _cubic_ratio(nxt))
    separated, worst_k = separation_check(prev, freq)
    exp4 = 1.2 * r_prev * log_lam
    if separated:
        gap = _c0_gap_log10(prev, nxt, lam, spec, freq, gauge, c0_samples, exp4)
        log_c4 = gap + exp4
        ok4 = bool(log_c4 <= 1.0)
    else:
        gap, log_c4, ok4 = None, None, True
    return {
        "i": prev.i,
        "r_prev": r_prev,
        "r": prev.r,
        "contraction": {
            "log10_shift": shifts,
            "log10_C": log_c1,
            "ok": bool(log_c1 <= 1.0),
        },
        "growth": {"min_ratio": growth, "threshold": 1.0 - epsilon, "ok": bool(growth >= 1.0 - epsilon)},
        "cubic": {"min_ratio": cubic, "core": CORE_RADIUS, "ok": bool(cubic > 0 and math.isfinite(cubic))},
        "angle_stability": {
            "separated": separated,
            "worst_k": worst_k,
            "log10_sup_gap": gap,
            "log10_C": log_c4,
            "ok": ok4,
        },
        "evenness": [evenness_check(prev, lam), evenness_check(nxt, lam)],
    }
