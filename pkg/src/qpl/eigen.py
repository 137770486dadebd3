"""Localized eigenpairs from the limiting critical point c_inf(t).

For a phase theta the energy is found in two independent ways that must
agree:

* the zero of the gap function F(E) = s_L(phi, E) - u_L(phi, E), where
  phi is theta folded onto the increasing arc of v;
* a monotone bracket [t_lo, t_hi] with c_inf(t_lo) < phi < c_inf(t_hi),
  shrunk by bisection until |c_inf(t) - phi| < tol.

The eigenvector is assembled in log space from the directions of the
solutions decaying to the right and to the left. Those directions are
obtained by recursing towards fiber 0 from far away (where the decaying
solution is the one that grows), which is numerically stable; propagating
a single initial vector outward amplifies its error like lambda^{2|n|}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .arithmetic import DiophantineParams, Frequency, orbit, phase_dc_check
from .cocycle import (
    ProjectiveDirection,
    angle_gaps,
    batch_log_norm,
    contracting_angle,
    lift_half_open,
    transfer_products,
)
from .errors import (
    DepthExceeded,
    InsufficientDecay,
    LostCriticalPoint,
    NoBracketing,
    NoLocalizedState,
    NonCauchy,
    NoSignChange,
    NotDiophantine,
    ResidualTooLarge,
)
from .induction import InductionParams, advance_scale, initialize_scale_one, monotone_arcs
from .potential import PotentialSpec, evaluate

DEFAULT_TOL = 1e-10
DEFAULT_N_MAX = 200
MAX_DEPTH = 4
GAP_WINDOW = 64
GAP_ACCEPT = 1e-8
RESIDUAL_GATE = 1e-6
EIGEN_PARAMS = InductionParams(grid=64)
DEFAULT_DC = DiophantineParams(gamma=0.01, tau=2.0, kmax=10**4)


@dataclass(frozen=True)
class LocalizedEigenpair:
    E: float
    t: float
    theta: float
    c_inf: float
    s_inf: ProjectiveDirection
    u_inf: ProjectiveDirection
    gap: float
    sites: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)
    log_abs: np.ndarray = field(repr=False)
    residual: float = math.nan
    decay_rate: float = math.nan
    decay_ci: float = math.nan
    goodness: tuple = (math.nan, math.nan)
    lam: float = math.nan
    accepted: bool = False
    diagnostics: dict = field(default_factory=dict, repr=False)

    def value_at(self, n: int) -> float:
        k = n - int(self.sites[0])
        if 0 <= k < self.sites.size:
            return float(self.samples[k])
        return 0.0

    def to_dict(self) -> dict:
        return {
            "E": self.E,
            "t": self.t,
            "theta": self.theta,
            "c_inf": self.c_inf,
            "s_inf": self.s_inf.angle,
            "u_inf": self.u_inf.angle,
            "gap": self.gap,
            "residual": self.residual,
            "decay_rate": self.decay_rate,
            "decay_ci": self.decay_ci,
            "goodness": {"C": self.goodness[0], "gamma": self.goodness[1]},
            "accepted": self.accepted,
            "diagnostics": self.diagnostics,
        }


# ------------------------------------------------------------ c_inf(t)


def limit_critical_point(t, lam, spec, freq, tol: float = DEFAULT_TOL,
                         params: InductionParams | None = None, max_depth: int = MAX_DEPTH):
    """(c_inf(t), chain): c_{i,1} once consecutive scales agree to ``tol``.

    The scale radius shrinks only polynomially in q, so the stopping rule is
    the measured increment |c_{i+1,1} - c_{i,1}| (or the radius, whichever
    drops below ``tol`` first).
    """
    if tol < 1e-10:
        raise ValueError("tol must be at least 1e-10")
    params = params or EIGEN_PARAMS
    chain = [initialize_scale_one(t, lam, spec, freq, params)]
    while True:
        if len(chain) >= max_depth:
            raise DepthExceeded(f"t={t:.12g}: no convergence to {tol:g} within {max_depth} scales")
        nxt = advance_scale(chain[-1], lam, spec, freq, params)
        inc = abs(((nxt.c[0] - chain[-1].c[0]) + 0.5) % 1.0 - 0.5)
        chain.append(nxt)
        if inc < tol or nxt.radius < tol:
            return nxt.c[0], chain


def c_inf_curve(ts, lam, spec, freq, tol: float = DEFAULT_TOL, params: InductionParams | None = None) -> np.ndarray:
    return np.array([limit_critical_point(t, lam, spec, freq, tol, params)[0] for t in ts])


# ------------------------------------------------------------ phases


def fold_phase(theta: float, spec: PotentialSpec) -> float:
    """The representative of {theta, -theta} on the increasing arc of v (unwrapped)."""
    (a, b), _ = monotone_arcs(spec)
    for cand in (theta % 1.0, (-theta) % 1.0):
        for shift in (0.0, 1.0, -1.0):
            if a <= cand + shift <= b:
                return cand + shift
    raise NoBracketing(f"theta={theta} is not on a monotonicity arc")


def gap_function(phi, E, lam, spec, freq, window: int = GAP_WINDOW):
    """s_L - u_L at base point phi; vanishes at eigenvalues of the operator at phase phi."""
    return angle_gaps(phi, E, lam, spec, freq, window, "polar")


def _gap_root(phi, E_seed, lam, spec, freq, half_width: float, points: int = 401):
    Es = E_seed + np.linspace(-half_width, half_width, points)
    F = gap_function(phi, Es, lam, spec, freq)
    ok = (np.abs(F[:-1]) < np.pi / 4) & (np.abs(F[1:]) < np.pi / 4)
    cross = np.flatnonzero(ok & (np.sign(F[:-1]) * np.sign(F[1:]) <= 0))
    if cross.size == 0:
        return None
    j = int(cross[np.argmin(np.abs(Es[cross] - E_seed))])
    f = lambda E: float(gap_function(phi, E, lam, spec, freq))  # noqa: E731
    if F[j] == 0:
        return float(Es[j])
    return brentq(f, Es[j], Es[j + 1], xtol=1e-15, rtol=8.9e-16)


def _seed_t(phi, lam, spec):
    # scale-one zero: in the polar gauge g_1 vanishes where t = v(x) up to O(lambda^-2)
    return float(evaluate(spec, phi)[0])


def _c_minus_phi(t, phi, lam, spec, freq, tol, params):
    c, _ = limit_critical_point(t, lam, spec, freq, tol, params)
    return ((c - phi) + 0.5) % 1.0 - 0.5


def energy_for_phase(theta, lam, spec, freq, tol: float = DEFAULT_TOL, dc: DiophantineParams | None = None,
                     n_max: int = DEFAULT_N_MAX, params: InductionParams | None = None,
                     check_phase: bool = True) -> LocalizedEigenpair:
    """E(theta) = lambda c_inf^{-1}(theta) with its eigenvector.

    Raises NotDiophantine when theta fails the phase condition on the
    configured horizon, and NoSignChange when no monotone bracket for
    c_inf - phi can be found.
    """
    if lam == 0:
        err = NoLocalizedState("lambda = 0: the operator is the free Laplacian and has no localized states")
        err.module = "eigen"
        raise err
    dc = dc or DEFAULT_DC
    if check_phase:
        chk = phase_dc_check(theta % 1.0, freq, dc)
        if not chk.member:
            raise NotDiophantine(
                f"theta={theta}: ||2 theta + k alpha|| (|k|+1)^tau = {chk.worst_margin:.3g} <= gamma at k={chk.worst_k}"
            )
    params = params or EIGEN_PARAMS
    phi = fold_phase(theta, spec)
    t_seed = _seed_t(phi, lam, spec)
    scale = max(abs(lam), 1.0)

    # route 1: zero of the gap function near the scale-one seed
    E_gap = _gap_root(phi, lam * t_seed, lam, spec, freq, half_width=2.0)
    t0 = E_gap / lam if E_gap is not None else t_seed

    # route 2: monotone bracket of c_inf around t0, then bisection
    h = 1e-9
    lo = hi = None
    iters = 0
    while h < 0.5:
        try:
            f_lo = _c_minus_phi(t0 - h, phi, lam, spec, freq, tol, params)
            f_hi = _c_minus_phi(t0 + h, phi, lam, spec, freq, tol, params)
        except (LostCriticalPoint, NoBracketing, DepthExceeded):
            h *= 8
            continue
        if f_lo <= 0 <= f_hi:
            lo, hi = t0 - h, t0 + h
            break
        h *= 8
    if lo is None:
        raise NoSignChange(f"theta={theta}: c_inf(t) - phi has no sign change around t={t0:.12g}")
    t_mid = 0.5 * (lo + hi)
    while True:
        t_mid = 0.5 * (lo + hi)
        f_mid = _c_minus_phi(t_mid, phi, lam, spec, freq, tol, params)
        iters += 1
        if abs(f_mid) < tol or hi - lo < 4e-16 * max(1.0, abs(t_mid)):
            break
        if f_mid < 0:
            lo = t_mid
        else:
            hi = t_mid
    routes_agree = E_gap is not None and lo * lam - 1e-12 * scale <= E_gap <= hi * lam + 1e-12 * scale
    E = E_gap if routes_agree else lam * t_mid
    diagnostics = {
        "phi": phi,
        "t_seed": t_seed,
        "E_gap_root": E_gap,
        "t_bracket": [lo, hi],
        "bisection_steps": iters,
        "routes_agree": bool(routes_agree),
    }
    s_inf, u_inf, gap, _trace = stable_unstable_limits(theta, E, lam, spec, freq)
    pair = build_eigenfunction(E, lam, spec, freq, theta, s_inf, n_max, u_inf=u_inf, gap=gap, c_inf=phi % 1.0)
    pair.diagnostics.update(diagnostics)
    return pair


# ------------------------------------------------------------ directions


def stable_unstable_limits(x, E, lam, spec, freq, n_schedule=(4, 8, 16, 32, 64, 128)):
    """Limits of s_n (forward contraction) and u_n (backward) at base point x.

    Returns (s_inf, u_inf, gap, trace) with trace the successive increments
    d(s_{n_{k+1}}, s_{n_k}) and d(u_{n_{k+1}}, u_{n_k}). Increments must fall
    geometrically down to the rounding floor, otherwise NonCauchy.
    """
    ns = list(n_schedule)
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_schedule must be increasing")
    s_ang, u_ang, norms = [], [], []
    for n in ns:
        fc, fl = transfer_products(float(x), float(E), lam, spec, freq, n)
        bc, bl = transfer_products(float(x), float(E), lam, spec, freq, -n)
        s_ang.append(float(contracting_angle(fc)))
        u_ang.append(float(contracting_angle(bc)))
        norms.append((float(batch_log_norm(fc, fl)), float(batch_log_norm(bc, bl))))
    ds = [abs(float(lift_half_open(b - a))) for a, b in zip(s_ang, s_ang[1:])]
    du = [abs(float(lift_half_open(b - a))) for a, b in zip(u_ang, u_ang[1:])]
    floor = 1e-13
    for inc in (ds, du):
        if inc and inc[-1] > max(floor, 1e-3 * inc[0]):
            raise NonCauchy(f"direction increments {inc} do not decay; x is not on a convergent orbit at E={E}")
    s_inf = ProjectiveDirection(s_ang[-1])
    u_inf = ProjectiveDirection(u_ang[-1])
    trace = {"n": ns, "ds": ds, "du": du, "log_norms": norms}
    return s_inf, u_inf, s_inf.distance(u_inf), trace


def _decaying_directions(theta, E, lam, spec, freq, n_max: int, pad: int, side: int) -> np.ndarray:
    """Unit vectors (u_n, u_{n-1}) of the solution decaying towards side*infinity, fibers 0..side*n_max."""
    L = n_max + pad
    out = np.empty((n_max + 1, 2))
    if side > 0:
        pot = lam * evaluate(spec, orbit(theta, freq, np.arange(0, L)))[0]
        w = np.array([1.0, 0.3])
        for n in range(L, 0, -1):
            # (u_n, u_{n-1}) -> (u_{n-1}, u_{n-2})
            a = E - pot[n - 1]
            w = np.array([w[1], a * w[1] - w[0]])
            w /= math.hypot(*w)
            if n - 1 <= n_max:
                out[n - 1] = w
    else:
        pot = lam * evaluate(spec, orbit(theta, freq, np.arange(-L, 0)))[0]
        w = np.array([0.3, 1.0])
        for k, n in enumerate(range(-L, 0)):
            # (u_n, u_{n-1}) -> (u_{n+1}, u_n)
            a = E - pot[k]
            w = np.array([a * w[0] - w[1], w[0]])
            w /= math.hypot(*w)
            if n + 1 >= -n_max:
                out[-(n + 1)] = w
    return out


def build_eigenfunction(E, lam, spec, freq, theta, s_inf: ProjectiveDirection, n_max: int = DEFAULT_N_MAX,
                        u_inf: ProjectiveDirection | None = None, gap: float | None = None,
                        c_inf: float | None = None, epsilon: float = 0.1, pad: int | None = None) -> LocalizedEigenpair:
    """Normalized eigenvector on |n| <= n_max, its residual, decay fit and goodness constants."""
    pad = pad if pad is not None else max(40, n_max // 4)
    dp = _decaying_directions(theta, E, lam, spec, freq, n_max, pad, +1)
    dm = _decaying_directions(theta, E, lam, spec, freq, n_max, pad, -1)
    sites = np.arange(-n_max, n_max + 1)
    logu = np.empty(sites.size)
    sign = np.empty(sites.size)
    z = n_max
    with np.errstate(divide="ignore"):
        logu[z] = math.log(abs(dp[0, 0]))
        sign[z] = 1.0
        for n in range(1, n_max + 1):
            r = dp[n, 0] / dp[n, 1]
            logu[z + n] = logu[z + n - 1] + math.log(abs(r))
            sign[z + n] = sign[z + n - 1] * math.copysign(1.0, r)
        # left side, scaled to agree with the right side at site 0
        for n in range(0, -n_max, -1):
            r = dm[-n, 1] / dm[-n, 0]
            logu[z + n - 1] = logu[z + n] + math.log(abs(r))
            sign[z + n - 1] = sign[z + n] * math.copysign(1.0, r)
    top = float(np.max(logu))
    log_norm = top + 0.5 * math.log(float(np.sum(np.exp(2.0 * (logu - top)))))
    logu = logu - log_norm
    u = sign * np.exp(logu)
    # fix the overall sign: u(0) > 0 unless it vanishes numerically
    if u[z] < 0:
        u, sign = -u, -sign

    pot = lam * evaluate(spec, orbit(theta, freq, sites))[0]
    Hu = pot * u
    Hu[1:] += u[:-1]
    Hu[:-1] += u[1:]
    residual = float(np.max(np.abs(Hu[1:-1] - E * u[1:-1])))
    h_norm = 2.0 + abs(lam) * spec.sup_norm()

    if u_inf is None:
        u_inf = s_inf
    gap = s_inf.distance(u_inf) if gap is None else gap
    seed_dir = ProjectiveDirection(math.atan2(dp[0, 1], dp[0, 0]))
    pair = LocalizedEigenpair(
        E=float(E), t=float(E / lam) if lam else math.nan, theta=float(theta),
        c_inf=float(c_inf) if c_inf is not None else math.nan,
        s_inf=s_inf, u_inf=u_inf, gap=float(gap),
        sites=sites, samples=u, log_abs=logu, residual=residual, lam=float(lam),
        diagnostics={"direction_mismatch": seed_dir.distance(s_inf), "pad": pad, "n_max": n_max},
    )
    try:
        rate, ci = decay_rate(pair)
    except InsufficientDecay:
        rate, ci = math.nan, math.nan
    gamma = (1.0 - epsilon) * math.log(abs(lam)) if abs(lam) > 1 else 0.0
    C = float(np.max(np.exp(logu + gamma * np.abs(sites))))
    accepted = bool(gap <= GAP_ACCEPT and residual <= RESIDUAL_GATE * h_norm
                    and rate >= (1.0 - epsilon) * math.log(abs(lam)))
    if residual > RESIDUAL_GATE * h_norm and gap <= GAP_ACCEPT:
        raise ResidualTooLarge(f"||Hu - Eu|| = {residual:.3g} exceeds {RESIDUAL_GATE:g} * ||H||")
    return _replace(pair, decay_rate=rate, decay_ci=ci, goodness=(C, gamma), accepted=accepted)


def _replace(pair, **kw):
    from dataclasses import replace

    return replace(pair, **kw)


# ------------------------------------------------------------ decay


def decay_rate(pair: LocalizedEigenpair, window: str = "outer_half"):
    """Slope of -ln(u(n)^2 + u(n+1)^2)/2 against |n| on the outer half of the window.

    One common slope with separate intercepts for n > 0 and n < 0. Returns
    (slope, 95% half-width).
    """
    lu = pair.log_abs
    sites = pair.sites
    y = -0.5 * np.logaddexp(2.0 * lu[:-1], 2.0 * lu[1:])
    n = sites[:-1]
    n_max = int(sites[-1])
    sel = np.abs(n) >= n_max // 2
    if np.count_nonzero(sel) < 20:
        raise InsufficientDecay("fewer than 20 usable samples in the outer half")
    n, y = n[sel], y[sel]
    design = np.column_stack([np.abs(n), (n > 0).astype(float), (n < 0).astype(float)])
    coef, res, *_ = np.linalg.lstsq(design, y, rcond=None)
    slope = float(coef[0])
    dof = max(1, y.size - 3)
    resid = y - design @ coef
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    ci = 1.96 * math.sqrt(max(cov[0, 0], 0.0))
    if not slope > 0:
        raise InsufficientDecay(f"fitted decay slope {slope:.3g} is not positive")
    return slope, ci


def goodness_check(pair: LocalizedEigenpair, C: float, gamma: float) -> bool:
    """|u(n)| <= C exp(-gamma |n|) at every stored sample."""
    bound = math.log(C) - gamma * np.abs(pair.sites)
    return bool(np.all(pair.log_abs <= bound + 1e-12))
