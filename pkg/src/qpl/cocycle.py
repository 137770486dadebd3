"""Schrödinger cocycle: overflow-safe transfer products and projective directions.

Products are formed by a pairwise tree reduction over the step matrices,
renormalizing every partial product by a power of two so the core stays in
[1/2, 2] and the scale accumulates in a separate natural-log exponent.

Two coordinate systems are offered for directions:

``raw``
    the Schrödinger cocycle itself.
``polar``
    the cocycle conjugated by the constant matrix diag(1/lambda, 1). In these
    coordinates a single step has contracting and expanding directions that
    differ by arctan(t - v(x)) up to O(lambda^-2), so the first angle function
    has zeros exactly where the induction expects them. Constant conjugation
    preserves norms up to a factor lambda and maps stable directions to stable
    directions, so s_inf = u_inf is equivalent in both systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arithmetic import Frequency, frac_multiples
from .errors import CocycleOverflow, DegenerateNorm
from .potential import PotentialSpec, evaluate

LN2 = math.log(2.0)
DEGENERATE_LOG_NORM = math.log1p(1e-8)
MAX_STEPS = 10**6
GAUGES = ("raw", "polar")


def lift_half_open(d):
    """Reduce angle differences into (-pi/2, pi/2]."""
    return np.pi / 2 - np.mod(np.pi / 2 - np.asarray(d, dtype=float), np.pi)


@dataclass(frozen=True)
class ProjectiveDirection:
    """A point of RP^1 stored as an angle in [0, pi)."""

    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", float(np.mod(self.angle, np.pi)))

    def distance(self, other: "ProjectiveDirection") -> float:
        d = abs(self.angle - other.angle)
        return min(d, np.pi - d)

    def signed_difference(self, other: "ProjectiveDirection") -> float:
        """self - other lifted to (-pi/2, pi/2]."""
        return float(lift_half_open(self.angle - other.angle))

    @property
    def vector(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])


@dataclass(frozen=True)
class ScaledMatrix:
    """The matrix exp(log_scale) * core with max |core entry| in [1/2, 2]."""

    core: np.ndarray
    log_scale: float = 0.0

    @classmethod
    def identity(cls) -> "ScaledMatrix":
        return cls(np.eye(2), 0.0)

    @classmethod
    def from_matrix(cls, m) -> "ScaledMatrix":
        core, ls = _renormalize(np.asarray(m, dtype=float), np.zeros(()))
        return cls(core, float(ls))

    def matrix(self) -> np.ndarray:
        """The actual matrix; overflows for long products."""
        if self.log_scale > 700:
            raise CocycleOverflow(f"exp({self.log_scale:.1f}) is not representable")
        return self.core * math.exp(self.log_scale)

    @property
    def log_norm(self) -> float:
        return self.log_scale + math.log(float(_sigma_max(self.core)))

    def norm(self) -> float:
        return math.exp(self.log_norm)

    def det(self) -> float:
        return float(np.linalg.det(self.core)) * math.exp(2.0 * self.log_scale)

    def __matmul__(self, other: "ScaledMatrix") -> "ScaledMatrix":
        core, ls = _renormalize(self.core @ other.core, np.asarray(self.log_scale + other.log_scale))
        return ScaledMatrix(core, float(ls))

    def inverse(self) -> "ScaledMatrix":
        """Inverse of a unimodular matrix: its adjugate, same scale."""
        a, b, c, d = self.core.ravel()
        return ScaledMatrix(np.array([[d, -b], [-c, a]]), self.log_scale)

    def conjugated(self, gauge: str, lam: float) -> "ScaledMatrix":
        return ScaledMatrix(_gauge_core(self.core, gauge, lam), self.log_scale)


def _renormalize(core: np.ndarray, log_scale: np.ndarray):
    m = np.max(np.abs(core), axis=(-2, -1))
    if not np.all(np.isfinite(m)):
        raise CocycleOverflow("non-finite entry in transfer product")
    e = np.frexp(np.where(m > 0, m, 1.0))[1]
    core = np.ldexp(core, -e[..., None, None])
    return core, log_scale + e * LN2


def _sigma_max(core: np.ndarray):
    s = np.sum(core * core, axis=(-2, -1))
    det = core[..., 0, 0] * core[..., 1, 1] - core[..., 0, 1] * core[..., 1, 0]
    return np.sqrt(0.5 * (s + np.sqrt(np.maximum(s * s - 4.0 * det * det, 0.0))))


def gauge_scale(lam: float) -> float:
    return max(abs(float(lam)), 1.0)


def _gauge_core(core: np.ndarray, gauge: str, lam: float) -> np.ndarray:
    if gauge == "raw":
        return core
    if gauge != "polar":
        raise ValueError(f"gauge must be one of {GAUGES}, got {gauge!r}")
    b = gauge_scale(lam)
    out = np.array(core, dtype=float, copy=True)
    out[..., 0, 1] *= b
    out[..., 1, 0] /= b
    return out


def schrodinger_step(E: float, lam: float, spec: PotentialSpec, x: float) -> ScaledMatrix:
    a = E - lam * evaluate(spec, x)[0]
    return ScaledMatrix.from_matrix([[a, -1.0], [1.0, 0.0]])


def step_matrices(xs, E, lam: float, spec: PotentialSpec, freq: Frequency, n: int) -> np.ndarray:
    """The |n| factors of A_n at base points ``xs`` in application order.

    Shape is broadcast(xs, E) + (|n|, 2, 2). For n > 0 factor k is S(x + k alpha);
    for n < 0 it is S^-1(x - (k+1) alpha).
    """
    xs = np.asarray(xs, dtype=float)
    E = np.asarray(E, dtype=float)
    base = np.broadcast_shapes(xs.shape, E.shape)
    m = abs(n)
    ks = np.arange(m) if n > 0 else -(np.arange(m) + 1)
    pts = np.mod(np.broadcast_to(xs, base)[..., None] + frac_multiples(freq, ks), 1.0)
    a = np.broadcast_to(E, base)[..., None] - lam * evaluate(spec, pts)[0]
    out = np.empty(base + (m, 2, 2))
    one = np.ones_like(a)
    if n > 0:
        out[..., 0, 0], out[..., 0, 1] = a, -one
        out[..., 1, 0], out[..., 1, 1] = one, 0.0
    else:
        out[..., 0, 0], out[..., 0, 1] = 0.0, one
        out[..., 1, 0], out[..., 1, 1] = -one, a
    return out


def reduce_product(factors: np.ndarray):
    """Ordered product F_{m-1} ... F_0 over axis -3 as (core, log_scale) arrays."""
    m = factors.shape[-3]
    core, ls = _renormalize(factors, np.zeros(factors.shape[:-2]))
    while m > 1:
        if m % 2:
            pad = np.broadcast_to(np.eye(2), core.shape[:-3] + (1, 2, 2))
            core = np.concatenate([core, pad], axis=-3)
            ls = np.concatenate([ls, np.zeros(ls.shape[:-1] + (1,))], axis=-1)
        prod = core[..., 1::2, :, :] @ core[..., 0::2, :, :]
        core, ls = _renormalize(prod, ls[..., 1::2] + ls[..., 0::2])
        m = core.shape[-3]
    return core[..., 0, :, :], ls[..., 0]


def transfer_products(xs, E, lam, spec, freq, n: int, chunk: int = 1 << 20):
    """Batch A_n at base points ``xs`` (energy ``E`` broadcasts): (cores, log_scales)."""
    if abs(n) > MAX_STEPS:
        raise ValueError(f"|n| must be at most {MAX_STEPS}")
    xs = np.asarray(xs, dtype=float)
    E = np.asarray(E, dtype=float)
    base = np.broadcast_shapes(xs.shape, E.shape)
    if n == 0:
        return np.broadcast_to(np.eye(2), base + (2, 2)).copy(), np.zeros(base)
    flat_x = np.broadcast_to(xs, base).ravel()
    flat_e = np.broadcast_to(E, base).ravel()
    per = max(1, chunk // abs(n))
    cores = np.empty((flat_x.size, 2, 2))
    logs = np.empty(flat_x.size)
    for i in range(0, flat_x.size, per):
        sl = slice(i, i + per)
        cores[sl], logs[sl] = reduce_product(step_matrices(flat_x[sl], flat_e[sl], lam, spec, freq, n))
    return cores.reshape(base + (2, 2)), logs.reshape(base)


def transfer_product(x, E, lam, spec, freq, n: int) -> ScaledMatrix:
    """A_n(x) for the energy E: steps at x, x+alpha, ..., x+(n-1)alpha; inverses for n < 0."""
    core, ls = transfer_products(float(x), float(E), lam, spec, freq, n)
    return ScaledMatrix(core, float(ls))


def contracting_angle(core):
    """Angle of the right singular vector for the smallest singular value."""
    a, b, c, d = core[..., 0, 0], core[..., 0, 1], core[..., 1, 0], core[..., 1, 1]
    phi = 0.5 * np.arctan2(2.0 * (a * b + c * d), a * a + c * c - b * b - d * d)
    return np.mod(phi + np.pi / 2, np.pi)


def expanding_image_angle(core):
    """Angle of the left singular vector for the largest singular value, i.e. s(M^-1)."""
    a, b, c, d = core[..., 0, 0], core[..., 0, 1], core[..., 1, 0], core[..., 1, 1]
    phi = 0.5 * np.arctan2(2.0 * (a * c + b * d), a * a + b * b - c * c - d * d)
    return np.mod(phi, np.pi)


def batch_log_norm(cores, log_scales):
    return log_scales + np.log(_sigma_max(cores))


def _check_nondegenerate(log_norm):
    if np.any(np.asarray(log_norm) <= DEGENERATE_LOG_NORM):
        raise DegenerateNorm("matrix norm is within 1e-8 of 1; contraction direction undefined")


def polar_directions(M: ScaledMatrix):
    """(s, u, log ||M||) with s the most contracted direction and u = s(M^-1)."""
    log_norm = M.log_norm
    _check_nondegenerate(log_norm)
    return (
        ProjectiveDirection(float(contracting_angle(M.core))),
        ProjectiveDirection(float(expanding_image_angle(M.core))),
        log_norm,
    )


def rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def polar_reconstruct(s: ProjectiveDirection, u: ProjectiveDirection, log_norm: float) -> np.ndarray:
    """R_u diag(||M||, ||M||^-1) R_{pi/2 - s}; equals M up to an overall sign (angles live mod pi)."""
    nrm = math.exp(log_norm)
    return rotation(u.angle) @ np.diag([nrm, 1.0 / nrm]) @ rotation(np.pi / 2 - s.angle)


def finite_scale_angles(xs, E, lam, spec, freq, n: int, gauge: str = "raw"):
    """Batch (s_n, u_n) angles: contracting directions of A_n and A_{-n}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    fc, fl = transfer_products(xs, E, lam, spec, freq, n)
    bc, bl = transfer_products(xs, E, lam, spec, freq, -n)
    _check_nondegenerate(batch_log_norm(fc, fl))
    _check_nondegenerate(batch_log_norm(bc, bl))
    s = contracting_angle(_gauge_core(fc, gauge, lam))
    u = contracting_angle(_gauge_core(bc, gauge, lam))
    return s, u


def finite_scale_directions(x, E, lam, spec, freq, n: int, gauge: str = "raw"):
    s, u = finite_scale_angles(float(x), float(E), lam, spec, freq, n, gauge)
    return ProjectiveDirection(float(s)), ProjectiveDirection(float(u))


def angle_gaps(xs, E, lam, spec, freq, n: int, gauge: str = "polar"):
    """Batch g_n = s_n - u_n lifted to (-pi/2, pi/2]."""
    s, u = finite_scale_angles(xs, E, lam, spec, freq, n, gauge)
    return lift_half_open(s - u)


def angle_gap(x, E, lam, spec, freq, n: int, gauge: str = "polar") -> float:
    return float(angle_gaps(float(x), float(E), lam, spec, freq, n, gauge))


def lyapunov_estimate(E, lam, spec, freq, n: int, samples: int, seed: int = 0) -> float:
    """Mean of log ||A_n(x)|| / n over ``samples`` uniformly random base points."""
    if n < 100:
        raise ValueError("n must be >= 100")
    xs = np.random.default_rng(seed).random(samples)
    cores, ls = transfer_products(xs, E, lam, spec, freq, n)
    return float(np.mean(batch_log_norm(cores, ls)) / n)
