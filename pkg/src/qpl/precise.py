"""Arbitrary-precision transfer products and angle gaps (gmpy2 / MPFR).

Estimates such as |c_{i,1} + c_{i,2}| <= 10 lambda^{-r/2} reach far below
double precision once r is in the hundreds. This module recomputes the
angle functions and their zeros with a working precision sized from the
bound being tested. Only trigonometric potentials are supported: their
orbit values come from an exact rotation recurrence.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import gmpy2
from gmpy2 import mpfr

from .arithmetic import Frequency
from .errors import PotentialError
from .potential import PotentialSpec

GUARD_BITS = 64
MIN_BITS = 128
LOG2_10 = math.log2(10.0)


def bits_for_digits(digits: float) -> int:
    return max(MIN_BITS, int(math.ceil(digits * LOG2_10)) + GUARD_BITS)


@contextmanager
def precision(bits: int):
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        yield


def to_mpfr(x) -> mpfr:
    """Exact conversion for floats and mpfr; decimal strings round at the context precision."""
    return mpfr(x)


class PreciseCocycle:
    """Schrödinger cocycle of a trigonometric potential at a fixed MPFR precision.

    Must be used inside ``precision(bits)`` with the same ``bits``.
    """

    def __init__(self, lam: float, spec: PotentialSpec, freq: Frequency, bits: int, gauge: str = "polar"):
        if not spec.is_trig:
            raise PotentialError("high-precision path supports trigonometric potentials only")
        self.bits = bits
        self.lam = mpfr(lam)
        self.coeffs = [mpfr(c) for c in spec.cos_coeffs]
        self.alpha = freq.exact_gmpy(bits)
        self.two_pi = 2 * gmpy2.const_pi()
        self.pi = gmpy2.const_pi()
        self.gauge = gauge
        self.b = mpfr(max(abs(lam), 1.0))
        # rotation by 2 pi k alpha for each harmonic k
        self.rot = []
        for k in range(1, len(self.coeffs) + 1):
            ang = self.two_pi * k * self.alpha
            self.rot.append((gmpy2.cos(ang), gmpy2.sin(ang)))

    def _harmonics(self, x):
        out = []
        for k in range(1, len(self.coeffs) + 1):
            ang = self.two_pi * k * x
            out.append([gmpy2.cos(ang), gmpy2.sin(ang)])
        return out

    def product(self, x, E, n: int):
        """Entries (a, b, c, d) of A_n(x), unnormalized (MPFR exponents do not overflow)."""
        x = to_mpfr(x)
        E = to_mpfr(E)
        lam = self.lam
        a00, a01, a10, a11 = mpfr(1), mpfr(0), mpfr(0), mpfr(1)
        if n == 0:
            return a00, a01, a10, a11
        if n > 0:
            h = self._harmonics(x)
            rot = self.rot
        else:
            h = self._harmonics(x - self.alpha)
            rot = [(c, -s) for c, s in self.rot]
        coeffs = self.coeffs
        for _ in range(abs(n)):
            v = mpfr(0)
            for c, (cs, _sn) in zip(coeffs, h):
                v += c * cs
            a = E - lam * v
            if n > 0:
                a00, a01, a10, a11 = a * a00 - a10, a * a01 - a11, a00, a01
            else:
                a00, a01, a10, a11 = a10, a11, a * a10 - a00, a * a11 - a01
            for j, (rc, rs) in enumerate(rot):
                cs, sn = h[j]
                h[j] = [cs * rc - sn * rs, sn * rc + cs * rs]
        return a00, a01, a10, a11

    def _gauged(self, m):
        a, b, c, d = m
        if self.gauge == "polar":
            return a, b * self.b, c / self.b, d
        return a, b, c, d

    def contracting_angle(self, m):
        a, b, c, d = self._gauged(m)
        phi = gmpy2.atan2(2 * (a * b + c * d), a * a + c * c - b * b - d * d) / 2
        return phi + self.pi / 2

    def lift(self, d):
        """Reduce into (-pi/2, pi/2]."""
        half = self.pi / 2
        k = gmpy2.floor((half - d) / self.pi)
        return d + k * self.pi

    def angle_gap(self, x, E, n: int):
        s = self.contracting_angle(self.product(x, E, n))
        u = self.contracting_angle(self.product(x, E, -n))
        return self.lift(s - u)

    def log_norm(self, x, E, n: int) -> float:
        a, b, c, d = self.product(x, E, n)
        s = a * a + b * b + c * c + d * d
        det = a * d - b * c
        smax2 = (s + gmpy2.sqrt(max(s * s - 4 * det * det, mpfr(0)))) / 2
        return float(gmpy2.log(smax2) / 2)


def illinois_root(f, a, b, tol, fa=None, fb=None, max_iter: int = 400):
    """Zero of ``f`` in the sign-changing bracket [a, b] (modified regula falsi).

    Returns (root, bracket_width). Falls back to bisection whenever the
    secant step stalls, so convergence is guaranteed.
    """
    fa = f(a) if fa is None else fa
    fb = f(b) if fb is None else fb
    if fa == 0:
        return a, mpfr(0)
    if fb == 0:
        return b, mpfr(0)
    if (fa > 0) == (fb > 0):
        raise ValueError("bracket does not change sign")
    side = 0
    for it in range(max_iter):
        width = abs(b - a)
        if width <= tol:
            break
        if it % 8 == 7:
            c = (a + b) / 2
        else:
            c = (a * fb - b * fa) / (fb - fa)
            if not (min(a, b) < c < max(a, b)):
                c = (a + b) / 2
        fc = f(c)
        if fc == 0:
            return c, mpfr(0)
        if (fc > 0) == (fb > 0):
            b, fb = c, fc
            if side == -1:
                fa /= 2
            side = -1
        else:
            a, fa = c, fc
            if side == 1:
                fb /= 2
            side = 1
    return (a + b) / 2, abs(b - a)
