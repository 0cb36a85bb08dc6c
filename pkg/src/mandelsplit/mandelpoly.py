"""Evaluation of the polynomial families and their derivatives.

The families are defined by the quadratic recurrence p_0 = 0,
p_{k+1}(c) = p_k(c)^2 + c, together with the differences
q_{l,n} = p_{l+n} - p_l and the simplified form s_{l,n} = p_{l+n-1} + p_{l-1}.
Coefficients are never materialized; everything is evaluated by running the
orbit, carrying value and derivative in one pass.

Two precision tiers: prec=None evaluates in the widest native hardware float
(tier A), an integer prec evaluates on MPFR at that many significand bits
(tier B).  Magnitudes can exceed the exponent range long before the orbit
ends when c is far outside the dynamically relevant disk, so both paths
extract a common power-of-two factor from value and derivative before a
squaring would overflow; Newton quotients cancel the factor exactly.
"""

import math
from dataclasses import dataclass

import numpy as np
import gmpy2

from .precision import (
    CLONGDOUBLE,
    LONGDOUBLE,
    TIER_A_EMAX,
    ctx,
    mpc_from_complex,
)


class CriticalPointError(ArithmeticError):
    """Newton step at a point where the derivative vanishes."""

    def __init__(self, poly, z):
        super().__init__(f"derivative of {poly} vanishes at {z}")
        self.poly = poly
        self.z = z


class OverflowUnrecoverable(ArithmeticError):
    """Orbit left the representable range even after rescaling."""


class DegenerateInputError(ValueError):
    """Input polynomial has no roots to bound."""


@dataclass(frozen=True)
class PolyId:
    """Identifies one member of the polynomial families.

    family is 'hyp' (p_n), 'mis' (q_{l,n}) or 'mis-simple' (s_{l,n}).
    """

    family: str
    l: int
    n: int

    def __post_init__(self):
        if self.family not in ("hyp", "mis", "mis-simple"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.n < 1:
            raise ValueError("period n must be >= 1")
        if self.family == "hyp" and self.l != 0:
            raise ValueError("hyperbolic family has no pre-period")
        if self.family == "mis" and self.l < 0:
            raise ValueError("pre-period must be >= 0")
        if self.family == "mis-simple" and self.l < 2:
            raise ValueError("simplified family needs l >= 2")

    @property
    def degree(self):
        if self.family == "hyp":
            return 2 ** (self.n - 1)
        if self.family == "mis":
            return 2 ** (self.l + self.n - 1)
        return 2 ** (self.l + self.n - 2)

    @property
    def orbit_length(self):
        """Number of recurrence steps a full evaluation runs."""
        if self.family == "hyp":
            return self.n
        if self.family == "mis":
            return self.l + self.n
        return self.l + self.n - 1

    def __str__(self):
        if self.family == "hyp":
            return f"hyp({self.n})"
        return f"{self.family}({self.l},{self.n})"


def Hyp(n):
    return PolyId("hyp", 0, n)


def Mis(l, n):
    return PolyId("mis", l, n)


def MisSimple(l, n):
    return PolyId("mis-simple", l, n)


@dataclass
class EvalResult:
    """Polynomial value and derivative with a shared power-of-two factor.

    The represented numbers are value * 2^scale_exp and
    derivative * 2^scale_exp.  Newton steps use value/derivative directly:
    the factor cancels.
    """

    value: object
    derivative: object
    scale_exp: int = 0

    def log2_abs_value(self):
        """log2 |true value|, safe when the true value overflows floats."""
        v = self.value
        if isinstance(v, gmpy2.mpc):
            a = abs(v)
            return float(gmpy2.log2(a)) + self.scale_exp if a != 0 else -math.inf
        a = np.abs(CLONGDOUBLE(v))
        return (float(np.log2(a)) if a else -math.inf) + self.scale_exp


# Rescale before squaring once magnitudes pass this bound; the squared
# result then stays below 2^(emax-64).
_THRESH_A = LONGDOUBLE(2.0) ** ((TIER_A_EMAX - 64) // 2)


def _orbit_a(c, steps, snap_at=(), force_rescale=False):
    """Tier-A orbit with shared-exponent rescaling.

    Returns (value, derivative, scale_exp, snapshots) where snapshots maps
    each requested index k to the state of (p_k, p_k', scale_exp).
    """
    c = CLONGDOUBLE(c)
    v = CLONGDOUBLE(0.0)
    w = CLONGDOUBLE(0.0)
    s = 0
    snaps = {}
    if 0 in snap_at:
        snaps[0] = (v, w, 0)
    one = LONGDOUBLE(1.0)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        for k in range(1, steps + 1):
            m = max(abs(v.real), abs(v.imag), abs(w.real), abs(w.imag))
            if m > _THRESH_A or (force_rescale and m > 0):
                _, e = np.frexp(m)
                f = np.ldexp(one, -int(e))
                v = v * f
                w = w * f
                s += int(e)
            if s == 0:
                w = 2.0 * v * w + 1.0
                v = v * v + c
            else:
                tiny = np.ldexp(one, -2 * s)
                w = 2.0 * v * w + tiny
                v = v * v + c * tiny
                s = 2 * s
            if k in snap_at:
                snaps[k] = (v, w, s)
    if not (np.isfinite(v) and np.isfinite(w)):
        raise OverflowUnrecoverable(f"orbit of {c} left tier-A range at step <= {steps}")
    return v, w, s, snaps


def _orbit_b(c, steps, prec, snap_at=(), force_rescale=False):
    """Tier-B orbit; same shared-exponent scheme on MPFR."""
    cx = ctx(prec)
    c = mpc_from_complex(c, prec)
    v = gmpy2.mpc(0, precision=prec)
    w = gmpy2.mpc(0, precision=prec)
    s = 0
    snaps = {}
    if 0 in snap_at:
        snaps[0] = (v, w, 0)
    thresh_exp = (cx.emax - 64) // 2
    one = gmpy2.mpfr(1, prec)
    for k in range(1, steps + 1):
        e = max(gmpy2.get_exp(v.real), gmpy2.get_exp(v.imag),
                gmpy2.get_exp(w.real), gmpy2.get_exp(w.imag))
        if e > thresh_exp or (force_rescale and v != 0):
            v = cx.div_2exp(v, e)
            w = cx.div_2exp(w, e)
            s += e
        if s == 0:
            w = cx.add(cx.mul_2exp(cx.mul(v, w), 1), 1)
            v = cx.add(cx.mul(v, v), c)
        else:
            tiny = cx.div_2exp(one, 2 * s)
            w = cx.add(cx.mul_2exp(cx.mul(v, w), 1), tiny)
            v = cx.add(cx.mul(v, v), cx.mul(c, tiny))
            s = 2 * s
        if k in snap_at:
            snaps[k] = (v, w, s)
    if not (gmpy2.is_finite(v) and gmpy2.is_finite(w)):
        raise OverflowUnrecoverable(f"orbit of {c} left tier-B range at step <= {steps}")
    return v, w, s, snaps


def eval_p(n, c, prec=None):
    """p_n(c) and p_n'(c), one forward pass from p_0 = 0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if prec is None:
        v, w, s, _ = _orbit_a(c, n)
    else:
        v, w, s, _ = _orbit_b(c, n, prec)
    return EvalResult(v, w, s)


def eval_q(l, n, c, prec=None):
    """q_{l,n}(c) = p_{l+n}(c) - p_l(c), value and derivative in one orbit."""
    if l < 0 or n < 1:
        raise ValueError("need l >= 0 and n >= 1")
    if prec is None:
        v, w, s, snaps = _orbit_a(c, l + n, snap_at=(l,))
        vl, wl, sl = snaps[l]
        f = np.ldexp(LONGDOUBLE(1.0), sl - s)
        return EvalResult(v - vl * f, w - wl * f, s)
    cx = ctx(prec)
    v, w, s, snaps = _orbit_b(c, l + n, prec, snap_at=(l,))
    vl, wl, sl = snaps[l]
    return EvalResult(cx.sub(v, cx.div_2exp(vl, s - sl)),
                      cx.sub(w, cx.div_2exp(wl, s - sl)), s)


def eval_s(l, n, c, prec=None):
    """s_{l,n}(c) = p_{l+n-1}(c) + p_{l-1}(c), the simple-root form."""
    if l < 2 or n < 1:
        raise ValueError("need l >= 2 and n >= 1")
    if prec is None:
        v, w, s, snaps = _orbit_a(c, l + n - 1, snap_at=(l - 1,))
        vl, wl, sl = snaps[l - 1]
        f = np.ldexp(LONGDOUBLE(1.0), sl - s)
        return EvalResult(v + vl * f, w + wl * f, s)
    cx = ctx(prec)
    v, w, s, snaps = _orbit_b(c, l + n - 1, prec, snap_at=(l - 1,))
    vl, wl, sl = snaps[l - 1]
    return EvalResult(cx.add(v, cx.div_2exp(vl, s - sl)),
                      cx.add(w, cx.div_2exp(wl, s - sl)), s)


def eval_poly(poly, c, prec=None):
    """Dispatch on PolyId family."""
    if poly.family == "hyp":
        return eval_p(poly.n, c, prec)
    if poly.family == "mis":
        return eval_q(poly.l, poly.n, c, prec)
    return eval_s(poly.l, poly.n, c, prec)


def eval_vec(poly, z):
    """Vectorized tier-A evaluation: (values, derivatives) for an array.

    No overflow rescaling: meant for points whose orbits stay in hardware
    range (level-line neighborhoods, descent iterates).  Escaped entries
    come back as inf/nan and must be masked by the caller.
    """
    z = np.asarray(z, dtype=CLONGDOUBLE)
    steps = poly.orbit_length
    if poly.family == "hyp":
        snap = -1
    elif poly.family == "mis":
        snap = poly.l
    else:
        snap = poly.l - 1
    v = np.zeros_like(z)
    w = np.zeros_like(z)
    vs = ws = None
    if snap == 0:
        vs, ws = v.copy(), w.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, steps + 1):
            w *= v
            w *= 2.0
            w += 1.0
            v *= v
            v += z
            if k == snap:
                vs, ws = v.copy(), w.copy()
    if poly.family == "hyp":
        return v, w
    if poly.family == "mis":
        return v - vs, w - ws
    return v + vs, w + ws


def newton_step(poly, z, prec=None):
    """One Newton step z - P(z)/P'(z); the shared scale factor cancels."""
    res = eval_poly(poly, z, prec)
    if prec is None:
        if res.derivative == 0:
            raise CriticalPointError(poly, z)
        return CLONGDOUBLE(z) - res.value / res.derivative
    if res.derivative == 0:
        raise CriticalPointError(poly, z)
    cx = ctx(prec)
    return cx.sub(mpc_from_complex(z, prec), cx.div(res.value, res.derivative))


_P_GRID = (1.25, 1.5, 2.0, 3.0, 5.0)


def _log2_abs(a):
    if a == 0:
        return -math.inf
    if isinstance(a, complex) or isinstance(a, np.complexfloating):
        return math.log2(abs(a))
    if isinstance(a, int):
        return float(gmpy2.log2(abs(gmpy2.mpfr(a, 64))))
    return math.log2(abs(float(a)))


def _bound_for_p(log_ratios, p):
    q = p / (p - 1.0)
    terms = [p * t for t in log_ratios]
    if not terms:
        return 1.0
    hi = max(terms)
    log_s = hi + math.log2(sum(2.0 ** (t - hi) for t in terms))
    u = (q / p) * log_s
    if u > 512.0:
        return 2.0 ** (u / q)
    return (1.0 + 2.0 ** u) ** (1.0 / q)


def root_bound(coeffs, p_exponent=2.0):
    """Radius of a closed disk containing every root of the polynomial.

    coeffs are in increasing-degree order.  The bound is
    (1 + S^(q/p))^(1/q) with S the p-power sum of |a_j/a_n| over the lower
    coefficients; computed in log space so huge coefficients cannot
    overflow.  Monotone in the coefficient magnitudes.
    """
    coeffs = list(coeffs)
    if len(coeffs) < 2:
        raise DegenerateInputError("degree must be >= 1")
    if coeffs[-1] == 0:
        raise DegenerateInputError("leading coefficient must be nonzero")
    if p_exponent is not None and p_exponent <= 1:
        raise ValueError("p_exponent must be > 1")
    lead = _log2_abs(coeffs[-1])
    log_ratios = [_log2_abs(a) - lead for a in coeffs[:-1] if a != 0]
    if p_exponent is not None:
        return _bound_for_p(log_ratios, p_exponent)
    return min(_bound_for_p(log_ratios, p) for p in _P_GRID)
