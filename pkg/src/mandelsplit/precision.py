"""Floating-point tiers and exact conversions between them.

Tier A is the widest native binary float the host exposes through numpy:
x86-64 extended precision (64-bit significand) where available, plain
binary64 otherwise.  Tier B is arbitrary-precision binary floating point
on MPFR via gmpy2.  Tier-B precision is always an explicit argument and
every MPFR operation goes through an explicit context object, never the
ambient global context.
"""

import numpy as np
import gmpy2

LONGDOUBLE = np.longdouble
CLONGDOUBLE = np.clongdouble

_FINFO = np.finfo(LONGDOUBLE)

# Significand width including the implicit bit: 64 on x86-64 Linux.
TIER_A_PREC = _FINFO.nmant + 1
TIER_A_EMAX = _FINFO.maxexp
TIER_A_EPS = float(_FINFO.eps)

#: True when the host longdouble is genuinely wider than binary64.
TIER_A_EXTENDED = TIER_A_PREC >= 60

DEFAULT_PREC = 128      # tier-B default significand bits
RADIUS_PREC = 24        # disk radii live at this precision, rounded upward

_TWO = LONGDOUBLE(2.0)

_ctx_cache = {}


def ctx(prec, rounding=gmpy2.RoundToNearest):
    """Cached gmpy2 context with the given precision and rounding mode."""
    key = (prec, rounding)
    c = _ctx_cache.get(key)
    if c is None:
        c = gmpy2.context(precision=prec, round=rounding,
                          real_round=rounding, imag_round=rounding)
        _ctx_cache[key] = c
    return c


def ctx_up(prec=RADIUS_PREC):
    return ctx(prec, gmpy2.RoundUp)


def ctx_down(prec=RADIUS_PREC):
    return ctx(prec, gmpy2.RoundDown)


def ctx_away(prec=RADIUS_PREC):
    return ctx(prec, gmpy2.RoundAwayZero)


def ctx_zero(prec=RADIUS_PREC):
    return ctx(prec, gmpy2.RoundToZero)


def abs_conv_up(x, prec=RADIUS_PREC):
    """|x| rounded so the magnitude never shrinks."""
    c = ctx_away(prec)
    y = gmpy2.mpfr(x, prec, c)
    return y if y >= 0 else c.minus(y)


def abs_conv_down(x, prec=RADIUS_PREC):
    """|x| rounded so the magnitude never grows."""
    c = ctx_zero(prec)
    y = gmpy2.mpfr(x, prec, c)
    return y if y >= 0 else c.minus(y)


def mpfr_from_real(x, prec):
    """Exact conversion of a real scalar to mpfr at >= its own width."""
    if isinstance(x, gmpy2.mpfr):
        return gmpy2.mpfr(x, prec)
    if isinstance(x, LONGDOUBLE):
        if not np.isfinite(x):
            return gmpy2.mpfr(float(x), prec)
        m, e = np.frexp(x)
        mi = int(m * _TWO ** TIER_A_PREC)
        return ctx(prec).div_2exp(gmpy2.mpfr(mi, prec), TIER_A_PREC - int(e))
    return gmpy2.mpfr(x, prec)


def mpc_from_complex(z, prec):
    """Convert complex-ish z (complex, clongdouble, mpc, real) to mpc."""
    if isinstance(z, gmpy2.mpc):
        return gmpy2.mpc(z, precision=prec)
    if isinstance(z, (CLONGDOUBLE, np.complexfloating)):
        return gmpy2.mpc(mpfr_from_real(LONGDOUBLE(z.real), prec),
                         mpfr_from_real(LONGDOUBLE(z.imag), prec),
                         precision=prec)
    if isinstance(z, complex):
        return gmpy2.mpc(z, precision=prec)
    return gmpy2.mpc(mpfr_from_real(z, prec), 0, precision=prec)


def longdouble_from_mpfr(x):
    """mpfr -> longdouble, correctly rounded to tier-A precision."""
    if gmpy2.is_nan(x):
        return LONGDOUBLE("nan")
    if gmpy2.is_infinite(x):
        return LONGDOUBLE("inf") if x > 0 else LONGDOUBLE("-inf")
    y = gmpy2.mpfr(x, TIER_A_PREC)
    if y == 0:
        return LONGDOUBLE(0.0)
    mant, ex = y.as_mantissa_exp()
    mant = int(mant)
    sign = -1.0 if mant < 0 else 1.0
    ld = LONGDOUBLE(np.uint64(abs(mant)))
    return LONGDOUBLE(sign) * np.ldexp(ld, int(ex))


def clongdouble_from_mpc(z):
    re = longdouble_from_mpfr(z.real)
    im = longdouble_from_mpfr(z.imag)
    out = np.empty((), CLONGDOUBLE)
    out.real = re
    out.imag = im
    return out[()]
