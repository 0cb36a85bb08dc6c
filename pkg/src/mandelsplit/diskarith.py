"""Certified complex disk arithmetic with explicit ulp bookkeeping.

A ComplexDisk is an exact center on the precision-N binary lattice plus a
nonnegative radius kept at a small, separate precision with every radius
operation rounded upward.  The enclosure contract: the result disk of an
operation contains every exact sum/product of members of the input disks.
Radii gain validity from directed rounding, never accuracy; centers absorb
their own rounding through half-ulp terms added to the radius.

Radius precision rides on the radius value itself (an MPFR float knows its
own width); operations continue in the widest radius precision of their
inputs. Production code leaves it at the 24-bit default — radii need only
be valid — while growth-measurement loops can raise it to separate formula
growth from round-up drift.

The exponent convention puts the significand in [1/2, 1), so e(1.0) = 1 and
ulp(1.0) = 2^{1-N}.  This matches what the MPFR backend reports through
get_exp, no translation needed.

Rectangle is the tensorized interval baseline used only to measure how much
faster rectangles lose precision than disks under repeated squaring; it
makes no certification claims and runs in hardware floats.
"""

from dataclasses import dataclass
import math

import numpy as np
import gmpy2

from .precision import (
    ctx,
    ctx_up,
    ctx_down,
    abs_conv_up,
    abs_conv_down,
    DEFAULT_PREC,
    RADIUS_PREC,
    mpfr_from_real,
    mpc_from_complex,
)


def ulp_real(x, n_bits, rp=RADIUS_PREC):
    """2^{e(x) - N} under the [1/2,1) significand convention; ulp(0) = 0."""
    if x == 0:
        return gmpy2.mpfr(0, rp)
    x = x if isinstance(x, gmpy2.mpfr) else gmpy2.mpfr(x, 64)
    if not gmpy2.is_finite(x):
        return gmpy2.mpfr("inf", rp)
    e = gmpy2.get_exp(x)
    return ctx_up(rp).mul_2exp(gmpy2.mpfr(1, rp), e - n_bits)


def ulp_complex(z, n_bits, rp=RADIUS_PREC):
    """sqrt(ulp(Re)^2 + ulp(Im)^2), rounded up."""
    up = ctx_up(rp)
    ur = ulp_real(z.real, n_bits, rp)
    ui = ulp_real(z.imag, n_bits, rp)
    return up.sqrt(up.add(up.mul(ur, ur), up.mul(ui, ui)))


def _abs_up(z, rp=RADIUS_PREC):
    """Upper bound on |z| at radius precision."""
    up = ctx_up(rp)
    re = abs_conv_up(z.real, rp)
    im = abs_conv_up(z.imag, rp)
    return up.sqrt(up.add(up.mul(re, re), up.mul(im, im)))


def _abs_down(z, rp=RADIUS_PREC):
    """Lower bound on |z| at radius precision."""
    dn = ctx_down(rp)
    re = abs_conv_down(z.real, rp)
    im = abs_conv_down(z.imag, rp)
    return dn.sqrt(dn.add(dn.mul(re, re), dn.mul(im, im)))


@dataclass(frozen=True)
class ComplexDisk:
    """Closed disk D(center, radius); center exact on its precision lattice."""
    center: object
    radius: object
    prec: int

    @classmethod
    def make(cls, center, radius=0, prec=DEFAULT_PREC, radius_prec=RADIUS_PREC):
        c = mpc_from_complex(center, prec)
        if isinstance(radius, str):
            r = gmpy2.mpfr(radius, radius_prec)
        else:
            r = gmpy2.mpfr(radius, radius_prec, ctx_up(radius_prec))
        return cls(c, r, prec)

    @property
    def radius_prec(self):
        return self.radius.precision

    @property
    def is_valid(self):
        return (gmpy2.is_finite(self.center) and gmpy2.is_finite(self.radius)
                and self.radius >= 0)

    def invalid(self):
        return ComplexDisk(self.center, gmpy2.mpfr("inf", self.radius_prec), self.prec)

    def abs_upper(self):
        rp = self.radius_prec
        return ctx_up(rp).add(_abs_up(self.center, rp), self.radius)

    def abs_lower(self):
        """max(0, |center| - radius), rounded down: distance of the disk from 0."""
        rp = self.radius_prec
        lo = ctx_down(rp).sub(_abs_down(self.center, rp), self.radius)
        return lo if lo > 0 else gmpy2.mpfr(0, rp)

    def contains(self, z):
        """Membership of an exact point; evaluation error is kept far below
        any radius this library produces, so the answer is effectively exact."""
        p = max(self.prec * 2 + 64, 224)
        cx = ctx(p)
        zz = mpc_from_complex(z, p)
        d = cx.sub(zz, mpc_from_complex(self.center, p))
        dist2 = cx.add(cx.mul(d.real, d.real), cx.mul(d.imag, d.imag))
        r = gmpy2.mpfr(self.radius, p)
        return dist2 <= cx.mul(r, r)

    def __repr__(self):
        return (f"ComplexDisk({complex(self.center):.17g}, "
                f"{float(self.radius):.6g}, prec={self.prec})")


def _rp(a, b=None):
    rp = a.radius_prec
    if b is not None:
        rp = max(rp, b.radius_prec)
    return rp


def disk_add(a, b):
    """Enclosure of {x + y : x in a, y in b}."""
    n = max(a.prec, b.prec)
    rp = _rp(a, b)
    if not (a.is_valid and b.is_valid):
        return ComplexDisk.make(0, "inf", n, rp)
    center = ctx(n).add(a.center, b.center)
    up = ctx_up(rp)
    half_ulp = up.div_2exp(ulp_complex(center, n, rp), 1)
    radius = up.add(up.add(a.radius, b.radius), half_ulp)
    return ComplexDisk(center, radius, n)


def disk_mul(a, b, n_intermediate=None):
    """Enclosure of {x * y}; partial products at >= 2N bits are exact."""
    n = max(a.prec, b.prec)
    rp = _rp(a, b)
    np_ = n_intermediate if n_intermediate is not None else 2 * n
    if np_ < n:
        raise ValueError("intermediate precision below center precision")
    if not (a.is_valid and b.is_valid):
        return ComplexDisk.make(0, "inf", n, rp)
    cxi = ctx(np_)
    cxn = ctx(n)
    ar, ai = a.center.real, a.center.imag
    br, bi = b.center.real, b.center.imag
    p1 = cxi.mul(ar, br)
    p2 = cxi.mul(ai, bi)
    p3 = cxi.mul(ar, bi)
    p4 = cxi.mul(ai, br)
    center = gmpy2.mpc(cxn.sub(p1, p2), cxn.add(p3, p4), precision=n)

    up = ctx_up(rp)
    r_star = up.div_2exp(ulp_complex(center, n, rp), 1)
    part_ulps = up.add(up.add(ulp_real(p1, np_, rp), ulp_real(p2, np_, rp)),
                       up.add(ulp_real(p3, np_, rp), ulp_real(p4, np_, rp)))
    r_star = up.add(r_star, up.div_2exp(part_ulps, 1))

    abs_a = _abs_up(a.center, rp)
    abs_b = _abs_up(b.center, rp)
    radius = up.add(
        up.add(up.mul(a.radius, b.radius), up.mul(a.radius, abs_b)),
        up.add(up.mul(b.radius, abs_a), r_star))
    return ComplexDisk(center, radius, n)


def disk_scale(x0, xr, a):
    """Enclosure of {t * y : |t - x0| <= xr, t real, y in a}.

    x0 must be representable at the disk's center precision (it is rounded
    there if not; callers owning wider midpoints should widen xr first).
    """
    n = a.prec
    rp = a.radius_prec
    if not a.is_valid or not (xr >= 0) or not math.isfinite(float(xr)):
        return ComplexDisk.make(0, "inf", n, rp)
    x = mpfr_from_real(x0, n)
    center = ctx(n).mul(a.center, x)
    up = ctx_up(rp)
    xr_up = gmpy2.mpfr(xr, rp, ctx_up(rp))
    x_abs = abs_conv_up(x, rp)
    half_ulp = up.div_2exp(ulp_complex(center, n, rp), 1)
    radius = up.add(
        up.add(up.mul(up.add(x_abs, xr_up), a.radius),
               up.mul(xr_up, _abs_up(a.center, rp))),
        half_ulp)
    return ComplexDisk(center, radius, n)


# ---------------------------------------------------------------------------
# rectangle baseline (hardware floats, no certification claim)

@dataclass(frozen=True)
class Rectangle:
    center: complex
    half_width: float
    half_height: float

    def __post_init__(self):
        if self.half_width < 0 or self.half_height < 0:
            raise ValueError("half sizes must be nonnegative")


def rect_mul(a, b):
    """Tensorized interval product of two complex rectangles.

    Centered form: half-sizes are carried separately from the center, so
    boxes far smaller than one center ulp keep their true size instead of
    collapsing.  Cross terms are folded into the half-sizes, which keeps
    the enclosure valid at every size.
    """
    ar, ai = abs(a.center.real), abs(a.center.imag)
    br, bi = abs(b.center.real), abs(b.center.imag)
    wa, ha = a.half_width, a.half_height
    wb, hb = b.half_width, b.half_height
    center = a.center * b.center
    # |Re(da*db)| <= wa*wb + ha*hb, |Im(da*db)| <= wa*hb + ha*wb
    w = ar * wb + ai * hb + br * wa + bi * ha + (wa * wb + ha * hb)
    h = ar * hb + ai * wb + br * ha + bi * wa + (wa * hb + ha * wb)
    return Rectangle(center, w, h)


# ---------------------------------------------------------------------------
# non-certifying hardware shortcuts (screening only; certified paths use
# the MPFR disks above)

_FAST_SLACK = 8 * np.finfo(np.float64).eps


def disk_add_fast(ca, ra, cb, rb):
    c = ca + cb
    return c, ra + rb + abs(c) * _FAST_SLACK


def disk_mul_fast(ca, ra, cb, rb):
    c = ca * cb
    r = ra * rb + ra * abs(cb) + rb * abs(ca) + abs(c) * _FAST_SLACK
    return c, r


# ---------------------------------------------------------------------------
# measurement loops backing the soundness and growth claims

def containment_fuzz(op, trials, prec=53, seed=0):
    """Monte Carlo containment check; returns the number of violations.

    Sample points are placed strictly inside each input disk on an exact
    dyadic grid, the operation result is recomputed pointwise at a much
    higher precision, and membership in the output disk is then decided
    with margins that dwarf the evaluation error.  Any nonzero return is
    a soundness bug in the disk arithmetic.
    """
    rng = np.random.default_rng(seed)
    hi = max(4 * prec, 352)
    cxh = ctx(hi)
    scale_bits = 30
    scale = 1 << scale_bits
    inner = int(scale * scale * 0.998)
    violations = 0

    def sample(disk, a, b):
        # center + radius*(a+ib)/scale with a^2+b^2 < 0.998 scale^2, exactly
        off_re = cxh.div_2exp(cxh.mul(gmpy2.mpfr(disk.radius, hi), a), scale_bits)
        off_im = cxh.div_2exp(cxh.mul(gmpy2.mpfr(disk.radius, hi), b), scale_bits)
        return gmpy2.mpc(cxh.add(gmpy2.mpfr(disk.center.real, hi), off_re),
                         cxh.add(gmpy2.mpfr(disk.center.imag, hi), off_im),
                         precision=hi)

    def grid_offset():
        while True:
            a = int(rng.integers(-scale, scale + 1))
            b = int(rng.integers(-scale, scale + 1))
            if a * a + b * b < inner:
                return a, b

    def rand_disk():
        c = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
        r = 10.0 ** rng.uniform(-25, -1)
        return ComplexDisk.make(c, r, prec)

    for _ in range(trials):
        da = rand_disk()
        a1, b1 = grid_offset()
        xa = sample(da, a1, b1)
        if op == "add":
            db = rand_disk()
            a2, b2 = grid_offset()
            xb = sample(db, a2, b2)
            out = disk_add(da, db)
            val = cxh.add(xa, xb)
        elif op == "mul":
            db = rand_disk()
            a2, b2 = grid_offset()
            xb = sample(db, a2, b2)
            out = disk_mul(da, db)
            val = cxh.mul(xa, xb)
        elif op == "scale":
            x0 = float(mpfr_from_real(rng.uniform(-2, 2), prec))
            xr = 10.0 ** rng.uniform(-25, -1)
            t = int(rng.integers(-scale + 1, scale))
            tt = cxh.add(mpfr_from_real(x0, hi),
                         cxh.div_2exp(cxh.mul(gmpy2.mpfr(xr, hi), t), scale_bits))
            out = disk_scale(x0, xr, da)
            val = cxh.mul(tt, xa)
        else:
            raise ValueError(f"unknown op {op!r}")
        if not out.contains(val):
            violations += 1
    return violations


def growth_comparison(n_starts=100, n_steps=100, prec=128, radius=1e-20, seed=1):
    """Mean per-step log of (rectangle halfwidth / disk radius) under z -> z^2.

    Each step squares a unit-modulus enclosure and records the one-step
    size growth factor of both representations, then resets the size; the
    accumulated log-ratio divided by the step count is a Birkhoff average
    along the angle-doubling orbit, about 0.2365 for almost every start.
    """
    rng = np.random.default_rng(seed)
    r_in = gmpy2.mpfr(radius, RADIUS_PREC, ctx_up(RADIUS_PREC))
    cx = ctx(prec)
    means = []
    for _ in range(n_starts):
        theta = rng.uniform(0, 2 * np.pi)
        z = mpc_from_complex(complex(np.cos(theta), np.sin(theta)), prec)
        z = cx.div(z, cx.sqrt(cx.norm(z)))
        acc = 0.0
        for _ in range(n_steps):
            d = ComplexDisk(z, r_in, prec)
            r = Rectangle(complex(z), radius, radius)
            d2 = disk_mul(d, d)
            r2 = rect_mul(r, r)
            rect_growth = max(r2.half_width, r2.half_height) / radius
            disk_growth = float(d2.radius) / radius
            acc += math.log(rect_growth / disk_growth)
            # angle doubling, renormalized so the orbit stays on the circle
            z = cx.mul(z, z)
            z = cx.div(z, cx.sqrt(cx.norm(z)))
        means.append(acc / n_steps)
    return float(np.mean(means))


def radius_drift(steps=10 ** 5, prec=256, radius=1e-20, radius_prec=RADIUS_PREC,
                 seed=2):
    """Relative radius growth over many multiplications by exact unit disks.

    The multipliers have magnitude exactly 1 and radius 0, so any growth of
    radius/initial beyond ~(1+radius)^steps is bookkeeping slack added by
    the enclosure formulas and the round-up radius arithmetic, not genuine
    uncertainty.  With a wide radius_prec the round-up slack vanishes and
    the formulas' own contribution shows up alone.
    """
    rng = np.random.default_rng(seed)
    units = [ComplexDisk(gmpy2.mpc(u, precision=prec),
                         gmpy2.mpfr(0, radius_prec), prec)
             for u in (1, -1, 1j, -1j)]
    z0 = mpc_from_complex(0.6 + 0.8j, prec)
    acc = ComplexDisk(z0, gmpy2.mpfr(radius, radius_prec, ctx_up(radius_prec)), prec)
    r0 = acc.radius
    choices = rng.integers(0, 4, steps)
    for k in range(steps):
        acc = disk_mul(acc, units[int(choices[k])])
        if not acc.is_valid:
            return math.inf
    return float(ctx_up(acc.radius_prec).div(acc.radius, r0))
