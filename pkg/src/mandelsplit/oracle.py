"""Independent brute-force root solver used to cross-check the pipeline.

The coefficients of p_n are expanded exactly as Python integers by squaring
coefficient vectors, something the production pipeline never does.  Roots
are located by Aberth-Ehrlich simultaneous iteration and then polished and
verified against the exact coefficients in high-precision arithmetic; the
working precision absorbs the catastrophic cancellation a coefficient-form
evaluation suffers near the boundary of the degree-d root cluster (the
power sums of |a_k| 2^k reach ~1e200 at n = 10 while the values of
interest are O(1)).

This module is test infrastructure, not a product feature: it is
deliberately slow and has no knowledge of level lines.
"""

import math

import numpy as np
import gmpy2

from .mandelpoly import DegenerateInputError


class OracleError(RuntimeError):
    """The solver could not verify its own output."""


def p_coeffs(n):
    """Exact integer coefficients of p_n, increasing degree order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    coeffs = [0, 1]
    for _ in range(n - 1):
        d = len(coeffs) - 1
        sq = [0] * (2 * d + 1)
        for i, a in enumerate(coeffs):
            if a == 0:
                continue
            for j, b in enumerate(coeffs):
                if b:
                    sq[i + j] += a * b
        sq[1] += 1
        coeffs = sq
    return coeffs


def q_coeffs(l, n):
    """Exact integer coefficients of q_{l,n} = p_{l+n} - p_l."""
    hi = p_coeffs(l + n)
    lo = p_coeffs(l) if l >= 1 else [0]
    out = list(hi)
    for i, a in enumerate(lo):
        out[i] -= a
    return out


def _poly_der(coeffs):
    return [i * a for i, a in enumerate(coeffs)][1:]


def _abs_power_sum_bits(coeffs):
    """Bit length of sum |a_k| 2^k: the cancellation budget of Horner at |z|<=2."""
    total = sum(abs(a) << k for k, a in enumerate(coeffs))
    return max(total.bit_length(), 1)


def _aberth(z, eval_fn, fence, max_iter=400, tol=5e-15):
    """Aberth-Ehrlich simultaneous iteration on a float64 root cloud.

    Steps are capped and strays are projected back onto the fence circle:
    the recurrence evaluation overflows once points wander far out, and
    every root we chase lies well inside the fence anyway.
    """
    cap = 0.15 * fence
    stall = 0
    for _ in range(max_iter):
        v, w = eval_fn(z)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ratio = v / w
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            s = (1.0 / diff).sum(axis=1)
            step = ratio / (1.0 - ratio * s)
        bad = ~np.isfinite(step)
        if bad.any():
            step[bad] = ratio[bad]
            step[~np.isfinite(step)] = 0.0
        mag = np.abs(step)
        big = mag > cap
        if big.any():
            step[big] *= cap / mag[big]
        z = z - step
        out = np.abs(z) > fence
        if out.any():
            z[out] *= fence / np.abs(z[out])
        if np.max(np.abs(step)) < tol * max(1.0, np.max(np.abs(z))):
            stall += 1
            if stall >= 2:
                break
        else:
            stall = 0
    return z


def _start_cloud(d, radius, seed=7):
    rng = np.random.default_rng(seed)
    ang = 2 * np.pi * (np.arange(d) + 0.5) / d + rng.uniform(-0.1, 0.1, d) / d
    return radius * np.exp(1j * ang)


def _recurrence_eval(n, shift):
    def ev(z):
        v = np.zeros_like(z)
        w = np.zeros_like(z)
        for _ in range(n):
            w = 2.0 * v * w + 1.0
            v = v * v + z
        return v - shift, w
    return ev


def _horner_eval(coeffs, dcoeffs):
    ca = np.array([complex(a) for a in coeffs])
    da = np.array([complex(a) for a in dcoeffs])

    def ev(z):
        v = np.zeros_like(z)
        for a in ca[::-1]:
            v = v * z + a
        w = np.zeros_like(z)
        for a in da[::-1]:
            w = w * z + a
        return v, w
    return ev


def _polish_exact(z0_list, coeffs, steps=12):
    """Newton-polish against exact coefficients; returns verified mpc roots.

    Working precision covers the Horner cancellation plus convergence margin,
    so the refined values inherit their authority from the integer
    coefficients alone.
    """
    d = len(coeffs) - 1
    # 128 guard bits past the cancellation budget keep the Horner noise
    # floor far below the 2^-96 convergence target at every degree
    prec = max(192, _abs_power_sum_bits(coeffs) + 128)
    cx = gmpy2.context(precision=prec)
    dcoeffs = _poly_der(coeffs)
    ca = [gmpy2.mpc(a, precision=prec) for a in coeffs]
    da = [gmpy2.mpc(a, precision=prec) for a in dcoeffs]

    def horner(cs, z):
        acc = gmpy2.mpc(0, precision=prec)
        for a in reversed(cs):
            acc = cx.add(cx.mul(acc, z), a)
        return acc

    roots = []
    conv_tol = gmpy2.mpfr(2, prec) ** -96
    for z0 in z0_list:
        z = gmpy2.mpc(complex(z0), precision=prec)
        last = None
        for _ in range(steps):
            pv = horner(ca, z)
            dv = horner(da, z)
            if dv == 0:
                raise OracleError(f"critical point hit while polishing near {z0}")
            step = cx.div(pv, dv)
            z = cx.sub(z, step)
            last = abs(step)
            if last < conv_tol:
                break
        if last is None or last > gmpy2.mpfr("1e-20"):
            raise OracleError(f"no contraction near {z0} (last step {last})")
        roots.append(z)

    # Global exactness checks via Newton identities on the integer coefficients.
    s1 = gmpy2.mpc(0, precision=prec)
    s2 = gmpy2.mpc(0, precision=prec)
    for z in roots:
        s1 = cx.add(s1, z)
        s2 = cx.add(s2, cx.mul(z, z))
    an = coeffs[-1]
    e1 = gmpy2.mpq(-coeffs[-2], an)
    e2 = gmpy2.mpq(coeffs[-3], an) if d >= 2 else gmpy2.mpq(0)
    p2 = e1 * e1 - 2 * e2
    tol = 1e-25 * d
    if abs(s1 - gmpy2.mpfr(e1, prec)) > tol or abs(s2 - gmpy2.mpfr(p2, prec)) > tol:
        raise OracleError("power-sum identities against exact coefficients failed")
    if d >= 2:
        arr = np.array([complex(z) for z in roots])
        diff = np.abs(arr[:, None] - arr[None, :])
        np.fill_diagonal(diff, np.inf)
        if diff.min() == 0.0:
            raise OracleError("two root estimates collided")
    return roots


def oracle_roots_p(n, shift=0):
    """All roots of p_n - shift as complex128, exact-coefficient verified."""
    coeffs = p_coeffs(n)
    coeffs[0] -= shift
    d = len(coeffs) - 1
    if d == 1:
        return np.array([complex(-coeffs[0])])
    z = _start_cloud(d, 2.3)
    z = _aberth(z, _recurrence_eval(n, shift), fence=2.6)
    roots = _polish_exact(z, coeffs)
    return np.array([complex(r) for r in roots])


def oracle_roots_small(coeffs):
    """Roots of a small integer/complex polynomial (degree <= ~64)."""
    coeffs = list(coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    if len(coeffs) < 2:
        raise DegenerateInputError("degree must be >= 1")
    d = len(coeffs) - 1
    if d == 1:
        return np.array([complex(-coeffs[0] / coeffs[1])])
    radius = 1.0 + max(abs(complex(a / coeffs[-1])) for a in coeffs[:-1])
    z = _start_cloud(d, radius)
    z = _aberth(z, _horner_eval(coeffs, _poly_der(coeffs)), fence=1.2 * radius)
    if all(isinstance(a, int) for a in coeffs):
        roots = _polish_exact(z, coeffs)
        return np.array([complex(r) for r in roots])
    return z


def hausdorff(a, b):
    """Hausdorff distance between two finite point sets."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.size == 0 or b.size == 0:
        raise ValueError("empty set")
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))
