"""Discrete level lines: construction, refinement, lifting, morphing.

A level line of order N for a degree-d polynomial P at level L holds N
points z_j with P(z_j) = L * exp(2i pi d k_j / (N*M)), where the phase
index k_j = j*M lives on a grid of N*M "fine" phases per full traversal
of the curve (the value winds d times around the circle of modulus L,
sampled M times per turn).  Construction walks that fine grid with
Newton-with-target solves; each move shifts the target's argument by one
fine unit, so the value displacement per solve is about 2 L sin(pi d/(N M)).

The guard ratio (|P(z)| - C) / |P(z) - next target| with C = 2 (the
asymptotic ceiling of the relevant critical values) is measured at every
move and its minimum is recorded on the line.  Construction only aborts
when the ratio drops under a hard floor (0.5 by default); the theoretical
comfort threshold 6.1 is exposed through min_points_per_turn for sizing.

Scaling strategy: full lines of large order are never walked point by
point.  A small base line is built sequentially, then grown by repeated
family lifts (p_k line -> p_{k+1} line at the same level, via a geometric
target-radius schedule from L^2 down to L) and order doublings (midpoint
insertion), both of which solve all points in one vectorized Newton pass.
Misiurewicz lines morph from the matching hyperbolic line at equal level.

Checkpoint file layout (little-endian, offsets in bytes):

    0   magic   b"LLCK"
    4   version u8 (= 1)
    5   family  u8 (0 hyp, 1 mis, 2 mis-simple)
    6   reserved u16 (= 0)
    8   l       u32
    12  n       u32
    16  level   f64
    24  order   u64
    32  points_per_turn u32
    36  reserved u32 (= 0)
    40  count   u64
    48  digest  16 bytes, MD5 of the payload
    64  payload count * 24 bytes: k u64, Re z f64, Im z f64

Points are stored as binary64 pairs regardless of working tier; reload
and re-polish to recover full working accuracy.
"""

import contextlib
import contextvars
import hashlib
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .mandelpoly import (
    PolyId,
    Hyp,
    Mis,
    MisSimple,
    CriticalPointError,
    eval_poly,
    eval_vec,
)
from .precision import CLONGDOUBLE, LONGDOUBLE
from .rootstore import DigestMismatchError, FormatError

LEVEL_HYP = 5.0
LEVEL_MIS = 100.0
C_GUARD = 2.0
GAMMA_THEORY = 6.1
TAU_A = 1e-12
# positional resolution of the working format: a Newton correction below
# this (relative) size cannot move the point, however large the residual
_POS_FLOOR = 2.0 ** -62

_CK_MAGIC = b"LLCK"
_CK_VERSION = 1
_CK_HEADER = 64
_CK_RECORD = 24
_FAMILY_CODE = {"hyp": 0, "mis": 1, "mis-simple": 2}
_FAMILY_NAME = {v: k for k, v in _FAMILY_CODE.items()}


_TALLY = contextvars.ContextVar("newton_step_tally", default=None)


@contextlib.contextmanager
def count_newton_steps():
    """Tally every applied Newton step (one per point per iteration) from
    the solvers in this module while the context is active."""
    tally = {"steps": 0}
    token = _TALLY.set(tally)
    try:
        yield tally
    finally:
        _TALLY.reset(token)


def _tally_add(k):
    t = _TALLY.get()
    if t is not None:
        t["steps"] += k


class NoConvergenceError(ArithmeticError):
    pass


class GuardViolationError(ArithmeticError):
    pass


class PhaseSkipError(ArithmeticError):
    pass


def min_points_per_turn(level, gamma=GAMMA_THEORY, c_guard=C_GUARD):
    """Smallest per-turn sampling that keeps the guard ratio above gamma."""
    if level <= c_guard:
        raise ValueError("level must exceed the guard constant")
    return math.ceil(2 * math.pi * gamma * level / (level - c_guard))


class PowerMap:
    """z -> z^d model map; the level lines are exact circles."""

    def __init__(self, d):
        if d < 1:
            raise ValueError("degree must be positive")
        self.degree = d

    def eval_vec(self, z):
        z = np.asarray(z, dtype=CLONGDOUBLE)
        return z ** self.degree, self.degree * z ** (self.degree - 1)

    def __str__(self):
        return f"power({self.degree})"


def _vd(poly, z):
    if isinstance(poly, PolyId):
        return eval_vec(poly, z)
    return poly.eval_vec(z)


def _scalar_vd(poly, z):
    if isinstance(poly, PolyId):
        res = eval_poly(poly, z)
        if res.scale_exp != 0:
            raise NoConvergenceError(f"orbit escaped near {z}")
        return complex(res.value), complex(res.derivative)
    v, w = poly.eval_vec(np.asarray([z], dtype=CLONGDOUBLE))
    return complex(v[0]), complex(w[0])


def _log2_abs(poly, x):
    if isinstance(poly, PolyId):
        return eval_poly(poly, x).log2_abs_value()
    v, _ = poly.eval_vec(np.asarray([x], dtype=CLONGDOUBLE))
    return float(np.log2(np.abs(v[0])))


@dataclass
class LevelLine:
    poly: object
    level: float
    order: int
    points_per_turn: int
    ks: np.ndarray
    zs: np.ndarray
    min_guard_ratio: float = math.inf
    closure_error: float = math.nan

    @property
    def degree(self):
        return self.poly.degree

    def phase_unit(self):
        """Fine phase increment: 2 pi d / (order * M)."""
        return 2 * math.pi * self.degree / (self.order * self.points_per_turn)

    def targets(self):
        u = self.phase_unit()
        return self.level * np.exp(1j * u * self.ks.astype(np.float64))

    def points(self):
        for k, z in zip(self.ks, self.zs):
            yield int(k), complex(z)

    def residuals(self):
        """|P(z_j) - target_j| / level at every stored point."""
        v, _ = _vd(self.poly, self.zs)
        t = np.asarray(self.targets(), dtype=CLONGDOUBLE)
        return np.abs(v - t).astype(np.float64) / self.level


# ---------------------------------------------------------------------------
# Newton-with-target solvers

def solve_to_target(poly, z0, target, max_steps=40, prec=None, tau=None):
    """Solve P(z) = target by Newton iteration started at z0.

    Tier A (prec None) works in extended hardware precision with relative
    tolerance tau (default 1e-12); a tier-B precision solves in MPFR with
    tolerance 2^-(prec-16).
    """
    if tau is None:
        tau = TAU_A if prec is None else 2.0 ** -(prec - 16)
    if prec is None:
        z = complex(z0)
        t = complex(target)
        bound = tau * abs(t)
        for _ in range(max_steps):
            v, w = _scalar_vd(poly, z)
            if abs(v - t) <= bound:
                return z
            if w == 0:
                raise CriticalPointError(poly, z)
            z = z - (v - t) / w
            _tally_add(1)
        raise NoConvergenceError(
            f"no convergence to {target} from {z0} in {max_steps} steps")
    import gmpy2
    from .precision import ctx, mpc_from_complex
    cx = ctx(prec)
    z = mpc_from_complex(z0, prec)
    t = mpc_from_complex(target, prec)
    bound = gmpy2.mpfr(tau, 64) * abs(t)
    for _ in range(max_steps):
        res = eval_poly(poly, z, prec=prec)
        v = cx.div_2exp(res.value, -res.scale_exp) if res.scale_exp else res.value
        w = cx.div_2exp(res.derivative, -res.scale_exp) if res.scale_exp \
            else res.derivative
        if abs(cx.sub(v, t)) <= bound:
            return z
        if w == 0:
            raise CriticalPointError(poly, z)
        z = cx.sub(z, cx.div(cx.sub(v, t), w))
    raise NoConvergenceError(
        f"no convergence to {target} from {z0} in {max_steps} steps")


def _solve_vec(poly, z, targets, tau=TAU_A, max_steps=40):
    """Vectorized Newton-with-target; every entry must converge.

    Converged means the value residual reached tau, or the correction fell
    below the format's positional resolution: where the derivative is huge
    (the region left of -2 on the real axis) the evaluation noise floor
    exceeds tau * |target| while the point itself is accurate to an ulp.
    """
    z = np.array(z, dtype=CLONGDOUBLE, copy=True)
    t = np.asarray(targets, dtype=CLONGDOUBLE)
    bound = tau * np.abs(t)
    live = np.ones(z.shape, dtype=bool)
    for _ in range(max_steps):
        v, w = _vd(poly, z)
        err = np.abs(v - t)
        with np.errstate(invalid="ignore"):
            live &= ~(err <= bound)
        if not live.any():
            return z
        bad = live & ((w == 0) | ~np.isfinite(w) | ~np.isfinite(v))
        if bad.any():
            raise NoConvergenceError(
                f"{int(bad.sum())} points hit a critical point or escaped")
        step = np.zeros_like(z)
        step[live] = (v[live] - t[live]) / w[live]
        astep = np.abs(np.asarray(step, dtype=np.complex128))
        az = np.abs(np.asarray(z, dtype=np.complex128))
        live &= astep > _POS_FLOOR * (az + 1.0)
        if not live.any():
            return z
        step[~live] = 0
        z -= step
        _tally_add(int(live.sum()))
    raise NoConvergenceError(f"{int(live.sum())} of {live.size} points "
                             f"did not reach tolerance {tau}")


def _phase_precheck(poly, z, targets, stage):
    v, _ = _vd(poly, z)
    dev = np.abs(np.angle(np.asarray(v, dtype=np.complex128) /
                          np.asarray(targets, dtype=np.complex128)))
    worst = float(dev.max()) if dev.size else 0.0
    if worst > math.pi / 2:
        raise PhaseSkipError(
            f"{stage}: value argument off by {worst:.3f} rad before solve")


# ---------------------------------------------------------------------------
# construction

def _real_seed(poly, level, max_steps=60):
    """Positive real point with P(x) = level, by bisection then Newton."""
    lo, hi = 0.25, float(level) + 1.0
    flo = _log2_abs(poly, lo)
    fhi = _log2_abs(poly, hi)
    goal = math.log2(level)
    if not (flo < goal < fhi):
        raise NoConvergenceError(
            f"no real bracket for |{poly}| = {level} in [{lo}, {hi}]")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _log2_abs(poly, mid) < goal:
            lo = mid
        else:
            hi = mid
    z = solve_to_target(poly, 0.5 * (lo + hi), level, max_steps=max_steps)
    return complex(z.real, 0.0) if abs(z.imag) < 1e-20 else complex(z)


def build_level_line(poly, level, order, points_per_turn=8, seed=None,
                     tau=TAU_A, gamma_hard=0.5, c_guard=C_GUARD,
                     max_steps=40):
    """Walk the full fine grid once and store every M-th point.

    Costs order * points_per_turn sequential Newton solves; intended for
    moderate orders and as the base case of the lift/refine pipeline.
    """
    level = float(level)
    if level <= c_guard:
        raise ValueError(f"level {level} under the guard constant {c_guard}")
    d = poly.degree
    n_fine = order * points_per_turn
    u = 2 * math.pi * d / n_fine
    if seed is None:
        seed = _real_seed(poly, level)
    z = complex(solve_to_target(poly, seed, level, max_steps=max_steps,
                                tau=tau))
    ks = [0]
    zs = [z]
    min_ratio = math.inf
    for k in range(1, n_fine + 1):
        target = level * complex(math.cos(u * k), math.sin(u * k))
        v, _ = _scalar_vd(poly, z)
        gap = abs(v - target)
        if gap > 0:
            ratio = (abs(v) - c_guard) / gap
            if ratio < min_ratio:
                min_ratio = ratio
            if ratio < gamma_hard:
                raise GuardViolationError(
                    f"guard ratio {ratio:.3f} < {gamma_hard} at fine step {k}")
        z = complex(solve_to_target(poly, z, target, max_steps=max_steps,
                                    tau=tau))
        if k < n_fine and k % points_per_turn == 0:
            ks.append(k)
            zs.append(z)
    closure = abs(z - zs[0])
    return LevelLine(poly, level, order, points_per_turn,
                     np.asarray(ks, dtype=np.int64),
                     np.asarray(zs, dtype=CLONGDOUBLE),
                     min_guard_ratio=min_ratio, closure_error=closure)


def refine_level_line(line, factor, tau=TAU_A, gamma_hard=0.5,
                      c_guard=C_GUARD, max_steps=40):
    """Double the order log2(factor) times; old points are kept verbatim.

    New midpoints are solved for all gaps in one vectorized pass, walking
    each gap in enough substeps to respect the per-turn sampling.
    """
    if factor < 1 or factor & (factor - 1):
        raise ValueError("factor must be a power of two")
    while factor > 1:
        line = _double(line, tau, gamma_hard, c_guard, max_steps)
        factor //= 2
    return line


def _double_arc(poly, level, order, m, ks, zs, tau, gamma_hard, c_guard,
                max_steps):
    """One density doubling of a contiguous arc of stored points.

    order is the full line's current order; each gap is walked from its
    left point only, so arcs never need their right neighbor.  Returns
    (new_ks, new_zs, min_guard_ratio) on the doubled index grid.
    """
    d = poly.degree
    u_new = 2 * math.pi * d / (2 * order * m)
    new_ks = 2 * ks
    mid_ks = new_ks + m
    # walk each gap from its left point in value-phase substeps <= 2 pi / M
    dphi = u_new * m                      # phase distance to the midpoint
    substeps = max(1, math.ceil(dphi / (2 * math.pi / m)))
    z = np.array(zs, dtype=CLONGDOUBLE, copy=True)
    start_phase = u_new * new_ks.astype(np.float64)
    min_ratio = math.inf
    for i in range(1, substeps + 1):
        phase = start_phase + dphi * i / substeps
        targets = level * np.exp(1j * phase)
        v, _ = _vd(poly, z)
        gaps = np.abs(np.asarray(v, dtype=np.complex128) - targets)
        with np.errstate(divide="ignore"):
            ratios = (np.abs(np.asarray(v, dtype=np.complex128)) - c_guard) \
                / np.where(gaps > 0, gaps, np.inf)
        worst = float(ratios.min()) if ratios.size else math.inf
        if worst < min_ratio:
            min_ratio = worst
        if worst < gamma_hard:
            raise GuardViolationError(
                f"guard ratio {worst:.3f} < {gamma_hard} while doubling")
        z = _solve_vec(poly, z, targets, tau=tau, max_steps=max_steps)
    out_ks = np.empty(2 * len(ks), dtype=np.int64)
    out_zs = np.empty(2 * len(ks), dtype=CLONGDOUBLE)
    out_ks[0::2], out_ks[1::2] = new_ks, mid_ks
    out_zs[0::2], out_zs[1::2] = zs, z
    return out_ks, out_zs, min_ratio


def _double(line, tau, gamma_hard, c_guard, max_steps):
    ks, zs, ratio = _double_arc(line.poly, line.level, line.order,
                                line.points_per_turn, line.ks, line.zs,
                                tau, gamma_hard, c_guard, max_steps)
    return LevelLine(line.poly, line.level, 2 * line.order,
                     line.points_per_turn, ks, zs,
                     min_guard_ratio=min(line.min_guard_ratio, ratio),
                     closure_error=line.closure_error)


def refine_arc(poly, level, order, points_per_turn, ks, zs, factor,
               tau=TAU_A, gamma_hard=0.5, c_guard=C_GUARD, max_steps=40):
    """Refine a contiguous arc of a level line of the given order by a
    power-of-two factor, never touching points outside the arc.  Returns
    (ks, zs) on the refined index grid; the input points persist verbatim
    at their rescaled indices."""
    if factor < 1 or factor & (factor - 1):
        raise ValueError("factor must be a power of two")
    ks = np.asarray(ks, dtype=np.int64)
    zs = np.asarray(zs, dtype=CLONGDOUBLE)
    while factor > 1:
        ks, zs, _ = _double_arc(poly, level, order, points_per_turn, ks, zs,
                                tau, gamma_hard, c_guard, max_steps)
        order *= 2
        factor //= 2
    return ks, zs


def lift_level_line(line, schedule_steps=16, tau=TAU_A, max_steps=40):
    """Line of p_k at level L -> line of p_{k+1} at level L, same order.

    At a point z of the input line, p_{k+1}(z) = p_k(z)^2 + z sits near the
    L^2 level of p_{k+1} with doubled value argument; the target radius is
    then reduced geometrically from L^2 to L in schedule_steps vectorized
    passes.  Phase indices carry over unchanged: the degree doubles, so an
    unchanged index means exactly the doubled argument.
    """
    if not (isinstance(line.poly, PolyId) and line.poly.family == "hyp"):
        raise ValueError("lifting applies to hyperbolic lines")
    out_poly = Hyp(line.poly.n + 1)
    level = line.level
    u_out = 2 * math.pi * out_poly.degree / (line.order * line.points_per_turn)
    phases = np.exp(1j * u_out * line.ks.astype(np.float64))
    z = np.array(line.zs, dtype=CLONGDOUBLE, copy=True)
    for j in range(1, schedule_steps + 1):
        r = level ** (2.0 - j / schedule_steps)
        targets = r * phases
        _phase_precheck(out_poly, z, targets, f"lift stage {j}")
        z = _solve_vec(out_poly, z, targets, tau=tau, max_steps=max_steps)
    return LevelLine(out_poly, level, line.order, line.points_per_turn,
                     line.ks.copy(), z,
                     min_guard_ratio=line.min_guard_ratio,
                     closure_error=line.closure_error)


def morph_level_line(line, out_poly, tau=TAU_A, max_steps=40):
    """Move a hyperbolic line onto the equal-degree, equal-level line of a
    Misiurewicz-family polynomial (difference/sum shifts the value only by
    a low-order orbit term, small against the working level)."""
    if out_poly.degree != line.degree:
        raise ValueError("degrees differ; morph needs matching degrees")
    targets = np.asarray(line.targets(), dtype=CLONGDOUBLE)
    _phase_precheck(out_poly, line.zs, targets, "morph")
    z = _solve_vec(out_poly, line.zs, targets, tau=tau, max_steps=max_steps)
    return LevelLine(out_poly, line.level, line.order, line.points_per_turn,
                     line.ks.copy(), z,
                     min_guard_ratio=line.min_guard_ratio,
                     closure_error=line.closure_error)


def polish_level_line(line, tau=TAU_A, max_steps=40):
    """Re-solve every stored point to its own target (after a reload)."""
    z = _solve_vec(line.poly, line.zs, np.asarray(line.targets(),
                                                  dtype=CLONGDOUBLE),
                   tau=tau, max_steps=max_steps)
    return LevelLine(line.poly, line.level, line.order, line.points_per_turn,
                     line.ks.copy(), z,
                     min_guard_ratio=line.min_guard_ratio,
                     closure_error=line.closure_error)


# ---------------------------------------------------------------------------
# family pipelines

def hyperbolic_line(n, level=LEVEL_HYP, points_per_root=4, points_per_turn=8,
                    tau=TAU_A, order_cap=None):
    """Level line of p_n with points_per_root * 2^(n-1) points.

    Orders up to 2^3 build directly; beyond that, lift-and-double from the
    p_3 base keeps every pass vectorized.  order_cap bounds the order (a
    coarse line for chunked pipelines that refine their own arcs later).
    """
    base_n = min(n, 3)
    order = points_per_root * 2 ** (base_n - 1)
    if order_cap is not None:
        order = min(order, order_cap)
    line = build_level_line(Hyp(base_n), level, order, points_per_turn,
                            tau=tau)
    for k in range(base_n, n):
        try:
            line = lift_level_line(line, tau=tau)
        except NoConvergenceError:
            # a ray passing near a critical point needs a gentler radius
            # schedule and a bigger budget; the input line is untouched
            line = lift_level_line(line, schedule_steps=64, tau=tau,
                                   max_steps=100)
        target = points_per_root * 2 ** k
        if order_cap is not None:
            target = min(target, order_cap)
        while line.order * 2 <= target:
            line = refine_level_line(line, 2, tau=tau)
    return line


def misiurewicz_line(l, n, simple=False, level=LEVEL_MIS, points_per_root=4,
                     points_per_turn=8, tau=TAU_A, order_cap=None):
    hyp_n = (l + n - 1) if simple else (l + n)
    base = hyperbolic_line(hyp_n, level=level, points_per_root=points_per_root,
                           points_per_turn=points_per_turn, tau=tau,
                           order_cap=order_cap)
    out = MisSimple(l, n) if simple else Mis(l, n)
    return morph_level_line(base, out, tau=tau)


# ---------------------------------------------------------------------------
# universal start mesh baseline

def hss_mesh_params(d):
    """(points per circle, circle count) for the universal mesh at degree d."""
    if d < 2:
        raise ValueError("degree must be at least 2")
    alpha = math.ceil(4.16 * d * math.log(d))
    beta = math.ceil(0.27 * math.log(d))
    return alpha, beta


def hss_mesh(d, r):
    """Lazily yield the universal starting mesh for degree-d polynomials
    with all roots in |z| <= r: beta concentric circles of alpha points."""
    if r <= 0:
        raise ValueError("radius must be positive")
    alpha, beta = hss_mesh_params(d)
    outer = r * (1 + math.sqrt(2))
    for nu in range(1, beta + 1):
        radius = outer * (1 - 1 / d) ** ((2 * nu - 1) / (4 * beta))
        for j in range(alpha):
            ang = 2 * math.pi * j / alpha
            yield radius * complex(math.cos(ang), math.sin(ang))


# ---------------------------------------------------------------------------
# checkpoints

def write_checkpoint(line, path):
    if not isinstance(line.poly, PolyId):
        raise ValueError("only family lines are checkpointable")
    payload = bytearray()
    for k, z in zip(line.ks, line.zs):
        payload += struct.pack("<Qdd", int(k), float(z.real), float(z.imag))
    digest = hashlib.md5(bytes(payload)).digest()
    head = bytearray()
    head += _CK_MAGIC
    head += bytes([_CK_VERSION, _FAMILY_CODE[line.poly.family], 0, 0])
    head += struct.pack("<II", line.poly.l, line.poly.n)
    head += struct.pack("<d", float(line.level))
    head += struct.pack("<QII", line.order, line.points_per_turn, 0)
    head += struct.pack("<Q", len(line.ks))
    head += digest
    with open(path, "wb") as fh:
        fh.write(bytes(head))
        fh.write(bytes(payload))


def read_checkpoint(path):
    """Reload a checkpointed line; points come back at binary64 accuracy,
    so callers needing full tier tolerance should polish afterwards."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _CK_HEADER:
        raise FormatError("truncated header")
    if blob[:4] != _CK_MAGIC:
        raise FormatError("bad magic")
    if blob[4] != _CK_VERSION:
        raise FormatError(f"unsupported version {blob[4]}")
    family = _FAMILY_NAME.get(blob[5])
    if family is None:
        raise FormatError(f"unknown family code {blob[5]}")
    l, n = struct.unpack_from("<II", blob, 8)
    (level,) = struct.unpack_from("<d", blob, 16)
    order, m, _ = struct.unpack_from("<QII", blob, 24)
    (count,) = struct.unpack_from("<Q", blob, 40)
    digest = blob[48:64]
    payload = blob[_CK_HEADER:]
    if len(payload) != count * _CK_RECORD:
        raise FormatError("payload length does not match count")
    if hashlib.md5(payload).digest() != digest:
        raise DigestMismatchError("payload digest mismatch")
    ks = np.empty(count, dtype=np.int64)
    zs = np.empty(count, dtype=CLONGDOUBLE)
    for i in range(count):
        k, re, im = struct.unpack_from("<Qdd", payload, i * _CK_RECORD)
        ks[i] = k
        zs[i] = complex(re, im)
    poly = PolyId(family, l, n)
    return LevelLine(poly, level, order, m, ks, zs)
