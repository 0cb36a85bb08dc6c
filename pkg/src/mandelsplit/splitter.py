"""Newton descents from level-line seeds and the two splitting pipelines.

A split finds the NEW parameters of a family member: the roots the target
polynomial does not share with its divisor polynomials.  Seeds are the
stored points of a level line with four points per root.  Each seed
descends under Newton's method until it converges, is recognized as a known
root, or gives up.  Divisor roots are matched against precomputed locked
root sets, so the multiple roots of the unsimplified preperiodic
polynomials need no special treatment: their descents either crawl past the
step cap (harmless, the roots are old parameters) or land close enough to a
table entry to be classified.

Two pipelines share the descent engine:

  split_quick      hardware arithmetic throughout; published roots sit at
                   the extended-double noise floor, which is plenty for the
                   2^-44 deduplication separation.
  split_certified  every converged descent is finished in software
                   arithmetic, deduplication happens at the database
                   separations, each surviving root passes an existence
                   proof, and the work can fan out over independent
                   resumable chunks that refine only their own slice of the
                   level line from a shared coarse version of it.

Both build the line the same way: a coarse line of bounded order through
the lift pipeline, then density doublings at the target polynomial (global
doublings for quick, per-chunk arcs for certified).

Descents leave hardware ("tier A") for software ("tier B") arithmetic when
the step size drops below 2^-40 without meeting the convergence threshold,
or when evaluation loses all significance near a critical point.  Roots of
real polynomials come in conjugate pairs, so every result is reported as
its upper-half-plane representative; software-tier values are computed at
PUBLISH_PREC bits so that the imaginary drift of a real root stays inside
half a storage quantum and quantizes to the axis exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import gmpy2
import numpy as np

from .certify import DEFAULT_EPS_R, DEFAULT_PREC, prove_root
from .combinatorics import (divisors, factor_multiplicities,
                            new_parameter_count, simple_factor_multiplicities)
from .levelline import (count_newton_steps, hyperbolic_line, misiurewicz_line,
                        refine_arc, refine_level_line)
from .mandelpoly import Hyp, MisSimple, eval_poly, eval_vec
from .precision import CLONGDOUBLE, ctx, mpc_from_complex
from .rootstore import (FAMILY_HYP, FAMILY_MIS, FAMILY_MIS_SIMPLE,
                        SEPARATION_HYP, SEPARATION_MIS, InsertOutcome,
                        RootSet, decode_u128, merge_sets, read_file,
                        write_file)

SEP_QUICK = 2.0 ** -44        # dedup separation of hardware-tier sets

# Divisor lookups use their own, much wider square: a descent into a root of
# multiplicity m stops as soon as the step drops below 1e-13, i.e. up to
# m * 1e-13 away from the root, and table entries themselves carry only
# hardware accuracy.  1e-10 covers both while staying far below the minimum
# distance between distinct roots of any divisor polynomial at this scale.
TABLE_SEP = 1e-10

CONV_ABS_A = 1e-12            # |P| convergence threshold, hardware tier
CONV_STEP = 1e-13             # Newton step threshold, both tiers
TIER_SWITCH_STEP = 2.0 ** -40
JUMP_LIMIT = 0.5              # single-step divergence detector ...
JUMP_ARM_ABS = 2.0            # ... armed once |P| reaches root-basin scale
ESCAPE_RADIUS = 4.0           # lost significance out here means divergence
LEFT_TAIL_RE = -2.0 + 4.0 ** -16

# Storage lattice quanta are 2^-126; refining published roots at 160 bits
# keeps their error near 2^-158, so a real root's imaginary part rounds to
# the axis instead of falling half a quantum below it.
PUBLISH_PREC = 160

COARSE_ORDER = 1 << 10        # shared coarse-line order for big splits
CHUNK_POINTS = 1 << 16        # refined seeds per chunk, default sizing
QUICK_BLOCK = 1 << 18         # seeds per descent batch in the quick path
BAND_FACTOR = 16              # neighbor band radius, in separations

_C_CAP = {"hyp": 1.0, "mis": 2.6, "mis-simple": 2.6}
_CODE = {"hyp": FAMILY_HYP, "mis": FAMILY_MIS, "mis-simple": FAMILY_MIS_SIMPLE}


class SplitError(Exception):
    pass


class IncompleteSplit(SplitError):
    """Fewer new parameters than the count formula demands."""

    def __init__(self, poly, found, expected):
        self.poly = poly
        self.found = found
        self.expected = expected
        self.missing = expected - found
        super().__init__(
            f"{poly!r}: found {found} of {expected} new parameters")


class ChunkFailure(SplitError):
    def __init__(self, chunk_id, message=""):
        self.chunk_id = chunk_id
        super().__init__(f"chunk {chunk_id} failed" +
                         (f": {message}" if message else ""))


class OutcomeKind(Enum):
    CONVERGED = "converged"
    REPEAT = "repeat"
    OVERLAP_NEIGHBOR = "overlap-neighbor"
    DIVISOR_ROOT = "divisor-root"
    DIVERGENT = "divergent"


@dataclass(frozen=True)
class DescendOutcome:
    """Result of one descent.  root is the upper-half-plane representative,
    a complex in the quick policy or an mpc once tier B touched it; it is
    None exactly when kind is DIVERGENT."""

    kind: OutcomeKind
    root: object = None
    steps_tier_a: int = 0
    steps_tier_b: int = 0


@dataclass
class SplitReport:
    """Work accounting for one split.

    Totals are additive, so chunk reports sum to the merged report field by
    field (roots_found of a chunk counts its own set before merging, so the
    sum over chunks may exceed the merged count when basins cross chunk
    boundaries).  The spent level-line steps of the shared coarse line are
    attributed to the first chunk.
    """

    poly: object
    roots_found: int = 0
    expected: int = 0
    line_steps: int = 0
    descent_steps_tier_a: int = 0
    descent_steps_tier_b: int = 0
    descents: int = 0
    passes: int = 1
    chunks: int = 1
    outcome_histogram: dict = field(default_factory=dict)
    chunk_reports: tuple = ()

    @property
    def newton_steps_level_line(self) -> float:
        return self.line_steps / max(1, self.roots_found)

    @property
    def newton_steps_descent(self) -> float:
        total = self.descent_steps_tier_a + self.descent_steps_tier_b
        return total / max(1, self.roots_found)

    @property
    def tier_b_ratio(self) -> float:
        total = (self.line_steps + self.descent_steps_tier_a
                 + self.descent_steps_tier_b)
        return self.descent_steps_tier_b / total if total else 0.0

    def __add__(self, other):
        if not isinstance(other, SplitReport):
            return NotImplemented
        hist = dict(self.outcome_histogram)
        for k, v in other.outcome_histogram.items():
            hist[k] = hist.get(k, 0) + v
        return SplitReport(
            poly=self.poly,
            roots_found=self.roots_found + other.roots_found,
            expected=max(self.expected, other.expected),
            line_steps=self.line_steps + other.line_steps,
            descent_steps_tier_a=(self.descent_steps_tier_a
                                  + other.descent_steps_tier_a),
            descent_steps_tier_b=(self.descent_steps_tier_b
                                  + other.descent_steps_tier_b),
            descents=self.descents + other.descents,
            passes=max(self.passes, other.passes),
            chunks=self.chunks + other.chunks,
            outcome_histogram=hist,
            chunk_reports=self.chunk_reports + other.chunk_reports)

    def as_dict(self):
        return {
            "family": self.poly.family,
            "l": self.poly.l,
            "n": self.poly.n,
            "degree": self.poly.degree,
            "roots_found": self.roots_found,
            "expected": self.expected,
            "line_steps": self.line_steps,
            "descent_steps_tier_a": self.descent_steps_tier_a,
            "descent_steps_tier_b": self.descent_steps_tier_b,
            "descents": self.descents,
            "passes": self.passes,
            "chunks": self.chunks,
            "outcome_histogram": {k.value: v
                                  for k, v in self.outcome_histogram.items()},
            "newton_steps_level_line": self.newton_steps_level_line,
            "newton_steps_descent": self.newton_steps_descent,
            "tier_b_ratio": self.tier_b_ratio,
        }


def step_cap(poly) -> int:
    """Iteration budget for one descent: max(20, ceil(c * ln degree))."""
    c = _C_CAP[poly.family]
    return max(20, math.ceil(c * math.log(poly.degree)))


# ---------------------------------------------------------------------------
# descent engine

_LIVE, _CONV_A, _DIVERGED, _TO_B = 0, 1, 2, 3


def _tier_a_batch(poly, seeds, cap):
    """Vectorized hardware-tier Newton over all seeds at once.

    Returns (z, state, steps).  state marks each seed converged (its entry
    of z holds the root), diverged, or in need of the software tier from
    its current position.  The jump detector arms only after the first
    step and only once |P| has fallen to root-basin scale: while the value
    still dwarfs the escape bound the descent is crossing level lines and
    long regular steps are the norm (for tiny degrees even the first hop
    from the line is long), whereas a long step with |P| already small
    signals a nearby critical point.
    """
    z = np.atleast_1d(np.asarray(seeds, dtype=CLONGDOUBLE)).copy()
    state = np.full(z.size, _LIVE, np.int8)
    steps = np.zeros(z.size, np.int64)
    idx = np.arange(z.size)
    for it in range(cap + 1):
        if not idx.size:
            break
        v, w = eval_vec(poly, z[idx])
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            vv = np.asarray(v, np.complex128)
            ww = np.asarray(w, np.complex128)
            ok = np.isfinite(vv) & np.isfinite(ww) & (ww != 0)
            step = np.zeros_like(v)
            np.divide(v, w, out=step, where=ok)
            astep = np.abs(np.asarray(step, np.complex128))
        ok &= np.isfinite(astep)
        av = np.abs(vv)
        conv = ok & (av <= CONV_ABS_A) & (astep < CONV_STEP)
        jump = (ok & (astep > JUMP_LIMIT) & (av <= JUMP_ARM_ABS)
                & (it > 0) & ~conv)
        stall = ok & (astep < TIER_SWITCH_STEP) & ~conv
        lost = ~ok
        near = np.abs(np.asarray(z[idx], np.complex128)) <= ESCAPE_RADIUS
        dead = jump | (lost & ~near)
        to_b = (stall | (lost & near)) & ~dead & ~conv
        state[idx[conv]] = _CONV_A
        state[idx[dead]] = _DIVERGED
        state[idx[to_b]] = _TO_B
        move = ~(conv | dead | to_b)
        if it == cap:
            state[idx[move]] = _DIVERGED      # budget exhausted
            break
        sel = idx[move]
        z[sel] = z[sel] - step[move]
        steps[sel] += 1
        idx = sel
    return z, state, steps


def _polish_batch(poly, z, sel, steps, rounds=3):
    # a few guarded extra steps push hardware roots to the noise floor,
    # which keeps same-root duplicates far inside the separation square
    if sel.size == 0:
        return
    for _ in range(rounds):
        v, w = eval_vec(poly, z[sel])
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            vv = np.asarray(v, np.complex128)
            ww = np.asarray(w, np.complex128)
            ok = np.isfinite(vv) & np.isfinite(ww) & (ww != 0)
            step = np.zeros_like(v)
            np.divide(v, w, out=step, where=ok)
            astep = np.abs(np.asarray(step, np.complex128))
        ok &= np.isfinite(astep) & (astep > 0) & (astep < 1e-8)
        if not ok.any():
            break
        tgt = sel[ok]
        z[tgt] = z[tgt] - step[ok]
        steps[tgt] += 1


def _upper(root):
    # exact sign flip; mpc conjugation helpers round through the ambient
    # context, negating the component mpfr does not
    if root.imag < 0:
        pr = max(root.real.precision, root.imag.precision)
        return gmpy2.mpc(root.real, -root.imag, precision=pr)
    return root


def _tier_b_descend(poly, z0, cap, prec):
    """Scalar software-tier Newton from z0.  (root, steps) or (None, steps).

    Convergence is declared from the thresholds, then the last computed
    correction is still applied: the published endpoint gains one more
    quadratic halving, which parks real roots within a sliver of the axis.
    """
    cx = ctx(prec)
    thr = gmpy2.exp2(-(prec // 2)) / 100
    z = z0 if isinstance(z0, gmpy2.mpc) else mpc_from_complex(complex(z0), prec)
    steps = 0
    while True:
        res = eval_poly(poly, z, prec)
        v, w = res.value, res.derivative
        if w == 0:
            return None, steps
        step = cx.div(v, w)
        astep = abs(step)
        if res.scale_exp == 0 and abs(v) <= thr and astep < CONV_STEP:
            if astep > 0:
                z = cx.sub(z, step)
                steps += 1
            return _upper(z), steps
        if astep > JUMP_LIMIT or steps >= cap:
            return None, steps
        z = cx.sub(z, step)
        steps += 1


def _classify(root, store, tables, band, band_eps):
    # order matters: divisor tables first, then the chunk's own set, then
    # the neighbor chunk's boundary band
    if tables:
        for table in tables.values():
            if table.search(root) is not None:
                return OutcomeKind.DIVISOR_ROOT
    if store is not None and store.search(root) is not None:
        return OutcomeKind.REPEAT
    if band and band_eps:
        zc = complex(root)
        for b in band:
            if abs(zc - b) < band_eps or abs(zc.conjugate() - b) < band_eps:
                return OutcomeKind.OVERLAP_NEIGHBOR
    return OutcomeKind.CONVERGED


def descend(poly, z0, tier_policy="quick", cap=None, *, divisors=None,
            store=None, neighbor_band=(), band_eps=None,
            tierb_prec=PUBLISH_PREC):
    """One classified Newton descent from z0.

    divisors is a mapping of locked root sets of the divisor polynomials,
    store the set of roots already found by the current job, neighbor_band
    root values exported by the adjacent chunk (deduplicated within
    band_eps).  All lookups are optional; without them every convergence
    reports CONVERGED.
    """
    if tier_policy not in ("quick", "certified"):
        raise ValueError(f"unknown tier policy {tier_policy!r}")
    if cap is None:
        cap = step_cap(poly)
    z, state, steps = _tier_a_batch(poly, [z0], cap)
    sa = int(steps[0])
    sb = 0
    root = None
    if state[0] == _CONV_A:
        if tier_policy == "quick":
            _polish_batch(poly, z, np.array([0]), steps)
            sa = int(steps[0])
            root = np.conj(z[0]) if z[0].imag < 0 else z[0]
            if float(root.real) < LEFT_TAIL_RE:
                refined, sb = _tier_b_descend(poly, complex(root), cap,
                                              tierb_prec)
                if refined is not None:
                    root = refined
        else:
            zc = complex(z[0])
            root, sb = _tier_b_descend(
                poly, zc.conjugate() if zc.imag < 0 else zc, cap, tierb_prec)
    elif state[0] == _TO_B:
        zc = complex(z[0])
        root, sb = _tier_b_descend(
            poly, zc.conjugate() if zc.imag < 0 else zc, cap, tierb_prec)
    if root is None:
        return DescendOutcome(OutcomeKind.DIVERGENT, None, sa, sb)
    kind = _classify(root, store, divisors, neighbor_band, band_eps or 0.0)
    return DescendOutcome(kind, root, sa, sb)


# ---------------------------------------------------------------------------
# divisor tables

_TABLE_CACHE = {}


def _rebuild_wide(quick_set):
    wide = RootSet(separation=TABLE_SEP, family=quick_set.family,
                   l=quick_set.l, n=quick_set.n, snap_real=True)
    for rec in quick_set.iter_records():
        if wide.insert(rec) is not InsertOutcome.ADDED:
            raise SplitError("divisor table separation too wide for its roots")
    wide.lock()
    return wide


def _table(key):
    got = _TABLE_CACHE.get(key)
    if got is None:
        fam, j, k = key
        if fam == "hyp":
            found, _ = split_quick(Hyp(k))
        else:
            # the new parameters of the (j, k) preperiodic polynomial are
            # exactly the new roots of its summed form, at half the degree
            found, _ = split_quick(MisSimple(j, k))
        got = _rebuild_wide(found)
        _TABLE_CACHE[key] = got
    return got


def divisor_tables(poly):
    """Locked lookup sets for every proper factor of poly, built recursively
    from quick splits and cached process-wide."""
    if poly.family == "hyp":
        keys = [("hyp", 0, k) for k in divisors(poly.n) if k < poly.n]
    else:
        if poly.family == "mis":
            fm = factor_multiplicities(poly.l, poly.n)
        else:
            fm = simple_factor_multiplicities(poly.l, poly.n)
        keys = [k for k in fm if k != ("mis", poly.l, poly.n)]
    return {k: _table(k) for k in sorted(keys)}


# ---------------------------------------------------------------------------
# shared pipeline pieces

def _full_line(poly, points_per_root, points_per_turn, order_cap=None,
               level=None):
    if poly.family == "hyp":
        kw = {} if level is None else {"level": level}
        return hyperbolic_line(poly.n, points_per_root=points_per_root,
                               points_per_turn=points_per_turn,
                               order_cap=order_cap, **kw)
    kw = {} if level is None else {"level": level}
    return misiurewicz_line(poly.l, poly.n,
                            simple=poly.family == "mis-simple",
                            points_per_root=points_per_root,
                            points_per_turn=points_per_turn,
                            order_cap=order_cap, **kw)


def _descend_block(poly, seeds, cap, tables, store, hist, *, certified,
                   tierb_prec, band=(), band_eps=0.0, boundary=0,
                   left_tail=True):
    """Descend every seed in order, classify, insert new roots.

    Mutates store and hist.  Returns (steps_a, steps_b, head, tail); head
    and tail list the root values reached from the first and last
    `boundary` seeds, which the next chunk uses as its deduplication band.
    """
    z, state, steps = _tier_a_batch(poly, seeds, cap)
    conv_sel = np.flatnonzero(state == _CONV_A)
    if not certified:
        _polish_batch(poly, z, conv_sel, steps)
    # canonicalize after all hardware refinement: polishing a flipped point
    # could drift the imaginary part of a real root negative again
    lower = z.imag < 0
    if lower.any():
        np.conjugate(z, out=z, where=lower)
    refined = {}
    steps_b = 0
    if certified:
        for i in conv_sel:
            root, sb = _tier_b_descend(poly, complex(z[i]), cap, tierb_prec)
            refined[int(i)] = root
            steps_b += sb
    else:
        # high-precision exception region: roots hugging the real axis at
        # the far left tail are republished from the software tier
        for i in conv_sel if left_tail else ():
            zi = complex(z[i])
            if zi.real < LEFT_TAIL_RE:
                root, sb = _tier_b_descend(poly, zi, cap, tierb_prec)
                steps_b += sb
                if root is not None:
                    refined[int(i)] = root
    for i in np.flatnonzero(state == _TO_B):
        root, sb = _tier_b_descend(poly, complex(z[i]), cap, tierb_prec)
        refined[int(i)] = root
        steps_b += sb
    head, tail = [], []
    n_seeds = len(z)
    for i in range(n_seeds):
        if state[i] == _CONV_A and i not in refined:
            # keep the extended-format scalar: the store encodes it exactly,
            # a complex() cast here would throw away the low significand bits
            root = z[i]
        else:
            root = refined.get(i)
        if root is None:
            hist[OutcomeKind.DIVERGENT] += 1
            continue
        kind = _classify(root, store, tables, band, band_eps)
        if kind in (OutcomeKind.CONVERGED, OutcomeKind.OVERLAP_NEIGHBOR):
            # band hits are classification only; the root still lands in the
            # private set so a chunk's file never depends on neighbor state
            if store.insert(root) is not InsertOutcome.ADDED:
                kind = OutcomeKind.REPEAT     # separation-square collision
        hist[kind] += 1
        if boundary and kind in (OutcomeKind.CONVERGED, OutcomeKind.REPEAT):
            if i < boundary:
                head.append(complex(root))
            elif i >= n_seeds - boundary:
                tail.append(complex(root))
    return int(steps.sum()), steps_b, head, tail


def _fresh_hist():
    return {kind: 0 for kind in OutcomeKind}


# ---------------------------------------------------------------------------
# quick pipeline

def split_quick(poly, *, points_per_root=4, points_per_turn=8,
                separation=SEP_QUICK, extra_passes=2, tables=None,
                tierb_prec=PUBLISH_PREC, step_cap_override=None,
                level=None, exception_region=True):
    """Split poly in hardware arithmetic: (locked RootSet, SplitReport).

    Finds exactly the new parameters or raises IncompleteSplit.  Descents
    start from every stored line point (four per root); if parameters are
    missing after the first sweep, up to extra_passes line doublings sweep
    the fresh midpoints.
    """
    if poly.degree > 1 << 32:
        raise ValueError("hardware pipeline is limited to degree 2^32")
    expected = new_parameter_count(poly.family, poly.l, poly.n)
    if tables is None:
        tables = divisor_tables(poly)
    store = RootSet(separation=separation, family=_CODE[poly.family],
                    l=poly.l, n=poly.n, snap_real=True)
    hist = _fresh_hist()
    cap = step_cap_override if step_cap_override is not None else step_cap(poly)
    full_order = points_per_root * poly.degree
    with count_newton_steps() as tally:
        line = _full_line(poly, points_per_root, points_per_turn,
                          order_cap=min(COARSE_ORDER, full_order),
                          level=level)
        while line.order < full_order:
            line = refine_level_line(line, 2)
    line_steps = tally["steps"]
    steps_a = steps_b = n_descents = 0
    passes = 0
    for p in range(extra_passes + 1):
        if p == 0:
            seeds = line.zs
        else:
            with count_newton_steps() as tally:
                line = refine_level_line(line, 2)
            line_steps += tally["steps"]
            seeds = line.zs[1::2]           # fresh midpoints only
        passes = p + 1
        for lo in range(0, len(seeds), QUICK_BLOCK):
            block = seeds[lo:lo + QUICK_BLOCK]
            sa, sb, _, _ = _descend_block(
                poly, block, cap, tables, store, hist,
                certified=False, tierb_prec=tierb_prec,
                left_tail=exception_region)
            steps_a += sa
            steps_b += sb
            n_descents += len(block)
        if store.full_plane_count() >= expected:
            break
    found = store.full_plane_count()
    if found > expected:
        raise SplitError(f"{poly!r}: {found} new parameters exceed the "
                         f"expected {expected}")
    if found < expected:
        raise IncompleteSplit(poly, found, expected)
    store.lock()
    report = SplitReport(
        poly=poly, roots_found=found, expected=expected,
        line_steps=line_steps, descent_steps_tier_a=steps_a,
        descent_steps_tier_b=steps_b, descents=n_descents, passes=passes,
        chunks=1, outcome_histogram=hist)
    return store, report


# ---------------------------------------------------------------------------
# certified pipeline

def _chunk_path(out_dir, j):
    return Path(out_dir) / f"chunk_{j:04d}.nset"


def _load_chunk(path, poly, eps_q):
    """Chunk set from a previous run, or None when it must be recomputed."""
    if not path.is_file():
        return None
    try:
        got = read_file(path)
    except Exception:
        return None
    if (got.eps_q != eps_q or got.family != _CODE[poly.family]
            or got.l != poly.l or got.n != poly.n):
        return None
    got.snap_real = True       # file meta carries no snap flag; restore ours
    got.lock()
    return got


def _run_chunk(poly, line, lo, hi, factor, cap, tables, separation, *,
               tierb_prec, band, band_eps):
    """Compute one chunk: refine the private arc, descend, build its set."""
    with count_newton_steps() as tally:
        if factor > 1:
            _, seeds = refine_arc(poly, line.level, line.order,
                                  line.points_per_turn, line.ks[lo:hi],
                                  line.zs[lo:hi], factor)
        else:
            seeds = line.zs[lo:hi]
    store = RootSet(separation=separation, family=_CODE[poly.family],
                    l=poly.l, n=poly.n, snap_real=True)
    hist = _fresh_hist()
    sa, sb, head, tail = _descend_block(
        poly, seeds, cap, tables, store, hist, certified=True,
        tierb_prec=tierb_prec, band=band, band_eps=band_eps,
        boundary=factor)
    store.lock()
    report = SplitReport(
        poly=poly, roots_found=store.full_plane_count(), expected=0,
        line_steps=tally["steps"], descent_steps_tier_a=sa,
        descent_steps_tier_b=sb, descents=len(seeds), passes=1, chunks=1,
        outcome_histogram=hist)
    return store, report, head, tail


def split_certified(poly, chunks=None, *, points_per_root=4,
                    points_per_turn=8, separation=None,
                    tierb_prec=PUBLISH_PREC, prove=True,
                    prove_radius=DEFAULT_EPS_R, prove_prec=DEFAULT_PREC,
                    chunk_points=CHUNK_POINTS, coarse_order=COARSE_ORDER,
                    out_dir=None, workers=None, tables=None, extra_passes=2,
                    level=None):
    """Split poly with software-tier roots, chunked and certified.

    A shared coarse line seeds `chunks` jobs (sized by chunk_points when not
    given); each refines its own arc, descends, and keeps a private set.
    Sequential jobs hand their boundary roots to the successor, which tags
    cross-boundary rediscoveries in its histogram; content never depends on
    the band, so a chunk file is a pure function of its own seeds and the
    deduplicating merge stays authoritative.  Every merged root must pass
    the existence proof, then the count must match the formula exactly.
    With out_dir set, finished chunks persist as .nset files and are reused
    by a rerun.
    """
    expected = new_parameter_count(poly.family, poly.l, poly.n)
    if separation is None:
        separation = (SEPARATION_HYP if poly.family == "hyp"
                      else SEPARATION_MIS)
    if tables is None:
        tables = divisor_tables(poly)
    cap = step_cap(poly)
    full_order = points_per_root * poly.degree
    with count_newton_steps() as tally:
        line = _full_line(poly, points_per_root, points_per_turn,
                          order_cap=min(coarse_order, full_order),
                          level=level)
    coarse_steps = tally["steps"]
    factor = full_order // line.order
    n_chunks = chunks if chunks else max(1, math.ceil(full_order / chunk_points))
    n_chunks = max(1, min(n_chunks, line.order))
    bounds = [(j * line.order) // n_chunks for j in range(n_chunks + 1)]
    band_eps = BAND_FACTOR * separation
    sequential = workers is None or workers <= 1
    eps_q = RootSet(separation=separation).eps_q

    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)

    def run_one(j, band):
        last = None
        for _ in range(2):                  # one retry per chunk
            try:
                return _run_chunk(poly, line, bounds[j], bounds[j + 1],
                                  factor, cap, tables, separation,
                                  tierb_prec=tierb_prec, band=band,
                                  band_eps=band_eps)
            except Exception as exc:        # noqa: BLE001 - recycled below
                last = exc
        raise ChunkFailure(j, str(last)) from last

    results = [None] * n_chunks
    fresh = []
    for j in range(n_chunks):
        if out_dir is not None:
            got = _load_chunk(_chunk_path(out_dir, j), poly, eps_q)
            if got is not None:
                # resumed chunks cost nothing now; their report says so
                results[j] = (got, SplitReport(
                    poly=poly, roots_found=got.full_plane_count(),
                    descents=0, passes=1, chunks=1,
                    outcome_histogram=_fresh_hist()), [], [])
                continue
        fresh.append(j)
    if sequential:
        tail_band = ()
        for j in range(n_chunks):
            if results[j] is None:
                results[j] = run_one(j, tail_band)
            tail_band = results[j][3]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = {j: pool.submit(run_one, j, ()) for j in fresh}
            for j, fut in futs.items():
                results[j] = fut.result()
    if out_dir is not None:
        for j in fresh:
            write_file(results[j][0], _chunk_path(out_dir, j))

    chunk_sets = [r[0] for r in results]
    chunk_reps = [r[1] for r in results]
    chunk_reps[0].line_steps += coarse_steps
    merged = merge_sets(*chunk_sets)

    # rescue passes, normally never needed: each arc doubles its density and
    # the fresh midpoints descend against the merged set
    passes = 1
    while merged.full_plane_count() < expected and passes <= extra_passes:
        passes += 1
        for j in range(n_chunks):
            with count_newton_steps() as tally:
                _, dense = refine_arc(
                    poly, line.level, line.order, line.points_per_turn,
                    line.ks[bounds[j]:bounds[j + 1]],
                    line.zs[bounds[j]:bounds[j + 1]],
                    factor * 2 ** (passes - 1))
            rep = chunk_reps[j]
            rep.line_steps += tally["steps"]
            seeds = dense[1::2]
            sa, sb, _, _ = _descend_block(
                poly, seeds, cap, tables, merged, rep.outcome_histogram,
                certified=True, tierb_prec=tierb_prec)
            rep.descent_steps_tier_a += sa
            rep.descent_steps_tier_b += sb
            rep.descents += len(seeds)
            rep.passes = passes

    dropped = 0
    if prove:
        kept = []
        for rec in merged.iter_records():
            z = decode_u128(rec)
            if prove_root(poly, z, prove_radius, prove_prec):
                kept.append(rec)
            else:
                dropped += 1
        if dropped:
            final = RootSet(separation_quanta=merged.eps_q, **merged._meta())
            for rec in kept:
                final.insert(rec)
        else:
            final = merged
    else:
        final = merged
    final.lock()

    found = final.full_plane_count()
    if found > expected:
        raise SplitError(f"{poly!r}: {found} new parameters exceed the "
                         f"expected {expected}")
    report = SplitReport(poly=poly, roots_found=found, expected=expected,
                         passes=passes, chunks=n_chunks,
                         chunk_reports=tuple(chunk_reps),
                         outcome_histogram=_fresh_hist())
    for rep in chunk_reps:
        report.line_steps += rep.line_steps
        report.descent_steps_tier_a += rep.descent_steps_tier_a
        report.descent_steps_tier_b += rep.descent_steps_tier_b
        report.descents += rep.descents
        for k, v in rep.outcome_histogram.items():
            report.outcome_histogram[k] += v
    if found < expected:
        raise IncompleteSplit(poly, found, expected)
    return final, report
