"""Separation-preserving root containers, fixed-point codec, and file formats.

Points live on a 126-fractional-bit fixed-point lattice over the rectangle
Re in [-2, 2), Im in [0, 4): z = (-2 + p*2^-126) + i*q*2^-126 with p, q
unsigned 128-bit integers.  Only the closed upper half-plane is stored;
conjugates are virtual.  The minimum separation eps is itself kept as a
quantum count, so every collision test below is exact integer arithmetic.

Separation contract: any two distinct stored points z1, z2, and any stored
point against any conjugate, satisfy max(|Re dz|, |Im dz|) >= eps.  Insertion
enforces it with a strict square test (max-norm < eps means same point); a
new point too close to its own conjugate (0 < 2 Im z <= eps) is the real-axis
exception, reported to the caller, who may snap to the axis or reject.

A set is a sequence of sorted bars with geometrically growing capacities
(smallest bar 1024 records by default); inserts go to the smallest bar and
full bars merge upward, so N inserts cost O(N log N) total merge work.
Locking merges everything into one bar: O(log N) search, ordered iteration.

Binary file layout (little-endian, offsets in bytes):

    0   magic   b"NSET"
    4   version u8 (= 1)
    5   algo    u8 (= 0, MD5)
    6   family  u8 (0 hyp, 1 mis, 2 mis-simple, 255 none)
    7   reserved u8 (= 0)
    8   l       u32
    12  n       u32
    16  separation u128 (quantum count)
    32  count   u64
    40  digest  16 bytes, MD5 of the payload
    56  payload count * 32 bytes: p u128, q u128 per record

CSV interop writes "re,im" rows in plain decimal with 40 fractional digits,
no exponent notation; that is within half a lattice quantum (2^-127), so
export -> import reproduces records exactly.
"""

import bisect
import hashlib
import heapq
import math
from enum import Enum

import numpy as np
import gmpy2

QUANTUM_BITS = 126
QUANTUM = 2.0 ** -126
_TWO = 2 << QUANTUM_BITS          # representation of Re = 0
_LIMIT = 1 << 128
_CSV_DIGITS = 40
_CSV_SCALE = 10 ** _CSV_DIGITS

FAMILY_HYP = 0
FAMILY_MIS = 1
FAMILY_MIS_SIMPLE = 2
FAMILY_NONE = 255

# default separations for published sets, per family
SEPARATION_HYP = 3.23e-27
SEPARATION_MIS = 8.08e-28

_MAGIC = b"NSET"
_VERSION = 1
_ALGO_MD5 = 0
_HEADER_LEN = 56
_RECORD_LEN = 32


class RootStoreError(Exception):
    pass


class LockedSetError(RootStoreError):
    pass


class OutOfDomainError(RootStoreError, ValueError):
    pass


class DigestMismatchError(RootStoreError):
    pass


class FormatError(RootStoreError):
    pass


class ParseError(RootStoreError):
    pass


class InsertOutcome(Enum):
    ADDED = "added"
    DUPLICATE = "duplicate"
    REAL_AXIS = "real-axis"


def _exact_mpq(x):
    # numpy scalars would widen through __float__ and lose extended-format
    # bits; frexp keeps the full significand (64 bits on x87 long double)
    if isinstance(x, np.floating):
        m, e = np.frexp(x)
        mi = int(np.ldexp(m, 64))
        k = int(e) - 64
        return gmpy2.mpq(mi * (1 << k)) if k >= 0 else gmpy2.mpq(mi, 1 << -k)
    return gmpy2.mpq(x)


def _quanta(x) -> int:
    """Nearest lattice count of a real value, exactly (half away from zero)."""
    r = _exact_mpq(x) * (1 << QUANTUM_BITS)
    n, d = r.numerator, r.denominator
    if n >= 0:
        return int((2 * n + d) // (2 * d))
    return -int((2 * -n + d) // (2 * d))


def encode_u128(z) -> tuple:
    """(p, q) record of a complex value; round-to-nearest on both axes."""
    if isinstance(z, (gmpy2.mpc,)):
        re, im = z.real, z.imag
    elif isinstance(z, np.complexfloating):
        re, im = z.real, z.imag
    else:
        zc = complex(z) if not isinstance(z, (tuple, list)) else None
        if zc is not None:
            re, im = zc.real, zc.imag
        else:
            re, im = z
    p = _quanta(re) + _TWO
    q = _quanta(im)
    # the domain test runs on the published lattice value, so an imaginary
    # part within half a quantum below the axis still publishes as real
    if q < 0:
        raise OutOfDomainError(f"lower half-plane value {z!r}")
    if not (0 <= p < _LIMIT) or not (q < _LIMIT):
        raise OutOfDomainError(f"value {z!r} outside [-2,2) x [0,4)")
    return p, q


def decode_u128(rec, prec=160):
    """Exact complex value of a record (160 bits hold 128-bit counts)."""
    p, q = rec
    cx = gmpy2.context(precision=prec)
    re = cx.mul_2exp(cx.sub(gmpy2.mpfr(p, prec), gmpy2.mpfr(_TWO, prec)),
                     -QUANTUM_BITS)
    im = cx.mul_2exp(gmpy2.mpfr(q, prec), -QUANTUM_BITS)
    return gmpy2.mpc(re, im, precision=prec)


def decode_complex(rec) -> complex:
    p, q = rec
    return complex((p - _TWO) * QUANTUM, q * QUANTUM)


def _merge_sorted(a, b):
    out = []
    i = j = 0
    la, lb = len(a), len(b)
    while i < la and j < lb:
        if a[i] <= b[j]:
            out.append(a[i]); i += 1
        else:
            out.append(b[j]); j += 1
    out.extend(a[i:] or b[j:])
    return out


class RootSet:
    """Ordered set of upper-half-plane lattice points with minimum separation.

    separation may be a real number (converted to the nearest quantum count,
    at least 1) or an exact quantum count via separation_quanta.
    """

    def __init__(self, separation=None, family=FAMILY_NONE, l=0, n=0,
                 snap_real=False, base_capacity=1024, separation_quanta=None):
        if separation_quanta is not None:
            eq = int(separation_quanta)
        elif separation is not None:
            eq = _quanta(separation)
        else:
            raise ValueError("separation required")
        if eq < 1:
            eq = 1
        self.eps_q = eq
        self.family = family
        self.l = l
        self.n = n
        self.snap_real = snap_real
        self.base_capacity = base_capacity
        self.locked = False
        self.bars = [[]]
        self.count = 0
        self.merge_work = 0
        self.real_axis_count = 0

    @property
    def separation(self) -> float:
        return self.eps_q * QUANTUM

    # -- search ------------------------------------------------------------

    def _find(self, p, q):
        """Record whose separation square contains (p, q), else None."""
        eq = self.eps_q
        lo_key = (p - eq + 1, -1)
        hi_key = (p + eq, -1)
        for bar in self.bars:
            if not bar:
                continue
            i = bisect.bisect_left(bar, lo_key)
            j = bisect.bisect_left(bar, hi_key, i)
            for rec in bar[i:j]:
                dq = rec[1] - q
                # conjugate proximity (rec[1] + q < eq) implies |dq| < eq
                # for q >= 0, so the point test alone decides
                if -eq < dq < eq:
                    return rec
        return None

    def search(self, z):
        """Stored record matching z under same-point semantics, or None."""
        p, q = encode_u128(z) if not isinstance(z, tuple) else z
        return self._find(p, q)

    # -- insertion ---------------------------------------------------------

    def _place(self, rec):
        buf = self.bars[0]
        bisect.insort(buf, rec)
        if len(buf) < self.base_capacity:
            return
        merged = buf
        self.bars[0] = []
        j = 1
        while True:
            if j == len(self.bars):
                self.bars.append([])
            if not self.bars[j]:
                self.bars[j] = merged
                break
            merged = _merge_sorted(self.bars[j], merged)
            self.merge_work += len(merged)
            self.bars[j] = []
            j += 1

    def insert(self, z) -> InsertOutcome:
        if self.locked:
            raise LockedSetError("set is locked")
        p, q = encode_u128(z) if not isinstance(z, tuple) else z
        if not (0 <= p < _LIMIT and 0 <= q < _LIMIT):
            raise OutOfDomainError(f"record {(p, q)} out of range")
        if self._find(p, q) is not None:
            return InsertOutcome.DUPLICATE
        if 0 < 2 * q <= self.eps_q:
            self.real_axis_count += 1
            if not self.snap_real:
                return InsertOutcome.REAL_AXIS
            q = 0
            if self._find(p, q) is not None:
                return InsertOutcome.DUPLICATE
        self._place((p, q))
        self.count += 1
        return InsertOutcome.ADDED

    # -- locking and iteration ----------------------------------------------

    def lock(self):
        if not self.locked:
            merged = []
            for bar in self.bars:
                if bar:
                    merged = _merge_sorted(merged, bar) if merged else list(bar)
            self.bars = [merged]
            self.locked = True
        return self

    def iter_records(self):
        """Records in increasing (p, q) order, locked or not."""
        if self.locked:
            return iter(self.bars[0])
        return heapq.merge(*[bar for bar in self.bars if bar])

    def __iter__(self):
        return self.iter_records()

    def iter_complex(self):
        for rec in self.iter_records():
            yield decode_complex(rec)

    def __len__(self):
        return self.count

    def full_plane_count(self) -> int:
        """Count with virtual conjugates: reals once, others twice."""
        strict = sum(1 for _, q in self.iter_records() if q > 0)
        return self.count + strict

    def _meta(self):
        return dict(family=self.family, l=self.l, n=self.n,
                    snap_real=self.snap_real, base_capacity=self.base_capacity)


def merge_sets(*sets) -> RootSet:
    """Deduplicating union; earlier inputs win collisions (insertion order)."""
    if not sets:
        raise ValueError("need at least one set")
    eq = sets[0].eps_q
    for s in sets[1:]:
        if s.eps_q != eq:
            raise ValueError("separations differ")
    first = sets[0]
    out = RootSet(separation_quanta=eq, **first._meta())
    for s in sets:
        for rec in s.iter_records():
            out.insert(rec)
    return out


# ---------------------------------------------------------------------------
# binary files

def write_file(s: RootSet, path):
    if not s.locked:
        raise LockedSetError("lock before writing")
    payload = bytearray()
    for p, q in s.iter_records():
        payload += p.to_bytes(16, "little")
        payload += q.to_bytes(16, "little")
    digest = hashlib.md5(bytes(payload)).digest()
    head = bytearray()
    head += _MAGIC
    head += bytes([_VERSION, _ALGO_MD5, s.family & 0xFF, 0])
    head += int(s.l).to_bytes(4, "little")
    head += int(s.n).to_bytes(4, "little")
    head += int(s.eps_q).to_bytes(16, "little")
    head += int(s.count).to_bytes(8, "little")
    head += digest
    with open(path, "wb") as fh:
        fh.write(bytes(head))
        fh.write(bytes(payload))


def read_file(path) -> RootSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER_LEN:
        raise FormatError("truncated header")
    if blob[:4] != _MAGIC:
        raise FormatError("bad magic")
    version, algo, family = blob[4], blob[5], blob[6]
    if version != _VERSION:
        raise FormatError(f"unsupported version {version}")
    if algo != _ALGO_MD5:
        raise FormatError(f"unknown digest algorithm {algo}")
    l = int.from_bytes(blob[8:12], "little")
    n = int.from_bytes(blob[12:16], "little")
    eps_q = int.from_bytes(blob[16:32], "little")
    count = int.from_bytes(blob[32:40], "little")
    digest = blob[40:56]
    payload = blob[_HEADER_LEN:]
    if len(payload) != count * _RECORD_LEN:
        raise FormatError("payload length does not match count")
    if hashlib.md5(payload).digest() != digest:
        raise DigestMismatchError("payload digest mismatch")
    recs = []
    for k in range(count):
        off = k * _RECORD_LEN
        p = int.from_bytes(payload[off:off + 16], "little")
        q = int.from_bytes(payload[off + 16:off + 32], "little")
        recs.append((p, q))
    out = RootSet(separation_quanta=eps_q, family=family, l=l, n=n)
    out.bars = [recs]
    out.count = count
    out.locked = True
    return out


# ---------------------------------------------------------------------------
# analytics (locked sets)

def _mirrored(s: RootSet):
    """(p, signed q) full-plane points, p-sorted."""
    pts = []
    for p, q in s.iter_records():
        pts.append((p, q))
        if q > 0:
            pts.append((p, -q))
    pts.sort()
    return pts


def _closest_pair(pts):
    """Exact nearest pair over p-sorted integer points: sweep with pruning."""
    best = None
    best_pair = None
    m = len(pts)
    for i in range(m):
        pi, qi = pts[i]
        for j in range(i + 1, m):
            dp = pts[j][0] - pi
            dp2 = dp * dp
            if best is not None and dp2 >= best:
                break
            dq = pts[j][1] - qi
            d2 = dp2 + dq * dq
            if best is None or d2 < best:
                best = d2
                best_pair = (pts[i], pts[j])
    return best, best_pair


def min_distance(s: RootSet):
    """Exact nearest distance over the set and its conjugate image.

    Returns (distance, (z1, z2)); needs at least two full-plane points.
    """
    pts = _mirrored(s)
    if len(pts) < 2:
        raise ValueError("need at least 2 full-plane points")
    d2, pair = _closest_pair(pts)
    dist = math.sqrt(float(d2)) * QUANTUM
    z1 = complex((pair[0][0] - _TWO) * QUANTUM, pair[0][1] * QUANTUM)
    z2 = complex((pair[1][0] - _TWO) * QUANTUM, pair[1][1] * QUANTUM)
    return dist, (z1, z2)


def histogram_by_band(s: RootSet, bands):
    """Per-band counts and minimum distances for the geometric strips
    band k: Re in (-2 + 4^-(k+1), -2 + 4^-k], counted with conjugates.

    Returns a list of dicts (band, lo, hi, count, min_distance); a final row
    with band None collects points outside every strip.
    """
    edges = [(k, -2 + 4.0 ** -(k + 1), -2 + 4.0 ** -k) for k in range(bands)]
    buckets = {k: [] for k in range(bands)}
    rest = []
    for p, q in s.iter_records():
        re = (p - _TWO) * QUANTUM
        for k, lo, hi in edges:
            if lo < re <= hi:
                buckets[k].append((p, q))
                break
        else:
            rest.append((p, q))
    rows = []
    for k, lo, hi in edges:
        recs = buckets[k]
        pts = []
        for p, q in recs:
            pts.append((p, q))
            if q > 0:
                pts.append((p, -q))
        pts.sort()
        dmin = None
        if len(pts) >= 2:
            d2, _ = _closest_pair(pts)
            dmin = math.sqrt(float(d2)) * QUANTUM
        rows.append(dict(band=k, lo=lo, hi=hi, count=len(pts),
                         min_distance=dmin))
    rows.append(dict(band=None, lo=None, hi=None,
                     count=sum(1 for _ in rest) +
                     sum(1 for _, q in rest if q > 0),
                     min_distance=None))
    return rows


def density_map(s: RootSet, grid=256):
    """Integer hit counts of full-plane points on a grid over [-2,2]^2."""
    res = []
    ims = []
    for p, q in s.iter_records():
        re = (p - _TWO) * QUANTUM
        im = q * QUANTUM
        res.append(re); ims.append(im)
        if q > 0:
            res.append(re); ims.append(-im)
    if not res:
        return np.zeros((grid, grid), dtype=np.int64)
    h, _, _ = np.histogram2d(ims, res, bins=grid, range=[[-2, 2], [-2, 2]])
    return h.astype(np.int64)[::-1]          # row 0 = top of the picture


def write_pgm(matrix, path):
    """Plain (P2) graymap, log-scaled to 0..255."""
    m = np.asarray(matrix, dtype=np.float64)
    top = np.log1p(m.max())
    pix = np.zeros_like(m, dtype=np.int64) if top == 0 else \
        np.rint(255 * np.log1p(m) / top).astype(np.int64)
    hgt, wid = pix.shape
    with open(path, "w") as fh:
        fh.write(f"P2\n{wid} {hgt}\n255\n")
        for row in pix:
            fh.write(" ".join(str(v) for v in row) + "\n")


def write_count_matrix(matrix, path):
    np.savetxt(path, np.asarray(matrix, dtype=np.int64), fmt="%d")


# ---------------------------------------------------------------------------
# CSV interop

def _dec40_of_quanta(x: int) -> str:
    """Exact-to-half-quantum decimal of x * 2^-126, 40 fractional digits."""
    sign = "-" if x < 0 else ""
    m = -x if x < 0 else x
    ip, fr = m >> QUANTUM_BITS, m & ((1 << QUANTUM_BITS) - 1)
    fd = (fr * _CSV_SCALE + (1 << (QUANTUM_BITS - 1))) >> QUANTUM_BITS
    if fd >= _CSV_SCALE:
        ip += 1
        fd -= _CSV_SCALE
    return f"{sign}{ip}.{fd:0{_CSV_DIGITS}d}"


def _quanta_of_dec(txt: str) -> int:
    txt = txt.strip()
    if not txt:
        raise ParseError("empty field")
    sign = 1
    if txt[0] in "+-":
        sign = -1 if txt[0] == "-" else 1
        txt = txt[1:]
    ip, _, fr = txt.partition(".")
    if not (ip or fr) or not (ip or "0").isdigit() or (fr and not fr.isdigit()):
        raise ParseError(f"bad decimal {txt!r}")
    scale = 10 ** len(fr)
    v = int(ip or "0") * scale + int(fr or "0")
    half_up = (2 * (v << QUANTUM_BITS) + scale) // (2 * scale)
    return sign * half_up


def export_csv(s: RootSet, path):
    with open(path, "w") as fh:
        for p, q in s.iter_records():
            fh.write(f"{_dec40_of_quanta(p - _TWO)},{_dec40_of_quanta(q)}\n")


def import_csv(path, separation=None, separation_quanta=None,
               family=FAMILY_NONE, l=0, n=0) -> RootSet:
    out = RootSet(separation=separation, separation_quanta=separation_quanta,
                  family=family, l=l, n=n)
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: expected re,im")
            re_q = _quanta_of_dec(parts[0]) + _TWO
            im_q = _quanta_of_dec(parts[1])
            if im_q < 0:
                raise OutOfDomainError(f"line {lineno}: lower half-plane")
            if out.insert((re_q, im_q)) is not InsertOutcome.ADDED:
                raise ParseError(f"line {lineno}: separation conflict")
    return out


def _csv_rows(path):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"{path}: line {lineno}: expected re,im")
            pair = []
            for fld in parts:
                fld = fld.strip()
                neg = fld.startswith("-")
                if neg or fld.startswith("+"):
                    fld = fld[1:]
                ip, _, fr = fld.partition(".")
                if not (ip or "0").isdigit() or (fr and not fr.isdigit()):
                    raise ParseError(f"{path}: line {lineno}: bad decimal")
                fr = (fr + "0" * _CSV_DIGITS)[:_CSV_DIGITS]
                v = int(ip or "0") * _CSV_SCALE + int(fr)
                pair.append(-v if neg else v)
            rows.append(tuple(pair))
    return rows


def compare_csv(path_a, path_b) -> float:
    """Largest per-component deviation between two equally long CSV files."""
    ra, rb = _csv_rows(path_a), _csv_rows(path_b)
    if len(ra) != len(rb):
        raise ParseError(f"row count mismatch: {len(ra)} vs {len(rb)}")
    worst = 0
    for (a1, a2), (b1, b2) in zip(ra, rb):
        worst = max(worst, abs(a1 - b1), abs(a2 - b2))
    return worst / _CSV_SCALE


# ---------------------------------------------------------------------------
# planar variant: hardware complex points, no domain restriction

class PlanarSet:
    """Separation-preserving set of hardware complex points.

    Same bar structure and square-equality notion as RootSet, but points are
    raw floats anywhere in the plane and conjugates play no role.
    """

    def __init__(self, separation: float, base_capacity=1024):
        if not (separation > 0):
            raise ValueError("separation must be positive")
        self.eps = float(separation)
        self.base_capacity = base_capacity
        self.locked = False
        self.bars = [[]]
        self.count = 0
        self.merge_work = 0

    def _find(self, re, im):
        eps = self.eps
        for bar in self.bars:
            if not bar:
                continue
            i = bisect.bisect_left(bar, (re - eps, -math.inf))
            j = bisect.bisect_left(bar, (re + eps, -math.inf), i)
            for rr, ri in bar[i:j]:
                if abs(rr - re) < eps and abs(ri - im) < eps:
                    return (rr, ri)
        return None

    def search(self, z):
        z = complex(z)
        hit = self._find(z.real, z.imag)
        return None if hit is None else complex(*hit)

    def insert(self, z) -> InsertOutcome:
        if self.locked:
            raise LockedSetError("set is locked")
        z = complex(z)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise OutOfDomainError("non-finite point")
        if self._find(z.real, z.imag) is not None:
            return InsertOutcome.DUPLICATE
        buf = self.bars[0]
        bisect.insort(buf, (z.real, z.imag))
        self.count += 1
        if len(buf) >= self.base_capacity:
            merged = buf
            self.bars[0] = []
            j = 1
            while True:
                if j == len(self.bars):
                    self.bars.append([])
                if not self.bars[j]:
                    self.bars[j] = merged
                    break
                merged = _merge_sorted(self.bars[j], merged)
                self.merge_work += len(merged)
                self.bars[j] = []
                j += 1
        return InsertOutcome.ADDED

    def lock(self):
        if not self.locked:
            merged = []
            for bar in self.bars:
                if bar:
                    merged = _merge_sorted(merged, bar) if merged else list(bar)
            self.bars = [merged]
            self.locked = True
        return self

    def iter_records(self):
        if self.locked:
            return iter(self.bars[0])
        return heapq.merge(*[bar for bar in self.bars if bar])

    def __iter__(self):
        for re, im in self.iter_records():
            yield complex(re, im)

    def __len__(self):
        return self.count


def export_csv_planar(s: PlanarSet, path, values=None):
    """CSV rows for a PlanarSet (or any iterable of values when given).

    Components are printed in plain positional decimal with 40 fractional
    digits, which round-trips binary64 and x87 extended values at the
    magnitudes this library produces.
    """
    seq = values if values is not None else iter(s)
    with open(path, "w") as fh:
        for z in seq:
            re, im = _pos40(np.real(z)), _pos40(np.imag(z))
            fh.write(f"{re},{im}\n")


def _pos40(x) -> str:
    return np.format_float_positional(
        x, precision=_CSV_DIGITS, unique=False, fractional=True, trim="k")
