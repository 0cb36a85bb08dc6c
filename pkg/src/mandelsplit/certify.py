"""Computer-assisted existence and basin proofs for published roots.

Both proofs rest on one primitive: run the (value, derivative) orbit
recurrence entirely in directed-rounding disk arithmetic, feeding the
parameter in as a disk.  With a point input the value disk bounds |P(z0)|
from above; with input D(z0, R) the derivative disk B' encloses P'(D).

    prove_root:          R * dist(0, B') > |P(z0)|   (one simple root in D)
    prove_newton_basin:  dist(0, B') > 2 diam(B')    (D inside that root's
                                                      Newton basin)

Every comparison uses outward-rounded quantities, so a True return is a
proof, not an estimate.  Pre-periodic families are certified against the
summed orbit form (where their roots are simple), never the raw
difference form whose divisor roots are multiple.

When B' straddles zero the inequality can never verify.  A second pass at
doubled precision decides whether that is a precision artifact (enclosure
radius collapses, so more bits could settle it: PrecisionInsufficient) or
a stable feature of the derivative image (verdict False).
"""

from dataclasses import dataclass, field

import gmpy2

from .combinatorics import new_parameter_count
from .diskarith import ComplexDisk, disk_add, disk_mul, disk_scale
from .mandelpoly import PolyId
from .precision import ctx_down, ctx_up
from .rootstore import (
    FAMILY_HYP,
    FAMILY_MIS,
    FAMILY_MIS_SIMPLE,
    RootSet,
    decode_u128,
    min_distance,
)

_FAMILY_OF_CODE = {FAMILY_HYP: "hyp", FAMILY_MIS: "mis",
                   FAMILY_MIS_SIMPLE: "mis-simple"}

DEFAULT_PREC = 128
DEFAULT_EPS_R = 1e-20
DEFAULT_EPS_N = 1e-16


class PrecisionInsufficient(ArithmeticError):
    pass


class PreconditionViolated(ValueError):
    pass


@dataclass
class CertRecord:
    root: complex
    eps_R: float
    eps_N: float
    proof_ok: bool
    basin_ok: bool


def _source_prec(z):
    if isinstance(z, (gmpy2.mpc, gmpy2.mpfr)):
        p = z.precision
        return max(p) if isinstance(p, tuple) else p
    return 53


def _disk_orbit(poly, c_disk, prec):
    """Run the defining orbit of poly over the parameter disk c_disk.

    Returns enclosures of (P(c), P'(c)) over the disk, built exclusively
    from the sound disk operations.
    """
    one = ComplexDisk.make(1, 0, prec)
    v = ComplexDisk.make(0, 0, prec)
    w = ComplexDisk.make(0, 0, prec)
    if poly.family == "hyp":
        snaps = {}
        steps = poly.n
    else:
        # summed orbit form: value/derivative sampled at l-1 and l+n-1
        snaps = {poly.l - 1: None, poly.l + poly.n - 1: None}
        steps = poly.l + poly.n - 1
    for k in range(steps):
        if k in snaps:
            snaps[k] = (v, w)
        w = disk_add(disk_scale(2.0, 0, disk_mul(v, w)), one)
        v = disk_add(disk_mul(v, v), c_disk)
    if poly.family == "hyp":
        return v, w
    va, wa = snaps[poly.l - 1] if poly.l - 1 in snaps else (None, None)
    return disk_add(v, va), disk_add(w, wa)


def _derivative_enclosures(poly, z0, radius, prec):
    """B' radii over two precisions, stopping early once 0 is excluded.

    Yields (prec_used, deriv_disk, dist_lower) for up to two attempts.
    """
    p_in = max(prec, _source_prec(z0))
    for p in (p_in, 2 * p_in):
        disk = ComplexDisk.make(z0, radius, p)
        _, bprime = _disk_orbit(poly, disk, p)
        yield p, bprime, bprime.abs_lower()


def _stable_containment(first, second):
    """0 in B' at both precisions: genuine unless the radius is still
    collapsing (then more bits could decide, so report insufficiency)."""
    r1, r2 = first.radius, second.radius
    if not (gmpy2.is_finite(r1) and gmpy2.is_finite(r2)):
        return False
    return r2 > ctx_down(r2.precision).div_2exp(r1, 1)


def prove_root(poly, z0, R, prec=DEFAULT_PREC):
    """True iff exactly one simple root of P lies in D(z0, R)."""
    if not R > 0:
        raise ValueError("certification radius must be positive")
    if prec < 53:
        raise ValueError("tier-B precision is at least 53 bits")
    attempts = []
    for p, bprime, dist in _derivative_enclosures(poly, z0, R, prec):
        attempts.append(bprime)
        if not bprime.is_valid:
            continue
        if dist > 0:
            value, _ = _disk_orbit(poly, ComplexDisk.make(z0, 0, p), p)
            if not value.is_valid:
                continue
            f_up = value.abs_upper()
            rp = dist.precision
            r_lo = gmpy2.mpfr(R, rp, ctx_down(rp))
            lhs = ctx_down(rp).mul(r_lo, dist)
            return bool(lhs > f_up)
    if len(attempts) == 2 and attempts[0].is_valid and attempts[1].is_valid \
            and _stable_containment(attempts[0], attempts[1]):
        return False
    raise PrecisionInsufficient(
        f"derivative enclosure of {poly} over D({z0}, {R}) straddles 0 "
        f"at {prec} and {2 * prec} bits")


def prove_newton_basin(poly, z0, eps, eta, prec=DEFAULT_PREC):
    """True iff D(z0, eps) lies in the Newton basin of the root proven
    (separately, via prove_root) inside D(z0, eta)."""
    if not eps > 3 * eta:
        raise PreconditionViolated(f"need eps > 3*eta, got {eps} <= 3*{eta}")
    if prec < 53:
        raise ValueError("tier-B precision is at least 53 bits")
    attempts = []
    for _, bprime, dist in _derivative_enclosures(poly, z0, eps, prec):
        attempts.append(bprime)
        if not bprime.is_valid:
            continue
        if dist > 0:
            # diam = 2r exactly; require dist > 2 diam = 4r
            four_r = ctx_up(bprime.radius.precision).mul_2exp(bprime.radius, 2)
            return bool(dist > four_r)
    if len(attempts) == 2 and attempts[0].is_valid and attempts[1].is_valid \
            and _stable_containment(attempts[0], attempts[1]):
        return False
    raise PrecisionInsufficient(
        f"derivative enclosure of {poly} over D({z0}, {eps}) straddles 0 "
        f"at {prec} and {2 * prec} bits")


# ---------------------------------------------------------------------------
# set-level reconciliation

@dataclass
class ReconcileReport:
    poly: PolyId
    count: int
    expected: int
    ordered_ok: bool
    separation_ok: bool
    count_ok: bool
    proofs_ok: int = 0
    basins_ok: int = 0
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    eps_R: float = DEFAULT_EPS_R
    eps_N: float = DEFAULT_EPS_N
    prec: int = DEFAULT_PREC

    @property
    def passed(self):
        return (self.ordered_ok and self.separation_ok and self.count_ok
                and self.proofs_ok == self.count
                and self.basins_ok == self.count)

    def summary(self):
        lines = [
            f"reconcile {self.poly}: {'PASS' if self.passed else 'FAIL'}",
            f"  count {self.count} expected {self.expected} "
            f"({'ok' if self.count_ok else 'MISMATCH'})",
            f"  order {'ok' if self.ordered_ok else 'VIOLATED'}, "
            f"separation {'ok' if self.separation_ok else 'VIOLATED'}",
            f"  proofs {self.proofs_ok}/{self.count} roots, "
            f"{self.basins_ok}/{self.count} basins "
            f"(eps_R={self.eps_R:g}, eps_N={self.eps_N:g}, prec={self.prec})",
        ]
        lines.extend(f"  ! {f}" for f in self.failures[:20])
        if len(self.failures) > 20:
            lines.append(f"  ... {len(self.failures) - 20} more failures")
        return "\n".join(lines)

    def as_dict(self):
        return {
            "poly": str(self.poly),
            "count": self.count,
            "expected": self.expected,
            "ordered_ok": self.ordered_ok,
            "separation_ok": self.separation_ok,
            "count_ok": self.count_ok,
            "proofs_ok": self.proofs_ok,
            "basins_ok": self.basins_ok,
            "eps_R": self.eps_R,
            "eps_N": self.eps_N,
            "prec": self.prec,
            "passed": self.passed,
            "failures": list(self.failures),
        }


def _certify_one(poly, rec, eps_R, eps_N, prec):
    z = decode_u128(rec)
    try:
        ok_root = prove_root(poly, z, eps_R, prec=prec)
    except PrecisionInsufficient as exc:
        return CertRecord(complex(z), eps_R, eps_N, False, False), str(exc)
    if not ok_root:
        return (CertRecord(complex(z), eps_R, eps_N, False, False),
                f"no root proven in D({complex(z)}, {eps_R})")
    try:
        ok_basin = prove_newton_basin(poly, z, eps_N, eps_R, prec=prec)
    except PrecisionInsufficient as exc:
        return CertRecord(complex(z), eps_R, eps_N, True, False), str(exc)
    msg = None if ok_basin else \
        f"basin not proven at D({complex(z)}, {eps_N})"
    return CertRecord(complex(z), eps_R, eps_N, True, ok_basin), msg


def reconcile(root_set, eps_R=DEFAULT_EPS_R, eps_N=DEFAULT_EPS_N,
              prec=DEFAULT_PREC, workers=None, keep_records=False):
    """Full certification contract for a locked RootSet.

    Checks ordering, separation (conjugates included), exact expected
    count, and per-root existence plus basin proofs.  Failures are
    itemized in the report; nothing is repaired.
    """
    if not isinstance(root_set, RootSet):
        raise TypeError("reconcile needs a RootSet")
    family = _FAMILY_OF_CODE.get(root_set.family)
    if family is None:
        raise ValueError("set carries no family metadata to reconcile against")
    poly = PolyId(family, root_set.l, root_set.n)
    expected = new_parameter_count(poly.family, poly.l, poly.n)
    failures = []

    records = list(root_set.iter_records())
    ordered_ok = all(a < b for a, b in zip(records, records[1:]))
    if not ordered_ok:
        failures.append("records not in strictly increasing order")

    separation_ok = True
    if root_set.full_plane_count() >= 2:
        dist, pair = min_distance(root_set)
        if dist < root_set.separation * (1 - 1e-12):
            separation_ok = False
            failures.append(
                f"separation violated: {dist:g} < {root_set.separation:g} "
                f"between {pair[0]} and {pair[1]}")

    count = root_set.full_plane_count()
    count_ok = count == expected
    if not count_ok:
        failures.append(f"count mismatch: {count} != expected {expected}")

    report = ReconcileReport(poly, len(records), expected, ordered_ok,
                             separation_ok, count_ok, eps_R=eps_R,
                             eps_N=eps_N, prec=prec)

    def run(rec):
        return _certify_one(poly, rec, eps_R, eps_N, prec)

    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, records))
    else:
        results = [run(rec) for rec in records]

    for cert, msg in results:
        report.proofs_ok += cert.proof_ok
        report.basins_ok += cert.basin_ok
        if msg:
            failures.append(msg)
        if keep_records:
            report.records.append(cert)
    report.failures = failures
    return report
