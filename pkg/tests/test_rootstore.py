"""Root containers: codec, separation semantics, files, CSV, analytics."""

import math
import os

import gmpy2
import numpy as np
import pytest

from mandelsplit import rootstore as rs
from mandelsplit.rootstore import InsertOutcome, PlanarSet, RootSet


class TestCodec:
    def test_domain_corner(self):
        assert rs.encode_u128(-2 + 0j) == (0, 0)

    def test_origin(self):
        assert rs.encode_u128(0j) == (1 << 127, 0)

    def test_quantum_magnitude(self):
        assert 1.1e-38 < rs.QUANTUM < 1.3e-38

    def test_float64_inputs_round_trip_exactly(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            z = complex(rng.uniform(-2, 1.999), rng.uniform(0, 3.999))
            d = rs.decode_u128(rs.encode_u128(z))
            assert float(d.real) == z.real and float(d.imag) == z.imag

    def test_high_precision_within_half_quantum(self):
        rng = np.random.default_rng(1)
        half = gmpy2.mpfr(2, 200) ** -127
        for _ in range(200):
            re = gmpy2.mpfr(rng.uniform(-2, 1.999), 200) + gmpy2.mpfr(rng.uniform(0, 1e-30), 200)
            im = gmpy2.mpfr(rng.uniform(0, 3.999), 200)
            z = gmpy2.mpc(re, im, precision=200)
            d = rs.decode_u128(rs.encode_u128(z))
            assert abs(d.real - re) <= half
            assert abs(d.imag - im) <= half

    def test_decode_matches_formula(self):
        p, q = (1 << 126) * 3, 1 << 125
        z = rs.decode_complex((p, q))
        assert z == complex(-2 + 3.0, 0.5)

    @pytest.mark.parametrize("bad", [-2.5 + 0j, 2.0 + 0j, 1 - 1e-9j, 4.001j])
    def test_out_of_domain(self, bad):
        with pytest.raises(rs.OutOfDomainError):
            rs.encode_u128(bad)


class TestInsert:
    def test_insertion_order_decides_survivors(self):
        # B and C sit inside D's square but not inside each other's or A's
        eps = 1e-6
        A, D = -1.0 + 0.5j, -0.5 + 0.25j
        B, C = D + (-0.6e-6 + 0j), D + (0.6e-6 + 0j)
        s1 = RootSet(separation=eps)
        assert [s1.insert(z) for z in (A, D, B, C)] == [
            InsertOutcome.ADDED, InsertOutcome.ADDED,
            InsertOutcome.DUPLICATE, InsertOutcome.DUPLICATE]
        assert s1.count == 2
        assert s1.search(A) is not None and s1.search(D) is not None
        s2 = RootSet(separation=eps)
        assert [s2.insert(z) for z in (A, B, C, D)] == [
            InsertOutcome.ADDED, InsertOutcome.ADDED,
            InsertOutcome.ADDED, InsertOutcome.DUPLICATE]
        assert s2.count == 3

    def test_same_point_twice(self):
        s = RootSet(separation=1e-9)
        assert s.insert(0.5j) is InsertOutcome.ADDED
        assert s.insert(0.5j) is InsertOutcome.DUPLICATE

    def test_real_axis_exception_at_half_eps(self):
        eps = 1e-6
        s = RootSet(separation=eps)
        assert s.insert(0.25 + (eps / 2) * 1j) is InsertOutcome.REAL_AXIS
        assert s.count == 0 and s.real_axis_count == 1

    def test_real_axis_boundary_inclusive(self):
        s = RootSet(separation_quanta=1 << 20)
        assert s.insert((rs._TWO, 1 << 19)) is InsertOutcome.REAL_AXIS
        assert s.insert((rs._TWO + (1 << 21), (1 << 19) + 1)) is \
            InsertOutcome.ADDED

    def test_snap_real_stores_on_axis(self):
        eps = 1e-6
        s = RootSet(separation=eps, snap_real=True)
        assert s.insert(0.25 + (eps / 2) * 1j) is InsertOutcome.ADDED
        assert next(s.iter_records())[1] == 0
        # snapping onto an existing real point reports the duplicate
        assert s.insert(0.25 + (eps / 3) * 1j) is InsertOutcome.DUPLICATE

    def test_lower_half_rejected(self):
        s = RootSet(separation=1e-9)
        with pytest.raises(rs.OutOfDomainError):
            s.insert(1 - 0.5j)


class TestSearch:
    def test_found_and_absent(self):
        s = RootSet(separation=1e-6)
        s.insert(0.5 + 0.5j)
        assert s.search(0.5 + 0.5j) is not None
        assert s.search(1.5 + 0.5j) is None

    def test_square_proximity_counts_as_same(self):
        eps = 1e-6
        s = RootSet(separation=eps)
        s.insert(0.5 + 0.5j)
        assert s.search(0.5 + 0.4e-6 + (0.5 - 0.4e-6) * 1j) is not None

    def test_empty(self):
        assert RootSet(separation=1e-6).search(0.5j) is None


class TestLockAndIterate:
    def test_lock_iterates_strictly_increasing(self):
        rng = np.random.default_rng(2)
        s = RootSet(separation=1e-9, base_capacity=8)
        kept = []
        for _ in range(500):
            z = complex(rng.uniform(-2, 1.9), rng.uniform(0, 1))
            if s.insert(z) is InsertOutcome.ADDED:
                kept.append(z)
        s.lock()
        assert len(s.bars) == 1
        recs = list(s)
        assert len(recs) == len(kept)
        assert all(a < b for a, b in zip(recs, recs[1:]))
        assert all(s.search(z) is not None for z in kept)

    def test_unlocked_iteration_is_also_ordered(self):
        s = RootSet(separation=1e-9, base_capacity=4)
        for k in range(40):
            s.insert(complex(-1 + k * 0.01, 0.5))
        recs = list(s.iter_records())
        assert all(a < b for a, b in zip(recs, recs[1:]))

    def test_insert_after_lock(self):
        s = RootSet(separation=1e-9)
        s.lock()
        with pytest.raises(rs.LockedSetError):
            s.insert(1j)

    def test_full_plane_count(self):
        s = RootSet(separation=1e-9)
        s.insert(-1 + 0j)
        s.insert(0.5 + 0.5j)
        assert s.count == 2 and s.full_plane_count() == 3


class TestMerge:
    def test_boundary_root_deduplicated(self):
        eps = 1e-6
        a, b = RootSet(separation=eps), RootSet(separation=eps)
        for z in (0.1j, 0.2 + 0.1j):
            a.insert(z)
        for z in (0.2 + 0.1j, 0.4 + 0.1j):
            b.insert(z)
        assert rs.merge_sets(a, b).count == 3

    def test_merge_with_empty(self):
        eps = 1e-6
        b = RootSet(separation=eps)
        b.insert(0.5j)
        assert rs.merge_sets(RootSet(separation=eps), b).count == 1

    def test_first_input_wins_collisions(self):
        eps = 1e-6
        a, b = RootSet(separation=eps), RootSet(separation=eps)
        a.insert(0.5 + 0.5j)
        zb = 0.5 + 0.4e-6 + 0.5j
        b.insert(zb)
        m = rs.merge_sets(a, b)
        assert m.count == 1
        assert next(m.iter_records()) == rs.encode_u128(0.5 + 0.5j)

    def test_mismatched_separation(self):
        with pytest.raises(ValueError):
            rs.merge_sets(RootSet(separation=1e-6), RootSet(separation=1e-7))


class TestSeparationInvariant:
    def test_fuzzed_inserts_preserve_separation(self):
        eps = 1e-6
        eps_q = rs._quanta(eps)
        rng = np.random.default_rng(3)
        s = RootSet(separation=eps, base_capacity=64)
        accepted = []
        for k in range(10_000):
            roll = rng.random()
            if roll < 0.4 or not accepted:
                z = complex(rng.uniform(-1.5, 1.5), rng.uniform(0, 1e-3))
            elif roll < 0.8:
                base = accepted[rng.integers(0, len(accepted))]
                z = base + complex(rng.uniform(-3 * eps, 3 * eps),
                                   rng.uniform(-3 * eps, 3 * eps))
                z = complex(z.real, abs(z.imag))
            elif roll < 0.9:
                z = complex(rng.uniform(-1.5, 1.5), rng.uniform(0, 2 * eps))
            else:
                z = accepted[rng.integers(0, len(accepted))]
            if s.insert(z) is InsertOutcome.ADDED:
                accepted.append(z)
        recs = sorted(s.iter_records())
        assert len(recs) == s.count > 1000
        for i, (p, q) in enumerate(recs):
            assert q == 0 or 2 * q > eps_q
            for j in range(i + 1, len(recs)):
                dp = recs[j][0] - p
                if dp >= eps_q:
                    break
                assert abs(recs[j][1] - q) >= eps_q

    def test_merge_work_stays_loglinear(self):
        rng = np.random.default_rng(4)
        s = RootSet(separation_quanta=1, base_capacity=64)
        n = 5000
        for _ in range(n):
            s.insert(complex(rng.uniform(-2, 1.9), rng.uniform(0, 1)))
        assert s.merge_work <= 4 * n * math.log2(n)


class TestFiles:
    def _sample(self):
        rng = np.random.default_rng(5)
        s = RootSet(separation=1e-9, family=rs.FAMILY_HYP, n=7)
        for _ in range(300):
            s.insert(complex(rng.uniform(-2, 1.9), rng.uniform(0, 1)))
        return s.lock()

    def test_round_trip(self, tmp_path):
        s = self._sample()
        fp = tmp_path / "x.nset"
        rs.write_file(s, fp)
        t = rs.read_file(fp)
        assert list(t) == list(s)
        assert (t.eps_q, t.family, t.l, t.n, t.count) == \
            (s.eps_q, s.family, s.l, s.n, s.count)

    def test_write_requires_lock(self, tmp_path):
        s = RootSet(separation=1e-9)
        with pytest.raises(rs.LockedSetError):
            rs.write_file(s, tmp_path / "x.nset")

    def test_bit_flip_detected(self, tmp_path):
        s = self._sample()
        fp = tmp_path / "x.nset"
        rs.write_file(s, fp)
        blob = bytearray(fp.read_bytes())
        blob[rs._HEADER_LEN + 100] ^= 1
        fp.write_bytes(bytes(blob))
        with pytest.raises(rs.DigestMismatchError):
            rs.read_file(fp)

    def test_format_errors(self, tmp_path):
        s = self._sample()
        fp = tmp_path / "x.nset"
        rs.write_file(s, fp)
        blob = fp.read_bytes()
        bad = tmp_path / "bad.nset"
        bad.write_bytes(b"XSET" + blob[4:])
        with pytest.raises(rs.FormatError):
            rs.read_file(bad)
        bad.write_bytes(blob[:40])
        with pytest.raises(rs.FormatError):
            rs.read_file(bad)
        bad.write_bytes(blob[:len(blob) - 32])  # count vs payload mismatch
        with pytest.raises(rs.FormatError):
            rs.read_file(bad)

    def test_empty_set_file(self, tmp_path):
        fp = tmp_path / "e.nset"
        rs.write_file(RootSet(separation=1e-9).lock(), fp)
        assert rs.read_file(fp).count == 0


class TestCsv:
    def _sample(self):
        rng = np.random.default_rng(6)
        s = RootSet(separation=1e-9)
        for _ in range(200):
            s.insert(complex(rng.uniform(-2, 1.9), rng.uniform(0, 1)))
        return s.lock()

    def test_round_trip_identical(self, tmp_path):
        s = self._sample()
        fp = tmp_path / "x.csv"
        rs.export_csv(s, fp)
        t = rs.import_csv(fp, separation_quanta=s.eps_q)
        assert list(t.iter_records()) == list(s.iter_records())

    def test_compare_self_zero(self, tmp_path):
        s = self._sample()
        fp = tmp_path / "x.csv"
        rs.export_csv(s, fp)
        assert rs.compare_csv(fp, fp) == 0.0

    def test_compare_detects_known_shift(self, tmp_path):
        s = self._sample()
        fa, fb = tmp_path / "a.csv", tmp_path / "b.csv"
        rs.export_csv(s, fa)
        rows = fa.read_text().splitlines()
        re_part, im_part = rows[0].split(",")
        ip, fr = im_part.split(".")
        k = 20  # bump the 21st fractional digit: deviation 1e-21
        fr = fr[:k] + str((int(fr[k]) + 1) % 10) + fr[k + 1:]
        rows[0] = f"{re_part},{ip}.{fr}"
        fb.write_text("\n".join(rows) + "\n")
        assert rs.compare_csv(fa, fb) == pytest.approx(1e-21, rel=1e-12)

    def test_compare_row_mismatch(self, tmp_path):
        s = self._sample()
        fa, fb = tmp_path / "a.csv", tmp_path / "b.csv"
        rs.export_csv(s, fa)
        fb.write_text("\n".join(fa.read_text().splitlines()[:-1]) + "\n")
        with pytest.raises(rs.ParseError):
            rs.compare_csv(fa, fb)

    def test_import_rejects_garbage(self, tmp_path):
        fp = tmp_path / "g.csv"
        fp.write_text("0.5,abc\n")
        with pytest.raises(rs.ParseError):
            rs.import_csv(fp, separation=1e-9)

    def test_import_rejects_separation_conflict(self, tmp_path):
        s = self._sample()
        fp = tmp_path / "x.csv"
        rs.export_csv(s, fp)
        with pytest.raises(rs.ParseError):
            rs.import_csv(fp, separation=0.5)


class TestMinDistance:
    def test_two_point_example(self):
        s = RootSet(separation=1e-9)
        s.insert(0j)
        s.insert(-1 + 0j)
        d, pair = rs.min_distance(s.lock())
        assert d == 1.0
        assert set(pair) == {0j, -1 + 0j}

    def test_single_complex_point_meets_its_conjugate(self):
        s = RootSet(separation=1e-9)
        s.insert(0.5 + 0.125j)
        assert rs.min_distance(s.lock())[0] == pytest.approx(0.25, rel=1e-15)

    def test_single_real_point_fails(self):
        s = RootSet(separation=1e-9)
        s.insert(0.5 + 0j)
        with pytest.raises(ValueError):
            rs.min_distance(s.lock())

    def test_agrees_with_brute_force(self):
        rng = np.random.default_rng(7)
        for trial in range(5):
            s = RootSet(separation=1e-9)
            for _ in range(300):
                s.insert(complex(rng.uniform(-2, 1.9), rng.uniform(0, 0.5)))
            s.lock()
            d, _ = rs.min_distance(s)
            pts = rs._mirrored(s)
            best = min((p1 - p2) ** 2 + (q1 - q2) ** 2
                       for i, (p1, q1) in enumerate(pts)
                       for (p2, q2) in pts[i + 1:])
            assert d == math.sqrt(float(best)) * rs.QUANTUM


class TestHistogram:
    def test_band_assignment_and_minima(self):
        s = RootSet(separation=1e-9)
        s.insert(-1.2 + 0j)          # band 0: (-1.75, -1]
        s.insert(-1.2 + 0.001j)      # band 0, with conjugate at 2*Im
        s.insert(-1.8 + 0j)          # band 1: (-1.9375, -1.75]
        s.insert(0.25 + 0j)          # outside every band
        rows = rs.histogram_by_band(s.lock(), 2)
        assert rows[0]["band"] == 0 and rows[0]["count"] == 3
        assert rows[0]["min_distance"] == pytest.approx(0.001, rel=1e-9)
        assert rows[1]["band"] == 1 and rows[1]["count"] == 1
        assert rows[1]["min_distance"] is None
        assert rows[-1]["band"] is None and rows[-1]["count"] == 1


class TestDensity:
    def test_count_conservation_and_pgm(self, tmp_path):
        rng = np.random.default_rng(8)
        s = RootSet(separation=1e-9)
        for _ in range(400):
            s.insert(complex(rng.uniform(-2, 1.9), rng.uniform(0, 1.9)))
        s.lock()
        m = rs.density_map(s, grid=64)
        assert m.shape == (64, 64)
        assert m.sum() == s.full_plane_count()
        pgm = tmp_path / "m.pgm"
        rs.write_pgm(m, pgm)
        head = pgm.read_text().splitlines()
        assert head[0] == "P2" and head[1] == "64 64"
        txt = tmp_path / "m.txt"
        rs.write_count_matrix(m, txt)
        assert len(txt.read_text().splitlines()) == 64


class TestPlanarSet:
    def test_basic_semantics(self):
        s = PlanarSet(separation=1e-6)
        assert s.insert(1 - 1j) is InsertOutcome.ADDED     # lower half fine
        assert s.insert(1 - 1j) is InsertOutcome.DUPLICATE
        assert s.insert(1 + 1j) is InsertOutcome.ADDED
        assert s.search(1 - 1j + 4e-7) is not None
        assert s.search(0) is None
        with pytest.raises(rs.OutOfDomainError):
            s.insert(complex("nan"))

    def test_lock_and_order(self):
        rng = np.random.default_rng(9)
        s = PlanarSet(separation=1e-9, base_capacity=16)
        for _ in range(200):
            s.insert(complex(rng.uniform(-2, 2), rng.uniform(-2, 2)))
        s.lock()
        recs = list(s.iter_records())
        assert all(a < b for a, b in zip(recs, recs[1:]))
        with pytest.raises(rs.LockedSetError):
            s.insert(0)

    def test_csv_round_trips_float64(self, tmp_path):
        rng = np.random.default_rng(10)
        s = PlanarSet(separation=1e-12)
        vals = [complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
                for _ in range(50)]
        for z in vals:
            s.insert(z)
        fp = tmp_path / "p.csv"
        rs.export_csv_planar(s.lock(), fp)
        got = []
        for line in fp.read_text().splitlines():
            a, b = line.split(",")
            got.append(complex(float(a), float(b)))
        assert got == sorted(vals, key=lambda z: (z.real, z.imag))
