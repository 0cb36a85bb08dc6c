"""Disk arithmetic: frozen ulp/enclosure examples, soundness fuzz, growth."""

import math

import gmpy2
import numpy as np
import pytest

from mandelsplit.diskarith import (
    ComplexDisk,
    Rectangle,
    containment_fuzz,
    disk_add,
    disk_add_fast,
    disk_mul,
    disk_mul_fast,
    disk_scale,
    growth_comparison,
    radius_drift,
    rect_mul,
    ulp_complex,
    ulp_real,
)
from mandelsplit.precision import RADIUS_PREC, ctx


class TestUlp:
    def test_one(self):
        assert float(ulp_real(1.0, 53)) == 2.0 ** -52

    def test_three(self):
        assert float(ulp_real(3.0, 53)) == 2.0 ** -51

    def test_zero(self):
        assert float(ulp_real(0, 53)) == 0.0

    def test_sign_invariance(self):
        assert ulp_real(-3.0, 53) == ulp_real(3.0, 53)

    def test_powers_of_two(self):
        for n_bits in (24, 53, 128):
            for k in (-40, -3, 0, 1, 17):
                assert float(ulp_real(2.0 ** k, n_bits)) == 2.0 ** (k + 1 - n_bits)

    def test_nonfinite(self):
        assert math.isinf(ulp_real(float("inf"), 53))

    def test_complex_combines_components(self):
        u = float(ulp_complex(gmpy2.mpc(1 + 1j), 53))
        lo = math.sqrt(2) * 2.0 ** -52
        assert lo <= u <= lo * (1 + 1e-6)

    def test_complex_zero_imag(self):
        # one zero component contributes nothing
        u = float(ulp_complex(gmpy2.mpc(1 + 0j), 53))
        assert 2.0 ** -52 <= u <= 2.0 ** -52 * (1 + 1e-6)


class TestComplexDisk:
    def test_make_rounds_radius_up(self):
        d = ComplexDisk.make(0, 0.1, 53)
        assert d.radius >= gmpy2.mpfr(0.1, 53)
        assert d.radius_prec == RADIUS_PREC

    def test_make_string_radius(self):
        d = ComplexDisk.make(1j, "1e-30", 128, radius_prec=96)
        assert d.radius_prec == 96
        assert 0.9e-30 < float(d.radius) < 1.1e-30

    def test_invalid_flag(self):
        d = ComplexDisk.make(0, 1, 53)
        assert d.is_valid
        assert not d.invalid().is_valid

    def test_contains_interior_and_exterior(self):
        d = ComplexDisk.make(1 + 1j, 0.5, 53)
        assert d.contains(1 + 1j)
        assert d.contains(1.3 + 1.4j)
        assert not d.contains(1.6 + 1j)
        assert not d.contains(0)

    def test_abs_bounds(self):
        d = ComplexDisk.make(3 + 4j, 0.5, 53)
        up = float(d.abs_upper())
        lo = float(d.abs_lower())
        assert 5.5 <= up <= 5.5 * (1 + 1e-5)
        assert 4.5 * (1 - 1e-5) <= lo <= 4.5

    def test_abs_lower_clamps_at_zero(self):
        d = ComplexDisk.make(0.1, 5, 53)
        assert float(d.abs_lower()) == 0.0


class TestDiskAdd:
    def test_zero_plus_zero(self):
        out = disk_add(ComplexDisk.make(0, 0, 53), ComplexDisk.make(0, 0, 53))
        assert complex(out.center) == 0
        assert float(out.radius) == 0.0

    def test_opposite_centers(self):
        out = disk_add(ComplexDisk.make(1, 0.5, 53), ComplexDisk.make(-1, 0.25, 53))
        assert complex(out.center) == 0
        # cancellation leaves a zero center, so no ulp slack is added
        assert float(out.radius) == 0.75

    def test_nonzero_center_gains_half_ulp(self):
        # at the default 24-bit radius the bump rounds up to one ulp24;
        # a wide radius shows the true half-ulp-of-center slack
        out = disk_add(ComplexDisk.make(1, 0.5, 53), ComplexDisk.make(1, 0.25, 53))
        r = float(out.radius)
        assert 0.75 < r <= 0.75 + 2.0 ** -23
        a = ComplexDisk.make(1, 0.5, 53, radius_prec=96)
        b = ComplexDisk.make(1, 0.25, 53, radius_prec=96)
        r = float(disk_add(a, b).radius)
        assert 0.75 < r <= 0.75 + 2.0 ** -50

    def test_invalid_propagates(self):
        bad = ComplexDisk.make(0, 1, 53).invalid()
        assert not disk_add(bad, ComplexDisk.make(1, 0, 53)).is_valid

    def test_radius_precision_widest_wins(self):
        a = ComplexDisk.make(1, 1e-5, 53, radius_prec=96)
        b = ComplexDisk.make(1, 1e-5, 53)
        assert disk_add(a, b).radius_prec == 96


class TestDiskMul:
    def test_times_exact_one(self):
        z = 0.6 + 0.8j
        d = ComplexDisk.make(z, 0.25, 53)
        out = disk_mul(d, ComplexDisk.make(1, 0, 53))
        assert complex(out.center) == z
        gain = float(out.radius) - 0.25
        assert 0 <= gain <= 0.25 * 2.0 ** -22
        # wide radii expose the bare correction term, a few center ulps
        dw = ComplexDisk.make(z, 0.25, 53, radius_prec=96)
        ow = ComplexDisk.make(1, 0, 53, radius_prec=96)
        gain = float(disk_mul(dw, ow).radius) - 0.25
        assert 0 <= gain <= 1e-12

    def test_unit_center_square_doubles_radius(self):
        r = 1e-6
        for theta in (0.3, 1.1, 2.9, 4.0):
            z = complex(math.cos(theta), math.sin(theta))
            d = ComplexDisk.make(z, r, 53)
            out = disk_mul(d, d)
            ratio = float(out.radius) / (2 * r)
            assert abs(ratio - 1) <= 3e-6

    def test_intermediate_precision_floor(self):
        d = ComplexDisk.make(1, 0, 53)
        with pytest.raises(ValueError):
            disk_mul(d, d, n_intermediate=40)

    def test_invalid_propagates(self):
        bad = ComplexDisk.make(0, 1, 53).invalid()
        assert not disk_mul(bad, ComplexDisk.make(1, 0, 53)).is_valid

    def test_radius_precision_widest_wins(self):
        a = ComplexDisk.make(1, 1e-5, 53, radius_prec=80)
        b = ComplexDisk.make(1, 1e-5, 53)
        assert disk_mul(a, b).radius_prec == 80


class TestDiskScale:
    def test_scale_by_exact_one(self):
        z = 0.3 - 0.7j
        out = disk_scale(1.0, 0.0, ComplexDisk.make(z, 0.125, 53))
        assert complex(out.center) == z
        gain = float(out.radius) - 0.125
        assert 0 <= gain <= 0.125 * 2.0 ** -22
        wide = ComplexDisk.make(z, 0.125, 53, radius_prec=96)
        gain = float(disk_scale(1.0, 0.0, wide).radius) - 0.125
        assert 0 <= gain <= 1e-12

    def test_pure_dilation(self):
        out = disk_scale(2.0, 0.0, ComplexDisk.make(0, 1, 53))
        assert complex(out.center) == 0
        r = float(out.radius)
        assert 2.0 <= r <= 2.0 * (1 + 1e-6)

    def test_interval_times_point(self):
        out = disk_scale(0.0, 1.0, ComplexDisk.make(1, 0, 53))
        assert complex(out.center) == 0
        r = float(out.radius)
        assert 1.0 <= r <= 1.0 + 1e-6

    def test_negative_interval_radius_invalidates(self):
        assert not disk_scale(1.0, -0.5, ComplexDisk.make(1, 0, 53)).is_valid

    def test_invalid_propagates(self):
        bad = ComplexDisk.make(0, 1, 53).invalid()
        assert not disk_scale(1.0, 0.0, bad).is_valid


class TestRectangle:
    def test_negative_half_size_rejected(self):
        with pytest.raises(ValueError):
            Rectangle(0, -1.0, 0.0)

    def test_point_square_exact(self):
        out = rect_mul(Rectangle(1 + 1j, 0.0, 0.0), Rectangle(1 + 1j, 0.0, 0.0))
        assert out.center == 2j
        assert out.half_width == 0.0
        assert out.half_height == 0.0

    def test_real_axis_square_width_doubles(self):
        r = 0.1
        out = rect_mul(Rectangle(1.0 + 0j, r, r), Rectangle(1.0 + 0j, r, r))
        assert abs(out.half_width / r - 2) <= 2.5 * r
        assert abs(out.half_height / r - 2) <= 2.5 * r

    def test_box_wider_than_disk_in_worst_direction(self):
        # squaring at angle 3pi/16: the box grows by ~2*(|cos|+|sin|),
        # the disk by ~2; the ratio stays below sqrt(2) plus O(r) slack
        r = 0.1
        z = complex(math.cos(3 * math.pi / 16), math.sin(3 * math.pi / 16))
        b2 = rect_mul(Rectangle(z, r, r), Rectangle(z, r, r))
        d2 = disk_mul(ComplexDisk.make(z, r, 53), ComplexDisk.make(z, r, 53))
        ratio = max(b2.half_width, b2.half_height) / float(d2.radius)
        assert 1.0 < ratio <= math.sqrt(2) + 3 * r * r

    def test_tiny_boxes_keep_their_size(self):
        # boxes far below one center ulp must not collapse to zero
        r = 1e-20
        out = rect_mul(Rectangle(1.0 + 0j, r, r), Rectangle(1.0 + 0j, r, r))
        assert out.half_width >= 2 * r
        assert out.half_height >= 2 * r


class TestMonotonicity:
    def test_radius_enlargement_never_shrinks_output(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            ca = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            cb = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            ra = 10.0 ** rng.uniform(-20, -1)
            rb = 10.0 ** rng.uniform(-20, -1)
            bump = 1 + rng.uniform(1e-7, 3.0)
            a1 = ComplexDisk.make(ca, ra, 53)
            a2 = ComplexDisk.make(ca, ra * bump, 53)
            b = ComplexDisk.make(cb, rb, 53)
            assert disk_add(a2, b).radius >= disk_add(a1, b).radius
            assert disk_mul(a2, b).radius >= disk_mul(a1, b).radius
            x0, xr = rng.uniform(-2, 2), 10.0 ** rng.uniform(-20, -1)
            assert disk_scale(x0, xr * bump, a1).radius >= \
                disk_scale(x0, xr, a1).radius
            assert disk_scale(x0, xr, a2).radius >= disk_scale(x0, xr, a1).radius


class TestContainmentFuzz:
    @pytest.mark.parametrize("op", ["add", "mul", "scale"])
    def test_no_violations_default_precision(self, op):
        assert containment_fuzz(op, 2000, prec=53, seed=11) == 0

    @pytest.mark.parametrize("prec", [24, 128])
    def test_no_violations_other_precisions(self, prec):
        for op in ("add", "mul", "scale"):
            assert containment_fuzz(op, 700, prec=prec, seed=13) == 0


class TestFastPaths:
    def test_fast_results_contain_sampled_products(self):
        rng = np.random.default_rng(3)
        hi = ctx(256)
        for _ in range(400):
            ca = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            cb = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            ra = 10.0 ** rng.uniform(-15, -1)
            rb = 10.0 ** rng.uniform(-15, -1)
            pts_a = [ca + 0.99 * ra * u for u in (1, -1, 1j, -1j)]
            pts_b = [cb + 0.99 * rb * u for u in (1, -1, 1j, -1j)]
            c_add, r_add = disk_add_fast(ca, ra, cb, rb)
            c_mul, r_mul = disk_mul_fast(ca, ra, cb, rb)
            for xa, xb in zip(pts_a, pts_b):
                s = hi.add(gmpy2.mpc(xa, precision=256), gmpy2.mpc(xb, precision=256))
                p = hi.mul(gmpy2.mpc(xa, precision=256), gmpy2.mpc(xb, precision=256))
                ds = abs(complex(hi.sub(s, gmpy2.mpc(c_add, precision=256))))
                dp = abs(complex(hi.sub(p, gmpy2.mpc(c_mul, precision=256))))
                assert ds <= r_add * (1 + 1e-9)
                assert dp <= r_mul * (1 + 1e-9)


class TestGrowthAndDrift:
    def test_box_vs_disk_growth_gap(self):
        mean = growth_comparison(n_starts=30, n_steps=80)
        assert 0.15 <= mean <= 0.32

    def test_drift_vanishes_at_wide_radius_precision(self):
        # multiplying by exact unit disks: derivative product is exactly 1,
        # so the radius ratio isolates the enclosure formulas' own growth
        ratio = radius_drift(steps=10 ** 5, prec=256, radius_prec=192)
        assert 1.0 <= ratio <= 1.0 + 1e-14

    def test_drift_at_storage_precision_is_roundup_bound(self):
        # at the 24-bit production radius width every up-rounded radius
        # operation can add an ulp, so the same loop drifts measurably;
        # this is bookkeeping slack, outward-only, hence still sound
        ratio = radius_drift(steps=5000, prec=128, radius_prec=24)
        assert 1 + 1e-5 <= ratio <= 1.01
