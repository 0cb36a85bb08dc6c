import numpy as np
import pytest

from mandelsplit.oracle import (
    OracleError,
    p_coeffs,
    q_coeffs,
    oracle_roots_p,
    oracle_roots_small,
    hausdorff,
)


def test_p_coeffs_small():
    assert p_coeffs(1) == [0, 1]
    assert p_coeffs(2) == [0, 1, 1]
    assert p_coeffs(3) == [0, 1, 1, 2, 1]  # z + z^2 + 2z^3 + z^4
    assert len(p_coeffs(6)) == 2 ** 5 + 1
    assert p_coeffs(6)[-1] == 1


def test_p_coeffs_integer_orbit():
    # exact integer evaluation must reproduce the orbit of 2: 2, 6, 38, 1446
    for n, want in ((1, 2), (2, 6), (3, 38), (4, 1446)):
        assert sum(a * 2 ** k for k, a in enumerate(p_coeffs(n))) == want


def test_q_coeffs():
    assert q_coeffs(0, 3) == p_coeffs(3)
    cs = q_coeffs(2, 1)
    assert sum(a * (-2) ** k for k, a in enumerate(cs)) == 0


def test_roots_tiny():
    assert list(oracle_roots_p(1)) == [0j]
    r2 = sorted(oracle_roots_p(2), key=lambda z: z.real)
    assert np.allclose(r2, [-1.0, 0.0], atol=1e-14)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_roots_verified(n):
    r = oracle_roots_p(n)
    assert len(r) == 2 ** (n - 1)
    # conjugation symmetry
    a = np.sort_complex(r)
    b = np.sort_complex(r.conj())
    assert np.allclose(a, b, atol=1e-13)
    d = np.abs(r[:, None] - r[None, :])
    np.fill_diagonal(d, np.inf)
    assert d.min() > 1e-6


def test_shifted_family():
    r = oracle_roots_p(3, shift=5)
    # p_3(1) = 5, so 1 is a root of the shifted polynomial
    assert np.min(np.abs(r - 1.0)) < 1e-13


def test_small_poly_agrees_with_recurrence_path():
    a = oracle_roots_p(5)
    b = oracle_roots_small(p_coeffs(5))
    assert hausdorff(a, b) < 1e-12


def test_hausdorff():
    assert hausdorff([0j], [0j]) == 0.0
    assert hausdorff([0j], [1 + 0j]) == 1.0
    assert hausdorff([0j], [0j, 3 + 0j]) == 3.0
    with pytest.raises(ValueError):
        hausdorff([], [0j])
