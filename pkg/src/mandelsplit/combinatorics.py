"""Exact counting and factorization structure for the polynomial families.

Everything in here is integer arithmetic: divisor sums, root counts per
order, multiplicities of divisor factors, and the degree bookkeeping that
the splitting pipeline reconciles against.  The only floating-point entry
point is factorization_check, which compares an evaluated polynomial
against the product over its factor root sets at sample points.
"""

import math

import numpy as np


class MissingRootSetError(KeyError):
    """A factorization check needs a classified root set it was not given."""


def divisors(n):
    """Sorted list of positive divisors of n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def mobius(n):
    """Moebius function: (-1)^k for squarefree n with k prime factors, else 0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    result = 1
    p = 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            result = -result
        p += 1
    if n > 1:
        result = -result
    return result


def hyp_count(n):
    """Number of hyperbolic parameters of exact order n."""
    return sum(mobius(n // k) * 2 ** (k - 1) for k in divisors(n))


def mis_count(l, n):
    """Number of Misiurewicz parameters of exact type (l, n).

    l = 0 degenerates to the hyperbolic count and l = 1 to the empty set.
    """
    if l < 0 or n < 1:
        raise ValueError("need l >= 0 and n >= 1")
    if l == 0:
        return hyp_count(n)
    if l == 1:
        return 0
    if (l - 1) % n == 0:
        phi = 2 ** (l - 1) - 1
    else:
        phi = 2 ** (l - 1)
    return phi * hyp_count(n)


def eta(l, k):
    """Multiplicity of order-k hyperbolic roots inside the (l, n) family.

    Floor division makes the l = 0 (multiplicity 1) and l = 1
    (multiplicity 2) cases fall out of the same formula.
    """
    if l < 0 or k < 1:
        raise ValueError("need l >= 0 and k >= 1")
    return (l - 1) // k + 2


def degree_identity(l, n):
    """Check that divisor multiplicities account for the full degree.

    Sums eta_l(k)*|hyp(k)| plus all |mis(j,k)| for 2 <= j <= l over k | n
    and compares with 2^(l+n-1).
    """
    total = 0
    for k in divisors(n):
        total += eta(l, k) * hyp_count(k)
        total += sum(mis_count(j, k) for j in range(2, l + 1))
    return total == 2 ** (l + n - 1)


def new_parameter_count(family, l, n):
    """Expected number of new parameters produced by splitting a family."""
    if family == "hyp":
        return hyp_count(n)
    if family in ("mis", "mis-simple"):
        return mis_count(l, n)
    raise ValueError(f"unknown family {family!r}")


def factor_multiplicities(l, n):
    """All factors of the (l, n) polynomial as {(family, j, k): multiplicity}.

    Keys are ('hyp', 0, k) and ('mis', j, k); the zero parameter is part of
    the ('hyp', 0, 1) factor.
    """
    factors = {}
    for k in divisors(n):
        factors[("hyp", 0, k)] = eta(l, k)
        for j in range(2, l + 1):
            if mis_count(j, k):
                factors[("mis", j, k)] = 1
    return factors


def simple_factor_multiplicities(l, n):
    """Factors of the simplified (l, n) polynomial, all with multiplicity 1.

    Hyperbolic factors survive only for k | gcd(n, l-1).
    """
    if l < 2:
        raise ValueError("simplified family needs l >= 2")
    factors = {}
    g = math.gcd(n, l - 1)
    for k in divisors(g):
        factors[("hyp", 0, k)] = 1
    for k in divisors(n):
        if mis_count(l, k):
            factors[("mis", l, k)] = 1
    return factors


def factorization_check(l, n, root_sets, num_points=100, seed=1, simplified=False):
    """Max relative deviation between the polynomial and its root-set product.

    root_sets maps (family, j, k) keys (as in factor_multiplicities) to
    full-plane root arrays.  Sample points are drawn from the annulus
    0.1 <= |z| <= 1.9 and kept at distance > 1e-3 from every root.
    Comparison runs in log space so huge magnitudes cannot overflow.
    """
    from .mandelpoly import MisSimple, Mis, eval_poly

    if simplified:
        factors = simple_factor_multiplicities(l, n)
        poly = MisSimple(l, n)
    else:
        factors = factor_multiplicities(l, n)
        poly = Mis(l, n) if l >= 2 else None

    roots = []
    mults = []
    for key, mult in factors.items():
        if key not in root_sets:
            raise MissingRootSetError(key)
        arr = np.asarray(root_sets[key], dtype=complex)
        expected = hyp_count(key[2]) if key[0] == "hyp" else mis_count(key[1], key[2])
        if arr.size != expected:
            raise ValueError(f"root set {key} has {arr.size} points, expected {expected}")
        roots.append(arr)
        mults.append(np.full(arr.size, mult))
    roots = np.concatenate(roots)
    mults = np.concatenate(mults)

    rng = np.random.default_rng(seed)
    samples = []
    while len(samples) < num_points:
        r = rng.uniform(0.1, 1.9)
        t = rng.uniform(0.0, 2 * np.pi)
        z = r * np.exp(1j * t)
        if np.min(np.abs(roots - z)) > 1e-3:
            samples.append(z)

    worst = 0.0
    ln2 = math.log(2.0)
    for z in samples:
        if simplified:
            res = eval_poly(poly, z)
        elif l >= 2:
            res = eval_poly(poly, z)
        else:
            from .mandelpoly import eval_q
            res = eval_q(l, n, z)
        log_lhs = complex(np.log(res.value)) + res.scale_exp * ln2
        log_rhs = complex(np.sum(mults * np.log(z - roots)))
        dev = abs(np.exp(log_rhs - log_lhs) - 1.0)
        worst = max(worst, float(dev))
    return worst
