import math

import numpy as np
import pytest

from phaselat.theorychecks import IndexSubset, count_progressions, finite_difference, progression_lower_bound


def brute_count(members, h, m):
    s = set(members)
    return sum(1 for n in range(-50, 100) if all(n + i * h in s for i in range(m + 1)))


def test_subset_invariants():
    k = IndexSubset(10, (5, 1, 3, 3))
    assert k.members == (1, 3, 5) and len(k) == 3
    assert k.without(3).members == (1, 5)
    with pytest.raises(ValueError):
        IndexSubset(4, (0, 2))
    with pytest.raises(ValueError):
        IndexSubset(4, (5,))


@pytest.mark.parametrize("N, h, m", [(10, 1, 0), (10, 2, 2), (12, 4, 2), (5, 3, 2), (7, 1, 3)])
def test_full_set_count(N, h, m):
    assert count_progressions(IndexSubset.full(N), h, m) == max(N - m * h, 0)


def test_count_examples():
    assert count_progressions(IndexSubset(10, ()), 1, 1) == 0
    K = IndexSubset(10, (1, 2, 3, 5, 6, 7, 9, 10))
    assert count_progressions(K, 2, 2) == brute_count(K.members, 2, 2) == 3
    with pytest.raises(ValueError):
        count_progressions(K, 0, 1)


@pytest.mark.slow
def test_progression_bounds_exhaustive():
    N = 12
    violations = 0
    for mask in range(1 << N):
        K = IndexSubset(N, tuple(i + 1 for i in range(N) if mask >> i & 1))
        for h in range(1, 5):
            for m in range(0, 3):
                a = count_progressions(K, h, m)
                violations += a < progression_lower_bound(N, len(K), h, m)
                for r in K.members:
                    violations += count_progressions(K.without(r), h, m) < a - (m + 1)
    assert violations == 0


def test_progression_bounds_sampled(rng):
    for _ in range(300):
        N = int(rng.integers(1, 13))
        K = IndexSubset(N, tuple(np.flatnonzero(rng.random(N) < 0.7) + 1))
        h, m = int(rng.integers(1, 5)), int(rng.integers(0, 3))
        a = count_progressions(K, h, m)
        assert a == brute_count(K.members, h, m)
        assert a >= progression_lower_bound(N, len(K), h, m)
        for r in K.members:
            assert count_progressions(K.without(r), h, m) >= a - (m + 1)


def test_dense_subset_has_progression(rng):
    for _ in range(200):
        N = int(rng.integers(10, 201))
        m = int(rng.integers(1, 4))
        size = (2 * m + 1) * N // (2 * m + 2) + 1
        K = IndexSubset(N, tuple(rng.choice(np.arange(1, N + 1), size=size, replace=False)))
        for h in range(1, N // (2 * m) + 1):
            assert count_progressions(K, h, m) > 0


def test_finite_difference_examples():
    v = [1.0, 4.0, 9.0, 16.0, 25.0]
    assert finite_difference(v, 1, 1, 1) == 5.0
    assert finite_difference(v, 1, 2, 0) == 2.0
    assert finite_difference([3.0] * 8, 2, 3, 0) == 0.0
    assert finite_difference(v, 1, 1, 3, offset=1) == 16.0 - 9.0
    with pytest.raises(IndexError):
        finite_difference(v, 2, 3, 0)


def test_finite_difference_polynomial_identity(rng):
    for _ in range(2000):
        r = int(rng.integers(0, 6))
        a = rng.uniform(-10, 10, r + 1)
        N = int(rng.integers(r + 1, 101))
        n = np.arange(1, N + 1, dtype=float)
        vals = np.polynomial.polynomial.polyval(n, a)
        h = int(rng.integers(1, max(2, (N - 1) // max(r, 1) + 1)))
        if r * h > N - 1:
            continue
        n0 = int(rng.integers(1, N - r * h + 1))
        got = finite_difference(vals, h, r, n0, offset=1)
        want = h**r * math.factorial(r) * a[r]
        scale = max(abs(want), float(np.max(np.abs(vals))) * 2**r * 1e-7)
        assert abs(got - want) <= 1e-9 * scale


def test_finite_difference_exact_on_rationals(rng):
    from fractions import Fraction

    for _ in range(300):
        r = int(rng.integers(0, 6))
        coef = [Fraction(int(v), 7) for v in rng.integers(-70, 71, r + 1)]
        vals = [sum(c * n**k for k, c in enumerate(coef)) for n in range(1, 41)]
        h = int(rng.integers(1, 40 // max(r, 1)))
        if r * h > 39:
            continue
        n0 = int(rng.integers(1, 40 - r * h + 1))
        assert finite_difference(vals, h, r, n0, offset=1) == h**r * math.factorial(r) * coef[r]
