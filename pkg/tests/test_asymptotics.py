import math
from fractions import Fraction

import numpy as np
import pytest

from phaselat.asymptotics import (
    AsymptoticModel,
    ExceptionalCaseError,
    asymptotic_covariance,
    crb,
    hilbert_inverse,
    hilbert_matrix,
    scaling_vector,
)
from phaselat.circular import NoiseModel


def _exact_inverse(m):
    # Gauss-Jordan over the rationals
    n = m + 1
    A = [[Fraction(1, i + k + 1) for k in range(n)] + [Fraction(int(i == k)) for k in range(n)] for i in range(n)]
    for c in range(n):
        p = A[c][c]
        A[c] = [v / p for v in A[c]]
        for r in range(n):
            if r != c:
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return [row[n:] for row in A]


def test_hilbert_examples():
    assert np.array_equal(hilbert_matrix(0), [[1.0]])
    assert np.allclose(hilbert_matrix(1), [[1, 0.5], [0.5, 1 / 3]])
    assert np.array_equal(hilbert_inverse(1), [[4, -6], [-6, 12]])
    with pytest.raises(ValueError):
        hilbert_matrix(11)


@pytest.mark.parametrize("m", range(0, 11))
def test_hilbert_inverse_exact(m):
    exact = _exact_inverse(m)
    assert all(v.denominator == 1 for row in exact for v in row)
    assert np.array_equal(hilbert_inverse(m), np.array([[float(v) for v in row] for row in exact]))
    if m <= 4:
        assert np.allclose(hilbert_matrix(m) @ hilbert_inverse(m), np.eye(m + 1), atol=1e-6)


def test_scaling_vector_examples():
    assert np.array_equal(scaling_vector(1, 3), np.ones(4))
    assert np.allclose(scaling_vector(4, 1), [2, 8])
    assert np.allclose(scaling_vector(100, 2), [10, 1000, 100000])
    with pytest.raises(ValueError):
        scaling_vector(0, 1)


def test_covariance_examples():
    s2, h, N = 0.01, 0.2, 37
    f = s2 / (1 - h) ** 2
    model = AsymptoticModel.build(0, s2, h)
    assert asymptotic_covariance(model, N)[0, 0] == pytest.approx(f / N, rel=1e-14)
    cov = asymptotic_covariance(AsymptoticModel.build(1, s2, h), N)
    assert np.allclose(np.diag(cov), [4 * f / N, 12 * f / N**3], rtol=1e-14)


@pytest.mark.parametrize("m", range(0, 5))
def test_covariance_pd_and_scaling(m):
    model = AsymptoticModel.build(m, 0.02, 0.1)
    N = 55
    cov = asymptotic_covariance(model, N)
    assert np.allclose(cov, cov.T, rtol=0, atol=0)
    # eigen-decomposition of the well-scaled form
    s = scaling_vector(N, m)
    scaled = cov * np.outer(s, s)
    assert np.all(np.linalg.eigvalsh(scaled) > 0)
    assert np.allclose(scaled, model.factor * hilbert_inverse(m), rtol=1e-13)


def test_exceptional_case():
    model = AsymptoticModel.build(1, 1 / 12, 1 - 1e-8)
    with pytest.raises(ExceptionalCaseError):
        asymptotic_covariance(model, 10)
    with pytest.raises(ValueError):
        AsymptoticModel.build(1, 0.1, 1.5)


def test_crb_examples():
    snr = 40.0
    assert crb(17, 0, snr)[0, 0] == pytest.approx(1 / (8 * math.pi**2 * snr * 17), rel=1e-12)
    with pytest.raises(ValueError):
        crb(10, 1, 0.0)
    # direct formula on a small well-conditioned case
    n = np.arange(1, 9, dtype=float)
    V = np.vander(n, 3, increasing=True)
    assert np.allclose(crb(8, 2, 5.0), np.linalg.inv(V.T @ V) / (8 * math.pi**2 * 5.0), rtol=1e-9)


def test_crb_scaling_rate():
    m = 3
    a, b = crb(2000, m, 1.0), crb(4000, m, 1.0)
    for k in range(m + 1):
        assert np.diag(a)[k] / np.diag(b)[k] == pytest.approx(2.0 ** (2 * k + 1), rel=0.01)


@pytest.mark.parametrize("m", [0, 1, 3])
def test_high_snr_ratio_and_gap(m):
    snr = 1e3
    model = AsymptoticModel.from_noise(m, NoiseModel.from_snr(snr))
    N = 200
    cov, bound = asymptotic_covariance(model, N), crb(N, m, snr)
    ratio = np.diag(cov) / np.diag(bound)
    assert np.all(np.abs(ratio - 1) < 0.05)
    # the gap is PSD once N is large enough for the finite-N bound to
    # approach its limit; compared in the scaled frame where both are O(1)
    N = 20_000
    s = scaling_vector(N, m)
    S = np.outer(s, s)
    cov, bound = asymptotic_covariance(model, N) * S, crb(N, m, snr) * S
    assert np.linalg.eigvalsh(cov - bound).min() >= -1e-9 * np.trace(cov)
