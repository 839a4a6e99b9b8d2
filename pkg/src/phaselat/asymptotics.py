"""Large-sample covariance of the LSU estimator and the Cramer-Rao bound."""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .circular import NoiseModel, intrinsic_moments
from .estimator import MAX_CONDITION, ConditioningError

__all__ = [
    "EXCEPTIONAL_H_GAP",
    "AsymptoticModel",
    "ExceptionalCaseError",
    "hilbert_matrix",
    "hilbert_inverse",
    "asymptotic_covariance",
    "crb",
    "scaling_vector",
]

EXCEPTIONAL_H_GAP = 1e-6
MAX_ORDER = 10


class ExceptionalCaseError(ValueError):
    """Boundary density too close to one for the normal limit to apply."""


def _check_order(m):
    if not 0 <= m <= MAX_ORDER:
        raise ValueError(f"order must be in [0, {MAX_ORDER}], got {m}")


def hilbert_matrix(m: int) -> np.ndarray:
    """``(m+1) x (m+1)`` matrix with entries ``1 / (i + k + 1)``."""
    _check_order(m)
    i = np.arange(m + 1)
    return 1.0 / (i[:, None] + i[None, :] + 1)


def _hilbert_inverse_exact(m):
    n = m + 1
    return [
        [(-1) ** (i + j) * (i + j + 1) * comb(n + i, n - j - 1) * comb(n + j, n - i - 1) * comb(i + j, i) ** 2
         for j in range(n)]
        for i in range(n)
    ]


def hilbert_inverse(m: int) -> np.ndarray:
    """Inverse Hilbert matrix from the closed-form binomial expression.

    The entries are integers, so the result is exact up to the conversion to
    float.
    """
    _check_order(m)
    return np.array(_hilbert_inverse_exact(m), dtype=float)


@dataclass(frozen=True)
class AsymptoticModel:
    order: int
    sigma2_intr: float
    h: float
    hilbert: np.ndarray
    hilbert_inv: np.ndarray

    @classmethod
    def build(cls, order: int, sigma2_intr: float, h: float) -> "AsymptoticModel":
        if not 0 <= h <= 1:
            raise ValueError("h must lie in [0, 1]")
        return cls(order, float(sigma2_intr), float(h), hilbert_matrix(order), hilbert_inverse(order))

    @classmethod
    def from_noise(cls, order: int, noise: NoiseModel) -> "AsymptoticModel":
        mom = intrinsic_moments(noise)
        return cls.build(order, mom.intrinsic_variance, min(mom.density_at_boundary, 1.0))

    @property
    def factor(self) -> float:
        """``sigma^2 / (1 - h)^2``."""
        if 1.0 - self.h < EXCEPTIONAL_H_GAP:
            raise ExceptionalCaseError(
                f"f(-1/2) = {self.h:.9g} is within {EXCEPTIONAL_H_GAP:g} of 1; no normal limit covariance"
            )
        return self.sigma2_intr / (1.0 - self.h) ** 2


def scaling_vector(N: int, m: int) -> np.ndarray:
    """``[sqrt(N), N sqrt(N), ..., N**m sqrt(N)]``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return float(N) ** (np.arange(m + 1) + 0.5)


def asymptotic_covariance(model: AsymptoticModel, N: int) -> np.ndarray:
    """Normal-limit covariance of the dealiased error vector at sample size ``N``.

    Entry ``(i, k)`` is ``sigma^2/(1-h)^2 * Cinv[i, k] / N**(i + k + 1)``.
    """
    s = scaling_vector(N, model.order)
    return model.factor * model.hilbert_inv / np.outer(s, s)


def crb(N: int, m: int, snr: float, origin: int = 1) -> np.ndarray:
    """Known-amplitude Cramer-Rao bound for the coefficients, in cycles^2.

    ``(V'V)^-1 / (8 pi^2 snr)`` with ``V[n, k] = n**k``, ``n = origin ..
    origin+N-1``, evaluated through a column-scaled QR factorisation.
    """
    if not snr > 0:
        raise ValueError("snr must be positive")
    _check_order(m)
    if N < m + 1:
        raise ValueError("need N >= m + 1 for a finite bound")
    n = np.arange(origin, origin + N, dtype=float)
    scale = float(np.max(np.abs(n))) or 1.0
    V = np.vander(n / scale, m + 1, increasing=True)
    cond = np.linalg.cond(V)
    if not cond <= MAX_CONDITION:
        raise ConditioningError(f"Vandermonde condition number {cond:.3g} exceeds {MAX_CONDITION:g}")
    R = np.linalg.qr(V, mode="r")
    Rinv = np.linalg.inv(R)
    d = scale ** -np.arange(m + 1.0)
    return (Rinv @ Rinv.T) * np.outer(d, d) / (8 * math.pi**2 * snr)
