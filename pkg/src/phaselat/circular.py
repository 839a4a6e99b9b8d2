"""Circular arithmetic modulo 1 and the phase noise induced by complex noise.

Phases are measured in cycles and live on ``[-1/2, 1/2)``.  Rounding always
sends half integers upward, so ``fracpart(0.5) == -0.5`` and the two ends of
the interval are identified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

__all__ = [
    "PhaseSeries",
    "NoiseModel",
    "CircularMoments",
    "DegenerateSampleError",
    "round_half_up",
    "fracpart",
    "wrap_phase",
    "phase_noise_density",
    "intrinsic_moments",
    "sample_intrinsic_mean",
    "profile_offset_ss",
]

QUAD_ABS_TOL = 1e-10


class DegenerateSampleError(ValueError):
    """A complex sample has no defined phase."""

    def __init__(self, index):
        super().__init__(f"sample at index {index} is exactly zero and has no phase")
        self.index = index


def round_half_up(x):
    """Nearest integer with half integers rounded toward +inf."""
    return np.floor(np.asarray(x, dtype=float) + 0.5)


def fracpart(x):
    """Centered fractional part ``x - round_half_up(x)``, in ``[-1/2, 1/2)``.

    Works elementwise on arrays; returns a Python float for scalar input.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("fracpart requires finite input")
    f = arr - np.floor(arr + 0.5)
    # x + 0.5 can round up across an integer for x just below a half integer
    f = np.where(f >= 0.5, f - 1.0, f)
    f = np.where(f < -0.5, f + 1.0, f)
    if f.ndim == 0:
        return float(f)
    return f


@dataclass(frozen=True)
class PhaseSeries:
    """Wrapped phases for consecutive sample indices starting at ``origin_index``."""

    values: np.ndarray
    origin_index: int = 1

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size < 1:
            raise ValueError("a phase series needs at least one sample")
        if not np.all(np.isfinite(v)):
            raise ValueError("phases must be finite")
        if np.any(v < -0.5) or np.any(v >= 0.5):
            raise ValueError("phases must lie in [-1/2, 1/2)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "origin_index", int(self.origin_index))

    def __len__(self):
        return self.values.size

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.origin_index, self.origin_index + len(self), dtype=np.int64)


@dataclass(frozen=True)
class NoiseModel:
    """Signal amplitude ``rho`` and total complex noise std ``sigma_c``."""

    rho: float
    sigma_c: float
    kind: str = "circular-gaussian"

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.sigma_c >= 0:
            raise ValueError("sigma_c must be non-negative")
        if self.kind != "circular-gaussian":
            raise ValueError(f"unsupported noise kind {self.kind!r}")

    @classmethod
    def from_snr(cls, snr: float, rho: float = 1.0) -> "NoiseModel":
        """Model with ``rho**2 / sigma_c**2 == snr``."""
        if not snr > 0:
            raise ValueError("snr must be positive")
        return cls(rho=rho, sigma_c=rho / math.sqrt(snr))

    @property
    def snr(self) -> float:
        if self.sigma_c == 0:
            return math.inf
        return (self.rho / self.sigma_c) ** 2


@dataclass(frozen=True)
class CircularMoments:
    intrinsic_mean: float
    intrinsic_variance: float
    density_at_boundary: float


def wrap_phase(samples, origin_index: int = 1) -> PhaseSeries:
    """Complex argument of each sample in cycles, wrapped into ``[-1/2, 1/2)``.

    A negative real sample maps to ``-1/2``.
    """
    y = np.asarray(samples, dtype=complex).reshape(-1)
    zero = np.flatnonzero(y == 0)
    if zero.size:
        raise DegenerateSampleError(origin_index + int(zero[0]))
    return PhaseSeries(fracpart(np.angle(y) / (2 * np.pi)), origin_index)


def _density(phi, snr):
    # Phase density of 1 + X/rho with X circular complex Gaussian, per cycle.
    # Written with erfcx on the c < 0 branch so the boundary value does not
    # cancel catastrophically at high snr.
    phi = np.asarray(phi, dtype=float)
    c = np.cos(2 * np.pi * phi)
    s2 = np.sin(2 * np.pi * phi) ** 2
    rg = math.sqrt(snr)
    a = math.sqrt(math.pi * snr)
    eg = math.exp(-snr)
    with np.errstate(over="ignore", invalid="ignore"):
        pos = eg + a * c * np.exp(-snr * s2) * special.erfc(-rg * c)
        neg = eg * (1.0 + a * c * special.erfcx(-rg * c))
    return np.where(c >= 0, pos, neg)


def phase_noise_density(model: NoiseModel, phi):
    """Density of the wrapped phase noise ``angle(1 + X/rho) / (2 pi)``.

    Normalised so that it integrates to one over ``[-1/2, 1/2)``.
    """
    if model.sigma_c == 0:
        raise ValueError("noiseless model: phase noise is a point mass at 0")
    phi_arr = np.asarray(phi, dtype=float)
    if np.any(phi_arr < -0.5) or np.any(phi_arr >= 0.5):
        raise ValueError("phi must lie in [-1/2, 1/2)")
    out = _density(phi_arr, model.snr)
    if out.ndim == 0:
        return float(out)
    return out


def _breakpoints(snr):
    # split [-1/2, 1/2) around the peak so quad sees its width at high snr
    width = 1.0 / (2 * np.pi * math.sqrt(2 * snr))
    pts = {0.0}
    for k in (1, 2, 4, 8, 16):
        if k * width < 0.5:
            pts.update((k * width, -k * width))
    return [-0.5] + sorted(pts) + [0.5]


def _integrate(fn, snr, tol=QUAD_ABS_TOL):
    edges = _breakpoints(snr)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(fn, a, b, epsabs=tol / len(edges), epsrel=1e-12, limit=200)
        total += val
    return total


def intrinsic_moments(model: NoiseModel) -> CircularMoments:
    """Intrinsic mean, intrinsic variance and boundary density ``f(-1/2)``.

    The noise is circularly symmetric with density nonincreasing in modulus,
    so the intrinsic mean is zero and the intrinsic variance is the ordinary
    second moment about zero.
    """
    if model.sigma_c == 0:
        raise ValueError("noiseless model has no phase noise moments")
    snr = model.snr
    var = _integrate(lambda p: p * p * float(_density(p, snr)), snr)
    h = float(_density(-0.5, snr))
    return CircularMoments(0.0, var, max(h, 0.0))


def profile_offset_ss(residuals):
    """Minimum over ``mu`` of ``sum fracpart(r - mu)**2`` for each row.

    ``residuals`` is ``(..., N)``.  Returns ``(min_ss, best_mu)`` using the
    cyclic-cut enumeration: sort, shift the ``i`` smallest up by one, and take
    the variance of each unwrapped configuration.
    """
    r = np.sort(fracpart(np.atleast_1d(residuals)), axis=-1)
    n = r.shape[-1]
    i = np.arange(n + 1)
    head = np.concatenate([np.zeros(r.shape[:-1] + (1,)), np.cumsum(r, axis=-1)], axis=-1)
    head2 = np.concatenate([np.zeros(r.shape[:-1] + (1,)), np.cumsum(r * r, axis=-1)], axis=-1)
    s1 = head[..., -1:] + i
    s2 = head2[..., -1:] + 2 * head + i
    ss = s2 - s1 * s1 / n
    best = np.argmin(ss, axis=-1)
    min_ss = np.take_along_axis(ss, best[..., None], axis=-1)[..., 0]
    mu = fracpart(np.take_along_axis(s1, best[..., None], axis=-1)[..., 0] / n)
    return np.maximum(min_ss, 0.0), mu


def sample_intrinsic_mean(phases) -> float:
    """Sample intrinsic mean: the ``mu`` in ``[-1/2, 1/2)`` minimising
    ``sum fracpart(theta - mu)**2``.  Ties go to the smallest ``mu``."""
    theta = phases.values if isinstance(phases, PhaseSeries) else np.asarray(phases, dtype=float)
    theta = np.atleast_1d(theta)
    r = np.sort(theta)
    n = r.size
    candidates = fracpart((r.sum() + np.arange(n + 1)) / n)
    ss = np.array([np.sum(fracpart(theta - c) ** 2) for c in candidates])
    tol = 1e-12 * max(1.0, n)
    tied = candidates[ss <= ss.min() + tol]
    return float(tied.min())
