"""The lattice of integer-valued polynomial coefficients and its rectangular cell.

Coefficient vectors are plain 1-D float arrays; index ``k`` holds the
coefficient of ``t**k`` and the polynomial order is ``len(x) - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np

from .circular import fracpart, round_half_up

__all__ = [
    "INTEGRALITY_TOL",
    "PolyLattice",
    "IdentifiableRegion",
    "integer_valued_poly_coeffs",
    "generator_matrix",
    "generator_inverse",
    "region",
    "dealias",
    "dealias_with_coset",
    "is_alias",
    "lattice_point",
    "alias_of",
    "poly_phase_mod1",
    "sample_signal",
]

INTEGRALITY_TOL = 1e-9
MAX_ORDER = 10
MAX_POLY_INDEX = 30


@lru_cache(maxsize=None)
def _stirling1_row(k):
    # signed Stirling numbers of the first kind: x(x-1)...(x-k+1) = sum s(k,j) x^j
    row = [1]
    for i in range(k):
        nxt = [0] * (len(row) + 1)
        for j, c in enumerate(row):
            nxt[j + 1] += c
            nxt[j] -= i * c
        row = nxt
    return tuple(row)


@lru_cache(maxsize=None)
def _stirling2(n, k):
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * _stirling2(n - 1, k) + _stirling2(n - 1, k - 1)


def integer_valued_poly_coeffs(k: int) -> np.ndarray:
    """Monomial coefficients of ``binom(x, k) = x(x-1)...(x-k+1)/k!``."""
    if not 0 <= k <= MAX_POLY_INDEX:
        raise ValueError(f"k must be in [0, {MAX_POLY_INDEX}], got {k}")
    kf = factorial(k)
    return np.array([float(Fraction(c, kf)) for c in _stirling1_row(k)])


@dataclass(frozen=True)
class PolyLattice:
    order: int
    generator: np.ndarray

    @property
    def dim(self) -> int:
        return self.order + 1


@dataclass(frozen=True)
class IdentifiableRegion:
    """The box ``prod_k [-0.5/k!, 0.5/k!)``."""

    order: int
    half_widths: np.ndarray

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= -self.half_widths) and np.all(x < self.half_widths))

    def uniform(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-self.half_widths, self.half_widths)


def _check_order(m):
    if not 0 <= m <= MAX_ORDER:
        raise ValueError(f"order must be in [0, {MAX_ORDER}], got {m}")


@lru_cache(maxsize=None)
def _generator(m):
    P = np.zeros((m + 1, m + 1))
    for k in range(m + 1):
        P[: k + 1, k] = integer_valued_poly_coeffs(k)
    P.setflags(write=False)
    return P


@lru_cache(maxsize=None)
def _generator_inverse(m):
    # x^j = sum_k S(j,k) k! binom(x,k), so the inverse is an integer matrix
    Pinv = np.zeros((m + 1, m + 1))
    for k in range(m + 1):
        for j in range(k, m + 1):
            Pinv[k, j] = _stirling2(j, k) * factorial(k)
    Pinv.setflags(write=False)
    return Pinv


def generator_matrix(m: int) -> PolyLattice:
    _check_order(m)
    return PolyLattice(m, _generator(m))


def generator_inverse(m: int) -> np.ndarray:
    """Exact inverse of the generator (integer entries)."""
    _check_order(m)
    return _generator_inverse(m)


@lru_cache(maxsize=None)
def _half_widths(m):
    hw = np.array([0.5 / factorial(k) for k in range(m + 1)])
    hw.setflags(write=False)
    return hw


def region(m: int) -> IdentifiableRegion:
    _check_order(m)
    return IdentifiableRegion(m, _half_widths(m))


def dealias_with_coset(x):
    """Return ``(z, c)`` with ``z`` in the identifiable region and
    ``x - z == P @ c`` for the integer vector ``c``.

    Back-substitution from the highest order down; each step only disturbs
    lower-order coordinates because ``P`` is upper triangular.
    """
    cur = np.array(x, dtype=float).reshape(-1)
    m = cur.size - 1
    _check_order(m)
    if not np.all(np.isfinite(cur)):
        raise ValueError("dealias requires finite input")
    P = _generator(m)
    hw = _half_widths(m)
    c = np.zeros(m + 1, dtype=np.int64)
    for k in range(m, -1, -1):
        kf = factorial(k)
        scaled = kf * cur[k]
        ck = round_half_up(scaled)
        c[k] = int(ck)
        cur[:k] -= ck * P[:k, k]
        zk = fracpart(scaled) / kf
        if zk >= hw[k]:
            zk = -hw[k]
        cur[k] = zk
    return cur, c


def dealias(x) -> np.ndarray:
    """Coset representative of ``x`` inside the identifiable region."""
    return dealias_with_coset(x)[0]


def is_alias(y, z, tol: float = INTEGRALITY_TOL) -> bool:
    """True iff ``y - z`` is a point of the integer-valued-polynomial lattice."""
    y = np.asarray(y, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    if y.size != z.size:
        raise ValueError("coefficient vectors have different orders")
    _check_order(y.size - 1)
    u = generator_inverse(y.size - 1) @ (y - z)
    return bool(np.all(np.abs(u - np.round(u)) <= tol))


def _exact_lattice_point(c):
    m = len(c) - 1
    out = [Fraction(0)] * (m + 1)
    for k, ck in enumerate(c):
        kf = factorial(k)
        for j, s in enumerate(_stirling1_row(k)):
            out[j] += Fraction(int(ck) * s, kf)
    return out


def lattice_point(c) -> np.ndarray:
    """Coefficients of ``sum_k c_k binom(t, k)``, each rounded once."""
    c = np.asarray(c).reshape(-1)
    _check_order(c.size - 1)
    return np.array([float(v) for v in _exact_lattice_point(c)])


def alias_of(mu, c) -> np.ndarray:
    """``mu + lattice_point(c)`` with a single rounding per coefficient."""
    mu = np.asarray(mu, dtype=float).reshape(-1)
    c = np.asarray(c).reshape(-1)
    if mu.size != c.size:
        raise ValueError("coefficient and lattice vectors have different lengths")
    _check_order(c.size - 1)
    return np.array([float(Fraction(a) + p) for a, p in zip(mu, _exact_lattice_point(c))])


def _split(a):
    # Veltkamp split: a == hi + lo with each half carrying <= 26 bits
    t = 134217729.0 * a
    hi = t - (t - a)
    return hi, a - hi


def _two_product(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


@lru_cache(maxsize=64)
def _power_limbs(first, count, m):
    # n**k split into float limbs whose exact sum is the integer n**k
    limbs = []
    for k in range(m + 1):
        cols = []
        rem = [pow(n, k) for n in range(first, first + count)]
        while any(rem):
            f = [float(r) for r in rem]
            cols.append(np.array(f))
            rem = [r - int(v) for r, v in zip(rem, f)]
        limbs.append(tuple(cols) if cols else (np.zeros(count),))
    return tuple(limbs)


def poly_phase_mod1(mu, first: int, count: int) -> np.ndarray:
    """``fracpart(sum_k mu_k n**k)`` for ``n = first .. first+count-1``.

    Each product ``mu_k * n**k`` is formed as an exact float pair and reduced
    modulo one before summing, so precision holds for large ``n``.
    """
    mu = np.asarray(mu, dtype=float).reshape(-1)
    limbs = _power_limbs(int(first), int(count), mu.size - 1)
    acc = np.zeros(count)
    err = np.zeros(count)
    for k, cols in enumerate(limbs):
        for q in cols:
            p, e = _two_product(np.full(count, mu[k]), q)
            acc += fracpart(p)
            err += fracpart(e)
            acc = fracpart(acc)
    return fracpart(acc + err)


def sample_signal(mu, n_start: int, n_count: int, rho: float = 1.0) -> np.ndarray:
    """Noiseless samples ``rho * exp(2 pi j y(n))``."""
    if n_count < 1:
        raise ValueError("n_count must be at least 1")
    if not rho > 0:
        raise ValueError("rho must be positive")
    phase = poly_phase_mod1(mu, n_start, n_count)
    return rho * np.exp(2j * np.pi * phase)
