"""Least squares unwrapping (LSU) estimation of polynomial phase coefficients.

For fixed coefficients ``mu`` the objective

    SS(mu) = sum_n fracpart(theta_n - sum_k mu_k n**k)**2

equals ``min_w ||theta - V mu - w||**2`` over integer ``w``.  Eliminating
``mu`` by least squares leaves a closest-point problem in the projection of
``Z^N`` onto the orthogonal complement of the Vandermonde column space.  The
projections of ``e_{m+2} .. e_N`` form a basis of that lattice because every
polynomial taking 0/1 values at ``m+1`` consecutive integers is integer
valued.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np

from . import latticecore as lc
from .circular import PhaseSeries, fracpart, profile_offset_ss, round_half_up
from .polylattice import dealias, dealias_with_coset, poly_phase_mod1, region

__all__ = [
    "SOLVERS",
    "LsuProblem",
    "LsuEstimate",
    "LatticeReduction",
    "ConditioningError",
    "SolverBudgetError",
    "objective_ss",
    "residuals",
    "reduce_to_lattice",
    "lsu_estimate",
    "dealiased_error",
    "grid_oracle_estimate",
    "default_solver",
]

SOLVERS = ("sphere", "kbest", "babai", "grid")
MAX_CONDITION = 1e12
DEFAULT_KBEST_K = 4096
SPHERE_MAX_N = 60


class ConditioningError(ValueError):
    pass


@dataclass(frozen=True)
class LsuProblem:
    phases: PhaseSeries
    order: int

    def __post_init__(self):
        if not isinstance(self.phases, PhaseSeries):
            object.__setattr__(self, "phases", PhaseSeries(self.phases))
        if self.order < 0:
            raise ValueError("order must be non-negative")
        if len(self.phases) < self.order + 2:
            raise ValueError(f"need N >= m + 2 samples, got N={len(self.phases)}, m={self.order}")

    @property
    def N(self) -> int:
        return len(self.phases)


@dataclass(frozen=True)
class LsuEstimate:
    mu_hat: np.ndarray
    ss_value: float
    unwrap_vector: np.ndarray
    exact: bool
    solver: str


class SolverBudgetError(RuntimeError):
    """The exact decoder ran out of nodes; ``estimate`` is built from the
    best point it found."""

    def __init__(self, estimate: LsuEstimate, budget: int):
        super().__init__(f"sphere decoder exceeded node budget of {budget}")
        self.estimate = estimate
        self.budget = budget


def residuals(mu, phases: PhaseSeries) -> np.ndarray:
    """``fracpart(theta_n - y(n))`` with ``y(n)`` reduced modulo one exactly."""
    y = poly_phase_mod1(mu, phases.origin_index, len(phases))
    return fracpart(phases.values - y)


def objective_ss(mu, phases: PhaseSeries) -> float:
    mu = np.asarray(mu, dtype=float).reshape(-1)
    r = residuals(mu, phases)
    return float(r @ r)


@dataclass(frozen=True, eq=False)
class LatticeReduction:
    """Everything needed to turn phases into a closest-point target and back.

    ``lattice`` is the LLL-reduced lattice in the ``N - m - 1`` dimensional
    frame ``complement' R^N``; ``unimodular`` maps its integer coordinates to
    the unwrapping integers ``w_{m+2} .. w_N``.
    """

    order: int
    origin: int
    N: int
    complement: np.ndarray
    lattice: lc.GenericLattice
    unimodular: np.ndarray
    vq: np.ndarray
    vr: np.ndarray
    scale: float
    projector: np.ndarray = field(repr=False)

    def target(self, phases: PhaseSeries) -> np.ndarray:
        return self.complement.T @ phases.values

    def unwrap_from_coords(self, u) -> np.ndarray:
        w = np.zeros(self.N, dtype=np.int64)
        w[self.order + 1 :] = self.unimodular @ np.asarray(u, dtype=np.int64)
        return w

    def fit(self, values) -> np.ndarray:
        """Least-squares coefficients of ``values`` against ``n**k``."""
        c = np.linalg.solve(self.vr, self.vq.T @ values)
        return c / self.scale ** np.arange(self.order + 1)


def _vandermonde_scaled(origin, N, m):
    n = np.arange(origin, origin + N, dtype=float)
    scale = float(np.max(np.abs(n))) or 1.0
    return np.vander(n / scale, m + 1, increasing=True), scale


@lru_cache(maxsize=32)
def _reduction(origin, N, m):
    V, scale = _vandermonde_scaled(origin, N, m)
    cond = np.linalg.cond(V)
    if not cond <= MAX_CONDITION:
        raise ConditioningError(f"Vandermonde condition number {cond:.3g} exceeds {MAX_CONDITION:g}")
    Qfull, Rfull = np.linalg.qr(V, mode="complete")
    vq = Qfull[:, : m + 1]
    vr = Rfull[: m + 1]
    comp = Qfull[:, m + 1 :]
    gen = comp.T[:, m + 1 :]
    reduced, U = lc.lll_reduce(lc.GenericLattice(gen))
    proj = np.eye(N) - vq @ vq.T
    for a in (vq, vr, comp, U, proj):
        a.setflags(write=False)
    return LatticeReduction(m, origin, N, comp, reduced, U, vq, vr, scale, proj)


def reduce_to_lattice(problem: LsuProblem):
    """Return ``(reduction, target)`` for the problem.

    The reduction is cached per ``(origin, N, m)``; only the target depends
    on the phases.
    """
    ph = problem.phases
    red = _reduction(ph.origin_index, len(ph), problem.order)
    return red, red.target(ph)


def default_solver(N: int) -> str:
    return "sphere" if N <= SPHERE_MAX_N else "kbest"


def _finish(problem, red, u, exact, solver):
    ph = problem.phases
    w = red.unwrap_from_coords(u)
    mu_raw = red.fit(ph.values - w)
    mu_hat, c = dealias_with_coset(mu_raw)
    # integer polynomial removed by dealias, evaluated at the sample indices
    n = range(ph.origin_index, ph.origin_index + len(ph))
    g = np.array([sum(int(ck) * _binom(i, k) for k, ck in enumerate(c)) for i in n], dtype=np.int64)
    return LsuEstimate(mu_hat, objective_ss(mu_hat, ph), w + g, exact, solver)


def _binom(n, k):
    # binom(n, k) for any integer n; k consecutive integers are divisible by k!
    out = 1
    for i in range(k):
        out *= n - i
    return out // factorial(k)


def lsu_estimate(problem: LsuProblem, solver: str | None = None, *, kbest_k: int = DEFAULT_KBEST_K,
                 node_budget: int = lc.DEFAULT_NODE_BUDGET, grid_resolution: float = 1e-3) -> LsuEstimate:
    """LSU estimate of the coefficients, in the identifiable region.

    ``solver`` is one of ``"sphere"``, ``"kbest"``, ``"babai"`` or ``"grid"``;
    ``None`` picks sphere decoding for ``N <= 60`` and K-best above.
    """
    solver = solver or default_solver(problem.N)
    if solver == "grid":
        return grid_oracle_estimate(problem, grid_resolution)
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}")
    red, t = reduce_to_lattice(problem)
    lat = red.lattice
    if solver == "sphere":
        try:
            res = lc.nearest_point_exact(lat, t, node_budget=node_budget)
        except lc.BudgetExceeded as exc:
            est = _finish(problem, red, exc.best.integer_coords, False, solver)
            raise SolverBudgetError(est, node_budget) from exc
    elif solver == "kbest":
        res = lc.nearest_point_kbest(lat, t, kbest_k)
    else:
        res = lc.nearest_point_babai(lat, t)
    return _finish(problem, red, res.integer_coords, res.exact, solver)


def dealiased_error(mu_hat, mu_true) -> np.ndarray:
    """``dealias(mu_true - mu_hat)``."""
    a = np.asarray(mu_hat, dtype=float).reshape(-1)
    b = np.asarray(mu_true, dtype=float).reshape(-1)
    if a.size != b.size:
        raise ValueError("coefficient vectors have different orders")
    return dealias(b - a)


def grid_oracle_estimate(problem: LsuProblem, resolution: float = 1e-3) -> LsuEstimate:
    """Brute-force LSU by grid search, for small problems only.

    Coefficients 1..m are scanned on a grid of step ``resolution`` times the
    region half-width; the constant term is profiled out exactly by the
    cyclic-cut circular mean.  The best grid point is then refined by fixing
    the unwrapping integers and solving the least-squares fit.
    """
    m, N = problem.order, problem.N
    if m > 2 or N > 12 or not 0 < resolution <= 1e-2:
        raise ValueError("grid oracle needs m <= 2, N <= 12, 0 < resolution <= 1e-2")
    ph = problem.phases
    hw = region(m).half_widths
    n = ph.indices.astype(float)
    axes = [np.arange(-hw[k], hw[k], resolution * hw[k]) for k in range(1, m + 1)]
    best_ss, best_mu = np.inf, None
    if m == 0:
        ss, mu0 = profile_offset_ss(ph.values[None, :])
        best_ss, best_mu = ss[0], np.array([mu0[0]])
    else:
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
        powers = np.stack([n ** k for k in range(1, m + 1)], axis=0)
        chunk = max(1, 2_000_000 // N)
        for s in range(0, mesh.shape[0], chunk):
            g = mesh[s : s + chunk]
            resid = ph.values[None, :] - g @ powers
            ss, mu0 = profile_offset_ss(resid)
            i = int(np.argmin(ss))
            if ss[i] < best_ss:
                best_ss, best_mu = ss[i], np.concatenate([[mu0[i]], g[i]])
    raw_ss = objective_ss(best_mu, ph)
    red = _reduction(ph.origin_index, N, m)
    w = _unwrap_at(best_mu, ph)
    mu_ref = red.fit(ph.values - w)
    stable = np.array_equal(_unwrap_at(mu_ref, ph), w)
    mu_hat = dealias(mu_ref)
    ss_ref = objective_ss(mu_hat, ph)
    if ss_ref > raw_ss:
        mu_hat, ss_ref, stable = dealias(best_mu), raw_ss, False
    return LsuEstimate(mu_hat, ss_ref, _unwrap_at(mu_hat, ph), bool(stable), "grid")


def _unwrap_at(mu, ph):
    # w_n = round_half_up(theta_n - y(n)); y(n) is small for the grid oracle's N
    n = ph.indices.astype(float)
    y = np.polynomial.polynomial.polyval(n, np.asarray(mu, dtype=float))
    return round_half_up(ph.values - y).astype(np.int64)
