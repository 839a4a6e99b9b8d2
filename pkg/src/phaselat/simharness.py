"""Monte-Carlo harness for the mean square error of the LSU estimator.

Every trial draws from its own Philox stream keyed by
``(base_seed, N index, noise index, trial, purpose)``, so a table depends
only on its configuration and never on worker count or scheduling.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import AsymptoticModel, ExceptionalCaseError, asymptotic_covariance, crb
from .circular import NoiseModel, wrap_phase
from .estimator import (
    DEFAULT_KBEST_K,
    LsuProblem,
    SolverBudgetError,
    dealiased_error,
    default_solver,
    lsu_estimate,
    reduce_to_lattice,
    residuals,
)
from .latticecore import DEFAULT_NODE_BUDGET
from .polylattice import region, sample_signal

__all__ = [
    "CSV_COLUMNS",
    "PRESETS",
    "SimConfig",
    "MseRow",
    "MseTable",
    "TrialOutcome",
    "gen_truth",
    "gen_noise",
    "trial_streams",
    "run_trial",
    "run_simulation",
    "snr_db_to_sigma_c",
    "worker_count",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "m", "N", "sigma_c2", "snr_db", "k", "sample_mse", "theory_var", "crb", "trials_used", "solver_exact_fraction",
)
DEFAULT_SEED = 20240611
_TRUTH, _NOISE = 0, 1


def snr_db_to_sigma_c(snr_db: float, rho: float = 1.0) -> float:
    return rho * 10.0 ** (-snr_db / 20.0)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def trial_streams(base_seed: int, n_index: int, s_index: int, trial: int):
    """Seed sequences for the truth and noise draws of one trial."""
    key = (n_index, s_index, trial)
    return (
        np.random.SeedSequence(base_seed, spawn_key=key + (_TRUTH,)),
        np.random.SeedSequence(base_seed, spawn_key=key + (_NOISE,)),
    )


def gen_truth(m: int, seed) -> np.ndarray:
    """Coefficients uniform on the identifiable region."""
    return region(m).uniform(_rng(seed))


def gen_noise(n_count: int, sigma_c: float, seed) -> np.ndarray:
    """Circular complex Gaussian noise with ``E|X|^2 = sigma_c^2``."""
    if not sigma_c > 0:
        raise ValueError("sigma_c must be positive")
    z = _rng(seed).standard_normal((n_count, 2))
    return (sigma_c / math.sqrt(2.0)) * (z[:, 0] + 1j * z[:, 1])


@dataclass(frozen=True)
class SimConfig:
    order: int
    sample_sizes: tuple
    sigma_c: tuple
    trials: int
    base_seed: int = DEFAULT_SEED
    solver: str = "auto"
    kbest_k: int = DEFAULT_KBEST_K
    node_budget: int = DEFAULT_NODE_BUDGET
    rho: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "sigma_c", tuple(float(s) for s in self.sigma_c))
        if self.order < 0:
            raise ValueError("order must be non-negative")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.sample_sizes or any(n < self.order + 2 for n in self.sample_sizes):
            raise ValueError(f"every N must be at least m + 2 = {self.order + 2}")
        if not self.sigma_c or any(not s > 0 for s in self.sigma_c):
            raise ValueError("noise grid must be non-empty with sigma_c > 0")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.solver not in ("auto", "sphere", "kbest", "babai"):
            raise ValueError(f"unknown solver {self.solver!r}")

    @classmethod
    def from_snr_db(cls, order, sample_sizes, snr_db, trials, rho=1.0, **kw) -> "SimConfig":
        return cls(order, tuple(sample_sizes), tuple(snr_db_to_sigma_c(s, rho) for s in snr_db), trials, rho=rho, **kw)

    def solver_for(self, N: int) -> str:
        return default_solver(N) if self.solver == "auto" else self.solver


_SNR_GRID = tuple(range(0, 41, 4))

PRESETS = {
    "desk": SimConfig.from_snr_db(2, (10, 20, 40), _SNR_GRID, 500),
    "paper-fig5": SimConfig.from_snr_db(3, (10, 50, 200), _SNR_GRID, 2000),
}


@dataclass(frozen=True)
class TrialOutcome:
    error: np.ndarray | None
    exact: bool
    failed: bool
    max_residual: float = math.nan


def run_trial(config: SimConfig, n_index: int, s_index: int, trial: int) -> TrialOutcome:
    """One replication: draw truth and noise, estimate, dealias the error."""
    N = config.sample_sizes[n_index]
    sigma_c = config.sigma_c[s_index]
    truth_seed, noise_seed = trial_streams(config.base_seed, n_index, s_index, trial)
    mu = gen_truth(config.order, truth_seed)
    y = sample_signal(mu, 1, N, config.rho) + gen_noise(N, sigma_c, noise_seed)
    problem = LsuProblem(wrap_phase(y), config.order)
    try:
        est = lsu_estimate(problem, config.solver_for(N), kbest_k=config.kbest_k, node_budget=config.node_budget)
    except SolverBudgetError:
        return TrialOutcome(None, False, True)
    margin = float(np.max(np.abs(residuals(est.mu_hat, problem.phases))))
    return TrialOutcome(dealiased_error(est.mu_hat, mu), est.exact, False, margin)


@dataclass(frozen=True)
class MseRow:
    m: int
    N: int
    sigma_c2: float
    snr_db: float
    k: int
    sample_mse: float
    theory_var: float
    crb: float
    trials_used: int
    solver_exact_fraction: float

    def as_tuple(self):
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class MseTable:
    rows: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)
    trials: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r.as_tuple()])
        return buf.getvalue()

    def select(self, **kw) -> list:
        return [r for r in self.rows if all(getattr(r, a) == v for a, v in kw.items())]


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("PHASELAT_THREADS")
    if env:
        return max(1, int(env))
    return 1


def _theory(config, N, sigma_c):
    m = config.order
    noise = NoiseModel(config.rho, sigma_c)
    try:
        theory = np.diag(asymptotic_covariance(AsymptoticModel.from_noise(m, noise), N))
    except ExceptionalCaseError:
        theory = np.full(m + 1, math.nan)
    return theory, np.diag(crb(N, m, noise.snr))


def run_simulation(config: SimConfig, workers: int | None = None, keep_trials: bool = False) -> MseTable:
    """Run every ``(N, sigma_c)`` cell and aggregate per-coefficient MSE.

    Trials whose decoder runs out of budget are excluded from the MSE and
    show up as ``trials_used < trials`` (and in ``MseTable.failures``).
    With ``keep_trials`` the per-trial outcomes are kept in
    ``MseTable.trials`` keyed by ``(N, sigma_c)``.
    """
    nworkers = worker_count(workers)
    m, T = config.order, config.trials
    table = MseTable()
    for i_n, N in enumerate(config.sample_sizes):
        # build the cached lattice once, outside the pool
        reduce_to_lattice(LsuProblem(np.zeros(N), m))
        for i_s, sigma_c in enumerate(config.sigma_c):
            if nworkers == 1:
                outcomes = [run_trial(config, i_n, i_s, t) for t in range(T)]
            else:
                with ThreadPoolExecutor(nworkers) as pool:
                    outcomes = list(pool.map(lambda t: run_trial(config, i_n, i_s, t), range(T)))
            if keep_trials:
                table.trials[(N, sigma_c)] = outcomes
            good = [o for o in outcomes if not o.failed]
            nfail = T - len(good)
            if nfail:
                table.failures[(N, sigma_c)] = nfail
                log.warning("N=%d sigma_c=%g: %d trials exceeded the node budget", N, sigma_c, nfail)
            theory, bound = _theory(config, N, sigma_c)
            exact_frac = sum(o.exact for o in good) / len(good) if good else math.nan
            # rounded so grids given in dB print as the values entered
            snr_db = round(20.0 * math.log10(config.rho / sigma_c), 9)
            for k in range(m + 1):
                mse = math.fsum(float(o.error[k]) ** 2 for o in good) / len(good) if good else math.nan
                table.rows.append(MseRow(m, N, sigma_c**2, snr_db, k, mse, float(theory[k]), float(bound[k]),
                                         len(good), exact_frac))
            log.info("N=%d snr=%.1f dB done", N, snr_db)
    return table
