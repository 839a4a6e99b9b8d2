"""Polynomial phase estimation by least squares phase unwrapping."""

from .circular import (
    CircularMoments,
    NoiseModel,
    PhaseSeries,
    fracpart,
    intrinsic_moments,
    phase_noise_density,
    sample_intrinsic_mean,
    wrap_phase,
)
from .estimator import LsuEstimate, LsuProblem, dealiased_error, grid_oracle_estimate, lsu_estimate, objective_ss
from .latticecore import (
    GenericLattice,
    NearestPointResult,
    lll_reduce,
    nearest_point_babai,
    nearest_point_exact,
    nearest_point_kbest,
)
from .polylattice import dealias, generator_matrix, is_alias, region, sample_signal

__version__ = "0.1.0"
