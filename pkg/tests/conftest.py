import numpy as np
import pytest

from phaselat.circular import wrap_phase
from phaselat.estimator import LsuProblem
from phaselat.polylattice import region, sample_signal
from phaselat.simharness import gen_noise


def noisy_problem(rng, m, N, sigma_c, rho=1.0, mu=None):
    """Random truth in the identifiable region and the LSU problem it produces."""
    if mu is None:
        mu = region(m).uniform(rng)
    y = sample_signal(mu, 1, N, rho)
    if sigma_c > 0:
        y = y + gen_noise(N, sigma_c, rng)
    return mu, LsuProblem(wrap_phase(y), m)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
