import math

import numpy as np
import pytest
from scipy import stats

from phaselat.polylattice import region
from phaselat.simharness import (
    CSV_COLUMNS,
    PRESETS,
    SimConfig,
    gen_noise,
    gen_truth,
    run_simulation,
    snr_db_to_sigma_c,
    trial_streams,
    worker_count,
)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(2, (3,), (0.1,), 10)
    with pytest.raises(ValueError):
        SimConfig(1, (10,), (0.0,), 10)
    with pytest.raises(ValueError):
        SimConfig(1, (10,), (0.1,), 0)
    with pytest.raises(ValueError):
        SimConfig(1, (10,), (0.1,), 5, solver="grid")
    cfg = SimConfig.from_snr_db(1, [10], [20.0], 5)
    assert cfg.sigma_c == (pytest.approx(0.1),)
    assert snr_db_to_sigma_c(0.0) == 1.0


def test_presets():
    desk, fig = PRESETS["desk"], PRESETS["paper-fig5"]
    assert (desk.order, desk.sample_sizes, desk.trials) == (2, (10, 20, 40), 500)
    assert (fig.order, fig.sample_sizes, fig.trials) == (3, (10, 50, 200), 2000)
    assert fig.solver_for(200) == "kbest" and fig.solver_for(50) == "sphere"


def test_truth_in_region_and_centred():
    draws = np.array([gen_truth(3, np.random.SeedSequence(7, spawn_key=(i,))) for i in range(20_000)])
    hw = region(3).half_widths
    assert np.all(draws >= -hw) and np.all(draws < hw)
    assert np.all(np.abs(draws.mean(axis=0)) <= 4 * hw / math.sqrt(3 * draws.shape[0]))
    big = np.random.default_rng(0)
    assert all(region(2).contains(gen_truth(2, big)) for _ in range(100_000))


def test_noise_moments_and_circularity():
    count, sigma_c = 100_000, 0.7
    x = gen_noise(count, sigma_c, 11)
    assert abs(np.mean(np.abs(x) ** 2) - sigma_c**2) <= 3 * sigma_c**2 / math.sqrt(count)
    ang = (np.angle(x) + np.pi) / (2 * np.pi)
    res = stats.kstest(ang, "uniform")
    assert res.pvalue > 0.01
    with pytest.raises(ValueError):
        gen_noise(3, 0.0, 1)


def test_streams_deterministic():
    a, b = trial_streams(5, 1, 2, 3)
    a2, _ = trial_streams(5, 1, 2, 3)
    assert np.array_equal(gen_truth(2, a), gen_truth(2, a2))
    assert not np.array_equal(gen_noise(4, 1.0, a), gen_noise(4, 1.0, b))
    assert not np.array_equal(gen_truth(2, trial_streams(5, 1, 2, 4)[0]), gen_truth(2, a))


def test_worker_count(monkeypatch):
    monkeypatch.delenv("PHASELAT_THREADS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("PHASELAT_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2


def test_near_noiseless():
    table = run_simulation(SimConfig(2, (8, 12), (1e-6,), 30))
    assert all(r.sample_mse < 1e-12 for r in table.rows)
    assert all(r.trials_used == 30 and r.solver_exact_fraction == 1.0 for r in table.rows)


def test_table_shape_determinism_and_bounds():
    cfg = SimConfig(1, (6, 10), (0.1, 0.5, 2.0), 40, base_seed=99)
    t1 = run_simulation(cfg)
    t2 = run_simulation(cfg, workers=3)
    csv = t1.to_csv()
    assert csv == t2.to_csv()
    lines = csv.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 1 + 2 * 3 * 2
    hw = region(1).half_widths
    for r in t1.rows:
        assert 0 <= r.sample_mse <= hw[r.k] ** 2 * 4
        assert r.crb > 0
    assert not t1.failures


def test_budget_failures_recorded():
    cfg = SimConfig(2, (30,), (3.0,), 10, node_budget=3)
    table = run_simulation(cfg)
    assert table.failures
    assert all(r.trials_used == 10 - table.failures[(30, 3.0)] for r in table.rows)


def test_mse_monotone_in_noise():
    cfg = SimConfig.from_snr_db(1, (12,), (0, 4, 8, 12, 16, 20), 300)
    table = run_simulation(cfg)
    for k in range(2):
        mse = [r.sample_mse for r in table.select(k=k)]
        # ordered from loud to quiet
        assert all(b <= a * 1.2 for a, b in zip(mse, mse[1:]))


def test_high_snr_matches_theory():
    # at N = 10 the large-sample formula is still far from its limit for
    # m = 3, so the band is checked against the finite-N least-squares
    # covariance there and against the asymptotic one at N = 50
    from phaselat.asymptotics import AsymptoticModel
    from phaselat.circular import NoiseModel

    cfg = SimConfig.from_snr_db(3, (10, 50), (40.0,), 1000)
    table = run_simulation(cfg)
    factor = AsymptoticModel.from_noise(3, NoiseModel(1.0, cfg.sigma_c[0])).factor
    n = np.arange(1, 11, dtype=float)
    V = np.vander(n, 4, increasing=True)
    finite = factor * np.diag(np.linalg.inv(V.T @ V))
    for r in table.select(N=10):
        assert 0.75 <= r.sample_mse / finite[r.k] <= 1.33
    for r in table.select(N=50):
        assert 0.75 <= r.sample_mse / r.theory_var <= 1.33
