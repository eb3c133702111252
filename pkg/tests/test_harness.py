import io
import math
from dataclasses import replace

import numpy as np
import pytest

from twrsim import ClockParams, NoiseModel, Protocol, Scene, ZeroMeasurements
from twrsim.analytics import ds_variance
from twrsim.harness import (
    SWEEP_COLUMNS,
    TrialConfig,
    analytic_argmin,
    drift_variance_inflation,
    empirical_argmin,
    expected_ss_mean,
    run_session,
    run_trial,
    ss_drift_experiment,
    sweep_csv_text,
    sweep_dt53,
    sweep_grid,
    trial_errors,
    variance_interval,
)
from twrsim.optimizer import r_avg
from twrsim.protocol import read_timestamp_csv

from conftest import R_REF


def skewed(ppm_i, ppm_j, **kw):
    return TrialConfig(clocks=(ClockParams.from_ppm(ppm_i), ClockParams.from_ppm(ppm_j)), **kw)


def test_noise_free_trial_is_exact():
    cfg = TrialConfig(n_measurements=64, noise=NoiseModel.noiseless())
    for protocol in Protocol:
        # longdouble rounding of intervals near 1e-3 s is ~1e-23 s
        assert np.max(np.abs(trial_errors(cfg, protocol))) < 1e-21


def test_noise_free_ds_with_skew_is_near_exact():
    cfg = replace(skewed(40, -40), n_measurements=16, noise=NoiseModel.noiseless())
    # what remains is clock i's scale error on the flight time itself
    np.testing.assert_allclose(trial_errors(cfg, Protocol.DS), 40e-6 * cfg.scene.tof_initial, rtol=1e-6)


def test_ds_variance_in_chi_square_band():
    cfg = replace(skewed(20, -20), n_measurements=200_000)
    res = run_trial(cfg, Protocol.DS)
    expected = ds_variance(R_REF, 3.5e-4, 1.9e-3)
    lo, hi = variance_interval(expected, res.n, 0.999)
    assert lo <= res.variance <= hi


def test_ss_variance_and_bias():
    cfg = replace(skewed(20, -20), n_measurements=200_000)
    res = run_trial(cfg, Protocol.SS)
    lo, hi = variance_interval(R_REF, res.n, 0.999)
    assert lo <= res.variance <= hi
    assert expected_ss_mean(cfg) == pytest.approx(0.5 * 40e-6 * 3.5e-4)
    assert abs(res.mean_error - expected_ss_mean(cfg)) < 4 * res.standard_error


def test_trial_reproducible_from_seed():
    cfg = TrialConfig(n_measurements=1000, seed=7)
    assert run_trial(cfg) == run_trial(cfg)
    assert run_trial(cfg) != run_trial(replace(cfg, seed=8))


def test_trial_result_units():
    cfg = TrialConfig(n_measurements=50_000)
    res = run_trial(cfg, Protocol.SS)
    assert res.std_cm == pytest.approx(2.5, rel=0.02)


def test_trial_rejects_tiny_n():
    with pytest.raises(ValueError):
        TrialConfig(n_measurements=1)


def test_timestamp_log_round_trip():
    buf = io.StringIO()
    cfg = TrialConfig(n_measurements=10)
    errors = trial_errors(cfg, Protocol.DS, log=buf)
    buf.seek(0)
    rows = read_timestamp_csv(buf)
    assert len(rows) == 10
    assert errors.shape == (10,)


def test_variance_interval_contains_truth():
    lo, hi = variance_interval(2.0, 1000, 0.99)
    assert lo < 2.0 < hi
    lo2, hi2 = variance_interval(2.0, 100_000, 0.99)
    assert lo < lo2 < hi2 < hi


# -- sweeps -------------------------------------------------------------------


def test_sweep_grid_shapes():
    g = sweep_grid(2e-4, 2e-2, 200)
    assert g.size == 200 and g[0] == pytest.approx(2e-4) and g[-1] == pytest.approx(2e-2)
    assert np.allclose(np.diff(np.log(g)), math.log(100) / 199)
    assert np.allclose(np.diff(sweep_grid(1e-3, 2e-3, 11, log_spaced=False)), 1e-4)
    assert sweep_grid(1e-3, 1e-3, 1).tolist() == [1e-3]


@pytest.mark.parametrize("args", [(0.0, 1e-2, 5), (1e-3, 1e-2, 0), (2e-3, 1e-3, 5)])
def test_sweep_grid_rejects(args):
    with pytest.raises(ValueError):
        sweep_grid(*args)


def test_sweep_single_point():
    rows = sweep_dt53(TrialConfig(n_measurements=500), [1.9e-3])
    assert len(rows) == 1
    assert empirical_argmin(rows) == analytic_argmin(rows) == 1.9e-3


def test_sweep_row_columns():
    (row,) = sweep_dt53(TrialConfig(n_measurements=500), [1.9e-3])
    assert row.empirical_rate == 105
    assert row.analytic_std == pytest.approx(math.sqrt(ds_variance(R_REF, 3.5e-4, 1.9e-3)))
    assert row.analytic_r_avg == pytest.approx(r_avg(1.9e-3, TrialConfig().objective()), rel=1e-12)
    assert row.empirical_r_avg == pytest.approx(row.empirical_std**2 * 9.45e-3, rel=1e-12)


def test_sweep_csv_format():
    rows = sweep_dt53(TrialConfig(n_measurements=500), sweep_grid(5e-4, 5e-3, 5))
    lines = sweep_csv_text(rows).splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    assert len(lines) == 6
    for line in lines[1:]:
        assert len(line.split(",")) == 6
        float(line.split(",")[0])


def test_sweep_bytes_deterministic():
    grid = sweep_grid(5e-4, 5e-3, 8)
    base = TrialConfig(n_measurements=300, seed=3)
    a = sweep_csv_text(sweep_dt53(base, grid))
    assert a == sweep_csv_text(sweep_dt53(base, grid))
    assert a != sweep_csv_text(sweep_dt53(replace(base, seed=4), grid))


def test_sweep_independent_streams_differ():
    grid = [1e-3, 1e-3]
    crn = sweep_dt53(TrialConfig(n_measurements=300), grid)
    ind = sweep_dt53(TrialConfig(n_measurements=300), grid, common_random_numbers=False)
    assert crn[0] == crn[1]
    assert ind[0] != ind[1]


def test_sweep_workers_match_serial():
    grid = sweep_grid(5e-4, 5e-3, 6)
    base = TrialConfig(n_measurements=400)
    assert sweep_dt53(base, grid, workers=2) == sweep_dt53(base, grid)


def test_sweep_rejects_nonpositive():
    with pytest.raises(ValueError):
        sweep_dt53(TrialConfig(), [1e-3, 0.0])


# -- sessions and drift -------------------------------------------------------


def test_session_count():
    res, count = run_session(1.0, TrialConfig())
    assert count == 105 == res.n


def test_session_too_short():
    with pytest.raises(ZeroMeasurements):
        run_session(9e-3, TrialConfig())
    with pytest.raises(ZeroMeasurements):
        run_session(0.0, TrialConfig())


def test_session_mean_variance_matches_r_avg():
    cfg = TrialConfig()
    rng = np.random.default_rng(99)
    means = [run_session(1.0, cfg, rng=rng)[0].mean_error for _ in range(400)]
    predicted = r_avg(1.9e-3, cfg.objective()) / 1.0
    lo, hi = variance_interval(predicted, len(means), 0.999)
    # floor(1/period) = 105 rather than 1/period = 105.8 shifts the target by <1%
    assert lo <= np.var(means, ddof=1) <= hi * 1.01


def test_session_with_skew_keeps_ds_unbiased():
    cfg = replace(skewed(30, -30), noise=NoiseModel.noiseless())
    res, _ = run_session(1.0, cfg)
    assert res.mean_error == pytest.approx(30e-6 * cfg.scene.tof_initial, rel=1e-6)
    assert res.variance < 1e-40


def test_drift_zero_matches_plain_ss():
    cfg = replace(skewed(10, -10), n_measurements=20_000)
    res = ss_drift_experiment(cfg, 0.0)
    assert abs(res.mean_error - expected_ss_mean(cfg)) < 4 * res.standard_error


def test_drift_inflates_variance():
    dt32 = 3.5e-4
    drift = 2 * 1e-9 / dt32  # bias walks through a 1 ns span (+-0.5 ns)
    cfg = replace(skewed(-2.857, 0), n_measurements=100_000)
    res = ss_drift_experiment(cfg, drift)
    expected_var = R_REF + drift_variance_inflation(drift, dt32)
    assert drift_variance_inflation(drift, dt32) == pytest.approx(1e-18 / 12)
    lo, hi = variance_interval(expected_var, res.n, 0.999)
    assert lo * 0.98 <= res.variance <= hi * 1.02
    mid = expected_ss_mean(cfg) + 0.25 * drift * dt32
    assert abs(res.mean_error - mid) < 4 * res.standard_error


def test_drift_out_of_range():
    with pytest.raises(ValueError):
        ss_drift_experiment(TrialConfig(n_measurements=10), 2e-3)
