"""Ensemble statistics, Born-rule deviation metrics and field-strength calibration."""
import functools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pointer_collapse.dynamics import ModelParams, macroscopic_probability
from pointer_collapse.ensemble import (
    CalibrationRangeError,
    EnsembleStats,
    born_deviation,
    calibrate_b0,
    run_ensemble,
    symmetric_grid,
    wilson_interval,
)
from pointer_collapse.integrate import IntegratorConfig
from pointer_collapse.noise import NoiseConfig, NoiseMode

UNIT = ModelParams()
FROZEN = NoiseConfig(NoiseMode.FROZEN, seed=1)
PER_STEP = NoiseConfig(NoiseMode.PER_STEP, seed=1)
# long horizon so frozen-noise runs starting near the unstable point resolve
MACRO = IntegratorConfig(dt=0.02, max_steps=20000)
# per-step noise with a step of ten collapse times
FIG2 = IntegratorConfig(dt=10.0, max_steps=8000, substeps=0)


def synthetic(p_hat, grid=None, trials=10_000):
    grid = symmetric_grid() if grid is None else grid
    n = np.full(grid.size, trials)
    return EnsembleStats(grid, n, np.rint(np.asarray(p_hat) * trials), np.zeros(grid.size), np.zeros(grid.size))


# --- helpers and metrics -----------------------------------------------------
def test_symmetric_grid():
    g = symmetric_grid()
    assert g.size == 11
    assert g[0] == pytest.approx(math.pi / 12) and g[-1] == pytest.approx(11 * math.pi / 12)
    assert np.allclose(g + g[::-1], math.pi)


@given(st.integers(1, 10_000), st.data())
def test_wilson_interval_contains_estimate(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = wilson_interval(k, n)
    assert 0.0 <= lo <= k / n <= hi <= 1.0


def test_stats_validation():
    with pytest.raises(ValueError):
        EnsembleStats([1.0], [10], [11], [0], [0])


def test_born_deviation_exact_profile_is_zero():
    grid = symmetric_grid()
    stats = EnsembleStats(grid, np.full(11, 4), np.full(11, 0), np.zeros(11), np.zeros(11))
    stats.up_down = np.cos(grid / 2) ** 2 * 4  # exact, non-integer on purpose
    for metric in ("max_abs", "l2", "signed_mean", "folded_mean"):
        assert born_deviation(stats, metric) == pytest.approx(0.0, abs=1e-15)


def test_born_deviation_flat_profile():
    stats = synthetic(np.full(11, 0.5))
    assert born_deviation(stats, "signed_mean") == pytest.approx(0.0, abs=1e-12)
    assert born_deviation(stats, "max_abs") == pytest.approx(math.cos(math.pi / 24) ** 2 - 0.5)
    assert born_deviation(stats, "folded_mean") < -0.2


def test_born_deviation_step_profile_is_positive_when_folded():
    grid = symmetric_grid()
    stats = synthetic(np.where(grid < math.pi / 2, 1.0, np.where(grid > math.pi / 2, 0.0, 0.5)))
    assert born_deviation(stats, "folded_mean") > 0.1
    with pytest.raises(ValueError):
        born_deviation(stats, "median")


def test_csv_rows():
    stats = synthetic(np.full(11, 0.5))
    rows = list(stats.rows())
    assert len(rows) == 11 and len(rows[0]) == len(EnsembleStats.CSV_COLUMNS)
    assert rows[0][1] == pytest.approx(math.sin(math.pi / 24) ** 2)


def test_merge_adds_counts():
    a = run_ensemble([0.5, 2.0], 50, UNIT, FROZEN, MACRO)
    b = run_ensemble([0.5, 2.0], 70, UNIT, NoiseConfig(NoiseMode.FROZEN, seed=2), MACRO)
    m = a.merge(b)
    assert list(m.trials) == [120, 120]
    assert list(m.up_down) == list(a.up_down + b.up_down)
    with pytest.raises(ValueError):
        a.merge(run_ensemble([0.5], 5, UNIT, FROZEN, MACRO))


# --- ensembles -----------------------------------------------------------------
def test_pole_start_is_certain(backend):
    stats = run_ensemble([0.0, math.pi], 100, UNIT, PER_STEP, backend=backend)
    assert list(stats.p_hat) == [1.0, 0.0]
    assert list(stats.mean_steps) == [0.0, 0.0]


@pytest.mark.parametrize("bad", [dict(trials=0), dict(grid=[4.0]), dict(grid=[])])
def test_run_ensemble_validation(bad):
    with pytest.raises(ValueError):
        run_ensemble(bad.get("grid", [1.0]), bad.get("trials", 5), UNIT, FROZEN)


def test_thread_count_does_not_change_results():
    noise = NoiseConfig(NoiseMode.POISSON_RESAMPLE, tau_r=0.5, seed=5)
    integ = IntegratorConfig(dt=0.05, max_steps=4000)
    one = run_ensemble(symmetric_grid(5), 2500, UNIT, noise, integ, threads=1)
    four = run_ensemble(symmetric_grid(5), 2500, UNIT, noise, integ, threads=4)
    for name in ("trials", "up_down", "unresolved", "unresolved_up", "mean_steps"):
        assert np.array_equal(getattr(one, name), getattr(four, name))


def test_backends_agree_on_ensemble():
    pytest.importorskip("pointer_collapse._kernels")
    noise = NoiseConfig(NoiseMode.PER_STEP, seed=3)
    a = run_ensemble(symmetric_grid(3), 200, UNIT, noise, FIG2, backend="compiled")
    b = run_ensemble(symmetric_grid(3), 200, UNIT, noise, FIG2, backend="python")
    assert np.array_equal(a.up_down, b.up_down) and np.array_equal(a.mean_steps, b.mean_steps)


def test_frozen_equal_coupling_reference_point():
    stats = run_ensemble([math.pi / 3], 10_000, UNIT, FROZEN, MACRO)
    assert stats.p_hat[0] == pytest.approx(0.75, abs=0.015)


def test_strong_field_gives_flat_statistics():
    stats = run_ensemble(symmetric_grid(5), 10_000, UNIT.replace(b0=100.0), PER_STEP, FIG2)
    assert np.all(np.abs(stats.p_hat - 0.5) <= 0.02)


def test_weak_field_gives_step_statistics():
    grid = np.array([0.3, 1.0, 1.5, 1.65, 2.2, 2.9])
    stats = run_ensemble(grid, 2000, UNIT.replace(b0=0.01), PER_STEP, IntegratorConfig(dt=0.5, max_steps=8000))
    target = (grid < math.pi / 2).astype(float)
    assert np.all(np.abs(stats.p_hat - target) <= 3 * np.sqrt(0.25 / 2000) + 1e-12)


def test_frozen_frequencies_match_outcome_probability():
    for b0 in (0.5, 1.0, 2.0):
        params = UNIT.replace(b0=b0)
        stats = run_ensemble(symmetric_grid(), 4000, params, FROZEN, MACRO)
        lo, hi = stats.ci
        target = np.array([macroscopic_probability(t, params) for t in stats.theta0])
        inside = (lo <= target) & (target <= hi)
        assert inside.mean() >= 0.95, (b0, stats.p_hat)
        assert stats.unresolved.sum() == 0


@pytest.mark.parametrize("noise", [FROZEN, PER_STEP, NoiseConfig(NoiseMode.POISSON_RESAMPLE, tau_r=1.0, seed=1)])
def test_monotone_and_mirror_symmetric(noise):
    integ = FIG2 if noise.mode is NoiseMode.PER_STEP else MACRO
    stats = run_ensemble(symmetric_grid(), 4000, UNIT.replace(b0=1.5), noise, integ)
    p, s = stats.p_hat, stats.sigma
    # isotonic violations: any rise larger than 3 combined sigma
    rises = np.diff(p) - 3 * np.hypot(s[:-1], s[1:])
    assert np.all(rises <= 0)
    mirror = p + p[::-1] - 1.0
    assert np.all(np.abs(mirror) <= 3 * np.hypot(s, s[::-1]))


# --- calibration ----------------------------------------------------------------
POISSON = NoiseConfig(NoiseMode.POISSON_RESAMPLE, tau_r=1.0, seed=11)
CAL_INTEG = IntegratorConfig(dt=0.05, max_steps=1600, substeps=0)


def test_calibration_preconditions():
    with pytest.raises(ValueError, match="poisson_resample"):
        calibrate_b0(UNIT, PER_STEP, CAL_INTEG, 100)
    with pytest.raises(ValueError, match="mesoscopic"):
        calibrate_b0(UNIT, POISSON, CAL_INTEG, 100)  # tau_r = 1 > tau_c = 0.005
    with pytest.raises(ValueError, match="bracket"):
        calibrate_b0(UNIT, POISSON, CAL_INTEG, 100, bracket=(2.0, 1.0), require_mesoscopic=False)


def test_calibration_range_error():
    with pytest.raises(CalibrationRangeError):
        calibrate_b0(UNIT, POISSON, CAL_INTEG, 300, bracket=(3.0, 30.0), require_mesoscopic=False)


def test_calibration_optimum_beats_bracket_ends():
    res = calibrate_b0(UNIT, POISSON, CAL_INTEG, 1000, bracket=(0.5, 8.0), rel_tol=0.02, require_mesoscopic=False)
    ends = [abs(g) for b, g in res.evaluations[:2]]
    assert abs(res.deviation) <= min(ends)
    assert res.bracket == (0.5, 8.0)
    assert res.relation_ratio == pytest.approx(1.0 / (2 * res.b0_star**2 * 100 * 1.0))
    assert 1.2 < res.b0_star < 2.0


@functools.lru_cache(maxsize=None)
def deep_calibration(n_spins, tau_r, trials=2000):
    """Calibration far inside the mesoscopic regime (rate * tau_r << 1)."""
    params = ModelParams(j_coupling=1.0, n_spins=n_spins, epsilon=12.0)
    dt = tau_r / 10
    integ = IntegratorConfig(dt=dt, max_steps=int(math.ceil(200 / (params.collapse_rate * dt))), substeps=0)
    noise = NoiseConfig(NoiseMode.POISSON_RESAMPLE, tau_r=tau_r, seed=7)
    return calibrate_b0(params, noise, integ, trials, bracket=(0.3, 300.0), rel_tol=0.01)


@pytest.mark.slow
def test_doubling_spin_count_scales_field_by_inverse_root_two():
    a = deep_calibration(100, 4e-5)
    b = deep_calibration(200, 4e-5)
    assert b.b0_star / a.b0_star == pytest.approx(1 / math.sqrt(2), rel=0.1)


@pytest.mark.slow
def test_diffusion_limit_of_calibrated_field():
    # u = ln tan(theta/2) obeys u' = tanh(u) + b cos(chi); Born statistics need
    # diffusion constant 1/2, i.e. b^2 (rate tau_r) / 3 = 1/2 for short tau_r
    res = deep_calibration(100, 4e-5)
    s = res.params.collapse_rate * res.tau_r
    assert res.b0_star**2 * s == pytest.approx(1.5, rel=0.1)
