import numpy as np
import pytest

from gphrf.design import build_design_matrix
from gphrf.errors import (DegenerateDesign, DegenerateInput, DegenerateTruth,
                          DimensionMismatch)
from gphrf.estimator import FitConfig, estimate_beta, fit
from gphrf.gp import GPPrior, OptimizerConfig
from gphrf.hrf import hrf_function, peaked
from gphrf.kernels import KernelParams
from gphrf.paradigm import HRFSupport
from gphrf.scores import (BenchmarkConfig, benchmark_grid, pearson,
                          posterior_mean_function, prediction_score,
                          projection_score, r2_score, summarize)
from gphrf.synth import (SynthConfig, calibrated_beta, generate_paradigm,
                         sampling_grid_for, simulate_signal)

SUPPORT = HRFSupport(25.0)


# -- r2_score ------------------------------------------------------------------

def test_r2_perfect_prediction():
    y = np.array([1.0, 2.0, 3.0])
    assert r2_score(y, y) == 1.0


def test_r2_constant_mean_prediction():
    y = np.array([1.0, 2.0, 3.0])
    assert r2_score(y, np.full(3, 2.0)) == 0.0


def test_r2_hand_computed():
    assert r2_score(np.array([1.0, 2.0, 3.0]),
                    np.array([1.0, 2.0, 4.0])) == pytest.approx(0.5)


def test_r2_degenerate_truth():
    with pytest.raises(DegenerateTruth):
        r2_score(np.ones(5), np.zeros(5))


def test_r2_shape_checks():
    with pytest.raises(DimensionMismatch):
        r2_score(np.ones(3), np.ones(4))


# -- pearson -------------------------------------------------------------------

def test_pearson_affine_invariance():
    rng = np.random.default_rng(0)
    a = rng.normal(size=50)
    assert pearson(a, 2.0 * a + 3.0) == pytest.approx(1.0, abs=1e-12)
    assert pearson(a, -a) == pytest.approx(-1.0, abs=1e-12)
    b = rng.normal(size=50)
    assert pearson(a, 1.7 * b + 0.3) == pytest.approx(pearson(a, b), abs=1e-12)


def test_pearson_direct_formula():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    b = np.array([1.0, 2.0, 3.0, 5.0])
    am, bm = a - a.mean(), b - b.mean()
    expected = float(am @ bm / np.sqrt((am @ am) * (bm @ bm)))
    assert pearson(a, b) == pytest.approx(expected, abs=1e-15)


def test_pearson_degenerate_input():
    with pytest.raises(DegenerateInput):
        pearson(np.ones(4), np.array([1.0, 2.0, 3.0, 4.0]))


# -- prediction / projection -----------------------------------------------------

def fitted_on(seed, noise_sd=0.0, peak=5.0, n_events=80):
    cfg = SynthConfig(n_events_total=n_events, hrf_peak_time=peak,
                      noise_sd=noise_sd, seed=seed)
    par = generate_paradigm(cfg)
    grid = sampling_grid_for(par, SUPPORT, cfg.repetition_time)
    h_true = hrf_function(peaked(peak))
    beta_true = calibrated_beta(par, grid, h_true, SUPPORT)
    sig = simulate_signal(par, grid, h_true, SUPPORT, beta_true, noise_sd, seed + 1)
    prior = GPPrior(mean=h_true, kernel=KernelParams(1.0, 4.0), noise_variance=1.0)
    res = fit(sig.y, par, grid, SUPPORT, prior,
              FitConfig(rho_snap_tol=0.02,
                        hyperopt=OptimizerConfig(max_iterations=25,
                                                 improvement_tol=1e-5)))
    return res, par, grid, sig


def test_prediction_score_self_run():
    res, par, grid, sig = fitted_on(seed=0)
    assert prediction_score(res, par, grid, sig.y) > 0.99


def test_prediction_score_zero_beta_not_positive():
    res, par, grid, sig = fitted_on(seed=1)
    zeroed = type(res)(beta=np.zeros_like(res.beta), hrf_posterior=res.hrf_posterior,
                       kernel_params=res.kernel_params,
                       noise_variance=res.noise_variance,
                       loglik_trace=res.loglik_trace, converged=res.converged,
                       n_iterations=res.n_iterations, hrf_scale=res.hrf_scale)
    assert prediction_score(zeroed, par, grid, sig.y) <= 0.0


def test_matched_classic_glm_noise_free_is_perfect():
    cfg = SynthConfig(n_events_total=60, hrf_peak_time=6.0, noise_sd=0.0, seed=2)
    par = generate_paradigm(cfg)
    grid = sampling_grid_for(par, SUPPORT, cfg.repetition_time)
    h = hrf_function(peaked(6.0))
    sig = simulate_signal(par, grid, h, SUPPORT, cfg.beta_vector(), 0.0, 3)
    X = build_design_matrix(par, grid, h, SUPPORT)
    beta = estimate_beta(X, sig.y)
    assert r2_score(sig.y, X @ beta) == pytest.approx(1.0, abs=1e-6)


def test_projection_true_hrf_noise_free_is_one():
    cfg = SynthConfig(n_events_total=60, hrf_peak_time=5.0, noise_sd=0.0, seed=4)
    par = generate_paradigm(cfg)
    grid = sampling_grid_for(par, SUPPORT, cfg.repetition_time)
    h = hrf_function(peaked(5.0))
    sig = simulate_signal(par, grid, h, SUPPORT, cfg.beta_vector(), 0.0, 5)
    assert projection_score(h, par, grid, sig.y, SUPPORT) == pytest.approx(1.0,
                                                                           abs=1e-10)


def test_projection_zero_hrf_degenerate_design():
    cfg = SynthConfig(n_events_total=30, seed=5)
    par = generate_paradigm(cfg)
    grid = sampling_grid_for(par, SUPPORT, cfg.repetition_time)
    y = np.ones(grid.n_samples)
    with pytest.raises(DegenerateDesign):
        projection_score(lambda t: np.zeros_like(np.asarray(t, dtype=float)),
                         par, grid, y, SUPPORT)


def test_projection_true_hrf_beats_wrong_peaks():
    cfg = SynthConfig(n_events_total=80, hrf_peak_time=4.0, noise_sd=0.0, seed=6)
    par = generate_paradigm(cfg)
    grid = sampling_grid_for(par, SUPPORT, cfg.repetition_time)
    h_true = hrf_function(peaked(4.0))
    sig = simulate_signal(par, grid, h_true, SUPPORT, cfg.beta_vector(), 0.0, 7)
    true_score = projection_score(h_true, par, grid, sig.y, SUPPORT)
    for wrong in (3.0, 5.0, 6.0, 7.0, 8.0):
        wrong_score = projection_score(hrf_function(peaked(wrong)), par, grid,
                                       sig.y, SUPPORT)
        assert true_score >= wrong_score


def test_projection_at_least_prediction():
    res, par, grid, sig = fitted_on(seed=7, noise_sd=0.2)
    h_est = posterior_mean_function(res.hrf_posterior)
    pred = prediction_score(res, par, grid, sig.y)
    proj = projection_score(h_est, par, grid, sig.y, SUPPORT)
    assert proj >= pred - 1e-10


# -- benchmark grid ----------------------------------------------------------------

SMALL_BENCH = BenchmarkConfig(
    data_peaks=(4.0,), method_peaks=(4.0, 6.0), noise_sds=(0.1,), n_seeds=2,
    synth=SynthConfig(n_events_total=60),
    fit=FitConfig(rho_snap_tol=0.02,
                  hyperopt=OptimizerConfig(max_iterations=15, improvement_tol=1e-5)))


def test_benchmark_grid_shape_and_invariant():
    result = benchmark_grid(SMALL_BENCH, progress=None)
    # 2 glm + 2 gp-mean + 1 gp-zero methods, 2 seeds
    assert len(result.reports) == 10
    assert not result.failures
    for rep in result.reports:
        assert rep.projection_r2 >= rep.prediction_r2 - 1e-10
        assert rep.prediction_r2 <= 1.0 and rep.projection_r2 <= 1.0
        assert -1.0 <= rep.pearson <= 1.0


def test_benchmark_grid_deterministic_and_schedule_independent():
    import dataclasses
    serial = benchmark_grid(dataclasses.replace(SMALL_BENCH, n_jobs=1))
    parallel = benchmark_grid(dataclasses.replace(SMALL_BENCH, n_jobs=2))
    assert serial.reports == parallel.reports


def test_summarize_medians():
    result = benchmark_grid(SMALL_BENCH)
    summary = summarize(result)
    for method, stats in summary["methods"].items():
        cells = [r for r in result.reports if r.method == method]
        assert stats["n_cells"] == len(cells)
        assert stats["prediction_r2_median"] == pytest.approx(
            float(np.median([c.prediction_r2 for c in cells])), abs=0)
    assert summary["n_failures"] == 0
