"""Explained-variance scoring and the prediction/projection benchmark.

Prediction scores a fitted model's X beta forecast on a held-out run;
projection refits the activation weights on the held-out run with the
given response shape, isolating response quality from the activation
estimates. The benchmark grid sweeps generative peak times, estimation
methods, and noise levels over seeded synthetic dataset pairs.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import hrf
from .design import build_design_matrix
from .errors import (DegenerateDesign, DegenerateInput, DegenerateTruth,
                     DimensionMismatch, GphrfError)
from .estimator import FitConfig, FitResult, estimate_beta, fit
from .gp import GPPrior, OptimizerConfig
from .kernels import KernelParams
from .paradigm import HRFSupport, Paradigm, SamplingGrid
from .synth import (SynthConfig, calibrated_beta, generate_paradigm,
                    sampling_grid_for, simulate_signal)


def r2_score(y_true, y_pred) -> float:
    """Explained variance 1 - ||y - yhat||^2 / ||y - mean(y)||^2."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or y_true.size < 2:
        raise DimensionMismatch("r2_score needs two equal-length vectors of size >= 2")
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateTruth("reference signal has zero variance")
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    return 1.0 - ss_res / ss_tot


def pearson(a, b) -> float:
    """Sample Pearson correlation."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise DimensionMismatch("pearson needs two equal-length vectors of size >= 2")
    ac = a - a.mean()
    bc = b - b.mean()
    na = float(np.sqrt(ac @ ac))
    nb = float(np.sqrt(bc @ bc))
    if na == 0.0 or nb == 0.0:
        raise DegenerateInput("pearson is undefined for constant input")
    return float((ac @ bc) / (na * nb))


def posterior_mean_function(posterior) -> Callable:
    """Evaluable response: linear interpolation of the posterior mean.

    Zero outside the posterior's query range, matching the support
    convention of the signal model.
    """
    q = posterior.query_abscissae
    m = posterior.mean

    def h(t):
        arr = np.asarray(t, dtype=float)
        out = np.interp(arr, q, m, left=0.0, right=0.0)
        return float(out) if arr.ndim == 0 else out

    return h


def prediction_score(fit_result: FitResult, heldout_paradigm: Paradigm,
                     heldout_grid: SamplingGrid, heldout_y) -> float:
    """Explained variance of X beta-hat on a held-out run (no refitting)."""
    support = HRFSupport(float(fit_result.hrf_posterior.query_abscissae[-1]))
    h = posterior_mean_function(fit_result.hrf_posterior)
    X = build_design_matrix(heldout_paradigm, heldout_grid, h, support)
    return r2_score(heldout_y, X @ fit_result.beta)


def projection_score(h: Callable, heldout_paradigm: Paradigm,
                     heldout_grid: SamplingGrid, heldout_y,
                     support: HRFSupport) -> float:
    """Explained variance after refitting beta on the held-out run.

    Quantifies how well the span of the response's design matrix models
    the signal, independently of any activation estimate.
    """
    X = build_design_matrix(heldout_paradigm, heldout_grid, h, support)
    if not np.any(X):
        raise DegenerateDesign("design matrix is identically zero")
    beta = estimate_beta(X, heldout_y)
    return r2_score(heldout_y, X @ beta)


@dataclass(frozen=True)
class ScoreReport:
    """One benchmark cell: a method evaluated on one synthetic dataset."""

    dataset_peak: float
    method: str
    noise_sd: float
    seed: int
    prediction_r2: float
    projection_r2: float
    pearson: float

    @property
    def method_id(self) -> str:
        return self.method

    @property
    def dataset_id(self) -> str:
        return f"peak{self.dataset_peak:g}-sd{self.noise_sd:g}-seed{self.seed}"


@dataclass(frozen=True)
class BenchmarkConfig:
    """Grid settings for the prediction/projection benchmark.

    Methods: "glm" is the classic fixed-response GLM at every method
    peak, "gp-mean" the GP fit with a peaked mean at every method peak,
    "gp-zero" the GP fit with zero mean. Each (data peak, noise, seed)
    cell generates a training run and a fresh held-out run; all methods
    see the same pair. score_against selects whether held-out scores use
    the noisy signal or its clean component.
    """

    data_peaks: tuple[float, ...] = (3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    method_peaks: tuple[float, ...] = (3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    noise_sds: tuple[float, ...] = (0.1, 1.0, 2.0)
    n_seeds: int = 5
    seed: int = 0
    methods: tuple[str, ...] = ("glm", "gp-mean", "gp-zero")
    synth: SynthConfig = field(default_factory=SynthConfig)
    support_length: float = 25.0
    kernel: KernelParams = field(default_factory=lambda: KernelParams(1.0, 4.0))
    prior_noise_variance: float = 1.0
    fit: FitConfig = field(default_factory=lambda: FitConfig(
        rho_snap_tol=0.02,
        hyperopt=OptimizerConfig(max_iterations=25, improvement_tol=1e-4)))
    score_against: str = "clean"
    calibrate_beta: bool = True
    n_jobs: Optional[int] = None

    def __post_init__(self):
        if self.score_against not in ("clean", "noisy"):
            raise ValueError(f"unknown score_against {self.score_against!r}")
        for m in self.methods:
            if m not in ("glm", "gp-mean", "gp-zero"):
                raise ValueError(f"unknown method {m!r}")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")


@dataclass(frozen=True)
class CellFailure:
    dataset_id: str
    method: str
    error: str
    message: str


@dataclass(frozen=True)
class BenchmarkResult:
    reports: list[ScoreReport]
    failures: list[CellFailure]


def method_label(kind: str, peak: Optional[float] = None) -> str:
    if kind == "glm":
        return f"glm_peak{peak:g}"
    if kind == "gp-mean":
        return f"gp_mean{peak:g}"
    return "gp_zero"


def _limit_worker_threads():
    # one BLAS thread per worker process; the grid parallelizes over cells
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(limits=1)
    except ImportError:
        pass


def _single_threaded_blas():
    """Context limiting BLAS to one thread, so serial and worker runs
    produce bit-identical numbers."""
    try:
        import threadpoolctl
        return threadpoolctl.threadpool_limits(limits=1)
    except ImportError:
        import contextlib
        return contextlib.nullcontext()


def _run_cell_group(config: BenchmarkConfig, peak_idx: int, noise_idx: int,
                    seed_idx: int) -> tuple[list[ScoreReport], list[CellFailure]]:
    """All methods on one (data peak, noise, seed) dataset pair."""
    peak = config.data_peaks[peak_idx]
    noise = config.noise_sds[noise_idx]
    support = HRFSupport(config.support_length)
    ss = np.random.SeedSequence([config.seed, peak_idx, noise_idx, seed_idx])
    seed_a, seed_b = (int(s) for s in ss.generate_state(2))

    h_true = hrf.hrf_function(hrf.peaked(peak))
    runs = {}
    beta_true = None  # shared across the run pair, calibrated on run A
    for tag, run_seed in (("A", seed_a), ("B", seed_b)):
        cfg_run = dataclasses.replace(config.synth, hrf_peak_time=peak,
                                      noise_sd=noise, seed=run_seed)
        par = generate_paradigm(cfg_run)
        grid = sampling_grid_for(par, support, cfg_run.repetition_time)
        if beta_true is None:
            beta_true = (calibrated_beta(par, grid, h_true, support)
                         if config.calibrate_beta else cfg_run.beta_vector())
        sig = simulate_signal(par, grid, h_true, support, beta_true,
                              noise_sd=noise, seed=run_seed + 1)
        runs[tag] = (par, grid, sig)
    par_a, grid_a, sig_a = runs["A"]
    par_b, grid_b, sig_b = runs["B"]
    y_scored = sig_b.y_clean if config.score_against == "clean" else sig_b.y

    reports: list[ScoreReport] = []
    failures: list[CellFailure] = []
    dataset_id = f"peak{peak:g}-sd{noise:g}-seed{seed_idx}"

    def add(method: str, runner: Callable[[], tuple[float, float, float]]):
        try:
            pred_r2, proj_r2, pr = runner()
        except GphrfError as exc:
            failures.append(CellFailure(dataset_id=dataset_id, method=method,
                                        error=type(exc).__name__, message=str(exc)))
            return
        reports.append(ScoreReport(dataset_peak=peak, method=method,
                                   noise_sd=noise, seed=seed_idx,
                                   prediction_r2=pred_r2, projection_r2=proj_r2,
                                   pearson=pr))

    def run_glm(q: float):
        h_q = hrf.hrf_function(hrf.peaked(q))
        X_a = build_design_matrix(par_a, grid_a, h_q, support)
        beta = estimate_beta(X_a, sig_a.y)
        X_b = build_design_matrix(par_b, grid_b, h_q, support)
        pred = X_b @ beta
        return (r2_score(y_scored, pred),
                projection_score(h_q, par_b, grid_b, y_scored, support),
                pearson(y_scored, pred))

    def run_gp(mean: Optional[Callable]):
        prior = GPPrior(mean=mean, kernel=config.kernel,
                        noise_variance=config.prior_noise_variance)
        res = fit(sig_a.y, par_a, grid_a, support, prior, config.fit)
        h_est = posterior_mean_function(res.hrf_posterior)
        X_b = build_design_matrix(par_b, grid_b, h_est, support)
        pred = X_b @ res.beta
        return (r2_score(y_scored, pred),
                projection_score(h_est, par_b, grid_b, y_scored, support),
                pearson(y_scored, pred))

    if "glm" in config.methods:
        for q in config.method_peaks:
            add(method_label("glm", q), lambda q=q: run_glm(q))
    if "gp-mean" in config.methods:
        for q in config.method_peaks:
            mean_fn = hrf.hrf_function(hrf.peaked(q))
            add(method_label("gp-mean", q), lambda m=mean_fn: run_gp(m))
    if "gp-zero" in config.methods:
        add(method_label("gp-zero"), lambda: run_gp(None))
    return reports, failures


def benchmark_grid(config: BenchmarkConfig,
                   progress: Optional[Callable[[str], None]] = None) -> BenchmarkResult:
    """Run the full benchmark grid, optionally across worker processes.

    Every cell's RNG stream derives from (config.seed, cell indices), so
    results are independent of scheduling; reports come back in a fixed
    deterministic order.
    """
    groups = [(pi, ni, si)
              for pi in range(len(config.data_peaks))
              for ni in range(len(config.noise_sds))
              for si in range(config.n_seeds)]
    collected: dict[tuple[int, int, int], tuple[list, list]] = {}

    n_jobs = config.n_jobs
    if n_jobs is None:
        import os
        n_jobs = os.cpu_count() or 1
    if n_jobs > 1 and len(groups) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs,
                                 initializer=_limit_worker_threads) as pool:
            futures = {pool.submit(_run_cell_group, config, *g): g for g in groups}
            for fut, g in futures.items():
                collected[g] = fut.result()
                if progress is not None:
                    peak = config.data_peaks[g[0]]
                    noise = config.noise_sds[g[1]]
                    progress(f"peak{peak:g}-sd{noise:g}-seed{g[2]} done")
    else:
        with _single_threaded_blas():
            for g in groups:
                collected[g] = _run_cell_group(config, *g)
                if progress is not None:
                    peak = config.data_peaks[g[0]]
                    noise = config.noise_sds[g[1]]
                    progress(f"peak{peak:g}-sd{noise:g}-seed{g[2]} done")

    reports: list[ScoreReport] = []
    failures: list[CellFailure] = []
    for g in groups:
        rep, fail = collected[g]
        reports.extend(rep)
        failures.extend(fail)
    return BenchmarkResult(reports=reports, failures=failures)


def summarize(result: BenchmarkResult) -> dict:
    """Per-method medians plus the failure log, JSON-ready."""
    methods: dict[str, dict] = {}
    by_method: dict[str, list[ScoreReport]] = {}
    for rep in result.reports:
        by_method.setdefault(rep.method, []).append(rep)
    for method in sorted(by_method):
        cells = by_method[method]
        methods[method] = {
            "n_cells": len(cells),
            "prediction_r2_median": float(np.median([c.prediction_r2 for c in cells])),
            "projection_r2_median": float(np.median([c.projection_r2 for c in cells])),
            "pearson_median": float(np.median([c.pearson for c in cells])),
        }
    return {
        "methods": methods,
        "n_reports": len(result.reports),
        "n_failures": len(result.failures),
        "failures": [dataclasses.asdict(f) for f in result.failures],
    }
