"""Alternating estimation of activation weights and the response function.

The signal model y = X_h beta + noise is bilinear: at fixed response h
the optimal beta is plain least squares, and at fixed beta each sample
is a noisy linear combination of latent-response evaluations, so h comes
from GP conditioning. fit() alternates the two exact maximizations,
optionally re-tuning the kernel hyperparameters between rounds.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import gp
from .design import RHO_SNAP_TOL, build_h_measurements, collect_rho
from .errors import DegenerateBeta, DimensionMismatch
from .gp import ConditionedGP, GPPosterior, GPPrior, OptimizerConfig
from .kernels import KernelParams
from .paradigm import HRFSupport, Paradigm, SamplingGrid

# Singular values below this fraction of the largest are treated as zero.
_LSTSQ_RCOND = 1e-10


@dataclass(frozen=True)
class FitConfig:
    """Settings of the alternating fit.

    noise_mode "re-estimate" refreshes sigma^2 from the residuals after
    every least-squares step; "fixed" keeps the prior's value throughout.
    normalization "unit-peak" reports the response with unit maximum
    absolute value and scales beta to compensate, leaving every predicted
    signal unchanged.
    """

    max_outer_iterations: int = 20
    convergence_tol: float = 1e-4
    output_grid_step: float = 0.1
    optimize_hyperparams: bool = True
    noise_mode: str = "re-estimate"
    normalization: str = "unit-peak"
    hyperopt: OptimizerConfig = field(default_factory=OptimizerConfig)
    rho_snap_tol: float = RHO_SNAP_TOL

    def __post_init__(self):
        if self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be >= 1")
        if self.convergence_tol <= 0 or self.output_grid_step <= 0:
            raise ValueError("convergence_tol and output_grid_step must be positive")
        if self.noise_mode not in ("fixed", "re-estimate"):
            raise ValueError(f"unknown noise_mode {self.noise_mode!r}")
        if self.normalization not in ("unit-peak", "none"):
            raise ValueError(f"unknown normalization {self.normalization!r}")


@dataclass(frozen=True)
class FitResult:
    """Activation weights, response posterior, and convergence trace.

    loglik_trace holds the conditional log-likelihood after each round;
    penalized_trace subtracts the GP complexity penalty of that round's
    response estimate, giving the objective the alternation actually
    ascends.
    """

    beta: np.ndarray
    hrf_posterior: GPPosterior
    kernel_params: KernelParams
    noise_variance: float
    loglik_trace: list[float]
    converged: bool
    n_iterations: int
    hrf_scale: float = 1.0
    penalized_trace: list[float] = field(default_factory=list)


def estimate_beta(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares activation weights."""
    beta, *_ = np.linalg.lstsq(np.asarray(X, dtype=float),
                               np.asarray(y, dtype=float), rcond=_LSTSQ_RCOND)
    return beta


def output_grid(support: HRFSupport, step: float) -> np.ndarray:
    """Dense evaluation grid over [0, length] including both endpoints."""
    n = int(round(support.length / step))
    grid = np.arange(n + 1) * step
    if grid[-1] < support.length - 1e-12:
        grid = np.append(grid, support.length)
    return grid


def estimate_h_step(y, paradigm: Paradigm, grid: SamplingGrid,
                    support: HRFSupport, beta, prior: GPPrior,
                    out_grid, with_covariance: bool = True,
                    snap_tol: float = RHO_SNAP_TOL) -> GPPosterior:
    """Condition the response GP at fixed beta.

    Returns the posterior at the union of the distinct in-support lags
    and the dense output grid.
    """
    build = build_h_measurements(paradigm, grid, support, beta, y,
                                 snap_tol=snap_tol)
    if not build.measurements:
        raise DegenerateBeta("all measurement coefficients vanish; beta is zero")
    query = np.union1d(build.rho.values, np.asarray(out_grid, dtype=float))
    model = ConditionedGP(prior, build.measurements)
    return model.posterior(query, with_covariance=with_covariance)


def _design_from_posterior_mean(rho, mean_at_rho: np.ndarray,
                                n_samples: int, n_conditions: int) -> np.ndarray:
    """Design matrix with the response read off the conditioning lags."""
    paradigm = rho.paradigm
    weights = paradigm.modulations[rho.event_index]
    cond = paradigm.conditions[rho.event_index] - 1
    X = np.zeros((n_samples, n_conditions))
    np.add.at(X, (rho.sample_index, cond),
              weights * mean_at_rho[rho.rho_index])
    return X


def fit(y, paradigm: Paradigm, grid: SamplingGrid, support: HRFSupport,
        prior: GPPrior, cfg: FitConfig = FitConfig()) -> FitResult:
    """Run the alternating maximization scheme.

    Each round conditions the GP on measurements built from the current
    beta (initialized to all ones), refits beta by least squares against
    the posterior mean, optionally re-estimates the noise variance from
    the residuals, and re-tunes the kernel hyperparameters. Convergence
    is declared when the relative change of the conditional
    log-likelihood falls below cfg.convergence_tol.

    Unit-peak normalization is a reported change of coordinates: the
    internal alternation runs on raw quantities and the returned
    (beta, posterior) pair is rescaled at the end, which keeps predicted
    signals bit-for-bit independent of the normalization setting.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (grid.n_samples,):
        raise DimensionMismatch(f"y has shape {y.shape}, expected ({grid.n_samples},)")
    n_samples = grid.n_samples
    n_cond = paradigm.n_conditions

    rho = collect_rho(paradigm, grid, support, snap_tol=cfg.rho_snap_tol)
    d = rho.values[:, None] - rho.values[None, :]
    sqdist_rho = d * d
    out = output_grid(support, cfg.output_grid_step)

    params = prior.kernel
    sigma2 = prior.noise_variance
    beta = np.ones(n_cond)
    trace: list[float] = []
    penalized: list[float] = []
    converged = False
    model = None
    n_iter = 0
    prev_loglik = None

    for k in range(1, cfg.max_outer_iterations + 1):
        n_iter = k
        build = build_h_measurements(paradigm, grid, support, beta, y,
                                     snap_tol=cfg.rho_snap_tol)
        if not build.measurements:
            raise DegenerateBeta("all measurement coefficients vanish during fitting")
        step_prior = dataclasses.replace(prior, kernel=params, noise_variance=sigma2)
        comp = gp._compile(build.measurements)
        reuse = sqdist_rho if np.array_equal(comp.points, rho.values) else None
        model = ConditionedGP(step_prior, build.measurements,
                              compiled=comp, sqdist=reuse)
        mean_rho = model.mean(rho.values)

        X = _design_from_posterior_mean(rho, mean_rho, n_samples, n_cond)
        beta = estimate_beta(X, y)
        resid = y - X @ beta
        rss = float(resid @ resid)
        if cfg.noise_mode == "re-estimate":
            dof = max(n_samples - n_cond, 1)
            sigma2 = max(rss / dof, 1e-10)

        loglik = -0.5 * n_samples * np.log(2.0 * np.pi * sigma2) - rss / (2.0 * sigma2)
        trace.append(float(loglik))
        penalized.append(float(loglik) - model.mean_penalty())
        if prev_loglik is not None:
            if abs(loglik - prev_loglik) < cfg.convergence_tol * abs(loglik):
                converged = True
                break
        prev_loglik = loglik

        if cfg.optimize_hyperparams and k < cfg.max_outer_iterations:
            build2 = build_h_measurements(paradigm, grid, support, beta, y,
                                          snap_tol=cfg.rho_snap_tol)
            if len(build2.measurements) >= 2:
                hyper_prior = dataclasses.replace(prior, kernel=params,
                                                  noise_variance=sigma2)
                params = gp.optimize_hyperparams(hyper_prior, build2.measurements,
                                                 cfg.hyperopt).params

    posterior = model.posterior(out, with_covariance=True)
    scale = 1.0
    if cfg.normalization == "unit-peak":
        peak = float(np.max(np.abs(posterior.mean)))
        if peak > 0 and np.isfinite(peak):
            scale = peak
    if scale != 1.0:
        posterior = GPPosterior(query_abscissae=posterior.query_abscissae,
                                mean=posterior.mean / scale,
                                covariance=posterior.covariance / (scale * scale))
        beta = beta * scale

    return FitResult(beta=beta, hrf_posterior=posterior,
                     kernel_params=model.prior.kernel,
                     noise_variance=sigma2, loglik_trace=trace,
                     converged=converged, n_iterations=n_iter,
                     hrf_scale=scale, penalized_trace=penalized)
