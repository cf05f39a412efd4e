"""Gaussian-process inference from noisy linear combinations of evaluations.

A measurement is a weighted sum of latent-function values plus white
noise. Conditioning any finite set of query evaluations on such
measurements is jointly Gaussian, so posterior mean and covariance come
from the usual block formulas with

    cov(phi_m, phi_n) = sum_ij eta_i eta_j k(x_i, x_j) + sigma^2 [m == n]
    cov(f(q_k), phi_n) = sum_i eta_i k(q_k, x_i)

All solves go through a Cholesky factorization of the measurement
covariance (never an explicit inverse), with an escalating diagonal
jitter as a last resort for rank-deficient noise-free problems. The same
factorization yields the marginal log-likelihood, its gradient in the
log hyperparameters, and the closed-form leave-one-out error used as an
early-stopping signal by the gradient-ascent hyperparameter optimizer.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import NonFinite, SingularCovariance
from .kernels import KernelParams, get_kernel

# Jitter ladder: fractions of the mean covariance diagonal tried in turn
# when the plain factorization fails.
_JITTER_LADDER = tuple(10.0 ** e for e in range(-10, -3))

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class LinearMeasurement:
    """One noisy linear combination of latent-function evaluations.

    abscissae and coefficients must have equal nonzero length; duplicate
    abscissae are allowed and behave as if their coefficients were summed.
    """

    abscissae: np.ndarray
    coefficients: np.ndarray
    value: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.abscissae, dtype=float))
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if a.ndim != 1 or c.ndim != 1 or a.size != c.size or a.size == 0:
            raise ValueError("abscissae and coefficients must be 1-d of equal nonzero length")
        if not np.all(np.isfinite(a)):
            raise ValueError("abscissae must be finite")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        if not np.isfinite(self.value):
            raise ValueError("value must be finite")
        object.__setattr__(self, "abscissae", a)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class GPPrior:
    """Gaussian-process prior plus the measurement noise variance.

    mean is an evaluable time -> real (None means identically zero); the
    kernel family is an opaque registry handle so only this module needs
    to know how to evaluate it.
    """

    mean: Optional[Callable]
    kernel: KernelParams
    noise_variance: float
    kernel_family: str = "squared-exponential"

    def __post_init__(self):
        if not np.isfinite(self.noise_variance) or self.noise_variance < 0:
            raise ValueError("noise_variance must be finite and >= 0")
        get_kernel(self.kernel_family)

    def mean_at(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.mean is None:
            return np.zeros_like(x)
        out = np.asarray(self.mean(x), dtype=float)
        if out.shape != x.shape:  # non-vectorized callable
            out = np.array([float(self.mean(v)) for v in x])
        return out


@dataclass(frozen=True)
class GPPosterior:
    """Conditional mean and covariance of the latent function at query points."""

    query_abscissae: np.ndarray
    mean: np.ndarray
    covariance: np.ndarray

    def sd(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


@dataclass(frozen=True)
class _Compiled:
    """Measurements flattened onto distinct points with a sparse weight matrix."""

    points: np.ndarray            # (R,) sorted distinct abscissae
    weights: scipy.sparse.csr_array   # (N, R), row n = coefficients of measurement n
    values: np.ndarray            # (N,)


def _compile(measurements: Sequence[LinearMeasurement]) -> _Compiled:
    all_points = np.concatenate([m.abscissae for m in measurements])
    all_coeffs = np.concatenate([m.coefficients for m in measurements])
    rows = np.concatenate([np.full(m.abscissae.size, i)
                           for i, m in enumerate(measurements)])
    points, inverse = np.unique(all_points, return_inverse=True)
    weights = scipy.sparse.coo_array(
        (all_coeffs, (rows, inverse)),
        shape=(len(measurements), points.size)).tocsr()
    values = np.array([m.value for m in measurements])
    return _Compiled(points=points, weights=weights, values=values)


def _factor_spd(S: np.ndarray):
    """Cholesky with escalating diagonal jitter; returns (factor, jitter)."""
    if not np.all(np.isfinite(S)):
        raise SingularCovariance("measurement covariance has non-finite entries")
    diag_scale = float(np.mean(np.diag(S)))
    if diag_scale <= 0:
        raise SingularCovariance("measurement covariance has a non-positive diagonal")
    try:
        return scipy.linalg.cho_factor(S, lower=True), 0.0
    except scipy.linalg.LinAlgError:
        pass
    eye = np.eye(S.shape[0])
    for lam in _JITTER_LADDER:
        try:
            return scipy.linalg.cho_factor(S + lam * diag_scale * eye, lower=True), lam
        except scipy.linalg.LinAlgError:
            continue
    raise SingularCovariance(
        f"measurement covariance is singular even with jitter {_JITTER_LADDER[-1]:g}")


class ConditionedGP:
    """Factorized conditioning state, reusable across queries.

    Building the object performs the expensive work (kernel gram over the
    distinct measurement points, measurement covariance, Cholesky); every
    posterior query, likelihood value, gradient, and leave-one-out error
    afterwards reuses the factorization. The optional caches let callers
    that sweep hyperparameters over fixed measurements skip recompiling
    and recomputing pairwise squared distances.
    """

    def __init__(self, prior: GPPrior, measurements: Sequence[LinearMeasurement],
                 *, compiled: _Compiled | None = None,
                 sqdist: np.ndarray | None = None):
        if compiled is None:
            if not measurements:
                raise ValueError("need at least one measurement; "
                                 "use the prior directly for the unconditioned case")
            compiled = _compile(measurements)
        self.prior = prior
        self._fam = get_kernel(prior.kernel_family)
        self._comp = compiled
        if sqdist is None:
            d = compiled.points[:, None] - compiled.points[None, :]
            sqdist = d * d
        self._sqdist = sqdist
        self._K = self._fam.gram_from_sqdist(prior.kernel, sqdist)
        W = compiled.weights
        self._S_nofuzz = W @ (W @ self._K).T
        S = self._S_nofuzz + prior.noise_variance * np.eye(W.shape[0])
        self._factor, self.jitter = _factor_spd(S)
        self._resid = compiled.values - W @ prior.mean_at(compiled.points)
        self._alpha = scipy.linalg.cho_solve(self._factor, self._resid)

    @property
    def n_measurements(self) -> int:
        return self._comp.weights.shape[0]

    @cached_property
    def _precision(self) -> np.ndarray:
        # dpotri inverts from the existing Cholesky factor in N^3/3 flops,
        # about 3x cheaper than cho_solve against the identity
        c, lower = self._factor
        inv, info = scipy.linalg.lapack.dpotri(c, lower=lower)
        if info != 0:
            raise SingularCovariance(f"dpotri failed with info={info}")
        tri = np.tril(inv) if lower else np.triu(inv)
        return tri + tri.T - np.diag(np.diag(inv))

    def _cross_cov(self, query: np.ndarray) -> np.ndarray:
        if query.shape == self._comp.points.shape and np.array_equal(query, self._comp.points):
            Kq = self._K
        else:
            Kq = self._fam.gram(self.prior.kernel, query, self._comp.points)
        return (self._comp.weights @ Kq.T).T

    def mean(self, query) -> np.ndarray:
        query = np.asarray(query, dtype=float)
        return self.prior.mean_at(query) + self._cross_cov(query) @ self._alpha

    def posterior(self, query, with_covariance: bool = True) -> GPPosterior:
        query = np.asarray(query, dtype=float)
        S21 = self._cross_cov(query)
        mean = self.prior.mean_at(query) + S21 @ self._alpha
        if with_covariance:
            V = scipy.linalg.cho_solve(self._factor, S21.T)
            cov = self._fam.gram(self.prior.kernel, query, query) - S21 @ V
            cov = 0.5 * (cov + cov.T)
        else:
            cov = np.zeros((query.size, query.size))
        return GPPosterior(query_abscissae=query, mean=mean, covariance=cov)

    def loglik(self) -> float:
        logdet = 2.0 * float(np.sum(np.log(np.diag(self._factor[0]))))
        n = self.n_measurements
        return float(-0.5 * self._resid @ self._alpha - 0.5 * logdet
                     - 0.5 * n * _LOG_2PI)

    def loglik_gradient(self) -> np.ndarray:
        """Gradient of the marginal log-likelihood in (log gamma, log C).

        The covariance derivative follows the same double sum over
        measurement coefficients as the covariance itself, with the kernel
        replaced by its hyperparameter partial; jitter, when active, is
        treated as constant.
        """
        dK_lgamma, dK_lc = self._fam.gram_grad_log(
            self.prior.kernel, self._sqdist, self._K)
        W = self._comp.weights
        dS_lgamma = W @ (W @ dK_lgamma).T
        dS_lc = self._S_nofuzz  # d/dlogC of C * K_unit is the noise-free covariance
        a = self._alpha
        P = self._precision
        g_gamma = 0.5 * (a @ dS_lgamma @ a - float(np.sum(P * dS_lgamma)))
        g_c = 0.5 * (a @ dS_lc @ a - float(np.sum(P * dS_lc)))
        return np.array([g_gamma, g_c])

    def loo_error(self) -> float:
        """Mean squared leave-one-out residual, in closed form."""
        d = np.diag(self._precision)
        resid = self._alpha / d
        return float(np.mean(resid * resid))

    def mean_penalty(self) -> float:
        """Squared prior norm of the posterior-mean deviation, 0.5 * v^T K v.

        With dual vector v = W^T alpha this equals 0.5 * alpha^T (W K W^T)
        alpha; it is the complexity half of the objective the posterior
        mean maximizes.
        """
        return float(0.5 * self._alpha @ self._S_nofuzz @ self._alpha)


def measurement_cov(prior: GPPrior, measurements: Sequence[LinearMeasurement]) -> np.ndarray:
    """Covariance matrix of the measurements under the prior (noise included)."""
    comp = _compile(measurements)
    fam = get_kernel(prior.kernel_family)
    K = fam.gram(prior.kernel, comp.points, comp.points)
    W = comp.weights
    S = W @ (W @ K).T
    S = 0.5 * (S + S.T)
    S[np.diag_indices_from(S)] += prior.noise_variance
    return S


def cross_cov(prior: GPPrior, measurements: Sequence[LinearMeasurement],
              query) -> np.ndarray:
    """Covariance between query evaluations (rows) and measurements (columns)."""
    comp = _compile(measurements)
    fam = get_kernel(prior.kernel_family)
    query = np.asarray(query, dtype=float)
    Kq = fam.gram(prior.kernel, query, comp.points)
    return (comp.weights @ Kq.T).T


def condition(prior: GPPrior, measurements: Sequence[LinearMeasurement],
              query) -> GPPosterior:
    """Posterior of the latent function at query points given the measurements.

    With no measurements the posterior is the prior restricted to the
    query points.
    """
    query = np.asarray(query, dtype=float)
    if len(measurements) == 0:
        fam = get_kernel(prior.kernel_family)
        return GPPosterior(query_abscissae=query,
                           mean=prior.mean_at(query),
                           covariance=fam.gram(prior.kernel, query, query))
    return ConditionedGP(prior, measurements).posterior(query)


def marginal_loglik(prior: GPPrior, measurements: Sequence[LinearMeasurement]) -> float:
    """Marginal log-likelihood of the measurement values (mean-centered)."""
    return ConditionedGP(prior, measurements).loglik()


def marginal_loglik_grad(prior: GPPrior,
                         measurements: Sequence[LinearMeasurement]) -> np.ndarray:
    """Gradient of the marginal log-likelihood over (log gamma, log C)."""
    return ConditionedGP(prior, measurements).loglik_gradient()


def loo_error(prior: GPPrior, measurements: Sequence[LinearMeasurement]) -> float:
    """Closed-form mean squared leave-one-out predictive residual."""
    if len(measurements) < 2:
        raise ValueError("leave-one-out error needs at least 2 measurements")
    return ConditionedGP(prior, measurements).loo_error()


@dataclass(frozen=True)
class OptimizerConfig:
    """Gradient-ascent settings for hyperparameter optimization.

    loo_rel_tol is the relative increase of the leave-one-out error that
    counts as "increasing" for early stopping; improvement_tol is the
    relative log-likelihood gain below which the ascent is declared
    stalled at the numerical optimum.
    """

    step_size: float = 0.1
    max_iterations: int = 100
    grad_tol: float = 1e-5
    max_backtracks: int = 40
    loo_rel_tol: float = 0.01
    improvement_tol: float = 1e-6

    def __post_init__(self):
        if self.step_size <= 0 or self.max_iterations < 1 or self.grad_tol <= 0:
            raise ValueError("optimizer settings must be positive")
        if self.loo_rel_tol < 0 or self.improvement_tol < 0:
            raise ValueError("tolerances must be >= 0")


@dataclass(frozen=True)
class HyperoptResult:
    """Outcome of a hyperparameter optimization run.

    params carries the best-leave-one-out point of the walk (what callers
    should use); final_params is where the ascent itself ended.
    """

    params: KernelParams
    final_params: KernelParams
    grad_converged: bool
    loo_stopped: bool
    stalled: bool
    n_iterations: int
    loglik: float
    loo: float


def optimize_hyperparams(prior: GPPrior,
                         measurements: Sequence[LinearMeasurement],
                         cfg: OptimizerConfig = OptimizerConfig()) -> HyperoptResult:
    """Tune (gamma, C) by gradient ascent on the marginal log-likelihood.

    Works in log-domain so positivity needs no constraints. Each
    iteration moves cfg.step_size log-units along the normalized
    gradient, halving the step until the log-likelihood improves. After
    every accepted step the leave-one-out error is evaluated, and ascent
    stops early the first time it increases. The returned parameters are
    the ones with the best leave-one-out error seen, so their likelihood
    is never below the starting point's.
    """
    if len(measurements) < 2:
        raise ValueError("hyperparameter optimization needs at least 2 measurements")
    comp = _compile(measurements)
    d = comp.points[:, None] - comp.points[None, :]
    sqdist = d * d

    def state_at(theta: np.ndarray) -> ConditionedGP:
        p = dataclasses.replace(prior, kernel=KernelParams.from_log(theta))
        return ConditionedGP(p, measurements, compiled=comp, sqdist=sqdist)

    theta = prior.kernel.to_log()
    state = state_at(theta)
    loglik = state.loglik()
    if not np.isfinite(loglik):
        raise NonFinite("marginal log-likelihood is non-finite at the starting point")
    loo_prev = state.loo_error()
    best_theta, best_loo, best_loglik = theta, loo_prev, loglik

    grad_converged = False
    loo_stopped = False
    stalled = False
    iterations = 0
    trial_step = cfg.step_size
    for _ in range(cfg.max_iterations):
        grad = state.loglik_gradient()
        if not np.all(np.isfinite(grad)):
            raise NonFinite("marginal log-likelihood gradient is non-finite")
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < cfg.grad_tol:
            grad_converged = True
            break
        iterations += 1

        direction = grad / grad_norm
        step = trial_step
        accepted = None
        for _ in range(cfg.max_backtracks):
            cand_theta = theta + step * direction
            try:
                cand = state_at(cand_theta)
                cand_loglik = cand.loglik()
            except SingularCovariance:
                cand_loglik = -np.inf
            if np.isfinite(cand_loglik) and cand_loglik > loglik:
                accepted = (cand_theta, cand, cand_loglik)
                break
            step *= 0.5
        if accepted is None:
            stalled = True  # no ascent left at the smallest step
            break
        gain = accepted[2] - loglik
        theta, state, loglik = accepted
        # growing the trial step from the accepted one lets the walk both
        # cover distance at the configured pace and polish the optimum
        trial_step = min(cfg.step_size, 2.0 * step)

        loo_now = state.loo_error()
        if loo_now < best_loo:
            best_theta, best_loo, best_loglik = theta, loo_now, loglik
        if loo_now > loo_prev * (1.0 + cfg.loo_rel_tol):
            loo_stopped = True
            break
        loo_prev = loo_now
        if gain < cfg.improvement_tol * max(1.0, abs(loglik)):
            stalled = True
            break

    return HyperoptResult(params=KernelParams.from_log(best_theta),
                          final_params=KernelParams.from_log(theta),
                          grad_converged=grad_converged,
                          loo_stopped=loo_stopped,
                          stalled=stalled,
                          n_iterations=iterations,
                          loglik=best_loglik,
                          loo=best_loo)
