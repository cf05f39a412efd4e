"""Shared helpers: random measurement instances and brute-force oracles."""

from __future__ import annotations

import numpy as np

from gphrf.gp import GPPrior, LinearMeasurement
from gphrf.kernels import KernelParams, eval_kernel


def random_measurements(rng, n, max_points=3, domain=5.0, coeff_scale=2.0):
    """Random linear measurements with nonzero coefficients."""
    out = []
    for _ in range(n):
        npts = int(rng.integers(1, max_points + 1))
        x = rng.uniform(0.0, domain, npts)
        eta = rng.uniform(0.2, coeff_scale, npts) * rng.choice([-1.0, 1.0], npts)
        out.append(LinearMeasurement(abscissae=x, coefficients=eta,
                                     value=float(rng.normal())))
    return out


def random_prior(rng, noise_floor=0.05, mean=None):
    params = KernelParams(amplitude=float(rng.uniform(0.5, 3.0)),
                          length_scale=float(rng.uniform(0.5, 8.0)))
    return GPPrior(mean=mean, kernel=params,
                   noise_variance=float(rng.uniform(noise_floor, 0.5)))


def dense_expansion_cov(prior, measurements):
    """Oracle covariance: expand coefficients over distinct points as H K H^T."""
    pts = sorted({float(v) for m in measurements for v in m.abscissae})
    index = {v: i for i, v in enumerate(pts)}
    H = np.zeros((len(measurements), len(pts)))
    for n, m in enumerate(measurements):
        for x, c in zip(m.abscissae, m.coefficients):
            H[n, index[float(x)]] += c
    K = np.empty((len(pts), len(pts)))
    for i, a in enumerate(pts):
        for j, b in enumerate(pts):
            K[i, j] = eval_kernel(prior.kernel, a, b)
    return H @ K @ H.T + prior.noise_variance * np.eye(len(measurements))


def dense_expansion_cross(prior, measurements, query):
    pts = sorted({float(v) for m in measurements for v in m.abscissae})
    index = {v: i for i, v in enumerate(pts)}
    H = np.zeros((len(measurements), len(pts)))
    for n, m in enumerate(measurements):
        for x, c in zip(m.abscissae, m.coefficients):
            H[n, index[float(x)]] += c
    Kq = np.empty((len(query), len(pts)))
    for k, q in enumerate(query):
        for i, a in enumerate(pts):
            Kq[k, i] = eval_kernel(prior.kernel, q, a)
    return Kq @ H.T


def joint_gaussian_condition(prior, measurements, query):
    """Oracle conditioning: build the explicit joint Gaussian with scalar loops."""
    n = len(measurements)
    query = np.asarray(query, dtype=float)

    def mean_at(x):
        return 0.0 if prior.mean is None else float(prior.mean(np.asarray([x]))[0])

    mu1 = np.array([sum(c * mean_at(x) for x, c in zip(m.abscissae, m.coefficients))
                    for m in measurements])
    mu2 = np.array([mean_at(q) for q in query])
    S11 = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            acc = 0.0
            for xi, ci in zip(measurements[a].abscissae, measurements[a].coefficients):
                for xj, cj in zip(measurements[b].abscissae, measurements[b].coefficients):
                    acc += ci * cj * eval_kernel(prior.kernel, xi, xj)
            S11[a, b] = acc + (prior.noise_variance if a == b else 0.0)
    S21 = np.zeros((len(query), n))
    for k, q in enumerate(query):
        for b in range(n):
            S21[k, b] = sum(c * eval_kernel(prior.kernel, q, x)
                            for x, c in zip(measurements[b].abscissae,
                                            measurements[b].coefficients))
    S22 = np.array([[eval_kernel(prior.kernel, qa, qb) for qb in query]
                    for qa in query])
    a_vals = np.array([m.value for m in measurements])
    S11_inv = np.linalg.inv(S11)
    mean = mu2 + S21 @ S11_inv @ (a_vals - mu1)
    cov = S22 - S21 @ S11_inv @ S21.T
    return mean, cov
