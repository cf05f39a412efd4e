"""Covariance kernels on the response-function domain.

Exactly one stationary family is registered (the squared-exponential
kernel ``C * exp(-(s - t)^2 / gamma)``); everything downstream goes
through an opaque family handle so that further kernels can be dropped
in without touching the inference code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of a stationary smoothness kernel.

    amplitude
        Prior variance at zero lag (signal-variance units), > 0.
    length_scale
        Characteristic squared-time scale dividing the squared lag, > 0.
    """

    amplitude: float
    length_scale: float

    def __post_init__(self):
        for name in ("amplitude", "length_scale"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be a positive finite real, got {v!r}")

    def to_log(self) -> np.ndarray:
        """Unconstrained coordinates (log length_scale, log amplitude)."""
        return np.array([np.log(self.length_scale), np.log(self.amplitude)])

    @staticmethod
    def from_log(theta) -> "KernelParams":
        theta = np.asarray(theta, dtype=float)
        return KernelParams(amplitude=float(np.exp(theta[1])),
                            length_scale=float(np.exp(theta[0])))


class SquaredExponential:
    """The Gaussian smoothness kernel ``k(s, t) = C exp(-(s-t)^2 / gamma)``."""

    name = "squared-exponential"

    @staticmethod
    def value(params: KernelParams, s, t):
        d = np.asarray(s, dtype=float) - np.asarray(t, dtype=float)
        out = params.amplitude * np.exp(-(d * d) / params.length_scale)
        return float(out) if out.ndim == 0 else out

    @staticmethod
    def gram(params: KernelParams, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return SquaredExponential.gram_from_sqdist(
            params, _pairwise_sqdist(a, b))

    @staticmethod
    def gram_from_sqdist(params: KernelParams, sqdist: np.ndarray) -> np.ndarray:
        return params.amplitude * np.exp(-sqdist / params.length_scale)

    @staticmethod
    def grad(params: KernelParams, s, t):
        """Partials (dk/dgamma, dk/dC) at (s, t)."""
        d = np.asarray(s, dtype=float) - np.asarray(t, dtype=float)
        d2 = d * d
        k = params.amplitude * np.exp(-d2 / params.length_scale)
        dk_dgamma = k * d2 / params.length_scale ** 2
        dk_dc = k / params.amplitude
        if dk_dgamma.ndim == 0:
            return float(dk_dgamma), float(dk_dc)
        return dk_dgamma, dk_dc

    @staticmethod
    def gram_grad_log(params: KernelParams, sqdist: np.ndarray,
                      gram: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Gram-matrix partials in (log gamma, log C), reusing the gram."""
        return gram * sqdist / params.length_scale, gram


_REGISTRY = {SquaredExponential.name: SquaredExponential}


def get_kernel(name: str):
    """Look up a kernel family handle by name."""
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown kernel family {name!r}; available: {sorted(_REGISTRY)}"
        ) from None


def _pairwise_sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a[:, None] - b[None, :]
    return d * d


def eval_kernel(params: KernelParams, s, t):
    """Evaluate the squared-exponential kernel at a pair of abscissae."""
    return SquaredExponential.value(params, s, t)


def gram(params: KernelParams, abscissae_a, abscissae_b) -> np.ndarray:
    """Gram matrix with entry (i, j) = k(a_i, b_j)."""
    return SquaredExponential.gram(params, abscissae_a, abscissae_b)


def kernel_grad(params: KernelParams, s, t):
    """Hyperparameter partials (dk/dgamma, dk/dC) of the kernel value."""
    return SquaredExponential.grad(params, s, t)
