"""Stylized hemodynamic response shapes used as ground truth and GP means."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln


@dataclass(frozen=True)
class GammaDiffParams:
    """Parameters of the gamma-difference response shape.

    The positive lobe is a gamma density with its mode at peak_time, the
    undershoot a second gamma density with mode at undershoot_time scaled
    by undershoot_ratio; the difference is rescaled to unit maximum.
    """

    peak_time: float = 6.0
    undershoot_time: float = 16.0
    peak_dispersion: float = 1.0
    undershoot_dispersion: float = 1.0
    undershoot_ratio: float = 1.0 / 6.0

    def __post_init__(self):
        for name in ("peak_time", "undershoot_time",
                     "peak_dispersion", "undershoot_dispersion"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.undershoot_time <= self.peak_time:
            raise ValueError("undershoot_time must exceed peak_time")
        if not 0 <= self.undershoot_ratio < 1:
            raise ValueError("undershoot_ratio must lie in [0, 1)")


CANONICAL = GammaDiffParams()


def peaked(peak_time: float) -> GammaDiffParams:
    """Canonical parameters with only the peak time moved."""
    return replace(CANONICAL, peak_time=peak_time)


def _gamma_density(t: np.ndarray, mode: float, dispersion: float) -> np.ndarray:
    # Shape chosen so the density's mode sits exactly at `mode`:
    # mode = (shape - 1) * scale with scale = dispersion.
    shape = mode / dispersion + 1.0
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    out[pos] = np.exp((shape - 1.0) * np.log(tp) - tp / dispersion
                      - gammaln(shape) - shape * np.log(dispersion))
    return out


def _unnormalized(t: np.ndarray, params: GammaDiffParams) -> np.ndarray:
    return (_gamma_density(t, params.peak_time, params.peak_dispersion)
            - params.undershoot_ratio
            * _gamma_density(t, params.undershoot_time, params.undershoot_dispersion))


_NORMALIZER_CACHE: dict[GammaDiffParams, float] = {}


def _normalizer(params: GammaDiffParams) -> float:
    # Peak value on a 1 ms grid covering the whole response, so that the
    # returned shape has unit maximum.
    cached = _NORMALIZER_CACHE.get(params)
    if cached is None:
        horizon = params.undershoot_time + 10.0 * params.undershoot_dispersion
        grid = np.arange(0.0, horizon, 1e-3)
        cached = float(np.max(_unnormalized(grid, params)))
        if cached <= 0:
            raise ValueError("gamma-difference shape has non-positive maximum")
        _NORMALIZER_CACHE[params] = cached
    return cached


def gamma_difference_hrf(t, params: GammaDiffParams = CANONICAL):
    """Unit-peak gamma-difference response, zero for t < 0.

    Accepts scalars or arrays; arrays are evaluated elementwise.
    """
    arr = np.asarray(t, dtype=float)
    scalar = arr.ndim == 0
    vals = _unnormalized(np.atleast_1d(arr), params) / _normalizer(params)
    if scalar:
        return float(vals[0])
    return vals


def hrf_function(params: GammaDiffParams = CANONICAL):
    """Vectorized evaluable t -> unit-peak gamma-difference response."""
    def h(t):
        return gamma_difference_hrf(t, params)
    return h


def zero_mean(t):
    """The zero mean function."""
    arr = np.asarray(t, dtype=float)
    if arr.ndim == 0:
        return 0.0
    return np.zeros_like(arr)
