"""Lag collection and design-matrix construction.

Every measurement time t_n sees each event through the lag
rho = t_n - onset; lags inside the support window are the abscissae at
which the latent response enters the linear model. The same bookkeeping
produces the classic design matrix (response given) and the linear
measurements handed to the GP (response latent).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, EmptySupport
from .gp import LinearMeasurement
from .paradigm import HRFSupport, Paradigm, SamplingGrid

# Lags closer than this (seconds) are merged onto one abscissa; commensurate
# event/sampling grids otherwise produce floods of near-duplicate points.
RHO_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class RhoMap:
    """Distinct in-support lags and the (sample, event) pairs hitting them.

    values
        Sorted distinct lag values after snapping.
    sample_index, rho_index, event_index
        Parallel arrays, one entry per kept (sample, event) pair:
        sample n (0-based), index into ``values``, index into the
        paradigm's event tuple.
    """

    values: np.ndarray
    sample_index: np.ndarray
    rho_index: np.ndarray
    event_index: np.ndarray
    n_samples: int
    paradigm: Paradigm

    @cached_property
    def _sample_slices(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.sample_index, kind="stable")
        bounds = np.searchsorted(self.sample_index[order],
                                 np.arange(self.n_samples + 1))
        return order, bounds

    def triples_for_sample(self, n: int) -> list[tuple[int, int, int]]:
        """(distinct-lag index, occurrence m, condition p) triples feeding sample n."""
        order, bounds = self._sample_slices
        sel = order[bounds[n]:bounds[n + 1]]
        occ = self.paradigm.occurrences
        cond = self.paradigm.conditions
        return [(int(self.rho_index[i]), int(occ[self.event_index[i]]),
                 int(cond[self.event_index[i]])) for i in sel]


def collect_rho(paradigm: Paradigm, grid: SamplingGrid, support: HRFSupport,
                snap_tol: float = RHO_SNAP_TOL) -> RhoMap:
    """Collect every in-support lag t_n - onset, snapped to distinct values.

    Raises EmptySupport when no lag falls inside [0, length], which means
    the paradigm and the sampling grid do not overlap.
    """
    t = grid.times()
    lags = t[:, None] - paradigm.onsets[None, :]
    keep = (lags >= 0.0) & (lags <= support.length)
    if not keep.any():
        raise EmptySupport(
            "no event-to-sample lag falls inside the response support; "
            "paradigm and sampling grid do not overlap")
    sample_idx, event_idx = np.nonzero(keep)
    raw = lags[sample_idx, event_idx]

    order = np.argsort(raw, kind="stable")
    sorted_vals = raw[order]
    new_group = np.empty(sorted_vals.size, dtype=bool)
    new_group[0] = True
    # Snap transitively: a value opens a new group only when it exceeds the
    # previous group's first value by more than the tolerance.
    starts = [sorted_vals[0]]
    for i in range(1, sorted_vals.size):
        if sorted_vals[i] - starts[-1] > snap_tol:
            starts.append(sorted_vals[i])
            new_group[i] = True
        else:
            new_group[i] = False
    group_of_sorted = np.cumsum(new_group) - 1
    rho_index = np.empty(raw.size, dtype=int)
    rho_index[order] = group_of_sorted
    values = np.asarray(starts)

    return RhoMap(values=values, sample_index=sample_idx, rho_index=rho_index,
                  event_index=event_idx, n_samples=grid.n_samples,
                  paradigm=paradigm)


def _eval_response(h, x: np.ndarray) -> np.ndarray:
    out = np.asarray(h(x), dtype=float)
    if out.shape != x.shape:  # non-vectorized callable
        out = np.array([float(h(v)) for v in x])
    return out


def build_design_matrix(paradigm: Paradigm, grid: SamplingGrid, h,
                        support: HRFSupport) -> np.ndarray:
    """N x P matrix of condition regressors for a given response shape.

    Entry (n, p) sums modulation * h(t_n - onset) over condition p's
    events whose lag lies inside the support window. Instantaneous events
    make the underlying convolution this finite sum; the response is
    evaluated at the exact lags, not the snapped ones.
    """
    t = grid.times()
    tau = paradigm.onsets
    lags = t[:, None] - tau[None, :]
    keep = (lags >= 0.0) & (lags <= support.length)
    contrib = np.zeros_like(lags)
    if keep.any():
        contrib[keep] = _eval_response(h, lags[keep])
    contrib *= paradigm.modulations[None, :]
    X = np.zeros((grid.n_samples, paradigm.n_conditions))
    cond = paradigm.conditions
    for p in range(1, paradigm.n_conditions + 1):
        X[:, p - 1] = contrib[:, cond == p].sum(axis=1)
    return X


@dataclass(frozen=True)
class MeasurementBuild:
    """Linear measurements for the GP plus the dropped-sample bookkeeping."""

    measurements: list[LinearMeasurement]
    kept_indices: np.ndarray
    dropped_indices: np.ndarray
    rho: RhoMap


def build_h_measurements(paradigm: Paradigm, grid: SamplingGrid,
                         support: HRFSupport, beta, y,
                         snap_tol: float = RHO_SNAP_TOL) -> MeasurementBuild:
    """One linear measurement of the latent response per informative sample.

    Measurement n observes y_n = sum_i eta_i h(rho_i) + noise with
    coefficients eta = modulation * beta[condition]. Samples reached by no
    in-support event, or only by zero coefficients, carry no information
    about h; they are dropped here (their indices are reported) but belong
    in the GLM regardless.
    """
    beta = np.asarray(beta, dtype=float)
    y = np.asarray(y, dtype=float)
    if beta.shape != (paradigm.n_conditions,):
        raise DimensionMismatch(
            f"beta has shape {beta.shape}, expected ({paradigm.n_conditions},)")
    if y.shape != (grid.n_samples,):
        raise DimensionMismatch(
            f"y has shape {y.shape}, expected ({grid.n_samples},)")

    rho = collect_rho(paradigm, grid, support, snap_tol=snap_tol)
    coeff = (paradigm.modulations[rho.event_index]
             * beta[paradigm.conditions[rho.event_index] - 1])

    order = np.argsort(rho.sample_index, kind="stable")
    bounds = np.searchsorted(rho.sample_index[order],
                             np.arange(grid.n_samples + 1))
    measurements = []
    kept = []
    dropped = []
    for n in range(grid.n_samples):
        sel = order[bounds[n]:bounds[n + 1]]
        c = coeff[sel]
        nz = c != 0.0
        if not nz.any():
            dropped.append(n)
            continue
        measurements.append(LinearMeasurement(
            abscissae=rho.values[rho.rho_index[sel[nz]]],
            coefficients=c[nz],
            value=float(y[n])))
        kept.append(n)
    return MeasurementBuild(measurements=measurements,
                            kept_indices=np.asarray(kept, dtype=int),
                            dropped_indices=np.asarray(dropped, dtype=int),
                            rho=rho)
