"""Synthetic event-related paradigms and signals.

Reproduces the jittered event-related setup used throughout the
experiments: a few hundred events over a handful of conditions, uniform
inter-stimulus jitter, and white Gaussian measurement noise on an evenly
spaced sampling grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .design import build_design_matrix
from .errors import DimensionMismatch
from .paradigm import Event, HRFSupport, Paradigm, SamplingGrid

_LABEL_RESAMPLE_LIMIT = 1000


@dataclass(frozen=True)
class SynthConfig:
    """Generative settings for one synthetic run.

    beta_true None means all-ones activation weights. Inter-stimulus
    intervals are uniform on mean_isi +- isi_jitter_halfwidth.
    """

    n_conditions: int = 6
    n_events_total: int = 200
    mean_isi: float = 6.0
    isi_jitter_halfwidth: float = 2.0
    repetition_time: float = 2.0
    noise_sd: float = 0.01
    hrf_peak_time: float = 6.0
    beta_true: Optional[tuple[float, ...]] = None
    seed: int = 0

    def __post_init__(self):
        if self.n_conditions < 1 or self.n_events_total < 1:
            raise ValueError("n_conditions and n_events_total must be >= 1")
        if self.n_events_total < self.n_conditions:
            raise ValueError("need at least one event per condition")
        if not (self.mean_isi > self.isi_jitter_halfwidth >= 0):
            raise ValueError("require mean_isi > isi_jitter_halfwidth >= 0")
        if self.repetition_time <= 0 or self.hrf_peak_time <= 0:
            raise ValueError("repetition_time and hrf_peak_time must be positive")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if self.beta_true is not None:
            object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))
            if len(self.beta_true) != self.n_conditions:
                raise ValueError("beta_true length must equal n_conditions")

    def beta_vector(self) -> np.ndarray:
        if self.beta_true is None:
            return np.ones(self.n_conditions)
        return np.asarray(self.beta_true, dtype=float)


def generate_paradigm(cfg: SynthConfig) -> Paradigm:
    """Draw a jittered event sequence; onsets are cumulative ISI sums.

    Condition labels are i.i.d. uniform; the whole label vector is
    redrawn until every condition occurs at least once. Deterministic
    given cfg.seed.
    """
    rng = np.random.default_rng(cfg.seed)
    lo = cfg.mean_isi - cfg.isi_jitter_halfwidth
    hi = cfg.mean_isi + cfg.isi_jitter_halfwidth
    isi = rng.uniform(lo, hi, size=cfg.n_events_total) if hi > lo \
        else np.full(cfg.n_events_total, cfg.mean_isi)
    onsets = np.cumsum(isi)

    for _ in range(_LABEL_RESAMPLE_LIMIT):
        labels = rng.integers(1, cfg.n_conditions + 1, size=cfg.n_events_total)
        if np.unique(labels).size == cfg.n_conditions:
            break
    else:
        raise RuntimeError("could not draw labels covering every condition")

    events = tuple(Event(condition=int(c), onset=float(t))
                   for c, t in zip(labels, onsets))
    return Paradigm(events=events, n_conditions=cfg.n_conditions)


def sampling_grid_for(paradigm: Paradigm, support: HRFSupport,
                      repetition_time: float,
                      n_samples: Optional[int] = None) -> SamplingGrid:
    """Grid covering all events plus the full response tail."""
    if n_samples is None:
        horizon = float(np.max(paradigm.onsets)) + support.length
        n_samples = int(math.ceil(horizon / repetition_time))
    return SamplingGrid(repetition_time=repetition_time, n_samples=n_samples)


@dataclass(frozen=True)
class SimulatedSignal:
    """Noisy and clean signal vectors plus reporting metadata.

    snr_db is the empirical 10*log10(var(clean)/noise_sd^2); None when
    the noise is exactly zero.
    """

    y: np.ndarray
    y_clean: np.ndarray
    noise_sd: float
    snr_db: Optional[float]
    seed: int


def calibrated_beta(paradigm: Paradigm, grid: SamplingGrid, hrf_true: Callable,
                    support: HRFSupport) -> np.ndarray:
    """Equal activation weights scaled so the clean signal has unit variance.

    Pins the noise-level sweep to fixed signal-to-noise ratios: with unit
    clean variance, noise_sd 0.01 is exactly the 40 dB regime.
    """
    X = build_design_matrix(paradigm, grid, hrf_true, support)
    unit = X @ np.ones(paradigm.n_conditions)
    sd = float(np.std(unit))
    if sd == 0.0:
        raise ValueError("clean signal is constant; cannot calibrate beta")
    return np.full(paradigm.n_conditions, 1.0 / sd)


def simulate_signal(paradigm: Paradigm, grid: SamplingGrid, hrf_true: Callable,
                    support: HRFSupport, beta_true, noise_sd: float,
                    seed: int) -> SimulatedSignal:
    """Sample y = X_h beta + white noise on the measurement grid."""
    beta_true = np.asarray(beta_true, dtype=float)
    if beta_true.shape != (paradigm.n_conditions,):
        raise DimensionMismatch(
            f"beta_true has shape {beta_true.shape}, "
            f"expected ({paradigm.n_conditions},)")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    X = build_design_matrix(paradigm, grid, hrf_true, support)
    y_clean = X @ beta_true
    rng = np.random.default_rng(seed)
    y = y_clean + noise_sd * rng.standard_normal(grid.n_samples)
    clean_var = float(np.var(y_clean))
    snr_db = None
    if noise_sd > 0 and clean_var > 0:
        snr_db = float(10.0 * np.log10(clean_var / noise_sd ** 2))
    return SimulatedSignal(y=y, y_clean=y_clean, noise_sd=float(noise_sd),
                           snr_db=snr_db, seed=seed)
