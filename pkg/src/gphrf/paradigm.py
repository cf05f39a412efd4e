"""Event paradigms, sampling grids, and the response support window."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Event:
    """A single instantaneous stimulus presentation.

    condition is 1-based; modulation scales the event's contribution.
    """

    condition: int
    onset: float
    modulation: float = 1.0

    def __post_init__(self):
        if int(self.condition) != self.condition or self.condition < 1:
            raise ValueError(f"condition must be a positive integer, got {self.condition!r}")
        if not np.isfinite(self.onset) or self.onset < 0:
            raise ValueError(f"onset must be finite and >= 0, got {self.onset!r}")
        if not np.isfinite(self.modulation):
            raise ValueError(f"modulation must be finite, got {self.modulation!r}")


@dataclass(frozen=True)
class Paradigm:
    """An event list over conditions 1..n_conditions.

    Every condition must be presented at least once; conditions with no
    events are rejected rather than silently carried as empty columns.
    """

    events: tuple[Event, ...]
    n_conditions: int

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.n_conditions < 1:
            raise ValueError("n_conditions must be >= 1")
        if not self.events:
            raise ValueError("paradigm has no events")
        seen = set()
        for ev in self.events:
            if ev.condition > self.n_conditions:
                raise ValueError(
                    f"event condition {ev.condition} exceeds n_conditions={self.n_conditions}")
            seen.add(ev.condition)
        missing = set(range(1, self.n_conditions + 1)) - seen
        if missing:
            raise ValueError(f"conditions without events: {sorted(missing)}")

    @property
    def n_events(self) -> int:
        return len(self.events)

    @cached_property
    def onsets(self) -> np.ndarray:
        return np.array([ev.onset for ev in self.events])

    @cached_property
    def conditions(self) -> np.ndarray:
        return np.array([ev.condition for ev in self.events], dtype=int)

    @cached_property
    def modulations(self) -> np.ndarray:
        return np.array([ev.modulation for ev in self.events])

    @cached_property
    def occurrences(self) -> np.ndarray:
        """1-based occurrence number of each event within its condition."""
        out = np.empty(self.n_events, dtype=int)
        counts = {}
        for i, ev in enumerate(self.events):
            counts[ev.condition] = counts.get(ev.condition, 0) + 1
            out[i] = counts[ev.condition]
        return out


@dataclass(frozen=True)
class SamplingGrid:
    """Evenly spaced measurement times t_n = n * TR, n = 1..N.

    first_sample shifts the starting index so externally recorded series
    that begin at t = 0 can be represented; the default matches n = 1.
    """

    repetition_time: float
    n_samples: int
    first_sample: int = 1

    def __post_init__(self):
        if not np.isfinite(self.repetition_time) or self.repetition_time <= 0:
            raise ValueError("repetition_time must be positive")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.first_sample < 0:
            raise ValueError("first_sample must be >= 0")

    def times(self) -> np.ndarray:
        return (self.first_sample + np.arange(self.n_samples)) * self.repetition_time


@dataclass(frozen=True)
class HRFSupport:
    """Support window [0, length] outside which the response is zero."""

    length: float

    def __post_init__(self):
        if not np.isfinite(self.length) or self.length <= 0:
            raise ValueError("support length must be positive")


DEFAULT_SUPPORT = HRFSupport(25.0)
