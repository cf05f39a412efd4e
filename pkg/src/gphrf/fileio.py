"""On-disk formats: paradigm TSV, timeseries CSV, and atomic writes.

Paradigm files are tab-separated with the header
``onset	duration	trial_type	modulation``; durations must be zero
(events are instantaneous) and trial_type strings map to condition
indices in order of first appearance. Timeseries files are
``time,value`` CSV. All floats are written with 17 significant digits so
they round-trip exactly.
"""

from __future__ import annotations

import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import ParseError
from .paradigm import Event, Paradigm, SamplingGrid

_PARADIGM_HEADER = ["onset", "duration", "trial_type", "modulation"]


def fmt(x: float) -> str:
    """17-significant-digit decimal form, exact under round-trip."""
    return format(float(x), ".17g")


@contextmanager
def atomic_write(path):
    """Write to a temp file in the target directory, rename on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            yield handle
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_paradigm(path, paradigm: Paradigm,
                   trial_types: dict[int, str] | None = None) -> dict[int, str]:
    """Write a paradigm TSV; returns the condition -> trial_type map used."""
    if trial_types is None:
        trial_types = {p: f"cond{p:02d}" for p in range(1, paradigm.n_conditions + 1)}
    with atomic_write(path) as f:
        f.write("\t".join(_PARADIGM_HEADER) + "\n")
        for ev in paradigm.events:
            f.write(f"{fmt(ev.onset)}\t0\t{trial_types[ev.condition]}\t{fmt(ev.modulation)}\n")
    return trial_types


def read_paradigm(path, condition_of: dict[str, int] | None = None
                  ) -> tuple[Paradigm, dict[int, str]]:
    """Parse a paradigm TSV; returns the paradigm and its trial_type map.

    Without a preset mapping, trial_type strings are numbered in order of
    first appearance. With one (e.g. from a training run), unknown trial
    types are a parse error and the preset numbering is kept.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read paradigm file: {exc}") from exc
    if not lines:
        raise ParseError(f"{path}: empty paradigm file")
    header = lines[0].rstrip("\n").split("\t")
    if [h.strip() for h in header[:3]] != _PARADIGM_HEADER[:3]:
        raise ParseError(
            f"{path}: line 1: expected header "
            f"'{chr(9).join(_PARADIGM_HEADER)}', got {lines[0]!r}")
    has_modulation = len(header) >= 4 and header[3].strip() == "modulation"

    preset = condition_of is not None
    condition_of = dict(condition_of) if preset else {}
    events = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) < 3:
            raise ParseError(f"{path}: line {lineno}: expected at least 3 tab-separated fields")
        try:
            onset = float(parts[0])
            duration = float(parts[1])
        except ValueError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from exc
        if duration != 0.0:
            raise ParseError(
                f"{path}: line {lineno}: non-zero duration {parts[1]} "
                "(only instantaneous events are supported)")
        trial = parts[2].strip()
        if not trial:
            raise ParseError(f"{path}: line {lineno}: empty trial_type")
        modulation = 1.0
        if has_modulation and len(parts) >= 4 and parts[3].strip():
            try:
                modulation = float(parts[3])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
        if trial not in condition_of:
            if preset:
                raise ParseError(
                    f"{path}: line {lineno}: trial_type {trial!r} not present "
                    "in the reference paradigm")
            condition_of[trial] = len(condition_of) + 1
        try:
            events.append(Event(condition=condition_of[trial], onset=onset,
                                modulation=modulation))
        except ValueError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    if not events:
        raise ParseError(f"{path}: no events")
    try:
        paradigm = Paradigm(events=tuple(events), n_conditions=len(condition_of))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return paradigm, {v: k for k, v in condition_of.items()}


def write_timeseries(path, times, values) -> None:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    with atomic_write(path) as f:
        f.write("time,value\n")
        for t, v in zip(times, values):
            f.write(f"{fmt(t)},{fmt(v)}\n")


def read_timeseries(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read timeseries file: {exc}") from exc
    if not lines or lines[0].strip() != "time,value":
        raise ParseError(f"{path}: line 1: expected header 'time,value'")
    times = []
    values = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"{path}: line {lineno}: expected 'time,value'")
        try:
            times.append(float(parts[0]))
            values.append(float(parts[1]))
        except ValueError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    if len(times) < 2:
        raise ParseError(f"{path}: need at least 2 samples")
    return np.asarray(times), np.asarray(values)


def grid_from_times(times: np.ndarray, tol: float = 1e-6) -> SamplingGrid:
    """Recover the sampling grid from timestamps.

    The spacing must be even within tol and the first timestamp must sit
    on an integer multiple of it.
    """
    diffs = np.diff(times)
    tr = float(np.median(diffs))
    if tr <= 0:
        raise ParseError("timestamps must be strictly increasing")
    if np.max(np.abs(diffs - tr)) > tol:
        raise ParseError(f"timestamps are not evenly spaced within {tol:g} s")
    first = times[0] / tr
    k = int(round(first))
    if abs(times[0] - k * tr) > tol or k < 0:
        raise ParseError("first timestamp is not a non-negative multiple of the spacing")
    return SamplingGrid(repetition_time=tr, n_samples=len(times), first_sample=k)


def write_matrix_csv(path, matrix: np.ndarray) -> None:
    """Header-less numeric CSV, one row per line."""
    with atomic_write(path) as f:
        for row in np.atleast_2d(matrix):
            f.write(",".join(fmt(v) for v in row) + "\n")
