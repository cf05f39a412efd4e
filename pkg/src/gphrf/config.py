"""Run configuration files: flat key-value sections, lossless round-trip.

One file per command. Every default of the underlying library types is a
config default, so an empty file is a valid configuration. Floats are
written with repr so parse -> serialize -> parse is the identity.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .estimator import FitConfig
from .gp import OptimizerConfig
from .kernels import KernelParams
from .scores import BenchmarkConfig
from .synth import SynthConfig


@dataclass(frozen=True)
class PriorSpec:
    """GP prior choice for fitting: mean family and noise start value."""

    mean: str = "gamma-diff"
    mean_peak_time: float = 5.0
    noise_variance: float = 1.0

    def __post_init__(self):
        if self.mean not in ("gamma-diff", "zero"):
            raise ValueError(f"unknown prior mean {self.mean!r}")
        if self.mean_peak_time <= 0 or self.noise_variance < 0:
            raise ValueError("mean_peak_time must be > 0 and noise_variance >= 0")


@dataclass(frozen=True)
class SimulateRunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    support_length: float = 25.0
    n_samples: Optional[int] = None
    calibrate_beta: bool = False


@dataclass(frozen=True)
class FitRunConfig:
    kernel_family: str = "squared-exponential"
    amplitude: float = 1.0
    length_scale: float = 4.0
    prior: PriorSpec = field(default_factory=PriorSpec)
    fit: FitConfig = field(default_factory=FitConfig)
    support_length: float = 25.0


@dataclass(frozen=True)
class BenchmarkRunConfig:
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)


@dataclass(frozen=True)
class GammaStudyRunConfig:
    # a sparser paradigm than the benchmark default keeps the length-scale
    # effect visible above the roughness floor of the true response shape
    gammas: tuple[float, ...] = (0.5, 2.0, 8.0, 32.0)
    amplitude: float = 1.0
    synth: SynthConfig = field(default_factory=lambda: SynthConfig(
        noise_sd=0.01, n_events_total=60))
    support_length: float = 25.0
    output_grid_step: float = 0.1
    max_outer_iterations: int = 20
    convergence_tol: float = 1e-4
    calibrate_beta: bool = True

    def __post_init__(self):
        if not self.gammas:
            raise ValueError("gammas must be a nonempty list")
        if any(g <= 0 for g in self.gammas):
            raise ValueError("gammas must be positive")


@dataclass(frozen=True)
class ScoreRunConfig:
    fitrun: FitRunConfig = field(default_factory=FitRunConfig)
    canonical_peak_time: float = 6.0


class _Reader:
    """configparser wrapper that reports section/key diagnostics."""

    def __init__(self, text: str, source: str):
        self.parser = configparser.ConfigParser(interpolation=None)
        self.source = source
        try:
            self.parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        self.known: dict[str, set[str]] = {}

    def _raw(self, section: str, key: str) -> Optional[str]:
        self.known.setdefault(section, set()).add(key)
        if not self.parser.has_section(section):
            return None
        if not self.parser.has_option(section, key):
            return None
        return self.parser.get(section, key)

    def _convert(self, section, key, raw, conv, what):
        try:
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(
                f"{self.source}: [{section}] {key}: expected {what}, got {raw!r}") from exc

    def get_float(self, section, key, default):
        raw = self._raw(section, key)
        return default if raw is None else self._convert(section, key, raw, float, "a number")

    def get_int(self, section, key, default):
        raw = self._raw(section, key)
        return default if raw is None else self._convert(section, key, raw, int, "an integer")

    def get_str(self, section, key, default):
        raw = self._raw(section, key)
        return default if raw is None else raw.strip()

    def get_bool(self, section, key, default):
        raw = self._raw(section, key)
        if raw is None:
            return default
        low = raw.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{self.source}: [{section}] {key}: expected a boolean, got {raw!r}")

    def get_floats(self, section, key, default):
        raw = self._raw(section, key)
        if raw is None:
            return default
        return tuple(self._convert(section, key, tok, float, "numbers")
                     for tok in raw.split())

    def get_strs(self, section, key, default):
        raw = self._raw(section, key)
        return default if raw is None else tuple(raw.split())

    def get_optional_int(self, section, key, default, sentinel="auto"):
        raw = self._raw(section, key)
        if raw is None:
            return default
        if raw.strip().lower() == sentinel:
            return None
        return self._convert(section, key, raw, int, f"an integer or '{sentinel}'")

    def check_unknown(self):
        for section in self.parser.sections():
            if section not in self.known:
                raise ConfigError(f"{self.source}: unknown section [{section}]")
            for key in self.parser.options(section):
                if key not in self.known[section]:
                    raise ConfigError(f"{self.source}: [{section}] unknown key {key!r}")

    def wrap(self, build):
        try:
            return build()
        except ValueError as exc:
            raise ConfigError(f"{self.source}: {exc}") from exc


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_sections(sections: dict[str, dict[str, object]]) -> str:
    out = io.StringIO()
    for name, kv in sections.items():
        out.write(f"[{name}]\n")
        for key, value in kv.items():
            out.write(f"{key} = {_fmt_value(value)}\n")
        out.write("\n")
    return out.getvalue()


def _floats_str(values) -> str:
    return " ".join(repr(float(v)) for v in values)


# -- synth section ----------------------------------------------------------

def _read_synth(r: _Reader, default: SynthConfig) -> SynthConfig:
    fallback = "ones" if default.beta_true is None else _floats_str(default.beta_true)
    beta_raw = r.get_str("synth", "beta_true", fallback)
    if beta_raw == "ones":
        beta = None
    else:
        beta = tuple(r._convert("synth", "beta_true", tok, float, "numbers or 'ones'")
                     for tok in beta_raw.split())
    return r.wrap(lambda: SynthConfig(
        n_conditions=r.get_int("synth", "n_conditions", default.n_conditions),
        n_events_total=r.get_int("synth", "n_events_total", default.n_events_total),
        mean_isi=r.get_float("synth", "mean_isi", default.mean_isi),
        isi_jitter_halfwidth=r.get_float("synth", "isi_jitter_halfwidth",
                                         default.isi_jitter_halfwidth),
        repetition_time=r.get_float("synth", "repetition_time", default.repetition_time),
        noise_sd=r.get_float("synth", "noise_sd", default.noise_sd),
        hrf_peak_time=r.get_float("synth", "hrf_peak_time", default.hrf_peak_time),
        beta_true=beta,
        seed=r.get_int("synth", "seed", default.seed)))


def _synth_section(s: SynthConfig) -> dict[str, object]:
    return {
        "n_conditions": s.n_conditions,
        "n_events_total": s.n_events_total,
        "mean_isi": s.mean_isi,
        "isi_jitter_halfwidth": s.isi_jitter_halfwidth,
        "repetition_time": s.repetition_time,
        "noise_sd": s.noise_sd,
        "hrf_peak_time": s.hrf_peak_time,
        "beta_true": "ones" if s.beta_true is None else _floats_str(s.beta_true),
        "seed": s.seed,
    }


# -- fit / kernel / prior sections ------------------------------------------

def _read_fit(r: _Reader, default: FitConfig) -> FitConfig:
    hyper = r.wrap(lambda: OptimizerConfig(
        step_size=r.get_float("hyperopt", "step_size", default.hyperopt.step_size),
        max_iterations=r.get_int("hyperopt", "max_iterations",
                                 default.hyperopt.max_iterations),
        grad_tol=r.get_float("hyperopt", "grad_tol", default.hyperopt.grad_tol),
        max_backtracks=r.get_int("hyperopt", "max_backtracks",
                                 default.hyperopt.max_backtracks),
        loo_rel_tol=r.get_float("hyperopt", "loo_rel_tol",
                                default.hyperopt.loo_rel_tol),
        improvement_tol=r.get_float("hyperopt", "improvement_tol",
                                    default.hyperopt.improvement_tol)))
    return r.wrap(lambda: FitConfig(
        max_outer_iterations=r.get_int("fit", "max_outer_iterations",
                                       default.max_outer_iterations),
        convergence_tol=r.get_float("fit", "convergence_tol", default.convergence_tol),
        output_grid_step=r.get_float("fit", "output_grid_step", default.output_grid_step),
        optimize_hyperparams=r.get_bool("fit", "optimize_hyperparams",
                                        default.optimize_hyperparams),
        noise_mode=r.get_str("fit", "noise_mode", default.noise_mode),
        normalization=r.get_str("fit", "normalization", default.normalization),
        hyperopt=hyper,
        rho_snap_tol=r.get_float("fit", "rho_snap_tol", default.rho_snap_tol)))


def _fit_sections(f: FitConfig) -> dict[str, dict[str, object]]:
    return {
        "fit": {
            "max_outer_iterations": f.max_outer_iterations,
            "convergence_tol": f.convergence_tol,
            "output_grid_step": f.output_grid_step,
            "optimize_hyperparams": f.optimize_hyperparams,
            "noise_mode": f.noise_mode,
            "normalization": f.normalization,
            "rho_snap_tol": f.rho_snap_tol,
        },
        "hyperopt": {
            "step_size": f.hyperopt.step_size,
            "max_iterations": f.hyperopt.max_iterations,
            "grad_tol": f.hyperopt.grad_tol,
            "max_backtracks": f.hyperopt.max_backtracks,
            "loo_rel_tol": f.hyperopt.loo_rel_tol,
            "improvement_tol": f.hyperopt.improvement_tol,
        },
    }


def _read_fitrun(r: _Reader, default: FitRunConfig) -> FitRunConfig:
    prior = r.wrap(lambda: PriorSpec(
        mean=r.get_str("prior", "mean", default.prior.mean),
        mean_peak_time=r.get_float("prior", "mean_peak_time",
                                   default.prior.mean_peak_time),
        noise_variance=r.get_float("prior", "noise_variance",
                                   default.prior.noise_variance)))
    return r.wrap(lambda: FitRunConfig(
        kernel_family=r.get_str("kernel", "family", default.kernel_family),
        amplitude=r.get_float("kernel", "amplitude", default.amplitude),
        length_scale=r.get_float("kernel", "length_scale", default.length_scale),
        prior=prior,
        fit=_read_fit(r, default.fit),
        support_length=r.get_float("support", "length", default.support_length)))


def _fitrun_sections(c: FitRunConfig) -> dict[str, dict[str, object]]:
    sections = {
        "kernel": {
            "family": c.kernel_family,
            "amplitude": c.amplitude,
            "length_scale": c.length_scale,
        },
        "prior": {
            "mean": c.prior.mean,
            "mean_peak_time": c.prior.mean_peak_time,
            "noise_variance": c.prior.noise_variance,
        },
    }
    sections.update(_fit_sections(c.fit))
    sections["support"] = {"length": c.support_length}
    return sections


# -- per-command configs ------------------------------------------------------

def parse_simulate_config(text: str, source: str = "<config>") -> SimulateRunConfig:
    r = _Reader(text, source)
    d = SimulateRunConfig()
    cfg = r.wrap(lambda: SimulateRunConfig(
        synth=_read_synth(r, d.synth),
        support_length=r.get_float("simulate", "support_length", d.support_length),
        n_samples=r.get_optional_int("simulate", "n_samples", d.n_samples),
        calibrate_beta=r.get_bool("simulate", "calibrate_beta", d.calibrate_beta)))
    r.check_unknown()
    return cfg


def serialize_simulate_config(c: SimulateRunConfig) -> str:
    return _write_sections({
        "synth": _synth_section(c.synth),
        "simulate": {
            "support_length": c.support_length,
            "n_samples": "auto" if c.n_samples is None else c.n_samples,
            "calibrate_beta": c.calibrate_beta,
        },
    })


def parse_fit_config(text: str, source: str = "<config>") -> FitRunConfig:
    r = _Reader(text, source)
    cfg = _read_fitrun(r, FitRunConfig())
    r.check_unknown()
    return cfg


def serialize_fit_config(c: FitRunConfig) -> str:
    return _write_sections(_fitrun_sections(c))


def parse_benchmark_config(text: str, source: str = "<config>") -> BenchmarkRunConfig:
    r = _Reader(text, source)
    d = BenchmarkConfig()
    kernel = r.wrap(lambda: KernelParams(
        amplitude=r.get_float("kernel", "amplitude", d.kernel.amplitude),
        length_scale=r.get_float("kernel", "length_scale", d.kernel.length_scale)))
    r.get_str("kernel", "family", "squared-exponential")
    bench = r.wrap(lambda: BenchmarkConfig(
        data_peaks=r.get_floats("benchmark", "data_peaks", d.data_peaks),
        method_peaks=r.get_floats("benchmark", "method_peaks", d.method_peaks),
        noise_sds=r.get_floats("benchmark", "noise_sds", d.noise_sds),
        n_seeds=r.get_int("benchmark", "n_seeds", d.n_seeds),
        seed=r.get_int("benchmark", "seed", d.seed),
        methods=r.get_strs("benchmark", "methods", d.methods),
        synth=_read_synth(r, d.synth),
        support_length=r.get_float("benchmark", "support_length", d.support_length),
        kernel=kernel,
        prior_noise_variance=r.get_float("benchmark", "prior_noise_variance",
                                         d.prior_noise_variance),
        fit=_read_fit(r, d.fit),
        score_against=r.get_str("benchmark", "score_against", d.score_against),
        calibrate_beta=r.get_bool("benchmark", "calibrate_beta", d.calibrate_beta),
        n_jobs=r.get_optional_int("benchmark", "n_jobs", d.n_jobs)))
    r.check_unknown()
    return BenchmarkRunConfig(benchmark=bench)


def serialize_benchmark_config(c: BenchmarkRunConfig) -> str:
    b = c.benchmark
    sections = {
        "benchmark": {
            "data_peaks": _floats_str(b.data_peaks),
            "method_peaks": _floats_str(b.method_peaks),
            "noise_sds": _floats_str(b.noise_sds),
            "n_seeds": b.n_seeds,
            "seed": b.seed,
            "methods": " ".join(b.methods),
            "support_length": b.support_length,
            "prior_noise_variance": b.prior_noise_variance,
            "score_against": b.score_against,
            "calibrate_beta": b.calibrate_beta,
            "n_jobs": "auto" if b.n_jobs is None else b.n_jobs,
        },
        "synth": _synth_section(b.synth),
        "kernel": {
            "family": "squared-exponential",
            "amplitude": b.kernel.amplitude,
            "length_scale": b.kernel.length_scale,
        },
    }
    sections.update(_fit_sections(b.fit))
    return _write_sections(sections)


def parse_gamma_study_config(text: str, source: str = "<config>") -> GammaStudyRunConfig:
    r = _Reader(text, source)
    d = GammaStudyRunConfig()
    cfg = r.wrap(lambda: GammaStudyRunConfig(
        gammas=r.get_floats("gamma_study", "gammas", d.gammas),
        amplitude=r.get_float("gamma_study", "amplitude", d.amplitude),
        synth=_read_synth(r, d.synth),
        support_length=r.get_float("gamma_study", "support_length", d.support_length),
        output_grid_step=r.get_float("gamma_study", "output_grid_step",
                                     d.output_grid_step),
        max_outer_iterations=r.get_int("gamma_study", "max_outer_iterations",
                                       d.max_outer_iterations),
        convergence_tol=r.get_float("gamma_study", "convergence_tol",
                                    d.convergence_tol),
        calibrate_beta=r.get_bool("gamma_study", "calibrate_beta", d.calibrate_beta)))
    r.check_unknown()
    return cfg


def serialize_gamma_study_config(c: GammaStudyRunConfig) -> str:
    return _write_sections({
        "gamma_study": {
            "gammas": _floats_str(c.gammas),
            "amplitude": c.amplitude,
            "support_length": c.support_length,
            "output_grid_step": c.output_grid_step,
            "max_outer_iterations": c.max_outer_iterations,
            "convergence_tol": c.convergence_tol,
            "calibrate_beta": c.calibrate_beta,
        },
        "synth": _synth_section(c.synth),
    })


def parse_score_config(text: str, source: str = "<config>") -> ScoreRunConfig:
    r = _Reader(text, source)
    d = ScoreRunConfig()
    cfg = r.wrap(lambda: ScoreRunConfig(
        fitrun=_read_fitrun(r, d.fitrun),
        canonical_peak_time=r.get_float("score", "canonical_peak_time",
                                        d.canonical_peak_time)))
    r.check_unknown()
    return cfg


def serialize_score_config(c: ScoreRunConfig) -> str:
    sections = _fitrun_sections(c.fitrun)
    sections["score"] = {"canonical_peak_time": c.canonical_peak_time}
    return _write_sections(sections)
