"""Command-line surface: simulate, fit, benchmark, gamma-study, score.

Each command reads one key-value config file (all keys optional), writes
its delimited outputs plus a rendered figure into the output directory,
and is fully deterministic under a given --seed. Exit codes: 2 config
error, 3 I/O failure, 4 data-file parse or degenerate-data error,
5 numerical failure (reported with the originating error name).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import hrf, plots
from .design import build_design_matrix
from .errors import (ConfigError, DegenerateBeta, DegenerateDesign,
                     DegenerateInput, DegenerateTruth, DimensionMismatch,
                     EmptySupport, NonFinite, ParseError, SingularCovariance)
from .estimator import FitConfig, estimate_beta, fit, output_grid
from .fileio import (atomic_write, fmt, grid_from_times, read_paradigm,
                     read_timeseries, write_matrix_csv, write_paradigm,
                     write_timeseries)
from .gp import GPPrior
from .kernels import KernelParams, gram
from .paradigm import HRFSupport
from .scores import (benchmark_grid, pearson, posterior_mean_function,
                     r2_score, summarize)
from .synth import calibrated_beta, generate_paradigm, sampling_grid_for, simulate_signal

_PARSE_ERRORS = (ParseError, DegenerateTruth, DimensionMismatch)
_NUMERICAL_ERRORS = (SingularCovariance, NonFinite, EmptySupport,
                     DegenerateBeta, DegenerateDesign, DegenerateInput)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_config(path, parser_fn, default):
    if path is None:
        return default
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read config: {exc}") from exc
    return parser_fn(text, source=str(p))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_text(path, text) -> None:
    with atomic_write(path) as f:
        f.write(text)


def _prior_mean(spec: cfgmod.PriorSpec):
    if spec.mean == "zero":
        return None
    return hrf.hrf_function(hrf.peaked(spec.mean_peak_time))


def _build_prior(fitrun: cfgmod.FitRunConfig) -> GPPrior:
    return GPPrior(mean=_prior_mean(fitrun.prior),
                   kernel=KernelParams(amplitude=fitrun.amplitude,
                                       length_scale=fitrun.length_scale),
                   noise_variance=fitrun.prior.noise_variance,
                   kernel_family=fitrun.kernel_family)


def _write_hrf_csv(path, t, mean, sd) -> None:
    with atomic_write(path) as f:
        f.write("t,mean,sd\n")
        for row in zip(t, mean, sd):
            f.write(",".join(fmt(v) for v in row) + "\n")


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config, cfgmod.parse_simulate_config,
                       cfgmod.SimulateRunConfig())
    if args.seed is not None:
        cfg = dataclasses.replace(
            cfg, synth=dataclasses.replace(cfg.synth, seed=args.seed))
    support = HRFSupport(cfg.support_length)
    paradigm = generate_paradigm(cfg.synth)
    grid = sampling_grid_for(paradigm, support, cfg.synth.repetition_time,
                             n_samples=cfg.n_samples)
    h_true = hrf.hrf_function(hrf.peaked(cfg.synth.hrf_peak_time))
    if cfg.calibrate_beta:
        beta_true = calibrated_beta(paradigm, grid, h_true, support)
    else:
        beta_true = cfg.synth.beta_vector()
    sig = simulate_signal(paradigm, grid, h_true, support, beta_true,
                          cfg.synth.noise_sd, cfg.synth.seed)

    out = _out_dir(args)
    trial_types = write_paradigm(out / "paradigm.tsv", paradigm)
    write_timeseries(out / "timeseries.csv", grid.times(), sig.y)
    metadata = {
        "seed": cfg.synth.seed,
        "noise_sd": cfg.synth.noise_sd,
        "noise_free": cfg.synth.noise_sd == 0.0,
        "snr_db": sig.snr_db,
        "true_peak_time": cfg.synth.hrf_peak_time,
        "n_events": paradigm.n_events,
        "n_conditions": paradigm.n_conditions,
        "n_samples": grid.n_samples,
        "repetition_time": cfg.synth.repetition_time,
        "support_length": cfg.support_length,
        "beta_true": [float(b) for b in beta_true],
        "trial_types": {name: idx for idx, name in trial_types.items()},
    }
    _write_text(out / "metadata.json", _dump_json(metadata))
    if not args.no_figures:
        plots.save_figure(plots.timeseries_figure(grid.times(), sig.y, sig.y_clean),
                          out / "timeseries.png")
    return 0


def cmd_fit(args) -> int:
    cfg = _load_config(args.config, cfgmod.parse_fit_config, cfgmod.FitRunConfig())
    paradigm, trial_types = read_paradigm(args.paradigm)
    times, y = read_timeseries(args.timeseries)
    grid = grid_from_times(times)
    if float(np.var(y)) == 0.0:
        raise DegenerateTruth(f"{args.timeseries}: timeseries has zero variance")

    support = HRFSupport(cfg.support_length)
    prior = _build_prior(cfg)
    result = fit(y, paradigm, grid, support, prior, cfg.fit)

    out = _out_dir(args)
    post = result.hrf_posterior
    report = {
        "beta": [float(b) for b in result.beta],
        "converged": result.converged,
        "hrf_scale": result.hrf_scale,
        "kernel": {
            "family": cfg.kernel_family,
            "amplitude": result.kernel_params.amplitude,
            "length_scale": result.kernel_params.length_scale,
        },
        "loglik_trace": [float(v) for v in result.loglik_trace],
        "n_conditions": paradigm.n_conditions,
        "n_iterations": result.n_iterations,
        "noise_variance": result.noise_variance,
        "trial_types": {name: idx for idx, name in trial_types.items()},
    }
    _write_text(out / "result.json", _dump_json(report))
    _write_hrf_csv(out / "hrf.csv", post.query_abscissae, post.mean, post.sd())
    if not args.no_figures:
        prior_curve = (prior.mean_at(post.query_abscissae)
                       if prior.mean is not None else None)
        plots.save_figure(
            plots.hrf_figure(post.query_abscissae, post.mean, post.sd(),
                             prior_mean=prior_curve),
            out / "hrf.png")
    return 0


def cmd_benchmark(args) -> int:
    cfg = _load_config(args.config, cfgmod.parse_benchmark_config,
                       cfgmod.BenchmarkRunConfig())
    bench = cfg.benchmark
    if args.seed is not None:
        bench = dataclasses.replace(bench, seed=args.seed)
    if args.jobs is not None:
        bench = dataclasses.replace(bench, n_jobs=args.jobs)

    result = benchmark_grid(bench, progress=lambda msg: print(msg, file=sys.stderr))

    out = _out_dir(args)
    lines = ["dataset_peak,method,noise_sd,seed,prediction_r2,projection_r2,pearson"]
    for r in result.reports:
        lines.append(",".join([fmt(r.dataset_peak), r.method, fmt(r.noise_sd),
                               str(r.seed), fmt(r.prediction_r2),
                               fmt(r.projection_r2), fmt(r.pearson)]))
    _write_text(out / "scores.csv", "\n".join(lines) + "\n")
    _write_text(out / "summary.json", _dump_json(summarize(result)))
    if not args.no_figures:
        plots.save_figure(plots.benchmark_figure(result.reports),
                          out / "benchmark.png")
    return 0


def cmd_gamma_study(args) -> int:
    cfg = _load_config(args.config, cfgmod.parse_gamma_study_config,
                       cfgmod.GammaStudyRunConfig())
    if args.seed is not None:
        cfg = dataclasses.replace(
            cfg, synth=dataclasses.replace(cfg.synth, seed=args.seed))
    support = HRFSupport(cfg.support_length)
    paradigm = generate_paradigm(cfg.synth)
    grid = sampling_grid_for(paradigm, support, cfg.synth.repetition_time)
    h_true = hrf.hrf_function(hrf.peaked(cfg.synth.hrf_peak_time))
    beta_true = (calibrated_beta(paradigm, grid, h_true, support)
                 if cfg.calibrate_beta else cfg.synth.beta_vector())
    sig = simulate_signal(paradigm, grid, h_true, support, beta_true,
                          cfg.synth.noise_sd, cfg.synth.seed)

    # Fixed hyperparameters and fixed noise: the study isolates gamma.
    fit_cfg = FitConfig(max_outer_iterations=cfg.max_outer_iterations,
                        convergence_tol=cfg.convergence_tol,
                        output_grid_step=cfg.output_grid_step,
                        optimize_hyperparams=False,
                        noise_mode="fixed")
    dense = output_grid(support, cfg.output_grid_step)
    grams = []
    posteriors = []
    roughness = []
    for gamma in cfg.gammas:
        params = KernelParams(amplitude=cfg.amplitude, length_scale=gamma)
        prior = GPPrior(mean=None, kernel=params,
                        noise_variance=cfg.synth.noise_sd ** 2)
        result = fit(sig.y, paradigm, grid, support, prior, fit_cfg)
        grams.append(gram(params, dense, dense))
        posteriors.append(result.hrf_posterior)
        d2 = np.diff(result.hrf_posterior.mean, 2)
        roughness.append(float(np.sum(d2 * d2)))
        print(f"gamma={gamma:g} done", file=sys.stderr)

    # all fits succeeded; only now touch the output directory
    out = _out_dir(args)
    means = []
    for gamma, K, post in zip(cfg.gammas, grams, posteriors):
        write_matrix_csv(out / f"kernel_gamma{gamma:g}.csv", K)
        _write_hrf_csv(out / f"hrf_gamma{gamma:g}.csv",
                       post.query_abscissae, post.mean, post.sd())
        means.append(post.mean)
    _write_text(out / "gamma_summary.json", _dump_json({
        "gammas": list(cfg.gammas),
        "amplitude": cfg.amplitude,
        "noise_sd": cfg.synth.noise_sd,
        "sum_squared_second_difference": roughness,
    }))
    if not args.no_figures:
        true_curve = hrf.gamma_difference_hrf(dense, hrf.peaked(cfg.synth.hrf_peak_time))
        plots.save_figure(
            plots.gamma_study_figure(cfg.gammas, grams, dense, means, true_curve),
            out / "gamma_study.png")
    return 0


def cmd_score(args) -> int:
    cfg = _load_config(args.config, cfgmod.parse_score_config,
                       cfgmod.ScoreRunConfig())
    fitrun = cfg.fitrun
    par_train, trial_types = read_paradigm(args.train_paradigm)
    t_train, y_train = read_timeseries(args.train_timeseries)
    grid_train = grid_from_times(t_train)
    condition_of = {name: idx for idx, name in trial_types.items()}
    par_test, _ = read_paradigm(args.test_paradigm, condition_of=condition_of)
    t_test, y_test = read_timeseries(args.test_timeseries)
    grid_test = grid_from_times(t_test)
    for label, y in (("training", y_train), ("test", y_test)):
        if float(np.var(y)) == 0.0:
            raise DegenerateTruth(f"{label} timeseries has zero variance")

    support = HRFSupport(fitrun.support_length)
    prior = _build_prior(fitrun)
    result = fit(y_train, par_train, grid_train, support, prior, fitrun.fit)
    h_gp = posterior_mean_function(result.hrf_posterior)
    X_test_gp = build_design_matrix(par_test, grid_test, h_gp, support)
    pred_gp = X_test_gp @ result.beta

    h_can = hrf.hrf_function(hrf.peaked(cfg.canonical_peak_time))
    X_train_can = build_design_matrix(par_train, grid_train, h_can, support)
    beta_can = estimate_beta(X_train_can, y_train)
    X_test_can = build_design_matrix(par_test, grid_test, h_can, support)
    pred_can = X_test_can @ beta_can

    def side(pred, h_fn):
        X = build_design_matrix(par_test, grid_test, h_fn, support)
        if not np.any(X):
            raise DegenerateDesign("held-out design matrix is identically zero")
        proj_pred = X @ estimate_beta(X, y_test)
        return {
            "prediction_r2": r2_score(y_test, pred),
            "prediction_pearson": pearson(y_test, pred),
            "projection_r2": r2_score(y_test, proj_pred),
            "projection_pearson": pearson(y_test, proj_pred),
        }

    report = {
        "gp": side(pred_gp, h_gp),
        "glm_canonical": side(pred_can, h_can),
        "gp_kernel": {
            "amplitude": result.kernel_params.amplitude,
            "length_scale": result.kernel_params.length_scale,
        },
        "canonical_peak_time": cfg.canonical_peak_time,
    }
    out = _out_dir(args)
    _write_text(out / "scores.json", _dump_json(report))
    if not args.no_figures:
        plots.save_figure(
            plots.score_figure(grid_test.times(), y_test,
                               {"GP prediction": pred_gp,
                                "canonical GLM prediction": pred_can}),
            out / "score.png")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gphrf",
        description="Joint GP estimation of activation weights and a continuous HRF.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key-value config file (defaults when omitted)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--no-figures", action="store_true",
                       help="skip rendering PNG figures")

    p = sub.add_parser("simulate", help="generate a synthetic paradigm and timeseries")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit activations and HRF to a recorded run")
    common(p)
    p.add_argument("--paradigm", required=True, help="paradigm TSV file")
    p.add_argument("--timeseries", required=True, help="timeseries CSV file")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("benchmark", help="run the prediction/projection benchmark grid")
    common(p)
    p.add_argument("--jobs", type=int, default=None, help="worker process count")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("gamma-study", help="kernel matrices and fits for a gamma sweep")
    common(p)
    p.set_defaults(func=cmd_gamma_study)

    p = sub.add_parser("score", help="prediction/projection protocol on two runs")
    common(p)
    p.add_argument("--train-paradigm", required=True)
    p.add_argument("--train-timeseries", required=True)
    p.add_argument("--test-paradigm", required=True)
    p.add_argument("--test-timeseries", required=True)
    p.set_defaults(func=cmd_score)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _PARSE_ERRORS as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    except _NUMERICAL_ERRORS as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 5
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
