import json

import numpy as np
import pytest

from gphrf import config as cfgmod
from gphrf.cli import main
from gphrf.errors import ConfigError
from gphrf.estimator import FitConfig
from gphrf.gp import OptimizerConfig
from gphrf.kernels import KernelParams
from gphrf.scores import BenchmarkConfig
from gphrf.synth import SynthConfig


# -- config round-trips ----------------------------------------------------------

def test_simulate_config_round_trip():
    for cfg in (cfgmod.SimulateRunConfig(),
                cfgmod.SimulateRunConfig(
                    synth=SynthConfig(n_conditions=3, n_events_total=50,
                                      mean_isi=5.5, isi_jitter_halfwidth=1.25,
                                      noise_sd=0.3, hrf_peak_time=4.5,
                                      beta_true=(1.0, 0.5, 2.0), seed=7),
                    support_length=20.0, n_samples=142, calibrate_beta=True)):
        text = cfgmod.serialize_simulate_config(cfg)
        assert cfgmod.parse_simulate_config(text) == cfg
        # serialize -> parse -> serialize is a fixed point
        again = cfgmod.serialize_simulate_config(cfgmod.parse_simulate_config(text))
        assert again == text


def test_fit_config_round_trip():
    for cfg in (cfgmod.FitRunConfig(),
                cfgmod.FitRunConfig(
                    amplitude=2.5, length_scale=0.75,
                    prior=cfgmod.PriorSpec(mean="zero", mean_peak_time=4.0,
                                           noise_variance=0.04),
                    fit=FitConfig(max_outer_iterations=7, convergence_tol=1e-6,
                                  output_grid_step=0.25,
                                  optimize_hyperparams=False, noise_mode="fixed",
                                  normalization="none",
                                  hyperopt=OptimizerConfig(step_size=0.05,
                                                           max_iterations=12,
                                                           grad_tol=1e-4),
                                  rho_snap_tol=0.02),
                    support_length=30.0)):
        text = cfgmod.serialize_fit_config(cfg)
        assert cfgmod.parse_fit_config(text) == cfg


def test_benchmark_config_round_trip():
    cfg = cfgmod.BenchmarkRunConfig(benchmark=BenchmarkConfig(
        data_peaks=(3.0, 5.0), method_peaks=(3.0,), noise_sds=(0.5,),
        n_seeds=2, seed=3, methods=("glm", "gp-zero"),
        synth=SynthConfig(n_events_total=80),
        support_length=22.0, kernel=KernelParams(1.5, 2.0),
        prior_noise_variance=0.5,
        fit=FitConfig(rho_snap_tol=0.05), score_against="noisy",
        calibrate_beta=False, n_jobs=2))
    text = cfgmod.serialize_benchmark_config(cfg)
    assert cfgmod.parse_benchmark_config(text) == cfg
    assert cfgmod.parse_benchmark_config(
        cfgmod.serialize_benchmark_config(cfgmod.BenchmarkRunConfig())) \
        == cfgmod.BenchmarkRunConfig()


def test_gamma_study_config_round_trip():
    cfg = cfgmod.GammaStudyRunConfig(gammas=(0.5, 2.0), amplitude=1.5,
                                     synth=SynthConfig(noise_sd=0.02, seed=4),
                                     support_length=20.0, output_grid_step=0.2,
                                     max_outer_iterations=6, convergence_tol=1e-5,
                                     calibrate_beta=False)
    text = cfgmod.serialize_gamma_study_config(cfg)
    assert cfgmod.parse_gamma_study_config(text) == cfg


def test_score_config_round_trip():
    cfg = cfgmod.ScoreRunConfig(canonical_peak_time=5.5)
    text = cfgmod.serialize_score_config(cfg)
    assert cfgmod.parse_score_config(text) == cfg


def test_config_error_reports_section_and_key():
    with pytest.raises(ConfigError, match=r"\[synth\] n_conditions"):
        cfgmod.parse_simulate_config("[synth]\nn_conditions = many\n")
    with pytest.raises(ConfigError, match="unknown key"):
        cfgmod.parse_simulate_config("[synth]\nn_condition = 3\n")
    with pytest.raises(ConfigError, match="unknown section"):
        cfgmod.parse_simulate_config("[synthesis]\nn_conditions = 3\n")


def test_empty_config_is_defaults():
    assert cfgmod.parse_simulate_config("") == cfgmod.SimulateRunConfig()
    assert cfgmod.parse_fit_config("") == cfgmod.FitRunConfig()


# -- CLI end to end ----------------------------------------------------------------

SIM_INI = """\
[synth]
n_events_total = 40
n_conditions = 3
noise_sd = 0.05
seed = 1
[simulate]
calibrate_beta = true
"""

FIT_INI = """\
[fit]
rho_snap_tol = 0.02
[hyperopt]
max_iterations = 15
[prior]
mean_peak_time = 5.0
"""


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "sim.ini").write_text(SIM_INI)
    (root / "fit.ini").write_text(FIT_INI)
    assert main(["simulate", "--config", str(root / "sim.ini"),
                 "--out", str(root / "runA")]) == 0
    assert main(["simulate", "--config", str(root / "sim.ini"),
                 "--out", str(root / "runB"), "--seed", "2"]) == 0
    return root


def test_simulate_outputs(sim_dir):
    out = sim_dir / "runA"
    assert (out / "paradigm.tsv").exists()
    assert (out / "timeseries.csv").exists()
    assert (out / "timeseries.png").exists()
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["n_events"] == 40
    assert meta["noise_free"] is False
    assert meta["snr_db"] == pytest.approx(10 * np.log10(1.0 / 0.05 ** 2), abs=1e-6)


def test_simulate_deterministic(sim_dir, tmp_path):
    assert main(["simulate", "--config", str(sim_dir / "sim.ini"),
                 "--out", str(tmp_path / "again")]) == 0
    for name in ("paradigm.tsv", "timeseries.csv", "metadata.json",
                 "timeseries.png"):
        assert (tmp_path / "again" / name).read_bytes() \
            == (sim_dir / "runA" / name).read_bytes()


def test_simulate_zero_noise_flag(sim_dir, tmp_path):
    (tmp_path / "s0.ini").write_text(
        "[synth]\nn_events_total = 20\nn_conditions = 2\nnoise_sd = 0.0\n")
    assert main(["simulate", "--config", str(tmp_path / "s0.ini"),
                 "--out", str(tmp_path / "out")]) == 0
    meta = json.loads((tmp_path / "out" / "metadata.json").read_text())
    assert meta["noise_free"] is True
    assert meta["snr_db"] is None


def test_fit_outputs_and_determinism(sim_dir, tmp_path):
    args = ["fit", "--config", str(sim_dir / "fit.ini"),
            "--paradigm", str(sim_dir / "runA" / "paradigm.tsv"),
            "--timeseries", str(sim_dir / "runA" / "timeseries.csv")]
    assert main(args + ["--out", str(tmp_path / "f1")]) == 0
    assert main(args + ["--out", str(tmp_path / "f2")]) == 0
    r1 = (tmp_path / "f1" / "result.json").read_bytes()
    assert r1 == (tmp_path / "f2" / "result.json").read_bytes()
    assert (tmp_path / "f1" / "hrf.csv").read_bytes() \
        == (tmp_path / "f2" / "hrf.csv").read_bytes()
    assert (tmp_path / "f1" / "hrf.png").read_bytes() \
        == (tmp_path / "f2" / "hrf.png").read_bytes()

    report = json.loads(r1)
    assert len(report["beta"]) == 3
    assert report["kernel"]["family"] == "squared-exponential"
    lines = (tmp_path / "f1" / "hrf.csv").read_text().splitlines()
    assert lines[0] == "t,mean,sd"
    cols = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert cols.shape[1] == 3
    assert np.all(cols[:, 2] >= 0)
    # unit-peak normalization shows up in the plot data
    assert np.max(np.abs(cols[:, 1])) == pytest.approx(1.0, abs=1e-9)


def test_fit_bad_config_exit_2(sim_dir, tmp_path):
    (tmp_path / "bad.ini").write_text("[fit]\nconvergence_tol = tiny\n")
    code = main(["fit", "--config", str(tmp_path / "bad.ini"),
                 "--paradigm", str(sim_dir / "runA" / "paradigm.tsv"),
                 "--timeseries", str(sim_dir / "runA" / "timeseries.csv"),
                 "--out", str(tmp_path / "out")])
    assert code == 2


def test_fit_zero_variance_exit_4(sim_dir, tmp_path, capsys):
    ts = tmp_path / "flat.csv"
    ts.write_text("time,value\n" + "".join(f"{2.0 * (i + 1)},1.0\n" for i in range(30)))
    code = main(["fit", "--paradigm", str(sim_dir / "runA" / "paradigm.tsv"),
                 "--timeseries", str(ts), "--out", str(tmp_path / "out")])
    assert code == 4
    assert "DegenerateTruth" in capsys.readouterr().err


def test_fit_unparseable_paradigm_exit_4(sim_dir, tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("onset,duration\n1,2\n")
    code = main(["fit", "--paradigm", str(bad),
                 "--timeseries", str(sim_dir / "runA" / "timeseries.csv"),
                 "--out", str(tmp_path / "out")])
    assert code == 4


def test_fit_numerical_failure_exit_5(sim_dir, tmp_path, capsys):
    # paradigm entirely after the sampled window: no lag lands in support
    late = tmp_path / "late.tsv"
    late.write_text("onset\tduration\ttrial_type\tmodulation\n"
                    "5000.0\t0\ta\t1\n5006.0\t0\ta\t1\n")
    code = main(["fit", "--paradigm", str(late),
                 "--timeseries", str(sim_dir / "runA" / "timeseries.csv"),
                 "--out", str(tmp_path / "out")])
    assert code == 5
    assert "EmptySupport" in capsys.readouterr().err


def test_no_partial_outputs_on_failure(sim_dir, tmp_path):
    out = tmp_path / "nothing"
    late = tmp_path / "late.tsv"
    late.write_text("onset\tduration\ttrial_type\tmodulation\n9000.0\t0\ta\t1\n")
    main(["fit", "--paradigm", str(late),
          "--timeseries", str(sim_dir / "runA" / "timeseries.csv"),
          "--out", str(out)])
    leftovers = [p for p in out.glob("*") if p.is_file()]
    assert leftovers == []


def test_score_protocol(sim_dir, tmp_path):
    code = main(["score", "--config", str(sim_dir / "fit.ini"),
                 "--train-paradigm", str(sim_dir / "runA" / "paradigm.tsv"),
                 "--train-timeseries", str(sim_dir / "runA" / "timeseries.csv"),
                 "--test-paradigm", str(sim_dir / "runB" / "paradigm.tsv"),
                 "--test-timeseries", str(sim_dir / "runB" / "timeseries.csv"),
                 "--out", str(tmp_path / "sc")])
    assert code == 0
    report = json.loads((tmp_path / "sc" / "scores.json").read_text())
    for side in ("gp", "glm_canonical"):
        assert report[side]["projection_r2"] >= report[side]["prediction_r2"] - 1e-10
        assert -1.0 <= report[side]["prediction_pearson"] <= 1.0
    assert (tmp_path / "sc" / "score.png").exists()


def test_benchmark_single_cell(tmp_path):
    (tmp_path / "b.ini").write_text(
        "[benchmark]\ndata_peaks = 4.0\nmethod_peaks = 4.0\nnoise_sds = 0.1\n"
        "n_seeds = 1\nmethods = glm\n\n[synth]\nn_events_total = 40\n"
        "n_conditions = 2\n")
    assert main(["benchmark", "--config", str(tmp_path / "b.ini"),
                 "--out", str(tmp_path / "bench"), "--jobs", "1"]) == 0
    lines = (tmp_path / "bench" / "scores.csv").read_text().splitlines()
    assert lines[0] == "dataset_peak,method,noise_sd,seed,prediction_r2,projection_r2,pearson"
    assert len(lines) == 2  # single cell
    summary = json.loads((tmp_path / "bench" / "summary.json").read_text())
    # medians in the summary must match recomputation from the CSV
    row = lines[1].split(",")
    assert summary["methods"][row[1]]["prediction_r2_median"] \
        == pytest.approx(float(row[4]), abs=0)
    assert (tmp_path / "bench" / "benchmark.png").exists()


def test_gamma_study_single_gamma(tmp_path):
    (tmp_path / "g.ini").write_text(
        "[gamma_study]\ngammas = 2.0\namplitude = 1.5\n\n"
        "[synth]\nn_events_total = 40\nn_conditions = 2\nnoise_sd = 0.01\n")
    assert main(["gamma-study", "--config", str(tmp_path / "g.ini"),
                 "--out", str(tmp_path / "gs")]) == 0
    kernel_rows = (tmp_path / "gs" / "kernel_gamma2.csv").read_text().splitlines()
    K = np.array([[float(v) for v in row.split(",")] for row in kernel_rows])
    assert K.shape[0] == K.shape[1]
    assert np.allclose(np.diag(K), 1.5, atol=0)
    assert (tmp_path / "gs" / "hrf_gamma2.csv").exists()
    assert (tmp_path / "gs" / "gamma_study.png").exists()


def test_seed_override_changes_outputs(sim_dir):
    a = (sim_dir / "runA" / "timeseries.csv").read_text()
    b = (sim_dir / "runB" / "timeseries.csv").read_text()
    assert a != b


def test_simulate_default_config_has_200_events(tmp_path):
    assert main(["simulate", "--out", str(tmp_path / "d"), "--no-figures"]) == 0
    lines = (tmp_path / "d" / "paradigm.tsv").read_text().splitlines()
    assert len(lines) == 201  # header + one row per event
    meta = json.loads((tmp_path / "d" / "metadata.json").read_text())
    assert meta["n_events"] == 200
    assert meta["n_conditions"] == 6


def test_io_failure_exit_3(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = main(["simulate", "--out", str(blocker / "sub"), "--no-figures"])
    assert code == 3
