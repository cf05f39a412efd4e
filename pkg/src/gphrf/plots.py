"""Figure rendering for the CLI report paths.

Every command that writes delimited output also renders a matplotlib
figure of the same data next to it. All rendering targets files through
the Agg backend; PNG metadata is stripped so identical runs produce
identical bytes.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_DPI = 110


def save_figure(fig, path) -> None:
    """Atomically write a deterministic PNG and release the figure."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        fig.savefig(tmp, format="png", dpi=_DPI, metadata={"Software": None})
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    finally:
        plt.close(fig)


def hrf_figure(t, mean, sd, prior_mean=None, title="Estimated HRF"):
    fig, ax = plt.subplots(figsize=(6, 4))
    t = np.asarray(t)
    mean = np.asarray(mean)
    sd = np.asarray(sd)
    ax.fill_between(t, mean - sd, mean + sd, alpha=0.25, color="tab:blue",
                    linewidth=0, label="posterior sd band")
    ax.plot(t, mean, color="tab:blue", label="estimated HRF")
    if prior_mean is not None:
        ax.plot(t, np.asarray(prior_mean), color="black", linewidth=1.0,
                label="GP mean")
    ax.axhline(0.0, color="gray", linewidth=0.5)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("response")
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig


def timeseries_figure(times, y, y_clean=None):
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(times, y, color="tab:gray", linewidth=0.7, label="signal")
    if y_clean is not None and not np.array_equal(y, y_clean):
        ax.plot(times, y_clean, color="tab:red", linewidth=0.9, label="clean")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("value")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig


def benchmark_figure(reports):
    """Prediction (top) and projection (bottom) medians per method and noise."""
    noises = sorted({r.noise_sd for r in reports})
    peaks = sorted({r.dataset_peak for r in reports})
    methods = sorted({r.method for r in reports})
    fig, axes = plt.subplots(2, len(noises), figsize=(4 * len(noises), 6),
                             sharex=True, squeeze=False)

    def color_for(method):
        if method.startswith("glm_"):
            return "tab:red"
        if method.startswith("gp_mean"):
            return "tab:green"
        return "tab:blue"

    for col, noise in enumerate(noises):
        for row, attr in enumerate(("prediction_r2", "projection_r2")):
            ax = axes[row][col]
            for method in methods:
                ys = []
                for peak in peaks:
                    cells = [getattr(r, attr) for r in reports
                             if r.method == method and r.noise_sd == noise
                             and r.dataset_peak == peak]
                    ys.append(np.median(cells) if cells else np.nan)
                ax.plot(peaks, ys, color=color_for(method), alpha=0.7,
                        linewidth=1.5 if method == "gp_zero" else 0.9)
            ax.set_ylim(-0.6, 1.05)
            if row == 0:
                ax.set_title(f"noise sd {noise:g}")
            if row == 1:
                ax.set_xlabel("dataset HRF peak (s)")
            if col == 0:
                ax.set_ylabel("prediction R2" if row == 0 else "projection R2")
    fig.suptitle("red: classic GLM, green: GP with peaked mean, blue: zero-mean GP",
                 fontsize=9)
    fig.tight_layout()
    return fig


def gamma_study_figure(gammas, grams, t, means, true_curve=None):
    n = len(gammas)
    fig, axes = plt.subplots(2, n, figsize=(3 * n, 5.5), squeeze=False)
    for i, gamma in enumerate(gammas):
        top = axes[0][i]
        top.imshow(grams[i], origin="lower",
                   extent=(t[0], t[-1], t[0], t[-1]), cmap="viridis")
        top.set_title(f"gamma = {gamma:g}", fontsize=9)
        bottom = axes[1][i]
        if true_curve is not None:
            bottom.plot(t, true_curve, "r--", linewidth=0.9, label="true")
        bottom.plot(t, means[i], color="tab:blue", linewidth=1.0, label="estimated")
        bottom.set_xlabel("time (s)")
        if i == 0:
            bottom.set_ylabel("response")
            bottom.legend(fontsize=7)
    fig.tight_layout()
    return fig


def score_figure(times, y_test, predictions: dict):
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(times, y_test, color="tab:gray", linewidth=0.7, label="held-out signal")
    for label, pred in predictions.items():
        ax.plot(times, pred, linewidth=0.9, label=label)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("value")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig
