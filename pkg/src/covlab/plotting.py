"""Figure rendering for experiment reports.

All figures are written to files (SVG or PNG by extension); nothing is
shown interactively.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_scaling_figure(result, path) -> None:
    """Log-log scatter of mean deviation vs r/n with fitted regime lines."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    qs = np.array([p.r / p.n for p in result.grid])
    ys = np.array([p.mean_deviation / p.op_norm for p in result.grid])
    ax.loglog(qs, ys, "o", color="tab:blue", label="MC mean deviation")
    for fit, style in ((result.fit_low, "--"), (result.fit_high, ":")):
        if fit is None:
            continue
        xs = np.array([p[0] for p in fit.points])
        span = np.linspace(xs.min(), xs.max(), 32)
        ax.loglog(
            np.exp(span),
            np.exp(fit.slope * span + fit.intercept),
            style,
            color="tab:red",
            label=f"{fit.regime}: slope {fit.slope:.3f}",
        )
    ax.set_xlabel("r / n")
    ax.set_ylabel("mean deviation / operator norm")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_concentration_figure(fits, path) -> None:
    """Empirical exceedance rates at the fitted constants against e^-t."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    t_all = sorted({t for fit in fits for t in fit.t_grid})
    if t_all:
        ts = np.linspace(min(t_all), max(t_all), 64)
        ax.semilogy(ts, np.exp(-ts), "k--", label="e^-t target")
    for fit in fits:
        ts = sorted(fit.t_grid)
        rates = [max(fit.exceedance_rates[t], 1e-6) for t in ts]
        ax.semilogy(
            ts, rates, "o-",
            label=f"{fit.centering}/{fit.regime}: C={fit.fitted_constant:.2f}",
        )
    ax.set_xlabel("t")
    ax.set_ylabel("exceedance rate")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_deviation_histogram(stats, path, bins: int = 60) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    reps = np.asarray(stats.replicates)
    ax.hist(reps, bins=bins, color="tab:blue", alpha=0.75)
    ax.axvline(stats.mean, color="tab:red", label=f"mean {stats.mean:.4g}")
    ax.axvline(stats.median, color="tab:green", linestyle="--", label=f"median {stats.median:.4g}")
    ax.set_xlabel("deviation norm")
    ax.set_ylabel("replicates")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
