"""Figure rendering for CLI reports.

Every helper writes a PNG next to the delimited output and returns the
path; the CLI only calls them when ``--plot`` is given.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["paths_figure", "loglog_figure", "series_figure", "histogram_figure"]


def _finish(fig, out_path):
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def paths_figure(t, values, out_path, *, title="sample paths", max_lines=24):
    """Plot up to ``max_lines`` columns of a path matrix against time."""
    values = np.atleast_2d(np.asarray(values, float))
    if values.shape[0] == np.asarray(t).size and values.ndim == 2:
        values = values.T
    fig, ax = plt.subplots(figsize=(7, 4))
    for row in values[:max_lines]:
        ax.plot(t, row, lw=0.8, alpha=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("value")
    ax.set_title(title)
    return _finish(fig, out_path)


def loglog_figure(x, y, out_path, *, title="log-log fit", ref_slope=None,
                  xlabel="x", ylabel="y"):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(x, y, "o-", label="data")
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    ax.loglog(x, np.exp(intercept) * x ** slope, "--",
              label=f"fit slope {slope:.3f}")
    if ref_slope is not None:
        ax.loglog(x, y[0] * (x / x[0]) ** ref_slope, ":",
                  label=f"reference slope {ref_slope:.3f}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    return _finish(fig, out_path)


def series_figure(x, ys, out_path, *, labels=None, title="", xlabel="",
                  ylabel="", logy=False):
    fig, ax = plt.subplots(figsize=(6, 4))
    ys = np.atleast_2d(np.asarray(ys, float))
    for i, row in enumerate(ys):
        ax.plot(x, row, "o-", label=None if labels is None else labels[i])
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if labels is not None:
        ax.legend()
    return _finish(fig, out_path)


def histogram_figure(samples, out_path, *, bins=60, title="histogram"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(np.asarray(samples, float).ravel(), bins=bins, density=True,
            alpha=0.8)
    ax.set_title(title)
    ax.set_xlabel("value")
    ax.set_ylabel("density")
    return _finish(fig, out_path)
