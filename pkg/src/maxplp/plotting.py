"""Report figures.  Everything renders off-screen to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "savefig.dpi": 120,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_residuals(signal, residuals: dict, rate: float, path, gcis=None, span=None):
    """Speech on top, one residual per row below; optional GCI markers."""
    with plt.rc_context(STYLE):
        n = len(residuals) + 1
        fig, axes = plt.subplots(n, 1, sharex=True, figsize=(7.0, 1.6 * n))
        lo, hi = span if span is not None else (0, len(signal))
        t = np.arange(lo, hi) / rate
        axes[0].plot(t, signal[lo:hi], lw=0.8, color="k")
        axes[0].set_ylabel("speech")
        for ax, (name, r) in zip(axes[1:], residuals.items()):
            ax.plot(t, r[lo:hi], lw=0.8)
            ax.set_ylabel(name)
        if gcis is not None:
            for ax in axes:
                for g in gcis:
                    if lo <= g < hi:
                        ax.axvline(g / rate, color="r", lw=0.5, alpha=0.5)
        axes[-1].set_xlabel("time (s)")
        return _save(fig, path)


def plot_improvements(rows, path):
    """Grouped bars of relative sparsity improvement, one group per metric."""
    metrics = sorted({r["metric"] for r in rows})
    methods = [m for m in dict.fromkeys(r["method"] for r in rows)]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        width = 0.8 / max(len(methods), 1)
        for j, method in enumerate(methods):
            vals = []
            for metric in metrics:
                match = [r["improvement_pct"] for r in rows if r["metric"] == metric and r["method"] == method]
                vals.append(match[0] if match else np.nan)
            ax.bar(np.arange(len(metrics)) + j * width, vals, width, label=method)
        ax.set_xticks(np.arange(len(metrics)) + 0.4 - width / 2)
        ax.set_xticklabels(metrics)
        ax.set_ylabel("relative improvement (%)")
        ax.legend(ncol=3)
        return _save(fig, path)


def plot_rct(rct: dict, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        names = list(rct)
        ax.bar(names, [rct[n] for n in names], color="0.4")
        ax.set_ylabel("RCT (%)")
        ax.set_yscale("log")
        return _save(fig, path)


def plot_eigenvectors(model, path, count: int = 3):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.2))
        x = np.arange(model.frame_length) - model.frame_length // 2
        for i in range(min(count, len(model.eigenvectors))):
            ax1.plot(x, model.eigenvectors[i], lw=1.0, label=f"#{i + 1}")
        ax1.set_xlabel("normalized sample (GCI at 0)")
        ax1.legend()
        k = np.arange(1, len(model.cumulative_variance) + 1)
        ax2.plot(k, model.cumulative_variance, marker=".", lw=0.8)
        ax2.axhline(0.9, color="r", lw=0.6, ls="--")
        ax2.set_xlabel("eigenvectors")
        ax2.set_ylabel("cumulative variance")
        return _save(fig, path)
