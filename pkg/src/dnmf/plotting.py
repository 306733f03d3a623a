"""Figures for the CLI report paths, written next to the CSV outputs."""

from __future__ import annotations

import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.2),
    "figure.dpi": 120,
    "savefig.bbox": "tight",
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "lines.linewidth": 1.2,
    "errorbar.capsize": 2,
}

COLORS = {"dnmf": "tab:blue", "mu": "tab:orange"}


def _save(fig, path) -> Path:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}{path.suffix}")
    fig.savefig(tmp)
    plt.close(fig)
    os.replace(tmp, path)
    return path


def plot_comparison(reports, path, title: str | None = None) -> Path:
    """Mean +- std test MSE per penalty setting, one series per method."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        settings = []
        for rep in reports:
            if rep.setting not in settings:
                settings.append(rep.setting)
        x = np.arange(len(settings))
        methods = sorted({rep.method for rep in reports})
        width = 0.8 / max(len(methods), 1)
        for i, method in enumerate(methods):
            by_setting = {rep.setting: rep for rep in reports if rep.method == method}
            xs = [x[j] for j, s in enumerate(settings) if s in by_setting]
            means = [by_setting[s].mean for s in settings if s in by_setting]
            stds = [by_setting[s].std for s in settings if s in by_setting]
            ax.bar(np.asarray(xs) + (i - (len(methods) - 1) / 2) * width, means, width, yerr=stds,
                   color=COLORS.get(method), label=method.upper())
        ax.set_xticks(x)
        ax.set_xticklabels(settings)
        ax.set_xlabel(r"$\lambda$")
        ax.set_ylabel("test MSE")
        ax.set_yscale("log")
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_trace(trace, path, ylabel: str = "training loss") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(np.arange(len(trace.loss)), trace.loss, color=COLORS["dnmf"], label="train")
        if trace.metric:
            ax.plot(np.arange(len(trace.metric)), trace.metric, color="0.4", ls="--", label="held-out")
            ax.legend()
        ax.set_xlabel("epoch")
        ax.set_ylabel(ylabel)
        ax.set_yscale("log")
        return _save(fig, path)


def plot_depth(reports, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        layers = [rep.layers for rep in reports]
        ax.errorbar(layers, [rep.mean for rep in reports], yerr=[rep.std for rep in reports],
                    marker="o", color=COLORS["dnmf"])
        ax.set_xlabel("layers")
        ax.set_ylabel("test MSE")
        ax.set_yscale("log")
        return _save(fig, path)


def plot_bench(rows, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        labels = [f"{r['method'].upper()}\n{r['iterations']} it" for r in rows]
        ax.bar(labels, [r["seconds_per_column"] * 1e3 for r in rows],
               color=[COLORS.get(r["method"]) for r in rows])
        ax.set_ylabel("ms per column (median)")
        return _save(fig, path)
