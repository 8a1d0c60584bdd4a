"""Matplotlib figure rendering for the CLI report paths.

Figures are written as PNG next to the delimited output.  The Software
metadata key is stripped so that re-runs produce byte-identical files.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_PNG_META = {"Software": None}


def line_plot(xs, ys, xlabel: str, ylabel: str, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, ys, marker="o", markersize=3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def multi_line_plot(xs, series: dict, xlabel: str, ylabel: str, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, ys in series.items():
        ax.plot(xs, ys, marker="o", markersize=3, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def ci_bar_plot(labels, means, ci_lows, ci_highs, ylabel: str, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(max(5, 0.5 * len(labels)), 3.5))
    xs = range(len(labels))
    err_low = [m - lo for m, lo in zip(means, ci_lows)]
    err_high = [hi - m for m, hi in zip(means, ci_highs)]
    ax.bar(xs, means, yerr=[err_low, err_high], capsize=3)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def bar_plot(labels, values, ylabel: str, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(max(5, 0.5 * len(labels)), 3.5))
    xs = range(len(labels))
    ax.bar(xs, values)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
