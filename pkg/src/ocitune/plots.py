"""Figure rendering for the CLI report paths (matplotlib, file output only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .signals import DataBatch

__all__ = ["plot_batch", "plot_boxplots", "plot_step_comparison"]


def plot_batch(batch: DataBatch, path, max_samples: int = 200) -> None:
    """Reference/input/output traces for the head of a collected batch."""
    n = batch.n
    m = min(max_samples, batch.length)
    t = np.arange(1, m + 1)
    fig, axes = plt.subplots(3, 1, figsize=(8, 7), sharex=True)
    for i in range(n):
        axes[0].step(t, batch.r[i, :m], where="post", label=f"r{i+1}")
        axes[1].plot(t, batch.u[i, :m], label=f"u{i+1}")
        axes[2].plot(t, batch.y[i, :m], label=f"y{i+1}")
    axes[0].set_ylabel("reference")
    axes[1].set_ylabel("input")
    axes[2].set_ylabel("output")
    axes[2].set_xlabel("sample")
    for ax in axes:
        ax.legend(loc="upper right", fontsize=8)
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_boxplots(jmr_values, zhat_values, path, zhat_reference: float | None = None) -> None:
    """Side-by-side box plots of the tracking cost and the identified zero."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 4))
    jmr = [v for v in jmr_values if np.isfinite(v)]
    zh = [v for v in zhat_values if np.isfinite(v)]
    if jmr:
        ax1.boxplot(jmr, widths=0.5)
    ax1.set_title("tracking cost")
    ax1.set_yscale("log")
    ax1.set_xticks([])
    ax1.grid(True, alpha=0.3)
    if zh:
        ax2.boxplot(zh, widths=0.5)
    if zhat_reference is not None:
        ax2.axhline(zhat_reference, color="tab:red", lw=1, ls="--",
                    label=f"true zero {zhat_reference:g}")
        ax2.legend(fontsize=8)
    ax2.set_title("identified NMP zero")
    ax2.set_xticks([])
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_step_comparison(t, closed_loop, ref_model, path) -> None:
    """Per-output comparison of the achieved loop and the reference model."""
    n = closed_loop.shape[0]
    fig, axes = plt.subplots(n, 1, figsize=(8, 2.6 * n), sharex=True)
    axes = np.atleast_1d(axes)
    for i in range(n):
        axes[i].plot(t, closed_loop[i], label="closed loop")
        axes[i].plot(t, ref_model[i], "--", label="reference model")
        axes[i].set_ylabel(f"y{i+1}")
        axes[i].legend(fontsize=8)
        axes[i].grid(True, alpha=0.3)
    axes[-1].set_xlabel("sample")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
