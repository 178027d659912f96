"""Matplotlib figures written alongside the delimited report output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def error_curve_figure(report, path) -> None:
    """Per-frame mean photometric error over the sequence."""
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(report.frame_means, lw=1.2)
    ax.axhline(report.sequence_mean, color="tab:red", ls="--", lw=0.8,
               label=f"sequence mean {report.sequence_mean:.2f}")
    ax.set_xlabel("frame")
    ax.set_ylabel("mean photometric error")
    ax.set_title("per-frame photometric error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def error_map_grid_figure(report, path, max_maps: int = 8) -> None:
    """Heat-palette grid of evenly spaced error maps."""
    n = len(report.error_maps)
    if n == 0:
        fig, ax = plt.subplots()
        ax.set_axis_off()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        return
    picks = np.unique(np.linspace(0, n - 1, min(max_maps, n)).astype(int))
    vmax = max(float(np.max(report.error_maps[i])) for i in picks) or 1.0
    cols = min(4, len(picks))
    rows = (len(picks) + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 3 * rows), squeeze=False)
    for ax in axes.reshape(-1):
        ax.set_axis_off()
    for ax, i in zip(axes.reshape(-1), picks):
        im = ax.imshow(report.error_maps[i], cmap="inferno", vmin=0.0, vmax=vmax)
        ax.set_title(f"frame {i}", fontsize=8)
    fig.colorbar(im, ax=axes, shrink=0.8, label="photometric error")
    fig.savefig(path, dpi=120)
    plt.close(fig)


def loss_history_figure(history, path) -> None:
    """Training losses per iteration (discriminator, adversarial, L1)."""
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(history.iterations, history.disc_loss, lw=0.8, label="discriminator")
    ax.plot(history.iterations, history.gen_adversarial, lw=0.8,
            label="generator adversarial")
    ax.set_xlabel("iteration")
    ax.set_ylabel("adversarial loss")
    ax2 = ax.twinx()
    ax2.plot(history.iterations, history.gen_l1, lw=0.8, color="tab:green",
             label="generator L1")
    ax2.set_ylabel("L1 loss")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="upper right")
    ax.set_title("training losses")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def comparison_bars_figure(labels: list[str], means: list[float], path,
                           title: str = "sequence mean photometric error") -> None:
    """Side-by-side sequence means for ablation comparisons."""
    fig, ax = plt.subplots(figsize=(1.6 * max(len(labels), 2) + 2, 4))
    bars = ax.bar(labels, means, color="tab:blue")
    for bar, mean in zip(bars, means):
        ax.text(bar.get_x() + bar.get_width() / 2, bar.get_height(),
                f"{mean:.2f}", ha="center", va="bottom", fontsize=9)
    ax.set_ylabel("mean photometric error")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
