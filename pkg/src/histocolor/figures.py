"""Evaluation figures rendered to image files.

Matplotlib with the Agg backend only; PNG metadata is stripped so repeated
runs produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_SAVE_KW = {"dpi": 100, "metadata": {"Software": None}}


def save_cumulative_curve(curve, path) -> None:
    """Plot (threshold, fraction) pairs as the cumulative error curve."""
    thresholds = [t for t, _ in curve]
    fractions = [f for _, f in curve]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(thresholds, fractions, lw=1.5)
    ax.set_xlabel("per-pixel alpha-beta error threshold")
    ax.set_ylabel("fraction of pixels within threshold")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_psnr_histogram(per_image_psnr, path, bins: int = 20) -> None:
    """Histogram of per-image PSNR values in dB."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.hist(list(per_image_psnr), bins=bins, edgecolor="black", linewidth=0.5)
    ax.set_xlabel("per-image PSNR (dB)")
    ax.set_ylabel("image count")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
