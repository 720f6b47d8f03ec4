"""SVG figures: loss curves and reconstruction overlays.

Figures are written with a fixed hash salt and no timestamp metadata so the
same inputs produce the same bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "nerula"

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def loss_curves_svg(curves: dict, path) -> None:
    """curves: name -> sequence of total-loss values (one per step)."""
    if not curves:
        raise ValueError("no curves to plot")
    fig, ax = plt.subplots(figsize=(7, 4))
    for name in sorted(curves):
        ys = np.asarray(curves[name], dtype=np.float64)
        ax.plot(np.arange(len(ys)), ys, label=str(name), linewidth=1.2)
    ax.set_xlabel("step")
    ax.set_ylabel("total loss")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def recon_overlay_svg(x, x_hat, x_interp, mask_bits, path) -> None:
    """Original vs decoded vs interpolated signal, masked spans shaded."""
    x = np.asarray(x, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(9, 4))
    t = np.arange(len(x))
    bits = np.asarray(mask_bits, dtype=np.float64)
    lo, hi = float(min(x.min(), x_hat.min())), float(max(x.max(), x_hat.max()))
    ax.fill_between(t, lo, hi, where=bits == 0.0, color="0.85", linewidth=0,
                    label="masked")
    ax.plot(t, x, color="black", linewidth=1.0, label="signal")
    ax.plot(t, np.asarray(x_hat), color="tab:red", linewidth=0.9,
            label="decoded")
    if x_interp is not None:
        ax.plot(t, np.asarray(x_interp), color="tab:blue", linewidth=0.9,
                linestyle="--", label="interpolation")
    ax.set_xlabel("sample")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
