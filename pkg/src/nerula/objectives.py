"""Dual-pathway losses.

Two signals train one encoder: a non-contrastive cosine alignment between
projected representations of paired views, and a Huber reconstruction
penalty on the decoded signal. The combination is a fixed weighted sum,
reconstruction weighted 10x by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node

# Degenerate (all-zero) rows get norm COSINE_NORM_EPS so their cosine is a
# well-defined 0 instead of 0/0.
COSINE_NORM_EPS = 1e-8


@dataclass(frozen=True)
class LossWeights:
    w_nce: float = 1.0
    w_recon: float = 10.0
    huber_delta: float = 1.0
    recon_masked_only: bool = False

    def __post_init__(self):
        if self.w_nce < 0 or self.w_recon < 0:
            raise ValueError(
                f"loss weights must be >= 0: w_nce={self.w_nce}, w_recon={self.w_recon}")
        if self.huber_delta <= 0:
            raise ValueError(f"huber_delta must be > 0: {self.huber_delta}")

    def to_dict(self) -> dict:
        return {"w_nce": self.w_nce, "w_recon": self.w_recon,
                "huber_delta": self.huber_delta,
                "recon_masked_only": self.recon_masked_only}

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        return cls(**d)


@dataclass(frozen=True)
class LossReport:
    """Scalar summary of one combined-loss evaluation."""
    nce: float
    recon: float
    total: float
    step: int = 0


def _as_2d_node(z, name):
    node = z if isinstance(z, Node) else Node(z)
    if node.value.ndim != 2:
        raise ValueError(f"{name} must be [B, L], got shape {node.value.shape}")
    return node


def cosine_nce_loss(z_i, z_j) -> Node:
    """Negative mean cosine similarity across paired rows; in [-1, 1]."""
    zi = _as_2d_node(z_i, "z_i")
    zj = _as_2d_node(z_j, "z_j")
    if zi.value.shape != zj.value.shape:
        raise ValueError(
            f"cosine_nce_loss shape mismatch: {zi.value.shape} vs {zj.value.shape}")
    dots = ad.sum_(ad.mul(zi, zj), axis=1)
    ni = ad.pow_const(ad.add(ad.sum_(ad.mul(zi, zi), axis=1),
                             COSINE_NORM_EPS ** 2), 0.5)
    nj = ad.pow_const(ad.add(ad.sum_(ad.mul(zj, zj), axis=1),
                             COSINE_NORM_EPS ** 2), 0.5)
    cos = ad.div(dots, ad.mul(ni, nj))
    return ad.neg(ad.mean(cos))


def huber_loss(y, y_hat, delta: float = 1.0, weights=None) -> Node:
    """Mean elementwise Huber error: 0.5 e^2 inside |e| <= delta, linear
    outside. With `weights` (same shape, nonnegative) the mean runs over
    weighted positions only, e.g. masked samples."""
    if delta <= 0:
        raise ValueError(f"delta must be > 0: {delta}")
    yn = y if isinstance(y, Node) else Node(y)
    hn = y_hat if isinstance(y_hat, Node) else Node(y_hat)
    if yn.value.shape != hn.value.shape:
        raise ValueError(
            f"huber_loss shape mismatch: {yn.value.shape} vs {hn.value.shape}")
    e = ad.sub(yn, hn)
    a = ad.abs_(e)
    quad = ad.mul(ad.mul(e, e), 0.5)
    lin = ad.mul(ad.sub(a, 0.5 * delta), delta)
    h = ad.where(a.value <= delta, quad, lin)
    if weights is None:
        return ad.mean(h)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != yn.value.shape:
        raise ValueError(
            f"huber weights shape {w.shape} does not match {yn.value.shape}")
    if np.any(w < 0):
        raise ValueError("huber weights must be nonnegative")
    total_w = float(w.sum())
    if total_w == 0.0:
        raise ValueError("huber weights sum to zero; nothing to average")
    flat_h = ad.reshape(h, (h.value.size,))
    return ad.div(ad.sum_(ad.mul(flat_h, w.reshape(-1)), axis=0), total_w)


def combined_loss(z_i, z_j, y, y_hat, weights: LossWeights,
                  step: int = 0, recon_weights=None):
    """Weighted sum of the two pathway losses.

    Returns (total Node, LossReport). y/y_hat may be None when w_recon is 0;
    the reconstruction term is then skipped entirely.
    """
    nce = cosine_nce_loss(z_i, z_j)
    if weights.w_recon == 0.0 or y_hat is None:
        if weights.w_recon != 0.0:
            raise ValueError("w_recon > 0 requires a reconstruction (y_hat)")
        recon_val = 0.0
        total = ad.mul(nce, weights.w_nce)
    else:
        rw = recon_weights if weights.recon_masked_only else None
        recon = huber_loss(y, y_hat, weights.huber_delta, weights=rw)
        recon_val = float(recon.value)
        total = ad.add(ad.mul(nce, weights.w_nce), ad.mul(recon, weights.w_recon))
    report = LossReport(nce=float(nce.value), recon=recon_val,
                        total=float(total.value), step=step)
    return total, report
