"""Complementary masking and paired-view generation for 1-D signals.

The core object is a binary keep-mask m over T samples with exactly
floor(T/2) zeros arranged in K contiguous patches; the two training views of
a signal x are m*x and (1-m)*x, so together they partition the samples. Point
masks and the two augmentation-based baselines live here too, behind one
strategy switch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import interpolate_linear
from .rng import RngStream

STRATEGY_VARIANTS = ("nerula_mask", "random_point", "byol", "clocs")


@dataclass(frozen=True)
class MaskSpec:
    """Sampling contract for a patch mask over a length-T signal."""
    total_len: int
    min_patches: int = 15
    max_patches: int = 30

    def __post_init__(self):
        if self.total_len < 2:
            raise ValueError(f"total_len must be >= 2, got {self.total_len}")
        if not 1 <= self.min_patches <= self.max_patches:
            raise ValueError(
                f"need 1 <= min_patches <= max_patches, got "
                f"[{self.min_patches}, {self.max_patches}]")

    @property
    def masked_count(self) -> int:
        # exactly half the samples are zeroed (floor for odd T)
        return self.total_len // 2


def zero_runs(bits: np.ndarray) -> np.ndarray:
    """(start, length) pairs for each maximal run of zeros."""
    z = np.concatenate([[1.0], np.asarray(bits, dtype=np.float64), [1.0]])
    starts = np.flatnonzero((z[:-1] != 0) & (z[1:] == 0))
    ends = np.flatnonzero((z[:-1] == 0) & (z[1:] != 0))
    return np.stack([starts, ends - starts], axis=1) if len(starts) else np.zeros((0, 2), int)


def _composition(total: int, parts: int, rng: RngStream) -> np.ndarray:
    """Uniform composition of `total` into `parts` positive integers."""
    if parts == 1:
        return np.array([total])
    cuts = np.sort(rng.choice(total - 1, parts - 1, replace=False)) + 1
    edges = np.concatenate([[0], cuts, [total]])
    return np.diff(edges)


def _weak_composition(total: int, parts: int, rng: RngStream) -> np.ndarray:
    """Uniform composition of `total` into `parts` nonnegative integers."""
    if parts == 1:
        return np.array([total])
    if total == 0:
        return np.zeros(parts, dtype=int)
    bars = np.sort(rng.choice(total + parts - 1, parts - 1, replace=False))
    edges = np.concatenate([[-1], bars, [total + parts - 1]])
    return np.diff(edges) - 1


def sample_patch_mask(spec: MaskSpec, rng: RngStream) -> np.ndarray:
    """Keep-mask with exactly spec.masked_count zeros in K patches,
    K uniform on [min_patches, max_patches] (clipped to what fits).

    Patches are separated by at least one kept sample; the two ends may or
    may not be kept. Layout is drawn exactly (uniform over valid
    configurations) rather than by retry. Note the marginal keep-probability
    is slightly above 1/2 in the first and last few samples, a property of
    the patches-with-gaps distribution itself.
    """
    T = spec.total_len
    M = spec.masked_count
    U = T - M
    k_hi = min(spec.max_patches, M, U + 1)
    k_lo = min(spec.min_patches, k_hi)
    K = int(rng.integers(k_lo, k_hi + 1))
    runs = _composition(M, K, rng)
    gaps = _weak_composition(U - (K - 1), K + 1, rng)
    gaps[1:-1] += 1  # interior gaps keep patches separated
    lengths = np.empty(2 * K + 1, dtype=int)
    lengths[0::2] = gaps
    lengths[1::2] = runs
    values = np.zeros(2 * K + 1)
    values[0::2] = 1.0
    bits = np.repeat(values, lengths)
    got = len(zero_runs(bits))
    if got != K or int((bits == 0).sum()) != M:
        raise AssertionError(
            f"mask sampler produced {got} patches / {(bits == 0).sum()} zeros, "
            f"wanted {K} / {M}")
    return bits


def sample_point_mask(spec: MaskSpec, rng: RngStream) -> np.ndarray:
    """Keep-mask with exactly spec.masked_count zeros at uniform positions
    (no patch structure)."""
    bits = np.ones(spec.total_len)
    drop = rng.permutation(spec.total_len)[:spec.masked_count]
    bits[drop] = 0.0
    return bits


@dataclass(frozen=True)
class MaskPair:
    """A keep-mask and its exact complement; together they cover every sample."""
    primary: np.ndarray
    secondary: np.ndarray

    def __post_init__(self):
        p, s = self.primary, self.secondary
        if p.shape != s.shape:
            raise ValueError(f"mask shapes differ: {p.shape} vs {s.shape}")
        for m in (p, s):
            if not np.all((m == 0.0) | (m == 1.0)):
                raise ValueError("masks must be exactly binary")
        if not np.all(p + s == 1.0):
            raise ValueError("masks are not complementary")


def make_pair(bits: np.ndarray) -> MaskPair:
    return MaskPair(primary=bits, secondary=1.0 - bits)


# ----------------------------------------------------------------- strategies

@dataclass(frozen=True)
class PairStrategy:
    """How to turn one signal into a pair of training views."""
    variant: str = "nerula_mask"
    min_patches: int = 15
    max_patches: int = 30
    noise_sigma_frac: float = 0.05
    crop_fraction: float = 0.9
    flip_prob: float = 0.5
    segment_fraction: float = 0.5

    def __post_init__(self):
        if self.variant not in STRATEGY_VARIANTS:
            raise ValueError(
                f"unknown strategy {self.variant!r}, expected one of {STRATEGY_VARIANTS}")
        if not 0.0 < self.crop_fraction <= 1.0:
            raise ValueError(f"crop_fraction must be in (0, 1], got {self.crop_fraction}")
        if not 0.0 < self.segment_fraction <= 0.5:
            raise ValueError(
                f"segment_fraction must be in (0, 0.5], got {self.segment_fraction}")
        if self.noise_sigma_frac < 0:
            raise ValueError(f"noise_sigma_frac must be >= 0, got {self.noise_sigma_frac}")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flip_prob must be in [0, 1], got {self.flip_prob}")


@dataclass
class ViewPair:
    """Two views of one signal. For mask-based strategies the keep-masks ride
    along so deeper layers can re-apply them; augment-based strategies carry
    all-ones masks (every sample is genuine signal support)."""
    view1: np.ndarray
    view2: np.ndarray
    mask1: np.ndarray
    mask2: np.ndarray


def _augment_once(x: np.ndarray, strategy: PairStrategy, rng: RngStream) -> np.ndarray:
    T = len(x)
    y = x.copy()
    if rng.uniform() < strategy.flip_prob:
        y = y[::-1].copy()
    if rng.uniform() < strategy.flip_prob:
        y = -y
    crop_len = max(1, int(round(T * strategy.crop_fraction)))
    if crop_len < T:
        start = int(rng.integers(0, T - crop_len + 1))
        y = interpolate_linear(y[start:start + crop_len], T)
    else:
        y = interpolate_linear(y, T)  # exact copy
    if strategy.noise_sigma_frac > 0:
        sigma = strategy.noise_sigma_frac * float(np.std(x))
        y = y + sigma * rng.normal(T)
    return y


def generate_views(strategy: PairStrategy, x: np.ndarray, rng: RngStream) -> ViewPair:
    """Draw one view pair for signal x. All randomness comes from `rng`."""
    x = np.asarray(x, dtype=np.float64)
    T = len(x)
    spec = MaskSpec(T, strategy.min_patches, strategy.max_patches)
    if strategy.variant == "nerula_mask":
        bits = sample_patch_mask(spec, rng)
        return ViewPair(x * bits, x * (1.0 - bits), bits, 1.0 - bits)
    if strategy.variant == "random_point":
        bits = sample_point_mask(spec, rng)
        return ViewPair(x * bits, x * (1.0 - bits), bits, 1.0 - bits)
    if strategy.variant == "byol":
        v1 = _augment_once(x, strategy, rng.split("view", 0))
        v2 = _augment_once(x, strategy, rng.split("view", 1))
        ones = np.ones(T)
        return ViewPair(v1, v2, ones, ones.copy())
    # clocs: two adjacent non-overlapping segments, kept at their original
    # positions and zero-padded back to length T
    seg = max(1, int(T * strategy.segment_fraction))
    if 2 * seg > T:
        seg = T // 2
    start = int(rng.integers(0, T - 2 * seg + 1))
    m1 = np.zeros(T)
    m2 = np.zeros(T)
    m1[start:start + seg] = 1.0
    m2[start + seg:start + 2 * seg] = 1.0
    return ViewPair(x * m1, x * m2, m1, m2)
