"""Deterministic pretraining loop and binary checkpoints.

Each step draws per-sample view pairs, encodes both views in one fused
batch, aligns their projections, decodes the primary view back to the raw
signal, and applies one Adam update. Every random draw is derived from the
config seed and stable sample indices, so a (corpus, config, seed) triple
reproduces bit-identical parameters and logs.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .masking import PairStrategy, generate_views
from .model import (EncoderConfig, LatentState, decode, encode, init_params,
                    project)
from .objectives import LossReport, LossWeights, combined_loss
from .rng import ALGORITHM, RngStream
from .signals import Signal

CHECKPOINT_MAGIC = b"NRLACKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-4
    seed: int = 0
    checkpoint_every: int = 0  # epochs between periodic saves; 0 = none
    weights: LossWeights = field(default_factory=LossWeights)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    strategy: PairStrategy = field(default_factory=PairStrategy)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.checkpoint_every < 0:
            raise ValueError(
                f"checkpoint_every must be >= 0, got {self.checkpoint_every}")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "seed": self.seed,
            "checkpoint_every": self.checkpoint_every,
            "weights": self.weights.to_dict(),
            "encoder": self.encoder.to_dict(),
            "strategy": asdict(self.strategy),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "weights" in d:
            d["weights"] = LossWeights.from_dict(d["weights"])
        if "encoder" in d:
            d["encoder"] = EncoderConfig.from_dict(d["encoder"])
        if "strategy" in d:
            d["strategy"] = PairStrategy(**d["strategy"])
        return cls(**d)


@dataclass
class TrainLog:
    reports: list
    epochs: int
    steps_per_epoch: int
    wall_clock_s: float
    rng_digest: str

    def epoch_mean_totals(self) -> np.ndarray:
        totals = np.array([r.total for r in self.reports])
        return totals.reshape(self.epochs, self.steps_per_epoch).mean(axis=1)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("step,nce,recon,total\n")
            for r in self.reports:
                fh.write(f"{r.step},{r.nce!r},{r.recon!r},{r.total!r}\n")


def _rng_digest(seed: int) -> str:
    return hashlib.blake2b(f"{ALGORITHM}:{seed}".encode(),
                           digest_size=8).hexdigest()


def _normalize_rows(corpus) -> tuple:
    rows, ids = [], []
    for i, item in enumerate(corpus):
        if isinstance(item, Signal):
            x = item.samples
            ids.append(item.id)
        else:
            x = np.asarray(item, dtype=np.float64)
            ids.append(str(i))
            if not np.all(np.isfinite(x)):
                raise ValueError(f"corpus item {i} has non-finite samples")
        sd = x.std()
        rows.append((x - x.mean()) / sd if sd > 1e-8 else np.zeros_like(x))
    lens = {len(r) for r in rows}
    if len(lens) != 1:
        raise ValueError(f"pretrain needs equal-length signals, got lengths {sorted(lens)}")
    return np.stack(rows), ids


def _offending_sample(ids, batch_idx, arrays) -> str:
    for arr in arrays:
        if arr is None:
            continue
        bad = ~np.isfinite(arr).all(axis=tuple(range(1, arr.ndim)))
        if bad.any():
            return ids[batch_idx[int(np.flatnonzero(bad)[0])]]
    return ids[batch_idx[0]]


def pretrain(corpus, cfg: TrainConfig, checkpoint_dir=None) -> tuple:
    """Train on a list of equal-length signals. Returns (params, TrainLog)."""
    if len(corpus) == 0:
        raise ValueError("pretrain corpus is empty")
    X, ids = _normalize_rows(corpus)
    n, t = X.shape
    if t % cfg.encoder.reduction != 0:
        raise ValueError(
            f"signal length {t} is not divisible by the encoder stride "
            f"{cfg.encoder.reduction}")
    params = init_params(cfg.encoder, cfg.seed)
    adam = ad.AdamState.init(params)
    root = RngStream(cfg.seed)
    reports = []
    t0 = time.perf_counter()
    step = 0
    steps_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
    for epoch in range(cfg.epochs):
        order = root.split("shuffle", epoch).permutation(n)
        for lo in range(0, n, cfg.batch_size):
            batch_idx = order[lo:lo + cfg.batch_size]
            b = len(batch_idx)
            v1 = np.empty((b, t))
            v2 = np.empty((b, t))
            m1 = np.empty((b, t))
            m2 = np.empty((b, t))
            for r, src in enumerate(batch_idx):
                pair = generate_views(cfg.strategy, X[src],
                                      root.split("views", epoch, int(src)))
                v1[r], v2[r] = pair.view1, pair.view2
                m1[r], m2[r] = pair.mask1, pair.mask2
            state = encode(np.concatenate([v1, v2]), np.concatenate([m1, m2]),
                           params, cfg.encoder)
            z = project(state.rep, params)
            z1 = ad.take_range(z, 0, b)
            z2 = ad.take_range(z, b, 2 * b)
            if cfg.weights.w_recon > 0:
                primary = LatentState(layers=[], final=ad.take_range(state.final, 0, b),
                                      rep=None)
                rec = decode(primary, params, cfg.encoder, t)
                total, report = combined_loss(
                    z1, z2, X[batch_idx], rec, cfg.weights, step=step,
                    recon_weights=1.0 - m1)
                rec_val = rec.value
            else:
                total, report = combined_loss(z1, z2, None, None, cfg.weights,
                                              step=step)
                rec_val = None
            if not np.isfinite(report.total):
                sid = _offending_sample(ids, batch_idx,
                                        (rec_val, z1.value, z2.value))
                raise FloatingPointError(
                    f"non-finite loss at step {step}: sample id {sid!r}")
            ad.backward(total)
            ad.adam_step(params, adam, lr=cfg.lr)
            for p in params.values():
                p.grad = None
            reports.append(report)
            step += 1
        if (checkpoint_dir is not None and cfg.checkpoint_every > 0
                and (epoch + 1) % cfg.checkpoint_every == 0):
            save_checkpoint(params, cfg,
                            f"{checkpoint_dir}/checkpoint_epoch{epoch + 1:04d}.nrla")
    log = TrainLog(reports=reports, epochs=cfg.epochs,
                   steps_per_epoch=steps_per_epoch,
                   wall_clock_s=time.perf_counter() - t0,
                   rng_digest=_rng_digest(cfg.seed))
    return params, log


# ----------------------------------------------------------------- checkpoints

def save_checkpoint(params: dict, cfg: TrainConfig, path) -> None:
    """Binary checkpoint: magic, manifest length, canonical JSON manifest,
    then little-endian float32 blobs in manifest order."""
    entries = []
    blobs = []
    offset = 0
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name].value, dtype="<f4")
        raw = arr.tobytes()
        entries.append({"name": name, "shape": list(arr.shape),
                        "dtype": "f4", "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "params": entries,
    }
    mraw = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(mraw)))
        fh.write(mraw)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> tuple:
    """Read a checkpoint; returns (params, TrainConfig)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic bytes)")
    pos = len(CHECKPOINT_MAGIC)
    if len(data) < pos + 8:
        raise ValueError(f"{path}: truncated before manifest length")
    (mlen,) = struct.unpack("<Q", data[pos:pos + 8])
    pos += 8
    if len(data) < pos + mlen:
        raise ValueError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(data[pos:pos + mlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: unreadable manifest: {exc}") from exc
    if manifest.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(
            f"{path}: format version {manifest.get('format_version')} "
            f"unsupported (expected {CHECKPOINT_VERSION})")
    base = pos + mlen
    params = {}
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        want = int(np.prod(shape, dtype=np.int64)) * 4
        if entry["nbytes"] != want:
            raise ValueError(
                f"{path}: parameter {entry['name']!r} shape {shape} needs "
                f"{want} bytes, manifest records {entry['nbytes']}")
        lo = base + entry["offset"]
        hi = lo + entry["nbytes"]
        if hi > len(data):
            raise ValueError(
                f"{path}: truncated blob for parameter {entry['name']!r}")
        arr = np.frombuffer(data[lo:hi], dtype="<f4").reshape(shape)
        params[entry["name"]] = Node(arr.astype(np.float64))
    cfg = TrainConfig.from_dict(manifest["config"])
    return params, cfg


# ---------------------------------------------------------------- ablation ladder

LADDER_RUNGS = (1, 2, 3, 4)


def ladder_rung_config(cfg: TrainConfig, rung: int) -> TrainConfig:
    """Cumulative-component ladder: 1 = augmentation pairs only, 2 = input
    complement masking, 3 = + latent masking, 4 = + reconstruction pathway."""
    if rung not in LADDER_RUNGS:
        raise ValueError(f"ladder rung must be in {LADDER_RUNGS}, got {rung}")
    if rung == 1:
        return replace(
            cfg,
            strategy=replace(cfg.strategy, variant="byol"),
            weights=replace(cfg.weights, w_recon=0.0),
            encoder=replace(cfg.encoder, latent_masking=False))
    if rung == 2:
        return replace(
            cfg,
            strategy=replace(cfg.strategy, variant="nerula_mask"),
            weights=replace(cfg.weights, w_recon=0.0),
            encoder=replace(cfg.encoder, latent_masking=False))
    if rung == 3:
        return replace(
            cfg,
            strategy=replace(cfg.strategy, variant="nerula_mask"),
            weights=replace(cfg.weights, w_recon=0.0),
            encoder=replace(cfg.encoder, latent_masking=True))
    return replace(
        cfg,
        strategy=replace(cfg.strategy, variant="nerula_mask"),
        encoder=replace(cfg.encoder, latent_masking=True))
