"""Synthetic ECG-like corpus, normalization, splits, and signal file IO.

Signals are float64 1-D arrays with a sample rate and an id. The generator
places sum-of-gaussians beats (P, Q, R, S, T waves) at RR intervals with
optional uniform jitter, then adds white noise; everything is driven by a
named RngStream so a corpus is bit-reproducible from its config.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .rng import RngStream

F32_MAGIC = b"NRLA"

# default lead-II-ish morphology: (P, Q, R, S, T)
WAVE_AMPLITUDES = (0.12, -0.14, 1.0, -0.22, 0.30)
WAVE_WIDTHS_S = (0.045, 0.012, 0.018, 0.014, 0.090)
WAVE_CENTERS_S = (-0.17, -0.03, 0.0, 0.03, 0.24)

# hard support cutoff for one gaussian pulse, in sigmas; beyond this the
# contribution is below 1e-14 of the amplitude and is deliberately exact zero
PULSE_SUPPORT_SIGMAS = 8.0


@dataclass
class Signal:
    samples: np.ndarray
    sample_rate_hz: float
    id: str
    label: object = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or len(self.samples) < 2:
            raise ValueError(f"signal {self.id!r}: need a 1-D array of >= 2 samples")
        if not np.all(np.isfinite(self.samples)):
            bad = int(np.flatnonzero(~np.isfinite(self.samples))[0])
            raise ValueError(f"signal {self.id!r}: non-finite sample at index {bad}")
        if not (np.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise ValueError(f"signal {self.id!r}: bad sample rate {self.sample_rate_hz}")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class SynthParams:
    """Beat morphology and rhythm for one synthetic recording."""
    heart_rate_bpm: float = 72.0
    rr_jitter_frac: float = 0.0
    amplitudes: tuple = WAVE_AMPLITUDES
    widths_s: tuple = WAVE_WIDTHS_S
    centers_s: tuple = WAVE_CENTERS_S
    noise_sigma: float = 0.0
    class_id: int = 0

    def __post_init__(self):
        if not 30.0 <= self.heart_rate_bpm <= 220.0:
            raise ValueError(f"heart_rate_bpm out of [30, 220]: {self.heart_rate_bpm}")
        if not 0.0 <= self.rr_jitter_frac < 1.0:
            raise ValueError(f"rr_jitter_frac out of [0, 1): {self.rr_jitter_frac}")
        if not (len(self.amplitudes) == len(self.widths_s) == len(self.centers_s)):
            raise ValueError("wave parameter tuples must have equal length")
        if any(w <= 0 for w in self.widths_s):
            raise ValueError(f"wave widths must be positive: {self.widths_s}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0: {self.noise_sigma}")


def synth_ecg(params: SynthParams, duration_s: float, sample_rate_hz: float,
              rng: RngStream, id: str = "synth") -> Signal:
    """One synthetic recording. Beats are laid down from before t=0 to past
    the end so the visible window has no boundary artifacts; each gaussian
    pulse has hard support of PULSE_SUPPORT_SIGMAS sigmas.
    """
    n = int(round(duration_s * sample_rate_hz))
    rr_base = 60.0 / params.heart_rate_bpm * sample_rate_hz  # samples
    if duration_s < 2 * 60.0 / params.heart_rate_bpm:
        raise ValueError(
            f"duration {duration_s}s holds fewer than two beats at "
            f"{params.heart_rate_bpm} bpm")
    margin = PULSE_SUPPORT_SIGMAS * max(params.widths_s) * sample_rate_hz
    margin += max(abs(c) for c in params.centers_s) * sample_rate_hz + 1

    # beat k sits on the regular grid (k + 1/2) * rr, displaced by up to
    # jitter * rr (uniform per beat). Anchoring to the grid keeps the peak
    # count pinned to floor(duration * HR / 60) +- 1 for every jitter level,
    # which an accumulating interval walk cannot guarantee; realized adjacent
    # RR intervals then vary by up to twice the jitter fraction.
    j = params.rr_jitter_frac
    k_lo = int(np.floor(-(margin + rr_base) / rr_base))
    k_hi = int(np.ceil((n + margin + rr_base) / rr_base))
    ks = np.arange(k_lo, k_hi + 1, dtype=np.float64)
    u = rng.uniform(-j, j, len(ks)) if j > 0 else np.zeros(len(ks))
    centers = (ks + 0.5) * rr_base + rr_base * u

    x = np.zeros(n)
    idx = np.arange(n, dtype=np.float64)
    for c in centers:
        for amp, width, off in zip(params.amplitudes, params.widths_s,
                                   params.centers_s):
            mu = c + off * sample_rate_hz
            sigma = width * sample_rate_hz
            lo = max(0, int(np.ceil(mu - PULSE_SUPPORT_SIGMAS * sigma)))
            hi = min(n, int(np.floor(mu + PULSE_SUPPORT_SIGMAS * sigma)) + 1)
            if lo >= hi:
                continue
            z = (idx[lo:hi] - mu) / sigma
            x[lo:hi] += amp * np.exp(-0.5 * z * z)
    if params.noise_sigma > 0:
        x += params.noise_sigma * rng.normal(n)
    return Signal(samples=x, sample_rate_hz=sample_rate_hz, id=id,
                  label=params.class_id)


def normalize(signal: Signal) -> Signal:
    """Per-signal z-score; constant signals map to zeros (variance floor)."""
    x = signal.samples
    mu = x.mean()
    var = x.var()
    if var < 1e-12:
        return replace(signal, samples=np.zeros_like(x))
    return replace(signal, samples=(x - mu) / np.sqrt(var))


# --------------------------------------------------------------------- corpus

@dataclass(frozen=True)
class CorpusConfig:
    seed: int = 0
    sample_rate_hz: float = 300.0
    duration_s: float = 10.0
    pretrain_count: int = 300
    rhythm_per_class: int = 50
    attr_per_class: int = 40
    rate_count: int = 80

    def __post_init__(self):
        if self.duration_s * self.sample_rate_hz < 16:
            raise ValueError("corpus signals must be at least 16 samples long")


@dataclass
class Corpus:
    """pretrain: unlabeled pool. rhythm3: regular / irregular-RR / noisy
    (class ids 0/1/2). attr2: narrow vs wide QRS (0/1). rate: label is the
    true heart rate in bpm."""
    config: CorpusConfig
    pretrain: list = field(default_factory=list)
    rhythm3: list = field(default_factory=list)
    attr2: list = field(default_factory=list)
    rate: list = field(default_factory=list)


def _morphology(rng: RngStream, r_width_range=None) -> dict:
    amps = np.array(WAVE_AMPLITUDES) * rng.uniform(0.70, 1.30, 5)
    widths = np.array(WAVE_WIDTHS_S) * rng.uniform(0.85, 1.20, 5)
    if r_width_range is not None:
        widths[2] = rng.uniform(*r_width_range)
    return {"amplitudes": tuple(amps), "widths_s": tuple(widths)}


def _corpus_item(role: str, i: int, class_id: int, cfg: CorpusConfig,
                 root: RngStream) -> Signal:
    item = root.split(role, class_id, i)
    prng = item.split("params")
    hr = float(prng.uniform(55.0, 110.0))
    if role == "pretrain":
        # the unlabeled pool spans every regime the probe sets draw from;
        # nothing downstream is out-of-distribution for the encoder
        params = SynthParams(
            heart_rate_bpm=hr,
            rr_jitter_frac=float(prng.uniform(0.0, 0.45)),
            noise_sigma=float(prng.uniform(0.02, 0.45)),
            **_morphology(prng), class_id=0)
        sid = f"pretrain-{i:04d}"
        label = None
    elif role == "rhythm3":
        # nuisance ranges overlap across classes so that global statistics
        # alone do not solve the task; the class-defining parameter keeps a
        # clear margin (no label ambiguity)
        jitter = (prng.uniform(0.0, 0.06), prng.uniform(0.28, 0.45),
                  prng.uniform(0.0, 0.06))[class_id]
        noise = (prng.uniform(0.08, 0.26), prng.uniform(0.08, 0.26),
                 prng.uniform(0.30, 0.45))[class_id]
        params = SynthParams(
            heart_rate_bpm=hr, rr_jitter_frac=float(jitter),
            noise_sigma=float(noise), **_morphology(prng), class_id=class_id)
        sid = f"rhythm3-c{class_id}-{i:04d}"
        label = class_id
    elif role == "attr2":
        r_width = ((0.015, 0.020), (0.032, 0.040))[class_id]
        params = SynthParams(
            heart_rate_bpm=hr,
            rr_jitter_frac=float(prng.uniform(0.0, 0.10)),
            noise_sigma=float(prng.uniform(0.05, 0.20)),
            **_morphology(prng, r_width_range=r_width), class_id=class_id)
        sid = f"attr2-c{class_id}-{i:04d}"
        label = class_id
    elif role == "rate":
        params = SynthParams(
            heart_rate_bpm=hr,
            rr_jitter_frac=float(prng.uniform(0.0, 0.08)),
            noise_sigma=float(prng.uniform(0.05, 0.20)),
            **_morphology(prng), class_id=0)
        sid = f"rate-{i:04d}"
        label = hr
    else:
        raise ValueError(f"unknown corpus role {role!r}")
    sig = synth_ecg(params, cfg.duration_s, cfg.sample_rate_hz,
                    item.split("synth"), id=sid)
    sig.label = label
    return sig


def build_corpus(cfg: CorpusConfig) -> Corpus:
    root = RngStream(cfg.seed).split("corpus")
    corpus = Corpus(config=cfg)
    for i in range(cfg.pretrain_count):
        corpus.pretrain.append(_corpus_item("pretrain", i, 0, cfg, root))
    for class_id in range(3):
        for i in range(cfg.rhythm_per_class):
            corpus.rhythm3.append(_corpus_item("rhythm3", i, class_id, cfg, root))
    for class_id in range(2):
        for i in range(cfg.attr_per_class):
            corpus.attr2.append(_corpus_item("attr2", i, class_id, cfg, root))
    for i in range(cfg.rate_count):
        corpus.rate.append(_corpus_item("rate", i, 0, cfg, root))
    return corpus


# ---------------------------------------------------------------------- splits

@dataclass(frozen=True)
class DatasetSplit:
    train: tuple
    val: tuple
    test: tuple

    def __post_init__(self):
        seen = set()
        for part in (self.train, self.val, self.test):
            for sid in part:
                if sid in seen:
                    raise ValueError(f"id {sid!r} appears in more than one split part")
                seen.add(sid)


def split_ids(ids, fractions, seed: int) -> DatasetSplit:
    """Shuffle ids and cut into train/val/test by largest-remainder counts,
    so the parts are disjoint, cover everything, and match the requested
    proportions as closely as integers allow."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be 3 nonnegative numbers summing to 1: {fractions}")
    ids = list(ids)
    n = len(ids)
    order = RngStream(seed).split("split").permutation(n)
    shuffled = [ids[i] for i in order]
    raw = [f * n for f in fractions]
    counts = [int(np.floor(r)) for r in raw]
    rem = n - sum(counts)
    by_frac = sorted(range(3), key=lambda i: (raw[i] - counts[i], -i), reverse=True)
    for i in range(rem):
        counts[by_frac[i % 3]] += 1
    a, b = counts[0], counts[0] + counts[1]
    return DatasetSplit(train=tuple(shuffled[:a]), val=tuple(shuffled[a:b]),
                        test=tuple(shuffled[b:]))


def stratified_split_ids(ids, labels, fractions, seed: int) -> DatasetSplit:
    """Split ids per label group so every class appears in every part at the
    requested proportions. Small labeled sets split as one pool can easily
    leave a class nearly absent from the evaluation part."""
    ids = list(ids)
    labels = list(labels)
    if len(ids) != len(labels):
        raise ValueError(
            f"ids/labels length mismatch: {len(ids)} vs {len(labels)}")
    groups = {}
    for sid, lab in zip(ids, labels):
        groups.setdefault(lab, []).append(sid)
    parts = ([], [], [])
    for k, lab in enumerate(sorted(groups)):
        sp = split_ids(groups[lab], fractions, seed=seed + 7919 * (k + 1))
        for part, add in zip(parts, (sp.train, sp.val, sp.test)):
            part.extend(add)
    return DatasetSplit(train=tuple(parts[0]), val=tuple(parts[1]),
                        test=tuple(parts[2]))


# -------------------------------------------------------------------- file IO

def save_signal_csv(signal: Signal, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"sample_rate_hz={float(signal.sample_rate_hz)!r}\n")
        for v in signal.samples:
            fh.write(f"{float(v)!r}\n")  # repr round-trips float64 exactly


def load_signal_csv(path, id: str = None, default_rate_hz: float = None) -> Signal:
    """One sample per line; an optional first line `sample_rate_hz=<float>`
    carries the rate, otherwise default_rate_hz must be given."""
    rate = default_rate_hz
    samples = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if lineno == 1 and line.startswith("sample_rate_hz="):
                try:
                    rate = float(line.split("=", 1)[1])
                except ValueError:
                    raise ValueError(f"{path}: line 1: bad sample rate {line!r}")
                continue
            try:
                v = float(line)
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: could not parse {line!r}")
            if not np.isfinite(v):
                raise ValueError(f"{path}: line {lineno}: non-finite sample {line!r}")
            samples.append(v)
    if rate is None:
        raise ValueError(f"{path}: no sample_rate_hz header and no default rate given")
    if len(samples) < 2:
        raise ValueError(f"{path}: needs at least 2 samples, found {len(samples)}")
    return Signal(samples=np.array(samples), sample_rate_hz=rate,
                  id=id or str(path))


def save_signal_f32(signal: Signal, path) -> None:
    """Binary format: b'NRLA', float32 LE sample rate, float32 LE samples."""
    with open(path, "wb") as fh:
        fh.write(F32_MAGIC)
        fh.write(struct.pack("<f", signal.sample_rate_hz))
        fh.write(signal.samples.astype("<f4").tobytes())


def load_signal_f32(path, id: str = None) -> Signal:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != F32_MAGIC:
        raise ValueError(f"{path}: bad magic at offset 0: {blob[:4]!r}")
    if len(blob) < 8:
        raise ValueError(f"{path}: truncated header ({len(blob)} bytes)")
    if (len(blob) - 8) % 4 != 0:
        raise ValueError(f"{path}: payload is not whole float32s "
                         f"({len(blob) - 8} bytes after offset 8)")
    rate = struct.unpack("<f", blob[4:8])[0]
    samples = np.frombuffer(blob[8:], dtype="<f4").astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(samples))
    if len(bad):
        raise ValueError(
            f"{path}: non-finite sample at offset {8 + 4 * int(bad[0])}")
    if not np.isfinite(rate) or rate <= 0:
        raise ValueError(f"{path}: bad sample rate {rate} at offset 4")
    if len(samples) < 2:
        raise ValueError(f"{path}: needs at least 2 samples, found {len(samples)}")
    return Signal(samples=samples, sample_rate_hz=float(rate), id=id or str(path))


CORPUS_ROLES = ("pretrain", "rhythm3", "attr2", "rate")


def save_corpus(corpus: Corpus, dirpath) -> None:
    """Write index.json plus one binary file per signal under signals/."""
    import json
    import os

    sig_dir = os.path.join(str(dirpath), "signals")
    os.makedirs(sig_dir, exist_ok=True)
    index = {"config": {k: getattr(corpus.config, k)
                        for k in corpus.config.__dataclass_fields__},
             "roles": {}}
    for role in CORPUS_ROLES:
        entries = []
        for sig in getattr(corpus, role):
            fname = f"signals/{sig.id}.f32"
            save_signal_f32(sig, os.path.join(str(dirpath), fname))
            entries.append({"id": sig.id, "file": fname, "label": sig.label})
        index["roles"][role] = entries
    with open(os.path.join(str(dirpath), "index.json"), "w") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)


def load_corpus(dirpath) -> Corpus:
    import json
    import os

    index_path = os.path.join(str(dirpath), "index.json")
    if not os.path.exists(index_path):
        raise ValueError(f"{dirpath}: no index.json, not a corpus directory")
    with open(index_path) as fh:
        index = json.load(fh)
    corpus = Corpus(config=CorpusConfig(**index["config"]))
    for role in CORPUS_ROLES:
        for entry in index["roles"].get(role, []):
            sig = load_signal_f32(os.path.join(str(dirpath), entry["file"]),
                                  id=entry["id"])
            sig.label = entry["label"]
            getattr(corpus, role).append(sig)
    return corpus
