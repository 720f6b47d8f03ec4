"""Dual-pathway encoder/decoder over masked 1-D signals.

The encoder is a three-stage strided conv stem (T -> T/8, C -> model_dim)
followed by pre-LN local-attention blocks with residuals. When latent
masking is on, the keep-mask is linearly resampled to each layer's length
and multiplied back in after every layer, so masked-out spans stay exactly
zero at every depth. The pooled representation is a masked mean over time
mapped to repr_dim; a two-layer projection head feeds the alignment loss,
and a mirrored transposed-conv decoder reconstructs the full signal from
the final latent sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Node, interpolate_linear
from .rng import RngStream
from .signals import Signal, normalize

POOL_EPS = 1e-8


@dataclass(frozen=True)
class EncoderConfig:
    model_dim: int = 128
    num_blocks: int = 4
    window: int = 17
    repr_dim: int = 128
    stem_channels: tuple = (32, 64, 128)
    stem_kernels: tuple = (7, 5, 5)
    stem_strides: tuple = (2, 2, 2)
    latent_masking: bool = True
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 1, got {self.window}")
        if not (len(self.stem_channels) == len(self.stem_kernels)
                == len(self.stem_strides)):
            raise ValueError("stem tuples must have equal length")
        if self.stem_channels[-1] != self.model_dim:
            raise ValueError(
                f"last stem channel count {self.stem_channels[-1]} must equal "
                f"model_dim {self.model_dim}")
        if any(k % 2 == 0 or k < 1 for k in self.stem_kernels):
            raise ValueError(f"stem kernels must be odd: {self.stem_kernels}")
        if any(s < 1 for s in self.stem_strides):
            raise ValueError(f"stem strides must be >= 1: {self.stem_strides}")
        if self.num_blocks < 1 or self.model_dim < 1 or self.repr_dim < 1:
            raise ValueError("num_blocks, model_dim, repr_dim must be >= 1")

    @property
    def reduction(self) -> int:
        out = 1
        for s in self.stem_strides:
            out *= s
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        d = dict(d)
        for key in ("stem_channels", "stem_kernels", "stem_strides"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class LatentLayer:
    act: Node
    mask: np.ndarray  # interpolated keep-mask at this layer's length [B, T_l]
    time_axis: int


@dataclass
class LatentState:
    layers: list
    final: Node        # [B, T', model_dim] after the last block
    rep: Node          # [B, repr_dim] pooled representation
    pool_mask: np.ndarray = field(default=None)


def _lecun_uniform(rng: RngStream, shape, fan_in: int) -> np.ndarray:
    limit = np.sqrt(3.0 / fan_in)
    return rng.uniform(-limit, limit, shape)


def init_params(config: EncoderConfig, seed: int) -> dict:
    """Named parameter table. Weights are LeCun-uniform in the fan-in,
    biases and layer-norm shifts zero, layer-norm gains one."""
    rng = RngStream(seed).split("init")
    p = {}
    c_in = 1
    for i, (c_out, k, _) in enumerate(zip(config.stem_channels,
                                          config.stem_kernels,
                                          config.stem_strides)):
        p[f"stem.{i}.w"] = _lecun_uniform(rng.split("stem", i), (c_out, c_in, k),
                                          c_in * k)
        p[f"stem.{i}.b"] = np.zeros(c_out)
        c_in = c_out
    d = config.model_dim
    for i in range(config.num_blocks):
        brng = rng.split("block", i)
        p[f"blocks.{i}.ln.g"] = np.ones(d)
        p[f"blocks.{i}.ln.b"] = np.zeros(d)
        for name in ("wq", "wk", "wv", "wo"):
            p[f"blocks.{i}.{name}"] = _lecun_uniform(brng.split(name), (d, d), d)
    p["final.ln.g"] = np.ones(d)
    p["final.ln.b"] = np.zeros(d)
    p["pool.w"] = _lecun_uniform(rng.split("pool"), (d, config.repr_dim), d)
    p["pool.b"] = np.zeros(config.repr_dim)
    r = config.repr_dim
    p["proj.w1"] = _lecun_uniform(rng.split("proj", 1), (r, r), r)
    p["proj.b1"] = np.zeros(r)
    p["proj.w2"] = _lecun_uniform(rng.split("proj", 2), (r, r), r)
    p["proj.b2"] = np.zeros(r)
    chans = (1,) + tuple(config.stem_channels)
    n = len(config.stem_channels)
    for i in range(n):
        c_from = chans[n - i]
        c_to = chans[n - i - 1]
        k = config.stem_kernels[n - i - 1]
        p[f"dec.{i}.w"] = _lecun_uniform(rng.split("dec", i), (c_from, c_to, k),
                                         c_from * k)
        p[f"dec.{i}.b"] = np.zeros(c_to)
    return {name: Node(arr) for name, arr in p.items()}


def _as_batched(x) -> Node:
    node = x if isinstance(x, Node) else Node(x)
    if node.value.ndim == 1:
        node = ad.reshape(node, (1, node.value.shape[0]))
    if node.value.ndim != 2:
        raise ValueError(f"expected [T] or [B,T] input, got shape {node.value.shape}")
    return node


def encode(x, mask_bits, params: dict, config: EncoderConfig) -> LatentState:
    """Run the masked encoder. x: [T] or [B,T] (array or Node); mask_bits is
    the keep-mask at input resolution, same leading shape."""
    xb = _as_batched(x)
    B, T = xb.value.shape
    mask = np.asarray(mask_bits, dtype=np.float64)
    if mask.ndim == 1:
        mask = np.broadcast_to(mask, (B, T)).copy()
    if mask.shape != (B, T):
        raise ValueError(f"mask shape {mask.shape} does not match input ({B}, {T})")

    layers = []
    h = ad.reshape(xb, (B, T, 1))
    for i, (k, s) in enumerate(zip(config.stem_kernels, config.stem_strides)):
        pad = (k - 1) // 2
        h = ad.conv1d(h, params[f"stem.{i}.w"], bias=params[f"stem.{i}.b"],
                      stride=s, padding=pad, layout="tc")
        h = ad.gelu(h)
        m = interpolate_linear(mask, h.value.shape[1])
        if config.latent_masking:
            h = ad.mul(h, m[:, :, None])
        layers.append(LatentLayer(act=h, mask=m, time_axis=1))

    m_final = layers[-1].mask
    for i in range(config.num_blocks):
        ln = ad.layer_norm(h, params[f"blocks.{i}.ln.g"],
                           params[f"blocks.{i}.ln.b"], eps=config.ln_eps)
        q = ad.matmul(ln, params[f"blocks.{i}.wq"])
        k = ad.matmul(ln, params[f"blocks.{i}.wk"])
        v = ad.matmul(ln, params[f"blocks.{i}.wv"])
        attn = ad.local_attention(q, k, v, config.window)
        out = ad.matmul(attn, params[f"blocks.{i}.wo"])
        h = ad.add(h, out)
        if config.latent_masking:
            h = ad.mul(h, m_final[:, :, None])
        layers.append(LatentLayer(act=h, mask=m_final, time_axis=1))

    hn = ad.layer_norm(h, params["final.ln.g"], params["final.ln.b"],
                       eps=config.ln_eps)
    # masked mean over time; with latent masking off every position counts
    pool_mask = m_final if config.latent_masking else np.ones_like(m_final)
    num = ad.sum_(ad.mul(hn, pool_mask[:, :, None]), axis=1)
    den = np.maximum(pool_mask.sum(axis=1), POOL_EPS)[:, None]
    pooled = ad.div(num, den)
    rep = ad.add(ad.matmul(pooled, params["pool.w"]), params["pool.b"])
    return LatentState(layers=layers, final=h, rep=rep, pool_mask=pool_mask)


def project(rep, params: dict) -> Node:
    """Projection head for the alignment loss (hidden gelu between two
    linear maps). Kept out of embed(): the complementary views share no
    input samples, so aligning raw pooled representations directly would
    push them toward a view-independent constant; the head gives the
    alignment loss a place to live without flattening the representation."""
    rep = rep if isinstance(rep, Node) else Node(rep)
    h = ad.gelu(ad.add(ad.matmul(rep, params["proj.w1"]), params["proj.b1"]))
    return ad.add(ad.matmul(h, params["proj.w2"]), params["proj.b2"])


def _decode_from(final: Node, params: dict, config: EncoderConfig,
                 target_len: int) -> Node:
    h = final  # [B, T', D]
    n = len(config.stem_channels)
    for i in range(n):
        k = config.stem_kernels[n - i - 1]
        s = config.stem_strides[n - i - 1]
        pad = (k - 1) // 2
        h = ad.conv_transpose1d(h, params[f"dec.{i}.w"], bias=params[f"dec.{i}.b"],
                                stride=s, padding=pad, output_padding=s - 1,
                                layout="tc")
        if i < n - 1:
            h = ad.gelu(h)
    B, T, C = h.value.shape
    if C != 1:
        raise AssertionError(f"decoder must end at one channel, got {C}")
    if T != target_len:
        raise ValueError(
            f"decoder produced length {T}, expected {target_len}; stem strides "
            f"{config.stem_strides} do not reconstruct this input length")
    return ad.reshape(h, (B, T))


def decode(latent: LatentState, params: dict, config: EncoderConfig,
           target_len: int = None) -> Node:
    """Reconstruct [B, T] signals from the final latent sequence."""
    if target_len is None:
        target_len = latent.final.value.shape[1] * config.reduction
    return _decode_from(latent.final, params, config, target_len)


def embed(signal, params: dict, config: EncoderConfig) -> np.ndarray:
    """Deterministic embedding of one signal: normalize, encode with an
    all-ones mask, return the pooled representation (the projection head is
    training-only plumbing)."""
    if isinstance(signal, Signal):
        x = normalize(signal).samples
    else:
        x = np.asarray(signal, dtype=np.float64)
        sd = x.std()
        x = (x - x.mean()) / sd if sd > 1e-6 else np.zeros_like(x)
    state = encode(x, np.ones_like(x), params, config)
    return state.rep.value[0].copy()


def embed_batch(signals, params: dict, config: EncoderConfig,
                batch_size: int = 32) -> np.ndarray:
    """Embeddings for a sequence of equal-length signals, [N, repr_dim].
    Row order follows input order."""
    sigs = list(signals)
    if not sigs:
        return np.zeros((0, config.repr_dim))
    rows = []
    for s in sigs:
        if isinstance(s, Signal):
            rows.append(normalize(s).samples)
        else:
            arr = np.asarray(s, dtype=np.float64)
            sd = arr.std()
            rows.append((arr - arr.mean()) / sd if sd > 1e-6 else np.zeros_like(arr))
    lens = {len(r) for r in rows}
    if len(lens) != 1:
        raise ValueError(f"embed_batch needs equal-length signals, got lengths {sorted(lens)}")
    X = np.stack(rows)
    out = []
    for lo in range(0, len(X), batch_size):
        chunk = X[lo:lo + batch_size]
        state = encode(chunk, np.ones_like(chunk), params, config)
        out.append(state.rep.value.copy())
    return np.concatenate(out, axis=0)
