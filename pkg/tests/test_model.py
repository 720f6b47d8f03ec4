"""Encoder/decoder behavior: shapes, masking guarantees, determinism."""

import numpy as np
import pytest

from nerula import autodiff as ad
from nerula.masking import MaskSpec, make_pair, sample_patch_mask
from nerula.model import (EncoderConfig, decode, embed, embed_batch, encode,
                          init_params, project)
from nerula.rng import RngStream
from nerula.signals import SynthParams, synth_ecg

TINY = EncoderConfig(model_dim=8, num_blocks=1, window=5, repr_dim=8,
                     stem_channels=(4, 4, 8))
SMALL = EncoderConfig(model_dim=32, num_blocks=2, window=9, repr_dim=16,
                      stem_channels=(8, 16, 32))


def _batch(rng, b, t):
    return rng.normal((b, t))


def _masks(t, b, seed=0):
    spec = MaskSpec(t)
    rng = RngStream(seed)
    return np.stack([sample_patch_mask(spec, rng.split("m", i)) for i in range(b)])


def test_config_validation():
    with pytest.raises(ValueError):
        EncoderConfig(window=8)
    with pytest.raises(ValueError):
        EncoderConfig(stem_channels=(8, 16), stem_kernels=(7, 5, 5))
    with pytest.raises(ValueError):
        EncoderConfig(model_dim=64, stem_channels=(32, 64, 128))
    with pytest.raises(ValueError):
        EncoderConfig(stem_kernels=(7, 4, 5), stem_channels=(32, 64, 128))
    with pytest.raises(ValueError):
        EncoderConfig(stem_strides=(2, 0, 2))
    with pytest.raises(ValueError):
        EncoderConfig(num_blocks=0)


def test_config_round_trip():
    cfg = SMALL
    again = EncoderConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert again.reduction == 8


def test_shapes():
    params = init_params(SMALL, seed=1)
    t = 512
    x = _batch(RngStream(0), 3, t)
    st = encode(x, _masks(t, 3), params, SMALL)
    assert st.final.value.shape == (3, t // SMALL.reduction, SMALL.model_dim)
    assert st.rep.value.shape == (3, SMALL.repr_dim)
    assert len(st.layers) == len(SMALL.stem_channels) + SMALL.num_blocks
    rec = decode(st, params, SMALL)
    assert rec.value.shape == (3, t)
    z = project(st.rep, params)
    assert z.value.shape == (3, SMALL.repr_dim)


def test_masked_positions_are_exact_zeros_at_every_layer():
    params = init_params(SMALL, seed=2)
    t = 512
    x = _batch(RngStream(3), 4, t)
    masks = _masks(t, 4, seed=5)
    st = encode(x, masks, params, SMALL)
    for layer in st.layers:
        assert layer.time_axis == 1
        gone = layer.mask == 0.0
        assert gone.any()
        assert np.abs(layer.act.value[gone, :]).max() == 0.0


def test_latent_masking_off_leaves_masked_positions_active():
    cfg = EncoderConfig(model_dim=32, num_blocks=2, window=9, repr_dim=16,
                        stem_channels=(8, 16, 32), latent_masking=False)
    params = init_params(cfg, seed=2)
    t = 512
    x = _batch(RngStream(3), 2, t)
    masks = _masks(t, 2, seed=5)
    st = encode(x, masks, params, cfg)
    last = st.layers[-1]
    gone = last.mask == 0.0
    assert np.abs(last.act.value[gone, :]).max() > 0.0
    assert np.all(st.pool_mask == 1.0)


def test_interpolated_complement_masks_partition_every_layer():
    params = init_params(SMALL, seed=7)
    t = 512
    x = _batch(RngStream(8), 2, t)
    pair = make_pair(sample_patch_mask(MaskSpec(t), RngStream(9)))
    st1 = encode(x, np.broadcast_to(pair.primary, (2, t)), params, SMALL)
    st2 = encode(x, np.broadcast_to(pair.secondary, (2, t)), params, SMALL)
    for l1, l2 in zip(st1.layers, st2.layers):
        np.testing.assert_allclose(l1.mask + l2.mask, 1.0, atol=1e-12)


def test_encode_is_deterministic():
    params = init_params(SMALL, seed=4)
    t = 512
    x = _batch(RngStream(6), 2, t)
    masks = _masks(t, 2)
    a = encode(x, masks, params, SMALL)
    b = encode(x, masks, params, SMALL)
    assert np.array_equal(a.final.value, b.final.value)
    assert np.array_equal(a.rep.value, b.rep.value)


def test_init_params_seeded():
    a = init_params(SMALL, seed=10)
    b = init_params(SMALL, seed=10)
    c = init_params(SMALL, seed=11)
    for name in a:
        assert np.array_equal(a[name].value, b[name].value)
    assert any(not np.array_equal(a[n].value, c[n].value) for n in a)
    assert np.all(a["stem.0.b"].value == 0.0)
    assert np.all(a["blocks.0.ln.g"].value == 1.0)
    w = a["stem.0.w"].value
    limit = np.sqrt(3.0 / (1 * SMALL.stem_kernels[0]))
    assert np.abs(w).max() <= limit


def test_gradients_reach_every_parameter():
    params = init_params(TINY, seed=1)
    t = 64
    x = _batch(RngStream(2), 2, t)
    st = encode(x, _masks(t, 2), params, TINY)
    rec = decode(st, params, TINY)
    z = project(st.rep, params)
    loss = ad.add(ad.mean(ad.mul(rec, rec)), ad.mean(ad.mul(z, z)))
    ad.backward(loss)
    for name, node in params.items():
        assert node.grad is not None, name
        assert np.all(np.isfinite(node.grad)), name


def test_decode_length_validation():
    params = init_params(TINY, seed=1)
    x = _batch(RngStream(2), 1, 64)
    st = encode(x, np.ones((1, 64)), params, TINY)
    with pytest.raises(ValueError):
        decode(st, params, TINY, target_len=100)


def test_encode_input_validation():
    params = init_params(TINY, seed=1)
    with pytest.raises(ValueError):
        encode(np.zeros((2, 2, 64)), np.ones((2, 64)), params, TINY)
    with pytest.raises(ValueError):
        encode(np.zeros((2, 64)), np.ones((3, 64)), params, TINY)


def test_embed_matches_embed_batch_and_normalizes():
    params = init_params(SMALL, seed=12)
    rng = RngStream(13)
    rows = [rng.normal(512) for _ in range(5)]
    single = np.stack([embed(r, params, SMALL) for r in rows])
    batched = embed_batch(rows, params, SMALL, batch_size=2)
    np.testing.assert_allclose(batched, single, atol=1e-12)
    # embedding is invariant to affine rescaling of the raw signal
    shifted = embed(5.0 * rows[0] + 3.0, params, SMALL)
    np.testing.assert_allclose(shifted, single[0], atol=1e-9)


def test_embed_accepts_signal_objects():
    params = init_params(SMALL, seed=12)
    sig = synth_ecg(SynthParams(), duration_s=5.12, sample_rate_hz=100.0,
                    rng=RngStream(1))
    e = embed(sig, params, SMALL)
    assert e.shape == (SMALL.repr_dim,)
    assert np.all(np.isfinite(e))


def test_embed_batch_rejects_ragged_input():
    params = init_params(SMALL, seed=12)
    with pytest.raises(ValueError):
        embed_batch([np.zeros(512), np.zeros(256)], params, SMALL)


def test_time_reversal_equivariance_at_unit_stride():
    # Reversing input and mask, with every conv kernel flipped, must reverse
    # the latent sequence and leave the pooled representation unchanged.
    cfg = EncoderConfig(model_dim=8, num_blocks=1, window=5, repr_dim=8,
                        stem_channels=(4, 4, 8), stem_strides=(1, 1, 1))
    params = init_params(cfg, seed=20)
    flipped = {name: node for name, node in params.items()}
    for i in range(len(cfg.stem_channels)):
        w = params[f"stem.{i}.w"].value[:, :, ::-1].copy()
        flipped[f"stem.{i}.w"] = type(params[f"stem.{i}.w"])(w)
    t = 48
    x = RngStream(21).normal((2, t))
    mask = _masks_any(t, 2)
    fwd = encode(x, mask, params, cfg)
    rev = encode(x[:, ::-1].copy(), mask[:, ::-1].copy(), flipped, cfg)
    np.testing.assert_allclose(rev.final.value[:, ::-1, :], fwd.final.value,
                               atol=1e-10)
    np.testing.assert_allclose(rev.rep.value, fwd.rep.value, atol=1e-10)


def _masks_any(t, b):
    rng = RngStream(33)
    out = (rng.uniform(size=(b, t)) < 0.5).astype(np.float64)
    out[:, :2] = 1.0  # keep at least the first samples
    return out


def test_interpolated_mask_tracks_patch_position():
    params = init_params(SMALL, seed=30)
    t = 512
    red = SMALL.reduction
    for a, b in ((96, 200), (64, 128), (131, 257)):
        mask = np.ones(t)
        mask[a:b] = 0.0
        st = encode(np.zeros((1, t)), mask[None, :], params, SMALL)
        m_final = st.layers[-1].mask[0]
        low = np.flatnonzero(m_final < 0.5)
        assert low.size > 0
        assert np.all(np.diff(low) == 1), "masked run must stay contiguous"
        assert abs(low[0] - a / red) <= 1.0
        assert abs((low[-1] + 1) - b / red) <= 1.0


def test_projection_output_is_dense():
    params = init_params(SMALL, seed=31)
    reps = RngStream(32).normal((200, SMALL.repr_dim))
    z = project(reps, params).value
    assert (z == 0.0).mean() < 0.01


def test_decode_untrained_is_finite_and_nonzero():
    params = init_params(SMALL, seed=34)
    x = RngStream(35).normal((2, 512))
    st = encode(x, np.ones((2, 512)), params, SMALL)
    rec = decode(st, params, SMALL).value
    assert np.all(np.isfinite(rec))
    assert np.abs(rec).max() > 0.0
