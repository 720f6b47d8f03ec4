"""Loss closed forms, bounds, and gradient checks."""

import numpy as np
import pytest

from nerula import autodiff as ad
from nerula.autodiff import Node
from nerula.objectives import (LossReport, LossWeights, combined_loss,
                               cosine_nce_loss, huber_loss)
from nerula.rng import RngStream


def test_huber_closed_forms():
    z = np.zeros((1, 4))
    assert float(huber_loss(z, z).value) == 0.0
    half = np.full((1, 4), 0.5)
    assert abs(float(huber_loss(z, half, delta=1.0).value) - 0.125) < 1e-15
    two = np.full((1, 4), 2.0)
    assert abs(float(huber_loss(z, two, delta=1.0).value) - 1.5) < 1e-15


def test_huber_continuity_and_slope_at_the_knee():
    for delta in (0.5, 1.0, 2.5):
        at = float(huber_loss(np.zeros((1, 1)), np.full((1, 1), delta),
                              delta=delta).value)
        assert abs(at - 0.5 * delta * delta) < 1e-12
        # slope approaches delta from both sides of the knee
        for side in (-1e-6, 1e-6):
            e = delta + side
            lo = float(huber_loss(np.zeros((1, 1)), np.full((1, 1), e - 1e-7),
                                  delta=delta).value)
            hi = float(huber_loss(np.zeros((1, 1)), np.full((1, 1), e + 1e-7),
                                  delta=delta).value)
            slope = (hi - lo) / 2e-7
            assert abs(slope - delta) < 1e-4


def test_huber_at_most_half_mse():
    rng = RngStream(5)
    for i in range(5):
        y = rng.split("y", i).normal((3, 40)) * 3.0
        yh = rng.split("h", i).normal((3, 40)) * 3.0
        h = float(huber_loss(y, yh, delta=1.0).value)
        half_mse = 0.5 * float(np.mean((y - yh) ** 2))
        assert h <= half_mse + 1e-12


def test_huber_weighted_mean_matches_oracle():
    rng = RngStream(6)
    y = rng.normal((2, 16))
    yh = rng.split("h").normal((2, 16))
    w = (rng.split("w").uniform(size=(2, 16)) < 0.4).astype(np.float64)
    got = float(huber_loss(y, yh, delta=1.0, weights=w).value)
    e = y - yh
    a = np.abs(e)
    h = np.where(a <= 1.0, 0.5 * e * e, a - 0.5)
    assert abs(got - h[w == 1.0].mean()) < 1e-12


def test_huber_validation():
    with pytest.raises(ValueError):
        huber_loss(np.zeros((2, 3)), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        huber_loss(np.zeros((2, 3)), np.zeros((2, 3)), delta=0.0)
    with pytest.raises(ValueError):
        huber_loss(np.zeros((2, 3)), np.zeros((2, 3)), weights=np.zeros((2, 3)))
    with pytest.raises(ValueError):
        huber_loss(np.zeros((2, 3)), np.zeros((2, 3)), weights=-np.ones((2, 3)))


def test_cosine_bounds():
    rng = RngStream(7)
    z = rng.normal((4, 8))
    assert abs(float(cosine_nce_loss(z, z.copy()).value) + 1.0) < 1e-9
    assert abs(float(cosine_nce_loss(z, -z).value) - 1.0) < 1e-9
    a = np.zeros((2, 4))
    b = np.zeros((2, 4))
    a[:, 0] = 1.0
    b[:, 1] = 1.0
    assert abs(float(cosine_nce_loss(a, b).value)) < 1e-9


def test_cosine_scale_invariance():
    rng = RngStream(8)
    z1 = rng.normal((5, 16))
    z2 = rng.split("b").normal((5, 16))
    base = float(cosine_nce_loss(z1, z2).value)
    for c in (10.0, 1e3, 1e-2):
        assert abs(float(cosine_nce_loss(c * z1, z2).value) - base) < 1e-9


def test_cosine_zero_row_contributes_zero():
    z1 = np.zeros((3, 4))
    z2 = np.ones((3, 4))
    assert abs(float(cosine_nce_loss(z1, z2).value)) < 1e-6
    # one degenerate row among healthy ones
    z1 = np.ones((2, 4))
    z1[1] = 0.0
    got = float(cosine_nce_loss(z1, np.ones((2, 4))).value)
    assert abs(got + 0.5) < 1e-6


def test_cosine_validation():
    with pytest.raises(ValueError):
        cosine_nce_loss(np.zeros((2, 3)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        cosine_nce_loss(np.zeros(3), np.zeros(3))


def test_combined_forced_arithmetic():
    # cos = 0.8 from plane vectors; huber = 0.05 from e = sqrt(0.1)
    z1 = np.tile([1.0, 0.0], (2, 1))
    z2 = np.tile([0.8, 0.6], (2, 1))
    y = np.zeros((2, 8))
    yh = np.full((2, 8), np.sqrt(0.1))
    total, report = combined_loss(z1, z2, y, yh, LossWeights())
    assert abs(report.nce + 0.8) < 1e-9
    assert abs(report.recon - 0.05) < 1e-12
    assert abs(report.total + 0.3) < 1e-9
    assert abs(float(total.value) - report.total) == 0.0


def test_combined_weighting_identity():
    rng = RngStream(9)
    for i in range(5):
        z1 = rng.split("z1", i).normal((4, 8))
        z2 = rng.split("z2", i).normal((4, 8))
        y = rng.split("y", i).normal((4, 32))
        yh = rng.split("yh", i).normal((4, 32))
        w = LossWeights(w_nce=1.0, w_recon=10.0)
        _, rep = combined_loss(z1, z2, y, yh, w, step=i)
        assert abs(rep.total - (1.0 * rep.nce + 10.0 * rep.recon)) < 1e-12
        assert -1.0 - 1e-9 <= rep.nce <= 1.0 + 1e-9
        assert rep.step == i


def test_combined_recon_off_is_exactly_nce():
    rng = RngStream(10)
    z1 = rng.normal((4, 8))
    z2 = rng.split("b").normal((4, 8))
    total, rep = combined_loss(z1, z2, None, None, LossWeights(w_recon=0.0))
    assert rep.recon == 0.0
    assert rep.total == rep.nce
    assert float(total.value) == rep.nce
    with pytest.raises(ValueError):
        combined_loss(z1, z2, None, None, LossWeights(w_recon=10.0))


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(w_nce=-1.0)
    with pytest.raises(ValueError):
        LossWeights(w_recon=-0.5)
    with pytest.raises(ValueError):
        LossWeights(huber_delta=0.0)
    assert LossWeights.from_dict(LossWeights().to_dict()) == LossWeights()


def test_loss_gradients_match_finite_differences():
    rng = RngStream(11)
    z1v = rng.normal((3, 6))
    z2v = rng.split("b").normal((3, 6))
    res = ad.fd_check(lambda zi, zj: cosine_nce_loss(zi, zj), [z1v, z2v])
    assert res.max_rel_err < 1e-5
    # keep residuals away from the Huber knee so fd stays two-sided smooth
    y = rng.split("y").normal((2, 10)) * 0.3
    yh = y + np.where(rng.split("s").uniform(size=(2, 10)) < 0.5, 0.4, 1.8)
    res = ad.fd_check(lambda p: huber_loss(Node(y), p, delta=1.0), [yh])
    assert res.max_rel_err < 1e-5


def test_combined_total_decreases_on_tiny_model():
    from nerula.masking import MaskSpec, make_pair, sample_patch_mask
    from nerula.model import EncoderConfig, decode, encode, init_params, project

    cfg = EncoderConfig(model_dim=8, num_blocks=1, window=5, repr_dim=8,
                        stem_channels=(4, 4, 8))
    t, b = 64, 4
    w = LossWeights()
    for seed in (0, 1, 2):
        params = init_params(cfg, seed=seed)
        state = ad.AdamState.init(params)
        rng = RngStream(seed + 100)
        x = rng.normal((b, t))
        masks = np.stack([sample_patch_mask(MaskSpec(t, 2, 4), rng.split("m", i))
                          for i in range(b)])
        first = last = None
        for step in range(50):
            xm = np.concatenate([x * masks, x * (1 - masks)], axis=0)
            mm = np.concatenate([masks, 1 - masks], axis=0)
            st = encode(xm, mm, params, cfg)
            z = project(st.rep, params)
            z1 = ad.take_range(z, 0, b)
            z2 = ad.take_range(z, b, 2 * b)
            rec = decode(st, params, cfg, t)
            rec1 = ad.take_range(rec, 0, b)
            total, rep = combined_loss(z1, z2, x, rec1, w, step=step)
            ad.backward(total)
            ad.adam_step(params, state, lr=1e-3)
            for p in params.values():
                p.grad = None
            if first is None:
                first = rep.total
            last = rep.total
        assert last < first, f"seed {seed}: {last} !< {first}"
