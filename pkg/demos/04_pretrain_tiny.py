"""A complete pretraining run at toy scale, in a few seconds.

Both views of every signal go through one shared encoder; the pooled,
projected representations are pulled together by a cosine alignment loss
while a small transposed-conv decoder rebuilds the full signal from the
primary view's latent, scored by Huber error with a 10x weight. The run is
bit-reproducible from its seed: rerunning this script writes an identical
checkpoint.
"""

import os

from nerula import (CorpusConfig, EncoderConfig, TrainConfig, build_corpus,
                    load_checkpoint, pretrain, save_checkpoint)
from nerula.plots import loss_curves_svg

OUT = os.path.join(os.path.dirname(__file__), "out")


def main():
    corpus = build_corpus(CorpusConfig(
        seed=11, duration_s=2.56, sample_rate_hz=100.0, pretrain_count=24,
        rhythm_per_class=2, attr_per_class=2, rate_count=4))
    cfg = TrainConfig(
        epochs=6, batch_size=8, seed=11,
        encoder=EncoderConfig(model_dim=16, num_blocks=2, window=9,
                              repr_dim=16, stem_channels=(8, 8, 16)))
    params, log = pretrain(corpus.pretrain, cfg)
    means = log.epoch_mean_totals()
    print("epoch-mean total loss:",
          " -> ".join(f"{m:.3f}" for m in means))
    print(f"first step: nce={log.reports[0].nce:+.3f} "
          f"recon={log.reports[0].recon:.3f}")
    print(f" last step: nce={log.reports[-1].nce:+.3f} "
          f"recon={log.reports[-1].recon:.3f}")

    os.makedirs(OUT, exist_ok=True)
    path = os.path.join(OUT, "tiny_checkpoint.nrla")
    save_checkpoint(params, cfg, path)
    reloaded, rcfg = load_checkpoint(path)
    print(f"checkpoint round trip: {len(reloaded)} parameter tensors, "
          f"encoder dim {rcfg.encoder.model_dim}")
    loss_curves_svg({"total": means}, os.path.join(OUT, "tiny_loss.svg"))
    print(f"wrote {OUT}/tiny_loss.svg")


if __name__ == "__main__":
    main()
