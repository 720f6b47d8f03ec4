"""Build a small synthetic corpus and look at what's in it.

The generator places sum-of-gaussians beats at jittered RR intervals and
adds white noise. Three labeled pools come out alongside the unlabeled
pretraining pool: a 3-class rhythm task (regular / irregular / noisy), a
2-class beat-shape task (narrow vs wide QRS), and a heart-rate regression
task. Everything is reproducible from one seed.
"""

import os

import numpy as np

from nerula import CorpusConfig, build_corpus, save_corpus

OUT = os.path.join(os.path.dirname(__file__), "out")


def main():
    cfg = CorpusConfig(seed=7, duration_s=5.12, sample_rate_hz=100.0,
                       pretrain_count=20, rhythm_per_class=5,
                       attr_per_class=5, rate_count=5)
    corpus = build_corpus(cfg)
    print(f"pretrain pool: {len(corpus.pretrain)} signals of "
          f"{len(corpus.pretrain[0].samples)} samples")
    for role in ("rhythm3", "attr2", "rate"):
        sigs = getattr(corpus, role)
        labels = sorted({repr(s.label) for s in sigs})
        print(f"{role}: {len(sigs)} signals, labels {labels[:4]}"
              + (" ..." if len(labels) > 4 else ""))

    # rhythm classes differ in RR variability, not amplitude
    for sig in corpus.rhythm3[:3]:
        x = sig.samples
        print(f"  {sig.id}: label={sig.label} mean={x.mean():+.3f} "
              f"sd={x.std():.3f} peak={x.max():.3f}")

    os.makedirs(OUT, exist_ok=True)
    save_corpus(corpus, os.path.join(OUT, "corpus"))
    print(f"corpus saved under {OUT}/corpus (index.json + one file per signal)")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, axes = plt.subplots(3, 1, figsize=(9, 5), sharex=True)
    for ax, sig in zip(axes, corpus.rhythm3[::5]):
        t = np.arange(len(sig.samples)) / sig.sample_rate_hz
        ax.plot(t, sig.samples, lw=0.8, color="black")
        ax.set_ylabel(f"class {sig.label}")
    axes[-1].set_xlabel("seconds")
    fig.tight_layout()
    fig.savefig(os.path.join(OUT, "corpus_classes.svg"))
    print(f"wrote {OUT}/corpus_classes.svg")


if __name__ == "__main__":
    main()
