"""Dual-pathway self-supervised learner for 1-D ECG-like signals.

One shared masked-convolution encoder feeds two heads: a non-contrastive
alignment head over complementary-masked views and a reconstruction decoder.
Everything runs on a from-scratch reverse-mode autodiff engine over dense
float64 arrays, so training is deterministic and desk-scale verifiable.
"""

__version__ = "0.1.0"

from .masking import (MaskPair, MaskSpec, PairStrategy, ViewPair,
                      generate_views, make_pair, sample_patch_mask,
                      sample_point_mask)
from .model import (EncoderConfig, LatentState, decode, embed, embed_batch,
                    encode, init_params)
from .objectives import (LossReport, LossWeights, combined_loss,
                         cosine_nce_loss, huber_loss)
from .probe import (EmbeddingMatrix, LogisticProbe, RidgeProbe, embed_dataset,
                    fit_logistic_probe, fit_ridge_probe, interp_baseline,
                    metrics, run_ablation_suite)
from .rng import RngStream
from .signals import (Corpus, CorpusConfig, Signal, SynthParams, build_corpus,
                      load_corpus, load_signal_csv, load_signal_f32, normalize,
                      save_corpus, save_signal_csv, save_signal_f32, split_ids,
                      synth_ecg)
from .training import (TrainConfig, TrainLog, ladder_rung_config,
                       load_checkpoint, pretrain, save_checkpoint)

__all__ = [
    "MaskPair", "MaskSpec", "PairStrategy", "ViewPair", "generate_views",
    "make_pair", "sample_patch_mask", "sample_point_mask",
    "EncoderConfig", "LatentState", "decode", "embed", "embed_batch",
    "encode", "init_params",
    "LossReport", "LossWeights", "combined_loss", "cosine_nce_loss",
    "huber_loss",
    "EmbeddingMatrix", "LogisticProbe", "RidgeProbe", "embed_dataset",
    "fit_logistic_probe", "fit_ridge_probe", "interp_baseline", "metrics",
    "run_ablation_suite",
    "RngStream",
    "Corpus", "CorpusConfig", "Signal", "SynthParams", "build_corpus",
    "load_corpus", "load_signal_csv", "load_signal_f32", "normalize",
    "save_corpus", "save_signal_csv", "save_signal_f32", "split_ids",
    "synth_ecg",
    "TrainConfig", "TrainLog", "ladder_rung_config", "load_checkpoint",
    "pretrain", "save_checkpoint",
    "__version__",
]
