"""Batch command-line front door.

Single binary, subcommand style: jobs are pure functions of (config file,
flags, root seed), flags win over the config file, and every run echoes its
effective configuration to run.json in the output directory so results can
be reproduced from the artifacts alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from .masking import MaskSpec, PairStrategy, sample_patch_mask
from .model import EncoderConfig, LatentState, decode, embed_batch, encode, init_params
from .objectives import LossWeights, combined_loss
from .probe import (embed_dataset, fit_logistic_probe, fit_ridge_probe,
                    interp_baseline, metrics, run_ablation_suite)
from .rng import RngStream
from .signals import (Corpus, CorpusConfig, build_corpus, save_corpus,
                      split_ids, stratified_split_ids)
from .training import (LADDER_RUNGS, TrainConfig, ladder_rung_config,
                       load_checkpoint, pretrain, save_checkpoint)

FD_TOLERANCE = 1e-5

_DEFAULTS = {
    "seed": 0,
    "corpus": {
        "sample_rate_hz": 300.0,
        "duration_s": 10.0,
        "pretrain_count": 300,
        "rhythm_per_class": 50,
        "attr_per_class": 40,
        "rate_count": 80,
    },
    "encoder": EncoderConfig().to_dict(),
    "train": {"epochs": 30, "batch_size": 32, "lr": 1e-4, "checkpoint_every": 0},
    "weights": LossWeights().to_dict(),
    "strategy": dataclasses.asdict(PairStrategy()),
    "probe": {"task": "rhythm3"},
    "split": {"fractions": [0.6, 0.2, 0.2]},
}


# ------------------------------------------------------------ configuration

def _deep_merge(base: dict, override: dict, path: str = "") -> dict:
    """Nested merge that rejects keys the defaults do not declare."""
    out = dict(base)
    for key, val in override.items():
        here = f"{path}{key}"
        if key not in base:
            raise KeyError(f"unknown config key {here!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ValueError(f"config key {here!r} must be a table")
            out[key] = _deep_merge(base[key], val, here + ".")
        else:
            out[key] = val
    return out


def load_config(path=None) -> dict:
    cfg = json.loads(json.dumps(_DEFAULTS))  # deep copy
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        if not isinstance(user, dict):
            raise ValueError(f"{path}: config root must be a JSON object")
        cfg = _deep_merge(cfg, user)
    return cfg


def _apply_flags(cfg: dict, args) -> dict:
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "strategy", None) is not None:
        cfg["strategy"]["variant"] = args.strategy
    if getattr(args, "w_recon", None) is not None:
        cfg["weights"]["w_recon"] = args.w_recon
    if getattr(args, "w_nce", None) is not None:
        cfg["weights"]["w_nce"] = args.w_nce
    if getattr(args, "delta", None) is not None:
        cfg["weights"]["huber_delta"] = args.delta
    return cfg


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        epochs=cfg["train"]["epochs"],
        batch_size=cfg["train"]["batch_size"],
        lr=cfg["train"]["lr"],
        seed=cfg["seed"],
        checkpoint_every=cfg["train"]["checkpoint_every"],
        weights=LossWeights.from_dict(cfg["weights"]),
        encoder=EncoderConfig.from_dict(cfg["encoder"]),
        strategy=PairStrategy(**cfg["strategy"]),
    )


def _corpus_config(cfg: dict) -> CorpusConfig:
    return CorpusConfig(seed=cfg["seed"], **cfg["corpus"])


def _write_run_json(out_dir, payload: dict) -> None:
    with open(os.path.join(out_dir, "run.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_payload(args, cfg: dict) -> dict:
    return {
        "subcommand": args.subcommand,
        "seed": cfg["seed"],
        "config": cfg,
        "argv": list(args.raw_argv),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "package": __version__,
        },
        "wall_clock_s": None,
    }


def _write_csv(path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def _zscore(x: np.ndarray) -> np.ndarray:
    sd = x.std()
    return (x - x.mean()) / (sd if sd > 1e-8 else 1.0)


# -------------------------------------------------------------- subcommands

def _cmd_synth(args, cfg: dict) -> int:
    corpus = build_corpus(_corpus_config(cfg))
    save_corpus(corpus, os.path.join(args.out, "corpus"))
    n = sum(len(getattr(corpus, r)) for r in ("pretrain", "rhythm3", "attr2", "rate"))
    print(f"synth: wrote {n} signals to {os.path.join(args.out, 'corpus')}")
    return 0


def _cmd_pretrain(args, cfg: dict) -> int:
    tc = _train_config(cfg)
    if args.ladder_rung is not None:
        tc = ladder_rung_config(tc, args.ladder_rung)
    corpus = build_corpus(_corpus_config(cfg))
    params, log = pretrain(corpus.pretrain, tc, checkpoint_dir=args.out)
    ckpt = os.path.join(args.out, "checkpoint.nrla")
    save_checkpoint(params, tc, ckpt)
    log.to_csv(os.path.join(args.out, "losses.csv"))
    from .plots import loss_curves_svg
    loss_curves_svg({"total": log.epoch_mean_totals()},
                    os.path.join(args.out, "loss_curve.svg"))
    first, last = log.epoch_mean_totals()[0], log.epoch_mean_totals()[-1]
    print(f"pretrain: {tc.epochs} epochs, epoch-mean total "
          f"{first:.4f} -> {last:.4f}, checkpoint at {ckpt}")
    return 0


def _embed_corpus_rows(corpus: Corpus, params, enc: EncoderConfig):
    rows = []
    for role in ("rhythm3", "attr2", "rate"):
        sigs = getattr(corpus, role)
        if not sigs:
            continue
        em = embed_dataset(sigs, [s.label for s in sigs], params, enc)
        for sid, label, vec in zip(em.ids, em.targets, em.rows):
            rows.append([sid, role, label] + [repr(float(v)) for v in vec])
    return rows


def _cmd_embed(args, cfg: dict) -> int:
    params, tc = load_checkpoint(args.checkpoint)
    corpus = build_corpus(_corpus_config(cfg))
    rows = _embed_corpus_rows(corpus, params, tc.encoder)
    dim = len(rows[0]) - 3 if rows else tc.encoder.repr_dim
    header = ["id", "role", "label"] + [f"e{i}" for i in range(dim)]
    path = os.path.join(args.out, "embeddings.csv")
    _write_csv(path, header, rows)
    print(f"embed: wrote {len(rows)} x {dim} embeddings to {path}")
    return 0


def _probe_task(corpus: Corpus, task: str, params, enc: EncoderConfig,
                fractions, seed: int) -> dict:
    """Fit on the validation split, report metrics on the test split.
    Class tasks split per class so every class reaches both splits."""
    sigs = getattr(corpus, task)
    if task == "rate":
        split = split_ids([s.id for s in sigs], fractions, seed)
    else:
        split = stratified_split_ids([s.id for s in sigs],
                                     [s.label for s in sigs], fractions, seed)
    by_id = {s.id: s for s in sigs}

    def subset(ids):
        chosen = [by_id[i] for i in ids]
        return embed_dataset(chosen, [s.label for s in chosen], params, enc)

    em_fit, em_test = subset(split.val), subset(split.test)
    if task == "rate":
        probe = fit_ridge_probe(em_fit)
        return metrics(probe.predict(em_test.rows),
                       em_test.targets.astype(np.float64), "regression")
    probe = fit_logistic_probe(em_fit)
    unknown = np.setdiff1d(np.unique(em_test.targets), probe.classes)
    if unknown.size:
        raise ValueError(
            f"test labels {unknown.tolist()} never appear in the fit split")
    return metrics(probe.scores(em_test.rows),
                   np.searchsorted(probe.classes, em_test.targets),
                   "classification")


def _cmd_probe(args, cfg: dict) -> int:
    task = cfg["probe"]["task"]
    if task not in ("rhythm3", "attr2", "rate"):
        raise ValueError(f"unknown probe task {task!r}")
    params, tc = load_checkpoint(args.checkpoint)
    corpus = build_corpus(_corpus_config(cfg))
    result = _probe_task(corpus, task, params, tc.encoder,
                         cfg["split"]["fractions"], cfg["seed"])
    path = os.path.join(args.out, "metrics.csv")
    _write_csv(path, ["task", "metric", "value"],
               [[task, k, repr(v)] for k, v in sorted(result.items())])
    width = max(len(k) for k in result)
    print(f"probe task {task!r} on test split:")
    for k in sorted(result):
        print(f"  {k:<{width}}  {result[k]:.4f}")
    return 0


def _cmd_ablate(args, cfg: dict) -> int:
    corpus = build_corpus(_corpus_config(cfg))
    base = _train_config(cfg)
    paths, curves = {}, {}
    for rung in LADDER_RUNGS:
        tc = ladder_rung_config(base, rung)
        params, log = pretrain(corpus.pretrain, tc)
        path = os.path.join(args.out, f"rung{rung}.nrla")
        save_checkpoint(params, tc, path)
        paths[rung] = path
        curves[rung] = log.epoch_mean_totals()
        print(f"ablate: rung {rung} trained, epoch-mean total "
              f"{curves[rung][0]:.4f} -> {curves[rung][-1]:.4f}")
    task = cfg["probe"]["task"]
    sigs = getattr(corpus, task)
    if task == "rate":
        split = split_ids([s.id for s in sigs], cfg["split"]["fractions"],
                          cfg["seed"])
    else:
        split = stratified_split_ids([s.id for s in sigs],
                                     [s.label for s in sigs],
                                     cfg["split"]["fractions"], cfg["seed"])
    by_id = {s.id: s for s in sigs}
    fit = [by_id[i] for i in split.val]
    ev = [by_id[i] for i in split.test]
    rows = run_ablation_suite(
        paths,
        (fit, np.array([s.label for s in fit])),
        (ev, np.array([s.label for s in ev])),
        loss_curves=curves, out_dir=args.out)
    _write_csv(os.path.join(args.out, "metrics.csv"),
               ["rung", "variant", "accuracy", "f1_macro"],
               [[r["rung"], r["variant"], repr(r["accuracy"]), repr(r["f1_macro"])]
                for r in rows])
    print(f"{'rung':>4}  {'variant':<18}  {'accuracy':>8}  {'f1_macro':>8}")
    for r in rows:
        print(f"{r['rung']:>4}  {r['variant']:<18}  "
              f"{r['accuracy']:>8.4f}  {r['f1_macro']:>8.4f}")
    return 0


def _cmd_recon_demo(args, cfg: dict) -> int:
    params, tc = load_checkpoint(args.checkpoint)
    corpus = build_corpus(_corpus_config(cfg))
    sig = corpus.rhythm3[0]  # labeled pool, never part of pretraining
    x = _zscore(sig.samples)
    bits = sample_patch_mask(MaskSpec(len(x)), RngStream(cfg["seed"]).split("demo"))
    state = encode((x * bits)[None, :], bits[None, :], params, tc.encoder)
    lat = LatentState(layers=[], final=state.final, rep=None)
    x_hat = decode(lat, params, tc.encoder, len(x)).value[0]
    x_interp, interp_err = interp_baseline(x, bits)
    masked = bits == 0.0
    err = np.abs(x_hat[masked] - x[masked])
    model_err = float(np.where(err <= 1.0, 0.5 * err * err, err - 0.5).mean())
    from .plots import recon_overlay_svg
    svg = os.path.join(args.out, "recon_overlay.svg")
    recon_overlay_svg(x, x_hat, x_interp, bits, svg)
    _write_csv(os.path.join(args.out, "metrics.csv"),
               ["method", "huber_masked"],
               [["decoder", repr(model_err)], ["interpolation", repr(interp_err)]])
    print(f"recon-demo on {sig.id}: decoder Huber {model_err:.4f}, "
          f"interpolation Huber {interp_err:.4f}, overlay at {svg}")
    return 0


def _fd_e2e_case(seed: int):
    """End-to-end gradient check: the full combined loss on a tiny model,
    differentiated with respect to every parameter."""
    import nerula.autodiff as ad
    from .masking import generate_views

    enc = EncoderConfig(model_dim=8, num_blocks=1, window=5, repr_dim=8,
                        stem_channels=(4, 4, 8))
    rng = RngStream(seed)
    t = 64
    xs = np.stack([rng.split("x", i).normal(t) for i in range(2)])
    strategy = PairStrategy(min_patches=2, max_patches=4)
    pairs = [generate_views(strategy, xs[i], rng.split("v", i)) for i in range(2)]
    v1 = np.stack([p.view1 for p in pairs])
    v2 = np.stack([p.view2 for p in pairs])
    m1 = np.stack([p.mask1 for p in pairs])
    m2 = np.stack([p.mask2 for p in pairs])
    target = np.stack([_zscore(x) for x in xs])
    weights = LossWeights()
    init = init_params(enc, seed=seed)
    names = sorted(init)
    values = [init[n].value for n in names]

    def f(*nodes):
        params = dict(zip(names, nodes))
        state = encode(np.concatenate([v1, v2]), np.concatenate([m1, m2]),
                       params, enc)
        z1 = ad.take_range(state.rep, 0, 2)
        z2 = ad.take_range(state.rep, 2, 4)
        primary = LatentState(layers=[], final=ad.take_range(state.final, 0, 2),
                              rep=None)
        rec = decode(primary, params, enc, t)
        total, _ = combined_loss(z1, z2, target, rec, weights)
        return total

    return f, values


def run_fd_battery(seed: int = 0, eps: float = 1e-5):
    """Per-op checks plus the end-to-end loss check; [(name, rel_err)]."""
    import nerula.autodiff as ad

    results = ad.standard_gradient_battery(seed=seed)
    f, values = _fd_e2e_case(seed)
    res = ad.fd_check(f, values, eps=eps)
    results.append(("combined_loss_e2e", res.max_rel_err))
    return results


def _cmd_fd_check(args, cfg: dict) -> int:
    results = run_fd_battery(seed=cfg["seed"])
    _write_csv(os.path.join(args.out, "metrics.csv"),
               ["check", "max_rel_err"],
               [[name, repr(err)] for name, err in results])
    worst = max(err for _, err in results)
    width = max(len(name) for name, _ in results)
    for name, err in results:
        flag = "ok" if err < FD_TOLERANCE else "FAIL"
        print(f"  {name:<{width}}  {err:.3e}  {flag}")
    if worst >= FD_TOLERANCE:
        raise RuntimeError(
            f"gradient check exceeded tolerance: max rel err {worst:.3e} "
            f">= {FD_TOLERANCE:.0e}")
    print(f"fd-check: {len(results)} checks passed, worst {worst:.3e}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "pretrain": _cmd_pretrain,
    "embed": _cmd_embed,
    "probe": _cmd_probe,
    "ablate": _cmd_ablate,
    "recon-demo": _cmd_recon_demo,
    "fd-check": _cmd_fd_check,
}


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nerula",
        description="dual-pathway self-supervised learner for 1-D signals")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, checkpoint=False):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="root seed")
        p.add_argument("--out", default=".", help="output directory")
        if checkpoint:
            p.add_argument("--checkpoint", required=True,
                           help="trained checkpoint file")

    common(sub.add_parser("synth", help="build the synthetic corpus"))

    p = sub.add_parser("pretrain", help="self-supervised pretraining")
    common(p)
    p.add_argument("--strategy", choices=["nerula_mask", "random_point",
                                          "byol", "clocs"], default=None)
    p.add_argument("--w-recon", type=float, default=None,
                   help="reconstruction loss weight")
    p.add_argument("--w-nce", type=float, default=None,
                   help="alignment loss weight")
    p.add_argument("--delta", type=float, default=None,
                   help="Huber transition point")
    p.add_argument("--ladder-rung", type=int, choices=[1, 2, 3, 4],
                   default=None, help="train one ablation-ladder variant")

    common(sub.add_parser("embed", help="embed the corpus with a checkpoint"),
           checkpoint=True)
    common(sub.add_parser("probe", help="linear probe on frozen embeddings"),
           checkpoint=True)
    common(sub.add_parser("ablate", help="train and probe all ladder rungs"))
    common(sub.add_parser("recon-demo",
                          help="reconstruction overlay vs interpolation"),
           checkpoint=True)
    common(sub.add_parser("fd-check", help="finite-difference gradient checks"))
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.raw_argv = argv
    start = time.monotonic()
    try:
        cfg = _apply_flags(load_config(args.config), args)
        os.makedirs(args.out, exist_ok=True)
        payload = _run_payload(args, cfg)
        _write_run_json(args.out, payload)
        code = _COMMANDS[args.subcommand](args, cfg)
        payload["wall_clock_s"] = time.monotonic() - start
        _write_run_json(args.out, payload)
        return code
    except Exception as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
