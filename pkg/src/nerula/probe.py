"""Downstream evaluation: linear probes on frozen embeddings, metric
families, and the interpolation baseline for masked reconstruction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .model import EncoderConfig, embed_batch
from .signals import Signal

RIDGE_LAMBDA = 1e-3
LOGISTIC_LAMBDA = 1e-3
LOGISTIC_TOL = 1e-5
LOGISTIC_MAX_ITER = 5000
_STD_FLOOR = 1e-8


@dataclass
class EmbeddingMatrix:
    rows: np.ndarray          # [N, D]
    ids: list
    targets: np.ndarray       # class labels or scalar targets, length N

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.targets = np.asarray(self.targets)
        if self.rows.ndim != 2:
            raise ValueError(f"rows must be [N, D], got shape {self.rows.shape}")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("embedding rows contain non-finite values")
        if len(self.targets) != len(self.rows) or len(self.ids) != len(self.rows):
            raise ValueError(
                f"row/id/target count mismatch: {len(self.rows)} rows, "
                f"{len(self.ids)} ids, {len(self.targets)} targets")


def embed_dataset(signals, targets, params: dict, config: EncoderConfig,
                  batch_size: int = 32) -> EmbeddingMatrix:
    sigs = list(signals)
    ids = [s.id if isinstance(s, Signal) else str(i) for i, s in enumerate(sigs)]
    rows = embed_batch(sigs, params, config, batch_size=batch_size)
    return EmbeddingMatrix(rows=rows, ids=ids, targets=np.asarray(targets))


def _standardize(rows, mu, sd):
    return (rows - mu) / sd


# ------------------------------------------------------------------- probes

@dataclass
class LogisticProbe:
    classes: np.ndarray
    weights: np.ndarray       # [D, K]
    bias: np.ndarray          # [K]
    mu: np.ndarray
    sd: np.ndarray
    n_iter: int
    final_loss: float

    def scores(self, rows) -> np.ndarray:
        """Class probabilities, [N, K] in self.classes order."""
        x = _standardize(np.asarray(rows, dtype=np.float64), self.mu, self.sd)
        logits = x @ self.weights + self.bias
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, rows) -> np.ndarray:
        return self.classes[np.argmax(self.scores(rows), axis=1)]


def _ce_loss_and_grad(x, y_onehot, w, b, lam):
    n = len(x)
    logits = x @ w + b
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    p = e / e.sum(axis=1, keepdims=True)
    ce = -np.mean(np.log(np.maximum(p[y_onehot.astype(bool)], 1e-300)))
    loss = ce + 0.5 * lam * float((w * w).sum())
    d = (p - y_onehot) / n
    return loss, x.T @ d + lam * w, d.sum(axis=0)


def fit_logistic_probe(em: EmbeddingMatrix, lam: float = LOGISTIC_LAMBDA,
                       tol: float = LOGISTIC_TOL,
                       max_iter: int = LOGISTIC_MAX_ITER) -> LogisticProbe:
    """Multinomial logistic regression by full-batch gradient descent with an
    L2 penalty, run to gradient-norm tolerance or the iteration cap. The step
    size comes from the softmax curvature bound, so descent is monotone."""
    classes = np.unique(em.targets)
    if len(classes) < 2:
        raise ValueError(
            f"logistic probe needs >= 2 classes, got {classes.tolist()}")
    x_raw = em.rows
    mu = x_raw.mean(axis=0)
    sd = np.maximum(x_raw.std(axis=0), _STD_FLOOR)
    x = _standardize(x_raw, mu, sd)
    n, d = x.shape
    k = len(classes)
    y_idx = np.searchsorted(classes, em.targets)
    y_onehot = np.zeros((n, k))
    y_onehot[np.arange(n), y_idx] = 1.0
    # softmax CE hessian is bounded by (1/2) X^T X / n (+ lam from the ridge)
    lip = 0.5 * float(np.linalg.eigvalsh(x.T @ x / n).max()) + lam
    lr = 1.0 / max(lip, 1e-12)
    w = np.zeros((d, k))
    b = np.zeros(k)
    it = 0
    loss = np.inf
    for it in range(1, max_iter + 1):
        loss, gw, gb = _ce_loss_and_grad(x, y_onehot, w, b, lam)
        gnorm = max(float(np.abs(gw).max()), float(np.abs(gb).max()))
        if gnorm < tol:
            break
        w -= lr * gw
        b -= lr * gb
    loss, _, _ = _ce_loss_and_grad(x, y_onehot, w, b, lam)
    return LogisticProbe(classes=classes, weights=w, bias=b, mu=mu, sd=sd,
                         n_iter=it, final_loss=float(loss))


@dataclass
class RidgeProbe:
    weights: np.ndarray       # [D]
    bias: float
    mu: np.ndarray
    sd: np.ndarray

    def predict(self, rows) -> np.ndarray:
        x = _standardize(np.asarray(rows, dtype=np.float64), self.mu, self.sd)
        return x @ self.weights + self.bias


def fit_ridge_probe(em: EmbeddingMatrix, lam: float = RIDGE_LAMBDA) -> RidgeProbe:
    """Closed-form ridge regression on standardized features; the intercept
    is not penalized."""
    if len(em.rows) <= 2:
        raise ValueError(f"ridge probe needs N > 2, got {len(em.rows)}")
    y = np.asarray(em.targets, dtype=np.float64)
    mu = em.rows.mean(axis=0)
    sd = np.maximum(em.rows.std(axis=0), _STD_FLOOR)
    x = _standardize(em.rows, mu, sd)
    y_mean = float(y.mean())
    yc = y - y_mean
    d = x.shape[1]
    w = np.linalg.solve(x.T @ x + lam * np.eye(d), x.T @ yc)
    return RidgeProbe(weights=w, bias=y_mean, mu=mu, sd=sd)


# ------------------------------------------------------------------ metrics

def _f1_macro(targets, preds, class_universe):
    scores = []
    for c in class_universe:
        in_t = targets == c
        in_p = preds == c
        if not in_t.any() and not in_p.any():
            continue
        tp = float(np.sum(in_t & in_p))
        fp = float(np.sum(~in_t & in_p))
        fn = float(np.sum(in_t & ~in_p))
        scores.append(2 * tp / (2 * tp + fp + fn))
    return float(np.mean(scores))


def _auc_binary(scores, positives):
    pos = int(positives.sum())
    neg = len(positives) - pos
    if pos == 0 or neg == 0:
        return None
    ranks = rankdata(scores)  # midranks give the ties-count-half convention
    r_pos = float(ranks[positives].sum())
    return (r_pos - pos * (pos + 1) / 2.0) / (pos * neg)


def metrics(preds, targets, kind: str) -> dict:
    """Metric map for one evaluation.

    kind "classification": preds is either an [N, K] score matrix over
    integer classes 0..K-1 (labels = argmax) or a 1-D array of labels or
    binary scores. kind "regression": preds is the predicted scalar vector.
    """
    targets = np.asarray(targets)
    if len(targets) == 0:
        raise ValueError("metrics needs at least one sample")
    if kind == "regression":
        preds = np.asarray(preds, dtype=np.float64)
        if preds.shape != targets.shape:
            raise ValueError(
                f"regression shape mismatch: {preds.shape} vs {targets.shape}")
        y = targets.astype(np.float64)
        resid = y - preds
        ss_res = float((resid ** 2).sum())
        ss_tot = float(((y - y.mean()) ** 2).sum())
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
        return {"mae": float(np.abs(resid).mean()),
                "mse": float((resid ** 2).mean()),
                "r2": r2}
    if kind != "classification":
        raise ValueError(f"unknown metric kind {kind!r}")
    preds = np.asarray(preds)
    if preds.ndim == 2:
        if len(preds) != len(targets):
            raise ValueError(
                f"score rows {len(preds)} != targets {len(targets)}")
        k = preds.shape[1]
        labels = np.argmax(preds, axis=1)
        universe = np.arange(k)
        aucs = []
        for c in universe:
            auc = _auc_binary(preds[:, c], targets == c)
            if auc is not None:
                aucs.append(auc)
        auc_val = float(np.mean(aucs)) if aucs else None
    elif preds.ndim == 1:
        if len(preds) != len(targets):
            raise ValueError(f"preds {len(preds)} != targets {len(targets)}")
        t_classes = np.unique(targets)
        if preds.dtype.kind == "f" and len(t_classes) == 2:
            # binary scores for the larger class label
            auc_val = _auc_binary(preds, targets == t_classes[1])
            labels = np.where(preds >= 0.5, t_classes[1], t_classes[0])
        else:
            labels = preds
            auc_val = None
        universe = np.unique(np.concatenate([t_classes, np.unique(labels)]))
    else:
        raise ValueError(f"preds must be 1-D or 2-D, got shape {preds.shape}")
    out = {"accuracy": float(np.mean(labels == targets)),
           "f1_macro": _f1_macro(targets, labels, universe)}
    if auc_val is not None:
        out["auc_ovr"] = float(auc_val)
    return out


# ------------------------------------------------- interpolation baseline

def _huber_mean(err, delta=1.0):
    a = np.abs(err)
    return float(np.where(a <= delta, 0.5 * a * a, delta * (a - 0.5 * delta)).mean())


def interp_baseline(x, mask_bits, delta: float = 1.0):
    """Fill masked positions by linear interpolation between the nearest kept
    neighbors (constant past the ends); returns (x_hat, Huber error over the
    masked positions)."""
    x = x.samples if isinstance(x, Signal) else np.asarray(x, dtype=np.float64)
    bits = np.asarray(mask_bits, dtype=np.float64)
    if bits.shape != x.shape:
        raise ValueError(f"mask shape {bits.shape} != signal shape {x.shape}")
    kept = np.flatnonzero(bits == 1.0)
    gone = np.flatnonzero(bits == 0.0)
    if kept.size == 0 or gone.size == 0:
        raise ValueError("interp_baseline needs a mask with both kept and "
                         "masked positions")
    x_hat = x.copy()
    x_hat[gone] = np.interp(gone, kept, x[kept])
    return x_hat, _huber_mean(x_hat[gone] - x[gone], delta)


# -------------------------------------------------------- ablation suite

RUNG_NAMES = {1: "augment_pairs", 2: "complement_mask",
              3: "latent_masking", 4: "full_dual_pathway"}


def run_ablation_suite(checkpoint_paths: dict, fit_set, eval_set,
                       loss_curves: dict = None, out_dir=None) -> list:
    """Probe each ladder rung's checkpoint on a labeled task.

    checkpoint_paths: rung -> path. fit_set/eval_set: (signals, labels).
    Returns one row dict per rung: rung, variant, accuracy, f1_macro.
    Writes loss_curves.svg when curves and out_dir are given.
    """
    from .training import load_checkpoint

    for rung in sorted(RUNG_NAMES):
        if rung not in checkpoint_paths:
            raise ValueError(f"missing checkpoint for ladder rung {rung}")
    fit_signals, fit_labels = fit_set
    eval_signals, eval_labels = eval_set
    rows = []
    for rung in sorted(RUNG_NAMES):
        params, cfg = load_checkpoint(checkpoint_paths[rung])
        em_fit = embed_dataset(fit_signals, fit_labels, params, cfg.encoder)
        em_eval = embed_dataset(eval_signals, eval_labels, params, cfg.encoder)
        probe = fit_logistic_probe(em_fit)
        unknown = np.setdiff1d(np.unique(em_eval.targets), probe.classes)
        if unknown.size:
            raise ValueError(
                f"eval labels {unknown.tolist()} never appear in the fit set")
        m = metrics(probe.scores(em_eval.rows),
                    np.searchsorted(probe.classes, em_eval.targets),
                    "classification")
        rows.append({"rung": rung, "variant": RUNG_NAMES[rung],
                     "accuracy": m["accuracy"], "f1_macro": m["f1_macro"]})
    if loss_curves and out_dir is not None:
        from .plots import loss_curves_svg
        named = {f"rung{r}_{RUNG_NAMES[r]}": c for r, c in loss_curves.items()}
        loss_curves_svg(named, f"{out_dir}/loss_curves.svg")
    return rows
