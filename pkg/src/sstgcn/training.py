"""Binary cross-entropy training with Adam, early stopping on validation
AUC with best-checkpoint restoration, and the evaluation metrics suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import model as mdl
from .model import ModelParams, ParamSet, _glorot
from .numcore import NumericError, Tape, Tensor, backward, concat_cols, matmul

BCE_CLIP = 1e-12


class UndefinedMetricError(ValueError):
    """Metric needs both classes present."""


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    decay: float = 2e-6  # multiplicative rate decay: lr / (1 + decay * step)
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    monitor: str = "val_auc"
    seed: int = 0

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.monitor != "val_auc":
            raise ValueError(f"unsupported monitor {self.monitor!r}")

    @classmethod
    def from_json(cls, doc: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown train config fields: {sorted(unknown)}")
        return cls(**doc)


class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    def __init__(self, params: ParamSet):
        self.m = params.zero_arrays()
        self.v = params.zero_arrays()
        self.step = 0


def adam_step(params: ParamSet, grads: dict[str, np.ndarray], state: AdamState, cfg: TrainConfig):
    """Bias-corrected Adam update with decayed effective rate, in place."""
    state.step += 1
    t = state.step
    lr_t = cfg.learning_rate / (1.0 + cfg.decay * t)
    mc = 1.0 - cfg.beta1**t
    vc = 1.0 - cfg.beta2**t
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name}")
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p.data -= lr_t * (m / mc) / (np.sqrt(v / vc) + cfg.epsilon)


def bce_loss(yhat: Tensor, y: float) -> Tensor:
    """Binary cross entropy on a 1x1 prediction, clipped before the logs."""
    p = yhat.clip(BCE_CLIP, 1.0 - BCE_CLIP)
    return -(float(y) * p.log() + (1.0 - float(y)) * (1.0 - p).log())


def bce_value(p: float, y: float) -> float:
    p = min(max(p, BCE_CLIP), 1.0 - BCE_CLIP)
    return -(y * math.log(p) + (1.0 - y) * math.log(1.0 - p))


# --- metrics -------------------------------------------------------------------


def auc(scores, labels) -> float:
    """Pair-counting AUC via midranks: P(score_pos > score_neg), ties 0.5."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s))
    i = 0
    sorted_s = s[order]
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # average 1-based rank
        i = j + 1
    rank_sum = ranks[y == 1].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_points(scores, labels) -> list[tuple[float, float]]:
    """(fpr, tpr) at every distinct threshold, from (0,0) to (1,1)."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC needs at least one positive and one negative")
    order = np.argsort(-s, kind="mergesort")
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[order[j + 1]] == s[order[i]]:
            j += 1
        for idx in order[i : j + 1]:
            if y[idx] == 1:
                tp += 1
            else:
                fp += 1
        points.append((fp / n_neg, tp / n_pos))
        i = j + 1
    return points


@dataclass
class MetricsReport:
    loss: float
    precision: float
    recall: float
    f1: float
    binary_accuracy: float
    auc: float
    precision_defined: bool = True
    recall_defined: bool = True

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "binary_accuracy": self.binary_accuracy,
            "auc": self.auc,
            "precision_defined": self.precision_defined,
            "recall_defined": self.recall_defined,
        }


def classification_metrics(scores, labels, threshold: float = 0.5, loss: float = 0.0) -> MetricsReport:
    """Confusion-matrix metrics at the given threshold plus pairwise AUC."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if len(s) == 0:
        raise ValueError("metrics need at least one sample")
    pred = s > threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    tn = int(np.sum(~pred & (y == 0)))
    precision_defined = (tp + fp) > 0
    recall_defined = (tp + fn) > 0
    precision = tp / (tp + fp) if precision_defined else 0.0
    recall = tp / (tp + fn) if recall_defined else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    accuracy = (tp + tn) / len(s)
    return MetricsReport(
        loss=loss,
        precision=precision,
        recall=recall,
        f1=f1,
        binary_accuracy=accuracy,
        auc=auc(s, y),
        precision_defined=precision_defined,
        recall_defined=recall_defined,
    )


def evaluate(samples, params: ParamSet, predict_fn=None) -> MetricsReport:
    """Inference-only pass over samples (nothing is recorded for gradients)."""
    predict_fn = predict_fn if predict_fn is not None else mdl.predict
    scores = []
    labels = []
    losses = []
    for s in samples:
        p = predict_fn(s, params).item()
        scores.append(p)
        labels.append(s.label)
        losses.append(bce_value(p, float(s.label)))
    return classification_metrics(scores, labels, loss=float(np.mean(losses)))


def scores_and_labels(samples, params: ParamSet, predict_fn=None):
    predict_fn = predict_fn if predict_fn is not None else mdl.predict
    scores = np.array([predict_fn(s, params).item() for s in samples])
    labels = np.array([s.label for s in samples])
    return scores, labels


# --- training loop -------------------------------------------------------------


def train(
    train_samples,
    val_samples,
    params: ParamSet,
    cfg: TrainConfig,
    predict_fn=None,
    evaluate_fn=None,
):
    """Train with per-batch Adam steps and early stopping on validation AUC.

    A batch is batch_size independent forward/backward passes with
    mean-reduced gradients (variable node counts rule out tensor batching).
    Returns (params, history) with params restored to the best-val-AUC
    epoch's snapshot; history has one row per completed epoch.
    """
    predict_fn = predict_fn if predict_fn is not None else mdl.predict
    if evaluate_fn is None:
        if val_samples is None or len(val_samples) == 0:
            raise ValueError("val_samples must be nonempty (or pass evaluate_fn)")
        evaluate_fn = lambda p, epoch: evaluate(val_samples, p, predict_fn)

    rng = np.random.default_rng(cfg.seed)
    state = AdamState(params)
    history: list[dict] = []
    best_auc = -math.inf
    best_snapshot = params.snapshot()
    best_epoch = 0
    wait = 0

    n_train = len(train_samples)
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n_train)
        epoch_losses = []
        for lo in range(0, n_train, cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            grads = params.zero_arrays()
            for idx in batch:
                sample = train_samples[int(idx)]
                with Tape():
                    yhat = predict_fn(sample, params)
                    loss = bce_loss(yhat, float(sample.label))
                loss_value = loss.item()
                if not math.isfinite(loss_value):
                    raise NumericError(
                        f"non-finite loss at epoch {epoch}, sample index {int(idx)}: "
                        f"prediction {yhat.item()!r}"
                    )
                backward(loss)
                epoch_losses.append(loss_value)
                for name, t in params.items():
                    grads[name] += t.grad
            scale = 1.0 / len(batch)
            for name in grads:
                grads[name] *= scale
            adam_step(params, grads, state, cfg)

        val_report = evaluate_fn(params, epoch)
        row = {
            "epoch": epoch,
            "train_loss": float(np.mean(epoch_losses)),
            "val_loss": val_report.loss,
            "val_precision": val_report.precision,
            "val_recall": val_report.recall,
            "val_f1": val_report.f1,
            "val_binary_accuracy": val_report.binary_accuracy,
            "val_auc": val_report.auc,
        }
        history.append(row)

        if val_report.auc >= best_auc:
            # On exact ties keep the most-trained snapshot; only a strict
            # improvement resets the patience countdown.
            improved = val_report.auc > best_auc
            best_auc = val_report.auc
            best_snapshot = params.snapshot()
            best_epoch = epoch
            wait = 0 if improved else wait + 1
        else:
            wait += 1
        if wait >= cfg.patience:
            break

    params.restore(best_snapshot)
    for row in history:
        row["best_epoch"] = best_epoch
    return params, history


# --- logistic baseline -----------------------------------------------------------


class LogisticParams(ParamSet):
    """Single dense layer over center-road final-slice features + statics."""

    def __init__(self, n_features: int = 39, seed: int = 0):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.n_features = n_features
        self.add("w", _glorot(rng, n_features, 1, n_features, 1))
        self.add("b", np.zeros((1, 1)))


def logistic_features(sample) -> np.ndarray:
    """Center node's last-slice row joined with the last static vector."""
    center_row = sample.slices[-1][0]
    return np.concatenate([center_row, sample.statics[-1]])[None, :]


def logistic_predict(sample, params: ParamSet) -> Tensor:
    x = Tensor(logistic_features(sample))
    return (matmul(x, params["w"]) + params["b"]).sigmoid()


def logistic_baseline(
    train_set, test_set, cfg: TrainConfig | None = None, val_set=None
) -> MetricsReport:
    """Train the linear baseline with the same Adam loop; report on test_set.

    With a validation set the usual early stopping applies; without one the
    monitor falls back to the training AUC and patience is stretched to the
    full epoch budget.
    """
    from dataclasses import replace

    cfg = cfg if cfg is not None else TrainConfig()
    n_features = len(logistic_features(train_set[0])[0])
    params = LogisticParams(n_features, seed=cfg.seed)
    if val_set is not None and len(val_set) > 0:
        train(train_set, val_set, params, cfg, predict_fn=logistic_predict)
    else:
        train(
            train_set,
            None,
            params,
            replace(cfg, patience=cfg.max_epochs),
            predict_fn=logistic_predict,
            evaluate_fn=lambda p, epoch: evaluate(train_set, p, logistic_predict),
        )
    return evaluate(test_set, params, logistic_predict)


# --- serialization helpers -------------------------------------------------------

HISTORY_COLUMNS = (
    "epoch",
    "train_loss",
    "val_loss",
    "val_precision",
    "val_recall",
    "val_f1",
    "val_binary_accuracy",
    "val_auc",
)


def history_to_csv(history: list[dict], path) -> None:
    import csv

    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=HISTORY_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in history:
            writer.writerow(row)
