"""Shared data types, surrogate losses, evaluation metrics, and the project RNG.

This module is the contract layer for the rest of the package: datasets and
prediction blocks are validated once at construction and frozen afterwards,
loss functions operate on plain float64 arrays, and all randomness flows
through :func:`seeded_rng` (PCG64, pinned project-wide so identical seeds
give bit-identical streams).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

REGRESSION = "regression"
CLASSIFICATION = "classification"
TASKS = (REGRESSION, CLASSIFICATION)

SQUARED_ERROR = "squared_error"
CROSS_ENTROPY = "cross_entropy"
HINGE = "hinge"
SURROGATE_LOSSES = (SQUARED_ERROR, CROSS_ENTROPY, HINGE)

# Probabilities are clamped to [PROB_EPS, 1] before any logarithm.
PROB_EPS = 1e-12

ROW_SUM_TOL = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, order="C", copy=True)
    a.flags.writeable = False
    return a


def _check_matrix(a: np.ndarray, what: str, min_rows: int = 1) -> None:
    if a.ndim != 2:
        raise ValueError(f"{what}: expected a 2-D matrix, got ndim={a.ndim}")
    if a.shape[0] < min_rows or a.shape[1] < 1:
        raise ValueError(f"{what}: needs at least {min_rows} row(s) and 1 column, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what}: contains non-finite values")


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with regression targets or class labels.

    Classification targets are integers in {0..class_count-1}; class_count
    defaults to max(label)+1 and must be at least 2.
    """

    features: np.ndarray
    target: np.ndarray
    task: str = REGRESSION
    class_count: int | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        _check_matrix(feats, "features")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        tgt = np.asarray(self.target)
        if tgt.ndim != 1 or tgt.shape[0] != feats.shape[0]:
            raise ValueError("target must be a vector with one entry per feature row")
        if self.task == REGRESSION:
            tgt = np.asarray(tgt, dtype=np.float64)
            if not np.all(np.isfinite(tgt)):
                raise ValueError("regression target contains non-finite values")
            if self.class_count is not None:
                raise ValueError("class_count is only valid for classification")
            tgt = _freeze(tgt)
        else:
            as_float = np.asarray(tgt, dtype=np.float64)
            if not np.all(np.isfinite(as_float)) or np.any(as_float != np.round(as_float)):
                raise ValueError("class labels must be integers")
            labels = as_float.astype(np.int64)
            if labels.min() < 0:
                raise ValueError("class labels must be nonnegative")
            count = self.class_count if self.class_count is not None else int(labels.max()) + 1
            if count < 2:
                raise ValueError("classification needs class_count >= 2")
            if labels.max() >= count:
                raise ValueError("class label out of range")
            object.__setattr__(self, "class_count", int(count))
            labels.flags.writeable = False
            tgt = labels
        object.__setattr__(self, "features", _freeze(feats))
        object.__setattr__(self, "target", tgt)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class UnlabeledDataset:
    """Feature matrix used to fit representation learners (N >= 2 rows)."""

    features: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        _check_matrix(feats, "features", min_rows=2)
        object.__setattr__(self, "features", _freeze(feats))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class PredictionBlock:
    """Per-row predictions: one column for regression, class-probability rows
    for classification (entries >= 0, each row summing to 1 within 1e-9)."""

    values: np.ndarray
    task: str

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[:, None]
        _check_matrix(vals, "prediction values")
        if self.task == REGRESSION:
            if vals.shape[1] != 1:
                raise ValueError("regression block must have exactly one column")
        elif self.task == CLASSIFICATION:
            if vals.shape[1] < 2:
                raise ValueError("classification block needs >= 2 probability columns")
            if vals.min() < 0.0:
                raise ValueError("probabilities must be nonnegative")
            sums = vals.sum(axis=1)
            if np.max(np.abs(sums - 1.0)) > ROW_SUM_TOL:
                raise ValueError("probability rows must sum to 1 within 1e-9")
        else:
            raise ValueError(f"unknown task {self.task!r}")
        object.__setattr__(self, "values", _freeze(vals))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def q(self) -> int:
        return self.values.shape[1]


# ---------------------------------------------------------------------------
# Surrogate losses
# ---------------------------------------------------------------------------


def _pred_values(pred) -> np.ndarray:
    if isinstance(pred, PredictionBlock):
        return pred.values
    return np.asarray(pred, dtype=np.float64)


def _as_column(pred, n: int, what: str) -> np.ndarray:
    vals = _pred_values(pred)
    if vals.ndim == 2 and vals.shape[1] == 1:
        vals = vals[:, 0]
    if vals.ndim != 1 or vals.shape[0] != n:
        raise ValueError(f"{what}: expected {n} scalar predictions, got shape {vals.shape}")
    return vals


def _as_prob_rows(pred, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals = _pred_values(pred)
    if vals.ndim != 2 or vals.shape[1] < 2:
        raise ValueError("cross-entropy needs an (n, C) probability matrix with C >= 2")
    if vals.shape[0] != labels.shape[0]:
        raise ValueError("prediction rows and labels disagree in length")
    lab = np.asarray(labels)
    as_float = np.asarray(lab, dtype=np.float64)
    if np.any(as_float != np.round(as_float)):
        raise ValueError("cross-entropy needs integer class labels")
    lab = as_float.astype(np.int64)
    if lab.min() < 0 or lab.max() >= vals.shape[1]:
        raise ValueError("class label out of range for prediction columns")
    return vals, lab


def _check_pm_one(truth: np.ndarray) -> np.ndarray:
    t = np.asarray(truth, dtype=np.float64).ravel()
    if not np.all(np.isin(t, (-1.0, 1.0))):
        raise ValueError("hinge loss needs labels in {-1, +1}")
    return t


def loss_value(loss: str, truth, pred) -> float:
    """Mean surrogate loss over rows.

    squared_error: mean (pred - truth)^2 for scalar predictions.
    cross_entropy: mean -log p[true class], probabilities clamped to
    [1e-12, 1] before the log.
    hinge: mean max(0, 1 - truth * margin) with truth in {-1, +1}.
    """
    truth = np.asarray(truth)
    if loss == SQUARED_ERROR:
        t = np.asarray(truth, dtype=np.float64).ravel()
        p = _as_column(pred, t.shape[0], "squared_error")
        r = p - t
        return float(np.mean(r * r))
    if loss == CROSS_ENTROPY:
        vals, lab = _as_prob_rows(pred, truth.ravel())
        p = np.clip(vals[np.arange(lab.shape[0]), lab], PROB_EPS, 1.0)
        return float(-np.mean(np.log(p)))
    if loss == HINGE:
        t = _check_pm_one(truth)
        m = _as_column(pred, t.shape[0], "hinge")
        return float(np.mean(np.maximum(0.0, 1.0 - t * m)))
    raise ValueError(f"unknown surrogate loss {loss!r}")


def loss_gradient_wrt_pred(loss: str, truth, pred) -> np.ndarray:
    """Entrywise gradient of the mean loss with respect to the predictions.

    Returned with the same shape as the prediction values. Cross-entropy
    coordinates sitting at the probability clamp get gradient 0; the hinge
    subgradient at the kink is 0.
    """
    truth = np.asarray(truth)
    vals = _pred_values(pred)
    if loss == SQUARED_ERROR:
        t = np.asarray(truth, dtype=np.float64).ravel()
        p = _as_column(pred, t.shape[0], "squared_error")
        g = 2.0 * (p - t) / t.shape[0]
        return g.reshape(vals.shape)
    if loss == CROSS_ENTROPY:
        rows, lab = _as_prob_rows(pred, truth.ravel())
        n = lab.shape[0]
        g = np.zeros_like(rows)
        p = rows[np.arange(n), lab]
        active = p > PROB_EPS
        g[np.arange(n)[active], lab[active]] = -1.0 / (n * p[active])
        return g
    if loss == HINGE:
        t = _check_pm_one(truth)
        m = _as_column(pred, t.shape[0], "hinge")
        g = np.where(1.0 - t * m > 0.0, -t / t.shape[0], 0.0)
        return g.reshape(vals.shape)
    raise ValueError(f"unknown surrogate loss {loss!r}")


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def metric_suite(truth, pred: PredictionBlock) -> dict:
    """Evaluation metrics for a prediction block.

    Regression: {"mse"}. Classification: {"mse", "accuracy", "ce"} where
    accuracy uses argmax over the probability row (ties break to the lowest
    class index) and mse compares probabilities against the one-hot labels.
    """
    if not isinstance(pred, PredictionBlock):
        raise TypeError("metric_suite expects a PredictionBlock")
    truth = np.asarray(truth).ravel()
    if truth.shape[0] != pred.n:
        raise ValueError("truth and predictions disagree in length")
    if pred.task == REGRESSION:
        r = pred.values[:, 0] - np.asarray(truth, dtype=np.float64)
        return {"mse": float(np.mean(r * r))}
    labels = truth.astype(np.int64)
    if labels.min() < 0 or labels.max() >= pred.q:
        raise ValueError("class label out of range for prediction columns")
    hard = np.argmax(pred.values, axis=1)
    accuracy = float(np.mean(hard == labels))
    ce = loss_value(CROSS_ENTROPY, labels, pred)
    onehot = np.zeros_like(pred.values)
    onehot[np.arange(labels.shape[0]), labels] = 1.0
    mse = float(np.mean((pred.values - onehot) ** 2))
    return {"mse": mse, "accuracy": accuracy, "ce": ce}


# ---------------------------------------------------------------------------
# RNG
# ---------------------------------------------------------------------------


def seeded_rng(seed) -> np.random.Generator:
    """Deterministic random stream; PCG64 is pinned project-wide.

    `seed` is an integer or a numpy SeedSequence. Identical seeds produce
    identical streams across runs and platforms.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(int(seed)))


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def read_labeled_csv(path, label_column: str, task: str = REGRESSION) -> LabeledDataset:
    """Load a labeled dataset from a headered CSV file.

    One column (named by `label_column`) holds the target; every other
    column must parse as a finite float. Any unparsable cell is a hard
    error naming the offending file row (the header is row 1).
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise ValueError(f"{path}: duplicate column names in header")
        if label_column not in header:
            raise ValueError(
                f"{path}: label column {label_column!r} not found (columns: {', '.join(header)})"
            )
        label_idx = header.index(label_column)
        feat_names = [h for i, h in enumerate(header) if i != label_idx]
        feats: list[list[float]] = []
        targets: list[float] = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}: row {row_no}: expected {len(header)} cells, got {len(row)}")
            frow = []
            for idx, cell in enumerate(row):
                try:
                    value = float(cell.strip())
                except ValueError:
                    raise ValueError(
                        f"{path}: row {row_no}: could not parse {cell.strip()!r} "
                        f"in column {header[idx]!r} as a number"
                    ) from None
                if not np.isfinite(value):
                    raise ValueError(
                        f"{path}: row {row_no}: non-finite value in column {header[idx]!r}"
                    )
                if idx == label_idx:
                    if task == CLASSIFICATION and value != round(value):
                        raise ValueError(
                            f"{path}: row {row_no}: class label {cell.strip()!r} is not an integer"
                        )
                    targets.append(value)
                else:
                    frow.append(value)
            feats.append(frow)
    if not feats:
        raise ValueError(f"{path}: no data rows")
    if not feat_names:
        raise ValueError(f"{path}: no feature columns besides the label")
    features = np.asarray(feats, dtype=np.float64)
    target = np.asarray(targets, dtype=np.float64)
    if task == CLASSIFICATION:
        target = target.astype(np.int64)
    return LabeledDataset(features=features, target=target, task=task)
