"""Standard scaler, k-nearest neighbours, linear SVM, k-fold cross-validation
and classification metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, ShapeError, TrainingError, ValidationError

Classifier = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ScalerState:
    mean: np.ndarray
    std: np.ndarray


def scaler_fit(matrix) -> ScalerState:
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ShapeError("scaler needs a non-empty 2-D matrix")
    return ScalerState(x.mean(axis=0), x.std(axis=0))


def scaler_apply(state: ScalerState, matrix) -> np.ndarray:
    """Standardise columns; constant columns (std 0) become all zero."""
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != state.mean.shape[0]:
        raise ShapeError(f"expected {state.mean.shape[0]} columns, got shape {x.shape}")
    safe = np.where(state.std > 0, state.std, 1.0)
    return np.where(state.std > 0, (x - state.mean) / safe, 0.0)


def scaler_invert(state: ScalerState, matrix) -> np.ndarray:
    return np.asarray(matrix, dtype=np.float64) * state.std + state.mean


def _vote(labels: np.ndarray) -> object:
    values, counts = np.unique(labels, return_counts=True)
    return values[np.argmax(counts)]  # first maximum = smallest label


def knn_predict(train_X, train_y, query_X, k: int = 5, chunk: int = 256) -> np.ndarray:
    """Majority vote of the ``k`` nearest training rows (Euclidean).

    Equal distances favour the lower training index; tied votes favour the
    smaller label.
    """
    train_X = np.asarray(train_X, dtype=np.float64)
    query_X = np.asarray(query_X, dtype=np.float64)
    train_y = np.asarray(train_y)
    n = train_X.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k must lie in [1, {n}], got {k}")
    if query_X.shape[1:] != train_X.shape[1:]:
        raise ShapeError("query and training features differ in width")
    out = []
    for lo in range(0, query_X.shape[0], chunk):
        q = query_X[lo : lo + chunk]
        d2 = ((q[:, None, :] - train_X[None, :, :]) ** 2).sum(axis=-1)
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        out.extend(_vote(train_y[row]) for row in nearest)
    return np.array(out, dtype=train_y.dtype)


@dataclass
class LinearSvmModel:
    weights: np.ndarray
    bias: float
    c: float
    objective: list[float] = field(default_factory=list)

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights + self.bias


def svm_objective(w, b, X, y, c) -> float:
    """``lambda/2 |w|^2 + mean hinge`` with ``lambda = 1 / (c n)``."""
    n = X.shape[0]
    lam = 1.0 / (c * n)
    hinge = np.maximum(0.0, 1.0 - y * (X @ w + b))
    return 0.5 * lam * float(w @ w) + float(hinge.mean())


def svm_train(X, y, c: float = 1.0, epochs: int = 100, seed: int = 0) -> LinearSvmModel:
    """Primal soft-margin linear SVM by full-batch hinge subgradient descent.

    Step size ``1 / (lambda t)`` as in Pegasos; the bias is unregularised.
    The iterate with the lowest objective is returned and
    ``model.objective`` holds the per-epoch objective values. ``seed`` is
    accepted for interface symmetry; full-batch updates need no sampling.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if c <= 0:
        raise ConfigError("c must be positive")
    if set(np.unique(y)) - {-1.0, 1.0}:
        raise ValidationError("SVM labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise TrainingError("SVM training needs both classes")
    n, d = X.shape
    lam = 1.0 / (c * n)
    w = np.zeros(d)
    b = 0.0
    best = (np.inf, w, b)
    history = []
    for t in range(1, epochs + 1):
        margin = y * (X @ w + b)
        active = margin < 1
        eta = 1.0 / (lam * t)
        grad_w = lam * w - (y[active] @ X[active]) / n
        grad_b = -y[active].sum() / n
        w = w - eta * grad_w
        b = b - eta * grad_b
        obj = svm_objective(w, b, X, y, c)
        history.append(obj)
        if obj < best[0]:
            best = (obj, w.copy(), b)
    _, w, b = best
    return LinearSvmModel(w, float(b), c, history)


def svm_predict(model: LinearSvmModel, X) -> np.ndarray:
    return np.where(model.decision(X) >= 0, 1, -1)


def knn_classifier(k: int = 5) -> Classifier:
    def fit_predict(train_X, train_y, test_X):
        return knn_predict(train_X, train_y, test_X, min(k, len(train_y)))
    return fit_predict


def svm_classifier(c: float = 1.0, epochs: int = 100, seed: int = 0) -> Classifier:
    """Binary labels use one SVM; more classes use one-vs-rest."""
    def fit_predict(train_X, train_y, test_X):
        classes = np.unique(train_y)
        if len(classes) < 2:
            raise TrainingError("training fold contains a single class")
        if len(classes) == 2:
            signed = np.where(train_y == classes[1], 1.0, -1.0)
            model = svm_train(train_X, signed, c, epochs, seed)
            return np.where(svm_predict(model, test_X) > 0, classes[1], classes[0])
        scores = np.column_stack([
            svm_train(train_X, np.where(train_y == cls, 1.0, -1.0), c, epochs, seed).decision(test_X)
            for cls in classes
        ])
        return classes[np.argmax(scores, axis=1)]
    return fit_predict


def _safe_div(a, b):
    return a / b if b else 0.0


def classification_metrics(y_true, y_pred, positive=1, average="binary", labels=None) -> dict:
    """Accuracy, precision, recall, F1.

    ``average="binary"`` scores the ``positive`` class; ``"macro"`` averages
    over ``labels`` (default: every label seen in either vector).
    Undefined ratios count as 0.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ShapeError("prediction and truth lengths differ")
    accuracy = float(np.mean(y_true == y_pred)) if y_true.size else 0.0
    if average == "binary":
        targets = [positive]
    elif average == "macro":
        targets = list(np.union1d(y_true, y_pred) if labels is None else labels)
    else:
        raise ConfigError(f"unknown average {average!r}")
    ps, rs, fs = [], [], []
    for cls in targets:
        tp = int(np.sum((y_pred == cls) & (y_true == cls)))
        fp = int(np.sum((y_pred == cls) & (y_true != cls)))
        fn = int(np.sum((y_pred != cls) & (y_true == cls)))
        p, r = _safe_div(tp, tp + fp), _safe_div(tp, tp + fn)
        ps.append(p)
        rs.append(r)
        fs.append(_safe_div(2 * p * r, p + r))
    return {"accuracy": accuracy, "precision": float(np.mean(ps)),
            "recall": float(np.mean(rs)), "f1": float(np.mean(fs))}


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    folds: list[dict]
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "folds": self.folds, "warnings": self.warnings}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


def fold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle cut into ``folds`` contiguous chunks of near-equal size."""
    if folds < 2:
        raise ConfigError("need at least 2 folds")
    if n < folds:
        raise ConfigError(f"{n} rows cannot fill {folds} folds")
    order = np.random.default_rng(seed).permutation(n)
    return np.array_split(order, folds)


def cross_validate(X, y, classifier: Classifier, folds: int = 5, seed: int = 0,
                   scale: bool = True, positive=1) -> MetricsReport:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] != y.shape[0]:
        raise ShapeError("feature and label row counts differ")
    parts = fold_indices(X.shape[0], folds, seed)
    classes = np.unique(y)
    average = "binary" if len(classes) <= 2 else "macro"
    per_fold, notes = [], []
    for i, test_idx in enumerate(parts):
        train_idx = np.concatenate([p for j, p in enumerate(parts) if j != i])
        train_X, test_X = X[train_idx], X[test_idx]
        if scale:
            state = scaler_fit(train_X)
            train_X, test_X = scaler_apply(state, train_X), scaler_apply(state, test_X)
        if len(np.unique(y[test_idx])) < 2:
            notes.append(f"fold {i}: held-out labels contain a single class")
        if len(np.unique(y[train_idx])) < 2:
            notes.append(f"fold {i}: training labels contain a single class; fold skipped")
            continue
        pred = classifier(train_X, y[train_idx], test_X)
        per_fold.append({"fold": i, "n_test": int(len(test_idx)),
                         **classification_metrics(y[test_idx], pred, positive, average, classes)})
    if not per_fold:
        raise TrainingError("no fold could be trained")
    means = {k: float(np.mean([f[k] for f in per_fold])) for k in ("accuracy", "precision", "recall", "f1")}
    return MetricsReport(**means, folds=per_fold, warnings=notes)
