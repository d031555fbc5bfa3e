"""Sequence assembly, train/validation split and the training loop."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..classic import ScalerState, scaler_apply, scaler_fit
from ..core import LstmConfig
from ..errors import ConfigError, ValidationError
from ..features import FeatureMatrix
from ..labeling import LabelSet
from .checkpoint import load_checkpoint, save_checkpoint
from .model import LstmModel, loss_and_grads, mse_loss, predict
from .optim import RmspropState, rmsprop_step

log = logging.getLogger(__name__)

# Reported full-size run on DEAP; kept for comparison, never asserted.
PUBLISHED_REFERENCE = {
    "epoch_50": {"train_loss": 0.06851, "val_loss": 0.06005, "train_accuracy": 0.45784, "val_accuracy": 0.53420},
    "epoch_100": {"train_loss": 0.06283, "val_loss": 0.05223, "train_accuracy": 0.51661, "val_accuracy": 0.60339},
    "epoch_150": {"train_loss": 0.05992, "val_loss": 0.04787, "train_accuracy": 0.54492, "val_accuracy": 0.64413},
    "epoch_1000": {"train_accuracy": 0.6921, "val_accuracy": 0.7828},
}


@dataclass(frozen=True)
class SequenceSet:
    X: np.ndarray  # sequences x seq_len x features
    Y: np.ndarray  # sequences x 2 (valence_positive, arousal_positive)
    trial: np.ndarray  # source (subject, trial) per sequence
    start_window: np.ndarray


def build_sequences(features: FeatureMatrix, labels: LabelSet | dict, seq_len: int) -> SequenceSet:
    """Cut each trial's windows into non-overlapping runs of ``seq_len``.

    ``labels`` is a LabelSet indexed by trial (single subject) or a dict
    mapping ``(subject, trial)`` to a ``(valence_positive, arousal_positive)``
    pair. Leftover windows at the end of a trial are dropped.
    """
    prov = features.row_prov
    if np.any(prov[:, 2] < 0):
        raise ValidationError("sequence assembly needs windowed features (meta vectors)")
    keys = sorted({(int(s), int(t)) for s, t in prov[:, :2]})
    X, Y, trial, start = [], [], [], []
    for subject, t in keys:
        rows = np.flatnonzero((prov[:, 0] == subject) & (prov[:, 1] == t))
        rows = rows[np.argsort(prov[rows, 2], kind="stable")]
        if isinstance(labels, dict):
            target = labels[(subject, t)]
        else:
            if t >= len(labels):
                raise ValidationError(f"no label for trial {t}")
            target = (labels.valence_positive[t], labels.arousal_positive[t])
        for lo in range(0, len(rows) - seq_len + 1, seq_len):
            X.append(features.values[rows[lo : lo + seq_len]])
            Y.append(target)
            trial.append((subject, t))
            start.append(int(prov[rows[lo], 2]))
    if not X:
        raise ConfigError(f"no trial has {seq_len} windows")
    return SequenceSet(np.array(X), np.array(Y, dtype=np.float64),
                       np.array(trial, dtype=np.int64), np.array(start))


def split_indices(seqs: SequenceSet, train_fraction: float, mode: str, seed: int):
    """Seeded train/validation split by whole trial or by sequence."""
    rng = np.random.default_rng([seed, 7919])
    if mode == "trial":
        groups, inverse = np.unique(seqs.trial, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        order = rng.permutation(len(groups))
        n_train = int(round(train_fraction * len(groups)))
        train_groups = np.zeros(len(groups), dtype=bool)
        train_groups[order[:n_train]] = True
        is_train = train_groups[inverse]
    elif mode == "window":
        order = rng.permutation(len(seqs.X))
        is_train = np.zeros(len(seqs.X), dtype=bool)
        is_train[order[: int(round(train_fraction * len(seqs.X)))]] = True
    else:
        raise ConfigError(f"unknown split mode {mode!r}")
    train_idx, val_idx = np.flatnonzero(is_train), np.flatnonzero(~is_train)
    if len(train_idx) == 0 or len(val_idx) == 0:
        raise ConfigError("train/validation split left one side empty")
    return train_idx, val_idx


def binary_accuracy(pred, target) -> float:
    return float(np.mean((np.asarray(pred) >= 0.5) == (np.asarray(target) >= 0.5)))


@dataclass
class TrainReport:
    epochs: list[dict] = field(default_factory=list)
    initial: dict = field(default_factory=dict)
    checkpoints: list[str] = field(default_factory=list)
    split: str = "trial"
    n_train: int = 0
    n_val: int = 0
    seed: int = 0

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.epochs)

    def write(self, out_dir) -> None:
        out_dir = Path(out_dir)
        (out_dir / "train_report.jsonl").write_text(self.to_jsonl(), encoding="utf-8")
        summary = {
            "initial": self.initial, "checkpoints": self.checkpoints, "split": self.split,
            "n_train_sequences": self.n_train, "n_val_sequences": self.n_val, "seed": self.seed,
            "final": self.epochs[-1] if self.epochs else None,
            "published_reference": PUBLISHED_REFERENCE,
        }
        (out_dir / "train_summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


@dataclass
class TrainResult:
    model: LstmModel
    optimizer: RmspropState
    scaler: ScalerState
    report: TrainReport
    sequences: SequenceSet
    train_idx: np.ndarray
    val_idx: np.ndarray


def _evaluate(model, X, Y):
    pred = predict(model, X)
    return mse_loss(pred, Y), binary_accuracy(pred, Y)


def checkpoint_name(epoch: int) -> str:
    return f"checkpoint_epoch{epoch:04d}.lstm"


def train(features: FeatureMatrix, labels, config: LstmConfig | None = None, seed: int = 0,
          out_dir=None, resume=None) -> TrainResult:
    """Fit the stacked LSTM with RMSprop on MSE.

    The scaler is fitted on training sequences only. Each epoch shuffles
    with, and draws dropout masks from, a generator seeded by
    ``(seed, epoch)``, so resuming from a checkpoint replays exactly the
    remaining epochs of an uninterrupted run. Checkpoints are written to
    ``out_dir`` every ``config.checkpoint_every`` epochs.
    """
    config = config or LstmConfig()
    seqs = build_sequences(features, labels, config.seq_len)
    train_idx, val_idx = split_indices(seqs, config.train_fraction, config.split, seed)
    n_features = seqs.X.shape[2]

    report = TrainReport(split=config.split, n_train=len(train_idx), n_val=len(val_idx), seed=seed)
    if resume is not None:
        model, optimizer, meta, extra = load_checkpoint(resume)
        if meta.get("seed") != seed:
            raise ConfigError(f"checkpoint was trained with seed {meta.get('seed')}, not {seed}")
        if model.config != config:
            raise ConfigError("checkpoint configuration differs from the requested one")
        scaler = ScalerState(extra["scaler_mean"], extra["scaler_std"])
        start_epoch = meta["epoch"]
        report.epochs = list(meta["history"])
        report.initial = meta["initial"]
        report.checkpoints = list(meta.get("checkpoints", []))
    else:
        scaler = scaler_fit(seqs.X[train_idx].reshape(-1, n_features))
        model = LstmModel.init(config, n_features, seed)
        optimizer = RmspropState(config.lr, config.rho, config.eps, config.momentum)
        start_epoch = 0

    X = scaler_apply(scaler, seqs.X.reshape(-1, n_features)).reshape(seqs.X.shape)
    Xtr, Ytr, Xva, Yva = X[train_idx], seqs.Y[train_idx], X[val_idx], seqs.Y[val_idx]
    if resume is None:
        tl, ta = _evaluate(model, Xtr, Ytr)
        vl, va = _evaluate(model, Xva, Yva)
        report.initial = {"train_loss": tl, "train_accuracy": ta, "val_loss": vl, "val_accuracy": va}

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    for epoch in range(start_epoch, config.epochs):
        rng = np.random.default_rng([seed, 1, epoch])
        order = rng.permutation(len(Xtr))
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            _, grads, _ = loss_and_grads(model, Xtr[batch].transpose(1, 0, 2), Ytr[batch], rng)
            rmsprop_step(optimizer, model.params, grads)
        tl, ta = _evaluate(model, Xtr, Ytr)
        vl, va = _evaluate(model, Xva, Yva)
        done = epoch + 1
        report.epochs.append({"epoch": done, "train_loss": tl, "train_accuracy": ta,
                              "val_loss": vl, "val_accuracy": va})
        log.info("epoch %d train_loss %.5f val_loss %.5f val_acc %.4f", done, tl, vl, va)
        if out_dir is not None and (done % config.checkpoint_every == 0 or done == config.epochs):
            path = out_dir / checkpoint_name(done)
            if done % config.checkpoint_every == 0:
                report.checkpoints.append(path.name)
            meta = {"epoch": done, "seed": seed, "history": report.epochs,
                    "initial": report.initial, "checkpoints": report.checkpoints}
            save_checkpoint(path, model, optimizer, meta,
                            {"scaler_mean": scaler.mean, "scaler_std": scaler.std})
    return TrainResult(model, optimizer, scaler, report, seqs, train_idx, val_idx)
