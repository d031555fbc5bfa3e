"""Stacked-LSTM classifier: recurrent layers with batch normalisation and
inverted dropout, then a ReLU dense layer and a sigmoid output layer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import LstmConfig
from ..errors import ShapeError
from .lstm import LstmLayerParams, layer_backward, layer_forward, sigmoid


def mse_loss(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    return float(np.mean((pred - target) ** 2))


def mse_grad(pred, target) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    return 2.0 * (pred - target) / pred.size


def batchnorm_train(x, gamma, beta, eps=1e-5):
    """Normalise each column of ``x`` (rows x features) by batch statistics.

    Returns ``(y, cache, mean, var)``; ``var`` is the biased batch variance.
    """
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    return gamma * xhat + beta, (xhat, inv_std, gamma), mean, var


def batchnorm_eval(x, gamma, beta, running_mean, running_var, eps=1e-5):
    return gamma * (x - running_mean) / np.sqrt(running_var + eps) + beta


def batchnorm_backward(dy, cache):
    xhat, inv_std, gamma = cache
    n = dy.shape[0]
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * gamma
    dx = inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dx, dgamma, dbeta


def dropout_mask(rng, shape, rate: float):
    """Inverted-dropout mask: kept units are scaled by ``1 / (1 - rate)``."""
    if rate == 0:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


@dataclass
class LstmModel:
    config: LstmConfig
    input_dim: int
    params: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def init(cls, config: LstmConfig, input_dim: int, seed: int = 0) -> LstmModel:
        """Weights uniform in +-1/sqrt(fan_in); batch-norm scale 1, shift 0."""
        rng = np.random.default_rng(seed)
        params, buffers = {}, {}
        dims = [input_dim, *config.hidden]
        for k, (d_in, d_h) in enumerate(zip(dims[:-1], dims[1:])):
            layer = LstmLayerParams.init(d_in, d_h, rng)
            params[f"lstm{k}.W"], params[f"lstm{k}.U"], params[f"lstm{k}.b"] = layer.W, layer.U, layer.b
            params[f"bn{k}.gamma"] = np.ones(d_h)
            params[f"bn{k}.beta"] = np.zeros(d_h)
            buffers[f"bn{k}.running_mean"] = np.zeros(d_h)
            buffers[f"bn{k}.running_var"] = np.ones(d_h)
        for name, (d_in, d_out) in (("dense", (config.hidden[-1], config.head_hidden)),
                                    ("out", (config.head_hidden, config.n_outputs))):
            bound = 1.0 / np.sqrt(d_in)
            params[f"{name}.W"] = rng.uniform(-bound, bound, (d_out, d_in))
            params[f"{name}.b"] = rng.uniform(-bound, bound, d_out)
        return cls(config, input_dim, params, buffers)

    @property
    def n_layers(self) -> int:
        return len(self.config.hidden)

    def layer(self, k: int) -> LstmLayerParams:
        p = self.params
        return LstmLayerParams(p[f"lstm{k}.W"], p[f"lstm{k}.U"], p[f"lstm{k}.b"])

    def copy(self) -> LstmModel:
        return LstmModel(self.config, self.input_dim,
                         {k: v.copy() for k, v in self.params.items()},
                         {k: v.copy() for k, v in self.buffers.items()})


def _check_batch(model: LstmModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != model.input_dim:
        raise ShapeError(f"expected (seq_len, batch, {model.input_dim}) input, got {X.shape}")
    return X


def forward(model: LstmModel, X, mode: str = "eval", rng=None, update_stats: bool = True):
    """Predictions in (0, 1), shaped batch x n_outputs.

    ``X`` is (seq_len x batch x features). Train mode normalises with batch
    statistics, applies dropout masks drawn from ``rng`` and (if
    ``update_stats``) moves the running statistics; eval mode uses the
    running statistics and no dropout.
    """
    pred, _ = _forward(model, X, mode, rng, update_stats)
    return pred


def _forward(model, X, mode, rng, update_stats):
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    X = _check_batch(model, X)
    cfg = model.config
    p, buf = model.params, model.buffers
    train = mode == "train"
    if train and rng is None:
        rng = np.random.default_rng(0)
    caches = []
    seq = X
    last = model.n_layers - 1
    for k in range(model.n_layers):
        H, lstm_cache = layer_forward(model.layer(k), seq)
        out = H[-1] if k == last else H
        flat = out.reshape(-1, out.shape[-1])
        gamma, beta = p[f"bn{k}.gamma"], p[f"bn{k}.beta"]
        if train:
            y, bn_cache, mean, var = batchnorm_train(flat, gamma, beta, cfg.bn_eps)
            if update_stats:
                m = cfg.bn_momentum
                buf[f"bn{k}.running_mean"] = m * buf[f"bn{k}.running_mean"] + (1 - m) * mean
                buf[f"bn{k}.running_var"] = m * buf[f"bn{k}.running_var"] + (1 - m) * var
        else:
            y = batchnorm_eval(flat, gamma, beta, buf[f"bn{k}.running_mean"],
                               buf[f"bn{k}.running_var"], cfg.bn_eps)
            bn_cache = None
        y = y.reshape(out.shape)
        mask = dropout_mask(rng, y.shape, cfg.dropout[k]) if train else None
        if mask is not None:
            y = y * mask
        caches.append((lstm_cache, bn_cache, mask, H.shape))
        seq = y

    a1 = seq @ p["dense.W"].T + p["dense.b"]
    r1 = np.maximum(a1, 0.0)
    head_mask = dropout_mask(rng, r1.shape, cfg.dropout[-1]) if train else None
    d1 = r1 * head_mask if head_mask is not None else r1
    logits = d1 @ p["out.W"].T + p["out.b"]
    pred = sigmoid(logits)
    return pred, (caches, seq, a1, head_mask, d1, pred)


def backward(model: LstmModel, cache, dpred) -> dict[str, np.ndarray]:
    """Gradients of every parameter given dLoss/dpred from a train-mode pass."""
    caches, z_last, a1, head_mask, d1, pred = cache
    p = model.params
    grads = {}
    dlogits = dpred * pred * (1.0 - pred)
    grads["out.W"] = dlogits.T @ d1
    grads["out.b"] = dlogits.sum(axis=0)
    dd1 = dlogits @ p["out.W"]
    dr1 = dd1 * head_mask if head_mask is not None else dd1
    da1 = dr1 * (a1 > 0)
    grads["dense.W"] = da1.T @ z_last
    grads["dense.b"] = da1.sum(axis=0)
    dy = da1 @ p["dense.W"]

    last = model.n_layers - 1
    for k in range(last, -1, -1):
        lstm_cache, bn_cache, mask, h_shape = caches[k]
        if mask is not None:
            dy = dy * mask
        flat = dy.reshape(-1, dy.shape[-1])
        dflat, grads[f"bn{k}.gamma"], grads[f"bn{k}.beta"] = batchnorm_backward(flat, bn_cache)
        if k == last:
            dH = np.zeros(h_shape)
            dH[-1] = dflat
        else:
            dH = dflat.reshape(h_shape)
        dy, (grads[f"lstm{k}.W"], grads[f"lstm{k}.U"], grads[f"lstm{k}.b"]) = layer_backward(
            model.layer(k), lstm_cache, dH
        )
    return grads


def loss_and_grads(model: LstmModel, X, Y, rng=None, update_stats: bool = True):
    """Train-mode MSE loss, parameter gradients and predictions for one batch."""
    pred, cache = _forward(model, X, "train", rng, update_stats)
    Y = np.asarray(Y, dtype=np.float64)
    loss = mse_loss(pred, Y)
    grads = backward(model, cache, mse_grad(pred, Y))
    return loss, grads, pred


def predict(model: LstmModel, X, batch_size: int = 512) -> np.ndarray:
    """Eval-mode predictions; ``X`` is (n_sequences x seq_len x features)."""
    X = np.asarray(X, dtype=np.float64)
    out = [forward(model, X[lo : lo + batch_size].transpose(1, 0, 2), "eval")
           for lo in range(0, X.shape[0], batch_size)]
    return np.concatenate(out) if out else np.zeros((0, model.config.n_outputs))
