"""LSTM cell and layer with hand-written backpropagation through time.

Gate blocks are stacked in the order input, forget, output, candidate:
``W`` is (4h x d), ``U`` is (4h x h), ``b`` is (4h,).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError

GATES = ("i", "f", "o", "g")


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LstmLayerParams:
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.U.shape[1]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(W, U, b)`` slices for one of the gates ``i, f, o, g``."""
        h = self.hidden_dim
        k = GATES.index(name)
        s = slice(k * h, (k + 1) * h)
        return self.W[s], self.U[s], self.b[s]

    def check(self) -> None:
        h = self.hidden_dim
        if self.W.shape[0] != 4 * h or self.U.shape != (4 * h, h) or self.b.shape != (4 * h,):
            raise ShapeError(
                f"inconsistent LSTM shapes W{self.W.shape} U{self.U.shape} b{self.b.shape}"
            )

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng) -> LstmLayerParams:
        bound_w = 1.0 / np.sqrt(input_dim)
        bound_u = 1.0 / np.sqrt(hidden_dim)
        return cls(
            rng.uniform(-bound_w, bound_w, (4 * hidden_dim, input_dim)),
            rng.uniform(-bound_u, bound_u, (4 * hidden_dim, hidden_dim)),
            rng.uniform(-bound_w, bound_w, 4 * hidden_dim),
        )


def _gates(z, h):
    i = sigmoid(z[..., :h])
    f = sigmoid(z[..., h : 2 * h])
    o = sigmoid(z[..., 2 * h : 3 * h])
    g = np.tanh(z[..., 3 * h :])
    return i, f, o, g


def lstm_cell_forward(params: LstmLayerParams, x_t, h_prev, c_prev):
    """One time step. Accepts a single vector or a (batch x dim) block.

    Returns ``(h_t, c_t)``.
    """
    h_t, c_t, _ = lstm_cell_step(params, x_t, h_prev, c_prev)
    return h_t, c_t


def lstm_cell_step(params: LstmLayerParams, x_t, h_prev, c_prev):
    """:func:`lstm_cell_forward` that also returns the cache for backprop."""
    params.check()
    x_t, h_prev, c_prev = (np.asarray(a, dtype=np.float64) for a in (x_t, h_prev, c_prev))
    h = params.hidden_dim
    if x_t.shape[-1] != params.input_dim or h_prev.shape[-1] != h or c_prev.shape != h_prev.shape:
        raise ShapeError("cell input dimensions do not match the parameters")
    z = x_t @ params.W.T + h_prev @ params.U.T + params.b
    i, f, o, g = _gates(z, h)
    c_t = f * c_prev + i * g
    tc = np.tanh(c_t)
    h_t = o * tc
    return h_t, c_t, (x_t, h_prev, c_prev, i, f, o, g, tc)


def lstm_cell_backward(params: LstmLayerParams, cache, dh_t, dc_t):
    """Gradients of one step.

    ``dc_t`` is the gradient arriving from the next step's cell state only;
    the path through ``h_t`` is added here. Returns
    ``(dx, dh_prev, dc_prev, (dW, dU, db))``.
    """
    x_t, h_prev, c_prev, i, f, o, g, tc = cache
    dc = dc_t + dh_t * o * (1.0 - tc * tc)
    dz = np.concatenate(
        (
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            dh_t * tc * o * (1.0 - o),
            dc * i * (1.0 - g * g),
        ),
        axis=-1,
    )
    dz2 = np.atleast_2d(dz)
    dW = dz2.T @ np.atleast_2d(x_t)
    dU = dz2.T @ np.atleast_2d(h_prev)
    db = dz2.sum(axis=0)
    return dz @ params.W, dz @ params.U, dc * f, (dW, dU, db)


def layer_forward(params: LstmLayerParams, X):
    """Run the layer over ``X`` (time x batch x input) from zero state.

    Returns the hidden sequence (time x batch x hidden) and a cache.
    """
    params.check()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != params.input_dim:
        raise ShapeError(f"expected (time, batch, {params.input_dim}) input, got {X.shape}")
    T, B, _ = X.shape
    h = params.hidden_dim
    xw = X @ params.W.T + params.b
    H = np.zeros((T, B, h))
    C = np.zeros((T, B, h))
    acts = np.zeros((T, B, 4 * h))
    TC = np.zeros((T, B, h))
    h_prev = np.zeros((B, h))
    c_prev = np.zeros((B, h))
    for t in range(T):
        z = xw[t] + h_prev @ params.U.T
        i, f, o, g = _gates(z, h)
        c_prev = f * c_prev + i * g
        tc = np.tanh(c_prev)
        h_prev = o * tc
        H[t], C[t], TC[t] = h_prev, c_prev, tc
        acts[t] = np.concatenate((i, f, o, g), axis=-1)
    return H, (X, H, C, acts, TC)


def layer_backward(params: LstmLayerParams, cache, dH):
    """Backpropagation through time. Returns ``(dX, (dW, dU, db))``."""
    X, H, C, acts, TC = cache
    T, B, h = H.shape
    dZ = np.zeros((T, B, 4 * h))
    dh_next = np.zeros((B, h))
    dc_next = np.zeros((B, h))
    for t in range(T - 1, -1, -1):
        i, f, o, g = acts[t, :, :h], acts[t, :, h : 2 * h], acts[t, :, 2 * h : 3 * h], acts[t, :, 3 * h :]
        tc = TC[t]
        c_prev = C[t - 1] if t > 0 else np.zeros((B, h))
        dh = dH[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = dZ[t]
        dz[:, :h] = dc * g * i * (1.0 - i)
        dz[:, h : 2 * h] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * h : 3 * h] = dh * tc * o * (1.0 - o)
        dz[:, 3 * h :] = dc * i * (1.0 - g * g)
        dh_next = dz @ params.U
        dc_next = dc * f
    flat = dZ.reshape(T * B, 4 * h)
    dW = flat.T @ X.reshape(T * B, -1)
    H_prev = np.concatenate((np.zeros((1, B, h)), H[:-1]), axis=0)
    dU = flat.T @ H_prev.reshape(T * B, h)
    db = flat.sum(axis=0)
    dX = dZ @ params.W
    return dX, (dW, dU, db)
