from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError


@dataclass
class RmspropState:
    """Per-parameter moving average of squared gradients.

    ``momentum > 0`` adds a classical (non-Nesterov) velocity buffer.
    """

    lr: float = 0.001
    rho: float = 0.9
    eps: float = 1e-8
    momentum: float = 0.0
    avg: dict[str, np.ndarray] = field(default_factory=dict)
    velocity: dict[str, np.ndarray] = field(default_factory=dict)
    steps: int = 0


def rmsprop_step(state: RmspropState, params: dict, grads: dict) -> dict:
    """Update ``params`` in place and return them.

    ``avg <- rho avg + (1 - rho) g^2``;
    ``param <- param - lr g / (sqrt(avg) + eps)``.
    """
    for name, g in grads.items():
        p = params[name]
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        avg = state.avg.get(name)
        if avg is None:
            avg = np.zeros_like(p)
        avg = state.rho * avg + (1.0 - state.rho) * g * g
        state.avg[name] = avg
        step = state.lr * g / (np.sqrt(avg) + state.eps)
        if state.momentum:
            step = state.momentum * state.velocity.get(name, np.zeros_like(p)) + step
            state.velocity[name] = step
        params[name] = p - step
    state.steps += 1
    return params
