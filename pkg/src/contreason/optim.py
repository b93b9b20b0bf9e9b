"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradientError(ValueError):
    def __init__(self, name: str, index: tuple[int, ...]):
        super().__init__(f"non-finite gradient for parameter {name!r} at index {index}")
        self.name = name
        self.index = index


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_update(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """One Adam step, in place on ``params`` and ``state``.

    Parameters without an entry in ``grads`` are left alone (their moments are
    not decayed either).
    """
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if params[name].shape != np.shape(g):
            raise ValueError(f"gradient shape {np.shape(g)} != parameter shape {params[name].shape} for {name!r}")
        bad = ~np.isfinite(g)
        if bad.any():
            raise NonFiniteGradientError(name, tuple(int(i) for i in np.argwhere(bad)[0]))

    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name in sorted(grads):
        g = np.asarray(grads[name], dtype=float)
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        params[name] -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
