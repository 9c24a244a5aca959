"""Functional Adam over lists of parameter arrays."""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdamConfig", "AdamState", "adam_init", "adam_step"]


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass
class AdamState:
    """Parameters plus first/second moment accumulators.

    t counts completed steps; bias correction uses t after increment.
    """

    params: list = field(default_factory=list)
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0


def adam_init(params) -> AdamState:
    params = [np.asarray(p, dtype=float) for p in params]
    return AdamState(
        params=params,
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
        t=0,
    )


def adam_step(state: AdamState, grads, config: AdamConfig) -> AdamState:
    """One Adam update; returns a new state, inputs untouched."""
    if len(grads) != len(state.params):
        raise ValueError(
            f"got {len(grads)} grads for {len(state.params)} params"
        )
    t = state.t + 1
    b1, b2 = config.beta1, config.beta2
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(state.params, grads, state.m, state.v):
        g = np.asarray(g, dtype=float)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_params.append(p - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon))
        new_m.append(m)
        new_v.append(v)
    return AdamState(params=new_params, m=new_m, v=new_v, t=t)
