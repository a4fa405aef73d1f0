"""ADAM with bias correction over named parameter dictionaries."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    alpha: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_init(param_shapes: dict, alpha: float = 1e-5, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ValueError("decay rates must lie in [0, 1)")
    state = AdamState(alpha=alpha, beta1=beta1, beta2=beta2, epsilon=epsilon)
    for name, shape in param_shapes.items():
        state.m[name] = np.zeros(shape)
        state.v[name] = np.zeros(shape)
    return state


def adam_update(params: dict, grads: dict, state: AdamState):
    """One ADAM step.  Returns (new params dict, new state); inputs are not
    mutated.  Zero gradients leave parameters exactly unchanged."""
    new_params = {}
    new_state = AdamState(alpha=state.alpha, beta1=state.beta1, beta2=state.beta2,
                          epsilon=state.epsilon, step=state.step + 1)
    t = new_state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape "
                             f"{theta.shape} for {name!r}")
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        new_state.m[name] = m
        new_state.v[name] = v
        new_params[name] = theta - state.alpha * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return new_params, new_state
