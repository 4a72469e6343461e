"""Adam with a linearly decaying learning rate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MissingGrad
from .tensor import Parameter


@dataclass
class OptimizerState:
    lr0: float
    total_steps: int
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def lr(self, step: int | None = None) -> float:
        s = self.step if step is None else step
        if self.total_steps <= 0:
            return 0.0
        return self.lr0 * max(0.0, 1.0 - s / self.total_steps)


def adam_step(params: dict[str, Parameter], state: OptimizerState) -> float:
    """One Adam update in place; returns the learning rate used."""
    lr = state.lr()
    t = state.step + 1
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for name, p in params.items():
        if not p.trainable:
            continue
        if p.grad is None:
            raise MissingGrad(f"parameter {name!r} has no gradient")
        g = p.grad
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        if lr > 0.0:
            p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    state.step = t
    return lr


class Adam:
    def __init__(self, params: dict[str, Parameter], lr0: float, total_steps: int, eps: float = 1e-8,
                 betas: tuple[float, float] = (0.9, 0.999)):
        self.params = params
        self.state = OptimizerState(lr0=lr0, total_steps=total_steps, beta1=betas[0], beta2=betas[1], eps=eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> float:
        return adam_step(self.params, self.state)
