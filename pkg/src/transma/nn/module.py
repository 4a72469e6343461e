"""Parameter containers and the basic layers built on them."""

from __future__ import annotations

from collections.abc import Iterator

import numpy as np

from . import functional as F
from .tensor import Parameter, Tensor


class Module:
    """Base class; parameters are discovered from attributes, names are dotted paths."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            path = f"{prefix}{attr}"
            if isinstance(value, Parameter):
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{path}.{i}", item

    def parameters(self) -> dict[str, Parameter]:
        params = {}
        for name, p in self.named_parameters():
            p.name = name
            params[name] = p
        return params

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        from ..errors import CheckpointError

        params = self.parameters()
        if strict:
            missing = sorted(set(params) - set(state))
            unexpected = sorted(set(state) - set(params))
            if missing or unexpected:
                raise CheckpointError(f"parameter mismatch: missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, p in params.items():
            if name not in state:
                continue
            if state[name].shape != p.data.shape:
                raise CheckpointError(f"{name}: checkpoint shape {state[name].shape} != model shape {p.data.shape}")
            p.data = np.array(state[name], dtype=np.float64)


def glorot(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-limit, limit, size=(d_in, d_out))


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = Parameter(glorot(rng, d_in, d_out))
        self.bias = Parameter(np.zeros(d_out)) if bias else None

    def __call__(self, x) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-5):
        self.gamma = Parameter(np.ones(d))
        self.beta = Parameter(np.zeros(d))
        self.eps = eps

    def __call__(self, x) -> Tensor:
        return F.layer_norm(x, self.gamma, self.beta, self.eps)


class Embedding(Module):
    def __init__(self, n: int, d: int, rng: np.random.Generator, scale: float = 0.1):
        self.weight = Parameter(rng.normal(0.0, scale, size=(n, d)))

    def __call__(self, ids) -> Tensor:
        return F.take_rows(self.weight, ids)
