"""Central finite-difference gradient checks."""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_grad(fn: Callable[[], Tensor], x: Tensor, eps: float = 1e-3, coords=None) -> np.ndarray:
    """Central differences of scalar ``fn()`` w.r.t. ``x.data`` at ``coords`` (flat indices)."""
    flat = x.data.reshape(-1)
    coords = range(flat.size) if coords is None else coords
    out = np.zeros(flat.size)
    for i in coords:
        old = flat[i]
        flat[i] = old + eps
        up = float(fn().data)
        flat[i] = old - eps
        down = float(fn().data)
        flat[i] = old
        out[i] = (up - down) / (2.0 * eps)
    return out.reshape(x.shape)


def grad_check(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-3,
    max_coords: int | None = None,
    seed: int = 0,
    atol: float = 1e-6,
) -> float:
    """Largest relative error between analytic and numeric gradients.

    Error per tensor is ``max|analytic - numeric| / max(max|analytic|, max|numeric|)``
    over the checked coordinates. The denominator is floored at ``atol`` so
    that gradients which vanish analytically (numeric noise only) pass. With ``max_coords`` a
    seeded random subset of each tensor's coordinates is checked.
    """
    for x in inputs:
        x.grad = None
    out = fn()
    out.backward()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for x in inputs:
        analytic = np.zeros_like(x.data) if x.grad is None else x.grad
        size = x.data.size
        if max_coords is not None and size > max_coords:
            coords = np.sort(rng.choice(size, size=max_coords, replace=False))
        else:
            coords = np.arange(size)
        numeric = numerical_grad(fn, x, eps, coords).reshape(-1)[coords]
        a = analytic.reshape(-1)[coords]
        scale = max(np.abs(a).max(initial=0.0), np.abs(numeric).max(initial=0.0))
        if a.size == 0:
            continue
        worst = max(worst, float(np.abs(a - numeric).max() / max(scale, atol)))
    return worst
