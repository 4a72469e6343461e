"""Differentiable operations on :class:`~transma.nn.tensor.Tensor`."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from .tensor import Tensor, as_tensor


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor.make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor.make(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor.make(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def _swap(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")

    def backward(g):
        return _unbroadcast(g @ _swap(b.data), a.shape), _unbroadcast(_swap(a.data) @ g, b.shape)

    return Tensor.make(a.data @ b.data, (a, b), backward)


def linear(x, w, b=None) -> Tensor:
    """``x @ w + b`` with ``w`` shaped ``[d_in, d_out]``."""
    x, w = as_tensor(x), as_tensor(w)
    if x.shape[-1] != w.shape[0] or w.ndim != 2:
        raise ShapeMismatch(f"linear: input {x.shape} with weight {w.shape}")
    if b is not None:
        b = as_tensor(b)
        if b.shape != (w.shape[1],):
            raise ShapeMismatch(f"linear: bias {b.shape} for weight {w.shape}")
    out = x.data @ w.data
    if b is not None:
        out = out + b.data
    flat_x = x.data.reshape(-1, x.shape[-1])

    def backward(g):
        flat_g = g.reshape(-1, g.shape[-1])
        gx = g @ w.data.T
        gw = flat_x.T @ flat_g
        if b is None:
            return gx, gw
        return gx, gw, flat_g.sum(axis=0)

    parents = (x, w) if b is None else (x, w, b)
    return Tensor.make(out, parents, backward)


def getitem(x, index) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        out = np.zeros_like(x.data)
        np.add.at(out, index, g)
        return (out,)

    return Tensor.make(x.data[index], (x,), backward)


def take_rows(x, rows) -> Tensor:
    return getitem(x, np.asarray(rows, dtype=np.int64))


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return Tensor.make(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes) -> Tensor:
    x = as_tensor(x)
    inverse = np.argsort(axes)
    return Tensor.make(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def concat(xs, axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    cuts = np.cumsum(sizes)[:-1]
    return Tensor.make(
        np.concatenate([x.data for x in xs], axis=axis),
        tuple(xs),
        lambda g: tuple(np.split(g, cuts, axis=axis)),
    )


def stack(xs, axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    return Tensor.make(
        np.stack([x.data for x in xs], axis=axis),
        tuple(xs),
        lambda g: tuple(np.moveaxis(g, axis, 0)),
    )


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor.make(x.data.sum(axis=axis, keepdims=keepdims), (x,), backward)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis, keepdims), 1.0 / float(count))


def square(x) -> Tensor:
    x = as_tensor(x)
    return Tensor.make(x.data**2, (x,), lambda g: (2.0 * x.data * g,))


def exp(x) -> Tensor:
    x = as_tensor(x)
    y = np.exp(x.data)
    return Tensor.make(y, (x,), lambda g: (g * y,))


def sigmoid_np(x: np.ndarray) -> np.ndarray:
    # two-branch form avoids overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def softplus_np(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = sigmoid_np(x.data)
    return Tensor.make(y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return Tensor.make(y, (x,), lambda g: (g * (1.0 - y * y),))


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return Tensor.make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def silu(x) -> Tensor:
    x = as_tensor(x)
    s = sigmoid_np(x.data)
    return Tensor.make(x.data * s, (x,), lambda g: (g * (s + x.data * s * (1.0 - s)),))


def softplus(x) -> Tensor:
    x = as_tensor(x)
    return Tensor.make(softplus_np(x.data), (x,), lambda g: (g * sigmoid_np(x.data),))


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)
    return Tensor.make(y, (x,), lambda g: (y * (g - (g * y).sum(axis=axis, keepdims=True)),))


def softmax_rows(x) -> Tensor:
    return softmax(x, axis=-1)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale and shift."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    d = x.shape[-1]

    def backward(g):
        gxhat = g * gamma.data
        gx = inv / d * (d * gxhat - gxhat.sum(axis=-1, keepdims=True) - xhat * (gxhat * xhat).sum(axis=-1, keepdims=True))
        flat_g = g.reshape(-1, d)
        return gx, (flat_g * xhat.reshape(-1, d)).sum(axis=0), flat_g.sum(axis=0)

    return Tensor.make(xhat * gamma.data + beta.data, (x, gamma, beta), backward)


def conv1d_depthwise(x, kernel) -> Tensor:
    """Causal per-channel convolution: ``y[t] = sum_s kernel[s] * x[t - s]``."""
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.ndim != 2 or kernel.ndim != 2 or x.shape[1] != kernel.shape[1]:
        raise ShapeMismatch(f"conv1d_depthwise: input {x.shape} with kernel {kernel.shape}")
    length, width = x.shape[0], kernel.shape[0]
    y = np.zeros_like(x.data)
    for s in range(min(width, length)):
        y[s:] += kernel.data[s] * x.data[: length - s]

    def backward(g):
        gx = np.zeros_like(x.data)
        gk = np.zeros_like(kernel.data)
        for s in range(min(width, length)):
            gx[: length - s] += kernel.data[s] * g[s:]
            gk[s] = (g[s:] * x.data[: length - s]).sum(axis=0)
        return gx, gk

    return Tensor.make(y, (x, kernel), backward)


def pairwise_distances(e) -> Tensor:
    """Euclidean distance matrix between the rows of ``e``; zero distances get zero gradient."""
    e = as_tensor(e)
    diff = e.data[:, None, :] - e.data[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))

    def backward(g):
        safe = np.where(dist > 0, dist, 1.0)
        w = np.where(dist > 0, (g + g.T) / safe, 0.0)
        return ((w[:, :, None] * diff).sum(axis=1),)

    return Tensor.make(dist, (e,), backward)


def _check_same(pred: Tensor, target: np.ndarray, name: str) -> None:
    if pred.shape != target.shape:
        raise ShapeMismatch(f"{name}: prediction {pred.shape} vs target {target.shape}")


def mse(pred, target) -> Tensor:
    pred = as_tensor(pred)
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    _check_same(pred, t, "mse")
    r = pred.data - t
    n = max(r.size, 1)
    return Tensor.make(np.mean(r * r), (pred,), lambda g: (g * 2.0 * r / n,))


def smooth_l1(pred, target, beta: float = 1.0) -> Tensor:
    """Mean of 0.5 r^2 / beta for |r| < beta, |r| - 0.5 beta otherwise."""
    pred = as_tensor(pred)
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    _check_same(pred, t, "smooth_l1")
    if t.size == 0:
        return Tensor.make(np.float64(0.0), (pred,), lambda g: (np.zeros_like(pred.data),))
    r = pred.data - t
    a = np.abs(r)
    small = a < beta
    vals = np.where(small, 0.5 * r * r / beta, a - 0.5 * beta)
    n = r.size
    return Tensor.make(vals.mean(), (pred,), lambda g: (g * np.where(small, r / beta, np.sign(r)) / n,))


def cross_entropy(logits, classes) -> Tensor:
    """Mean negative log-likelihood of integer ``classes`` under row-wise softmax."""
    logits = as_tensor(logits)
    classes = np.asarray(classes, dtype=np.int64)
    if logits.ndim != 2 or classes.shape != (logits.shape[0],):
        raise ShapeMismatch(f"cross_entropy: logits {logits.shape} with classes {classes.shape}")
    n = logits.shape[0]
    if n == 0:
        return Tensor.make(np.float64(0.0), (logits,), lambda g: (np.zeros_like(logits.data),))
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = (logsum - z[rows, classes]).mean()

    def backward(g):
        p = np.exp(z - logsum[:, None])
        p[rows, classes] -= 1.0
        return (g * p / n,)

    return Tensor.make(loss, (logits,), backward)
