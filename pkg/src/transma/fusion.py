"""Modality alignment, mol-attention scoring, the regression head and the hybrid loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentMismatch, BatchTooSmall, ShapeMismatch, UntrainedScaler
from .nn import functional as F
from .nn.module import Linear, Module
from .nn.tensor import Tensor, as_tensor

TARGET_RANGE = 0.95
TRIPLET_EPS = 1e-8
POSITIVE_TOL = 1e-16


def align(z2, mask, n_atoms: int | None = None) -> Tensor:
    """Rows of the token features at atom-token positions, in order."""
    z2 = as_tensor(z2)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (z2.shape[0],):
        raise AlignmentMismatch(f"mask length {mask.shape} for {z2.shape[0]} token rows")
    rows = np.flatnonzero(mask)
    if n_atoms is not None and rows.size != n_atoms:
        raise AlignmentMismatch(f"{rows.size} atom tokens but {n_atoms} atoms")
    return F.take_rows(z2, rows)


class MolAttention(Module):
    """Per-atom gate ``sigmoid(W2 relu(W1 [z1 | z2']))`` over the concatenated features."""

    def __init__(self, d_fused: int, rng: np.random.Generator, ratio: int = 16):
        hidden = max(1, d_fused // ratio)
        self.w1 = Linear(d_fused, hidden, rng)
        self.w2 = Linear(hidden, 1, rng)

    def __call__(self, z1, z2a) -> tuple[Tensor, Tensor]:
        z1, z2a = as_tensor(z1), as_tensor(z2a)
        if z1.ndim != 2 or z1.shape[0] != z2a.shape[0]:
            raise ShapeMismatch(f"mol_attention: z1 {z1.shape} vs z2' {z2a.shape}")
        fused = F.concat([z1, z2a], axis=1)
        scores = F.sigmoid(self.w2(F.relu(self.w1(fused))))
        return scores, fused


class RegressionHead(Module):
    """Scale atoms by their scores, mean-pool, then two tanh layers to a value in (-1, 1)."""

    def __init__(self, d_fused: int, rng: np.random.Generator, hidden: int = 128):
        self.w1 = Linear(d_fused, hidden, rng)
        self.w2 = Linear(hidden, 1, rng)

    def pool(self, fused, scores) -> Tensor:
        return F.mean(F.mul(fused, scores), axis=0)

    def __call__(self, fused, scores) -> Tensor:
        pooled = F.reshape(self.pool(fused, scores), (1, -1))
        return F.reshape(F.tanh(self.w2(F.tanh(self.w1(pooled)))), ())


@dataclass
class TargetScaler:
    """Affine map from the training target range onto [-0.95, 0.95]."""

    lo: float | None = None
    hi: float | None = None

    @property
    def fitted(self) -> bool:
        return self.lo is not None and self.hi is not None

    @classmethod
    def fit(cls, values) -> TargetScaler:
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            raise UntrainedScaler("cannot fit a scaler on zero targets")
        return cls(float(v.min()), float(v.max()))

    def _span(self) -> float:
        if not self.fitted:
            raise UntrainedScaler("target scaler has not been fitted")
        return self.hi - self.lo

    def transform(self, y):
        span = self._span()
        y = np.asarray(y, dtype=np.float64)
        if span == 0.0:
            return np.zeros_like(y)
        return -TARGET_RANGE + 2.0 * TARGET_RANGE * (y - self.lo) / span

    def inverse(self, s):
        span = self._span()
        s = np.asarray(s, dtype=np.float64)
        if span == 0.0:
            return np.full_like(s, self.lo)
        return self.lo + (s + TARGET_RANGE) * span / (2.0 * TARGET_RANGE)


def triplet_mask(labels: np.ndarray) -> np.ndarray:
    """Boolean ``[n, n, n]``: i, j, k distinct, label_i == label_j, label_i != label_k."""
    n = labels.shape[0]
    distinct = ~np.eye(n, dtype=bool)
    idx = distinct[:, :, None] & distinct[:, None, :] & distinct[None, :, :]
    same = labels[:, None] == labels[None, :]
    return idx & same[:, :, None] & ~same[:, None, :]


def triplet_loss(e1, e2, margin: float = 1.0) -> Tensor:
    """Batch-all triplet loss over the stacked per-molecule embeddings of both encoders.

    Entry ``b`` of ``e1`` and entry ``b`` of ``e2`` share a label; anchors and
    positives are therefore the two modality views of one molecule. The summed
    hinge is divided by the number of strictly positive terms plus 1e-8.
    """
    e1, e2 = as_tensor(e1), as_tensor(e2)
    if e1.ndim != 2 or e1.shape != e2.shape:
        raise ShapeMismatch(f"triplet_loss: embeddings {e1.shape} vs {e2.shape}")
    b = e1.shape[0]
    if b < 2:
        raise BatchTooSmall(f"triplet loss needs at least 2 molecules, got {b}")
    labels = np.concatenate([np.arange(b), np.arange(b)])
    n = 2 * b
    dist = F.pairwise_distances(F.concat([e1, e2], axis=0))
    hinge = F.add(F.sub(F.reshape(dist, (n, n, 1)), F.reshape(dist, (n, 1, n))), margin)
    losses = F.mul(F.relu(hinge), triplet_mask(labels).astype(np.float64))
    n_pos = float((losses.data > POSITIVE_TOL).sum())
    return F.mul(F.sum(losses), 1.0 / (n_pos + TRIPLET_EPS))


def hybrid_loss(preds, targets, e1, e2, beta: float, margin: float = 1.0) -> Tensor:
    """Mean squared error plus ``beta`` times the triplet loss (skipped when beta is 0)."""
    loss = F.mse(preds, targets)
    if beta == 0:
        return loss
    return F.add(loss, F.mul(triplet_loss(e1, e2, margin), beta))
