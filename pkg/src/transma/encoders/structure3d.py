"""3D structure encoder: transformer layers whose attention logits carry a pair bias
computed from interatomic distances and bond types, plus the denoising
pretraining heads (atom type, coordinates, pairwise distances)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import EmptyBatch, ShapeMismatch
from ..nn import functional as F
from ..nn.module import Embedding, LayerNorm, Linear, Module
from ..nn.tensor import Parameter, Tensor
from ..rng import substream
from ..smiles import BondOrder, MolecularGraph
from .vocab import MASK_ID, N_ATOM_TYPES, atom_type_id

# bond-type ids for the pair matrix; the diagonal gets its own id
BOND_NONE, BOND_SELF = 0, 5
BOND_IDS = {BondOrder.SINGLE: 1, BondOrder.DOUBLE: 2, BondOrder.TRIPLE: 3, BondOrder.AROMATIC: 4}
N_BOND_TYPES = 6
GAUSSIAN_KERNELS = 16
GAUSSIAN_RANGE = (0.0, 12.0)


def distance_matrix(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


@dataclass
class Structure3DInput:
    atom_types: np.ndarray  # int [n]
    coords: np.ndarray  # [n, 3]
    dist: np.ndarray  # [n, n]
    bond_types: np.ndarray  # int [n, n]

    @property
    def n_atoms(self) -> int:
        return int(self.atom_types.shape[0])

    @classmethod
    def from_graph(cls, g: MolecularGraph, coords: np.ndarray) -> Structure3DInput:
        coords = np.asarray(coords, dtype=np.float64)
        if coords.shape != (g.n_atoms, 3):
            raise ShapeMismatch(f"coords {coords.shape} for {g.n_atoms} atoms")
        types = np.array([atom_type_id(a.element) for a in g.atoms], dtype=np.int64)
        bonds = np.full((g.n_atoms, g.n_atoms), BOND_NONE, dtype=np.int64)
        for b in g.bonds:
            bonds[b.a, b.b] = bonds[b.b, b.a] = BOND_IDS[b.order]
        np.fill_diagonal(bonds, BOND_SELF)
        return cls(types, coords, distance_matrix(coords), bonds)

    def permuted(self, perm: np.ndarray) -> Structure3DInput:
        perm = np.asarray(perm)
        return Structure3DInput(
            self.atom_types[perm],
            self.coords[perm],
            self.dist[np.ix_(perm, perm)],
            self.bond_types[np.ix_(perm, perm)],
        )


class PairBias(Module):
    """Gaussian-basis distance features plus a bond-type embedding, projected to one scalar per head."""

    def __init__(self, heads: int, rng: np.random.Generator, kernels: int = GAUSSIAN_KERNELS):
        lo, hi = GAUSSIAN_RANGE
        self.centers = Parameter(np.linspace(lo, hi, kernels))
        self.width = (hi - lo) / (kernels - 1)
        self.bond_embedding = Embedding(N_BOND_TYPES, kernels, rng)
        self.proj = Linear(kernels, heads, rng)

    def __call__(self, dist: np.ndarray, bond_types: np.ndarray) -> Tensor:
        """Returns the bias as ``[n, n, heads]``."""
        d = Tensor(dist[:, :, None])
        z = F.mul(F.square(F.sub(d, self.centers)), -0.5 / self.width**2)
        feats = F.add(F.exp(z), F.getitem(self.bond_embedding.weight, bond_types))
        return self.proj(feats)


class BiasedAttentionLayer(Module):
    """Pre-norm multi-head self-attention with additive pair bias, then a feed-forward sublayer."""

    def __init__(self, d_model: int, heads: int, ffn_dim: int, rng: np.random.Generator):
        if d_model % heads:
            raise ShapeMismatch(f"heads={heads} must divide d_model={d_model}")
        self.heads = heads
        self.norm1 = LayerNorm(d_model)
        self.qkv = Linear(d_model, 3 * d_model, rng)
        self.out = Linear(d_model, d_model, rng)
        self.norm2 = LayerNorm(d_model)
        self.ff1 = Linear(d_model, ffn_dim, rng)
        self.ff2 = Linear(ffn_dim, d_model, rng)

    def attention(self, h: Tensor, pair_bias: Tensor) -> tuple[Tensor, Tensor]:
        """Attention sublayer output (before the residual) and the attention weights ``[heads, n, n]``."""
        n, d = h.shape
        if pair_bias.shape != (n, n, self.heads):
            raise ShapeMismatch(f"pair bias {pair_bias.shape} for n={n}, heads={self.heads}")
        dh = d // self.heads
        qkv = F.reshape(self.qkv(self.norm1(h)), (n, 3, self.heads, dh))
        qkv = F.transpose(qkv, (1, 2, 0, 3))  # [3, H, n, dh]
        q, k, v = qkv[0], qkv[1], qkv[2]
        logits = F.mul(F.matmul(q, F.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(dh))
        logits = F.add(logits, F.transpose(pair_bias, (2, 0, 1)))
        weights = F.softmax(logits, axis=-1)
        ctx = F.reshape(F.transpose(F.matmul(weights, v), (1, 0, 2)), (n, d))
        return self.out(ctx), weights

    def __call__(self, h: Tensor, pair_bias: Tensor) -> Tensor:
        att, _ = self.attention(h, pair_bias)
        h = F.add(h, att)
        return F.add(h, self.ff2(F.silu(self.ff1(self.norm2(h)))))


class Structure3DEncoder(Module):
    def __init__(self, d_model: int, heads: int, layers: int, ffn_dim: int, rng: np.random.Generator):
        self.d_model = d_model
        self.n_layers = layers
        self.atom_embedding = Embedding(N_ATOM_TYPES, d_model, rng, scale=1.0)
        self.pair_bias = PairBias(heads, rng)
        self.layers = [BiasedAttentionLayer(d_model, heads, ffn_dim, rng) for _ in range(layers)]
        self.final_norm = LayerNorm(d_model)

    def __call__(self, inp: Structure3DInput) -> Tensor:
        """Per-atom features ``z1`` of shape ``[n, d_model]``."""
        h = self.atom_embedding(inp.atom_types)
        bias = self.pair_bias(inp.dist, inp.bond_types)
        for layer in self.layers:
            h = layer(h, bias)
        return self.final_norm(h)


class PretrainHeads(Module):
    """Atom-type logits, coordinate corrections and pairwise-distance corrections."""

    def __init__(self, d_model: int, rng: np.random.Generator):
        self.type_head = Linear(d_model, N_ATOM_TYPES, rng)
        self.coord_head = Linear(d_model, 3, rng)
        self.dist_weight = Parameter(rng.normal(0.0, 0.01, size=d_model))
        self.dist_bias = Parameter(np.zeros(1))

    def zero_(self) -> None:
        """Set the coordinate and distance heads to predict no correction."""
        for p in (self.coord_head.weight, self.coord_head.bias, self.dist_weight, self.dist_bias):
            p.data[...] = 0.0

    def distance_correction(self, h: Tensor) -> Tensor:
        # symmetric bilinear form h_i . diag(w) . h_j
        return F.add(F.matmul(F.mul(h, self.dist_weight), F.transpose(h, (1, 0))), self.dist_bias)


@dataclass(frozen=True)
class PretrainWeights:
    atom_type: float = 1.0
    coord: float = 5.0
    distance: float = 10.0


def masked_count(n: int, rate: float = 0.15) -> int:
    """round(rate * n), halves rounded up, at least one atom."""
    exact = Fraction(rate).limit_denominator(10**6) * n
    return max(1, math.floor(exact + Fraction(1, 2)))


@dataclass
class MaskedInput:
    inp: Structure3DInput
    masked: np.ndarray
    original: Structure3DInput


def corrupt(inp: Structure3DInput, seed: int, step: int, index: int, rate: float = 0.15, noise: float = 1.0) -> MaskedInput:
    """Mask atom types and jitter the coordinates of the masked atoms."""
    n = inp.n_atoms
    k = min(n, masked_count(n, rate))
    masked = np.sort(substream(seed, "mask", step, index).choice(n, size=k, replace=False))
    types = inp.atom_types.copy()
    types[masked] = MASK_ID
    coords = inp.coords.copy()
    coords[masked] += substream(seed, "noise", step, index).uniform(-noise, noise, size=(k, 3))
    noisy = Structure3DInput(types, coords, distance_matrix(coords), inp.bond_types)
    return MaskedInput(noisy, masked, inp)


def pretrain_loss(
    encoder: Structure3DEncoder,
    heads: PretrainHeads,
    batch: list[Structure3DInput],
    seed: int,
    step: int,
    rate: float = 0.15,
    noise: float = 1.0,
    weights: PretrainWeights = PretrainWeights(),
) -> tuple[Tensor, dict[str, float]]:
    """Weighted masked-atom loss averaged over the batch.

    Atom-type cross-entropy and coordinate smooth-L1 use masked atoms only;
    the distance smooth-L1 uses off-diagonal pairs with at least one masked end.
    """
    if not batch:
        raise EmptyBatch("pretraining batch is empty")
    totals = []
    parts = {"atom_type": 0.0, "coord": 0.0, "distance": 0.0}
    for index, inp in enumerate(batch):
        m = corrupt(inp, seed, step, index, rate, noise)
        idx = m.masked
        h = encoder(m.inp)
        hm = F.take_rows(h, idx)
        ce = F.cross_entropy(heads.type_head(hm), inp.atom_types[idx])
        coord_pred = F.add(Tensor(m.inp.coords[idx]), heads.coord_head(hm))
        coord = F.smooth_l1(coord_pred, inp.coords[idx])
        n = inp.n_atoms
        is_masked = np.zeros(n, dtype=bool)
        is_masked[idx] = True
        pair = (is_masked[:, None] | is_masked[None, :]) & ~np.eye(n, dtype=bool)
        rows, cols = np.nonzero(pair)
        dist_pred = F.add(Tensor(m.inp.dist), heads.distance_correction(h))
        dist = F.smooth_l1(F.getitem(dist_pred, (rows, cols)), inp.dist[rows, cols])
        total = F.add(F.add(F.mul(ce, weights.atom_type), F.mul(coord, weights.coord)), F.mul(dist, weights.distance))
        totals.append(total)
        parts["atom_type"] += ce.item() / len(batch)
        parts["coord"] += coord.item() / len(batch)
        parts["distance"] += dist.item() / len(batch)
    loss = F.mul(F.sum(F.stack(totals)), 1.0 / len(batch))
    return loss, parts
