"""The full two-encoder model with mol-attention fusion and regression head."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .encoders.mamba import SequenceEncoder
from .encoders.structure3d import Structure3DEncoder, Structure3DInput
from .encoders.vocab import TokenVocab
from .errors import AlignmentMismatch, EmptyBatch
from .fusion import MolAttention, RegressionHead, hybrid_loss, align
from .nn import functional as F
from .nn.module import Module
from .nn.tensor import Tensor
from .smiles import MolecularGraph, atom_token_mask, parse, tokenize


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 512
    heads: int = 8
    layers_3d: int = 16
    ffn_dim: int = 2048
    layers_seq: int = 2
    d_state: int = 16
    vocab_size: int = 100
    ratio: int = 16
    hidden: int = 128

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MoleculeSample:
    id: str
    smiles: str
    graph: MolecularGraph
    structure: Structure3DInput
    token_ids: np.ndarray
    atom_mask: np.ndarray
    target: float | None = None

    @classmethod
    def build(
        cls, mol_id: str, smiles: str, coords: np.ndarray, vocab: TokenVocab, target: float | None = None,
        graph: MolecularGraph | None = None,
    ) -> MoleculeSample:
        g = parse(smiles) if graph is None else graph
        mask = np.array(atom_token_mask(tokenize(smiles)), dtype=bool)
        if int(mask.sum()) != g.n_atoms:
            raise AlignmentMismatch(f"molecule {mol_id}: {int(mask.sum())} atom tokens, {g.n_atoms} atoms")
        return cls(
            id=mol_id,
            smiles=smiles,
            graph=g,
            structure=Structure3DInput.from_graph(g, coords),
            token_ids=np.array(vocab.encode(smiles), dtype=np.int64),
            atom_mask=mask,
            target=target,
        )


@dataclass
class ForwardResult:
    z1: Tensor
    z2: Tensor
    z2_aligned: Tensor
    scores: Tensor
    fused: Tensor
    raw: Tensor


class TransMA(Module):
    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.encoder_3d = Structure3DEncoder(config.d_model, config.heads, config.layers_3d, config.ffn_dim, rng)
        self.encoder_seq = SequenceEncoder(
            config.d_model, config.layers_seq, rng, d_state=config.d_state, vocab_size=config.vocab_size
        )
        self.mol_attention = MolAttention(2 * config.d_model, rng, ratio=config.ratio)
        self.head = RegressionHead(2 * config.d_model, rng, hidden=config.hidden)

    def forward(self, sample: MoleculeSample, force_scores: float | None = None) -> ForwardResult:
        z1 = self.encoder_3d(sample.structure)
        z2 = self.encoder_seq(sample.token_ids)
        z2a = align(z2, sample.atom_mask, sample.graph.n_atoms)
        scores, fused = self.mol_attention(z1, z2a)
        if force_scores is not None:
            scores = Tensor(np.full(scores.shape, float(force_scores)))
        raw = self.head(fused, scores)
        return ForwardResult(z1, z2, z2a, scores, fused, raw)

    def batch_loss(
        self, samples: list[MoleculeSample], scaled_targets: np.ndarray, beta: float, margin: float = 1.0
    ) -> tuple[Tensor, np.ndarray]:
        """Hybrid loss on a batch; also returns the raw (scaled-space) predictions."""
        if not samples:
            raise EmptyBatch("training batch is empty")
        outs = [self.forward(s) for s in samples]
        preds = F.stack([o.raw for o in outs])
        e1 = F.stack([F.mean(o.z1, axis=0) for o in outs])
        e2 = F.stack([F.mean(o.z2_aligned, axis=0) for o in outs])
        loss = hybrid_loss(preds, np.asarray(scaled_targets, dtype=np.float64), e1, e2, beta, margin)
        return loss, preds.data.copy()
