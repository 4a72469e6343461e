"""Modality encoders: pair-biased 3D attention and the selective-scan sequence model."""

from .mamba import MambaBlock, SequenceEncoder, selective_scan
from .structure3d import (
    BiasedAttentionLayer,
    PairBias,
    PretrainHeads,
    PretrainWeights,
    Structure3DEncoder,
    Structure3DInput,
    corrupt,
    masked_count,
    pretrain_loss,
)
from .vocab import ATOM_TYPES, MASK_ID, N_ATOM_TYPES, TokenVocab, atom_type_id

__all__ = [
    "ATOM_TYPES",
    "BiasedAttentionLayer",
    "MASK_ID",
    "MambaBlock",
    "N_ATOM_TYPES",
    "PairBias",
    "PretrainHeads",
    "PretrainWeights",
    "SequenceEncoder",
    "Structure3DEncoder",
    "Structure3DInput",
    "TokenVocab",
    "atom_type_id",
    "corrupt",
    "masked_count",
    "pretrain_loss",
    "selective_scan",
]
