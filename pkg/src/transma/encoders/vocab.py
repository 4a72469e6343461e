"""Atom-type and SMILES-token vocabularies."""

from __future__ import annotations

from collections.abc import Iterable

from ..errors import VocabMismatch
from ..smiles import tokenize

MASK_ATOM = "[MASK]"
UNKNOWN_ATOM = "[UNK]"
# 30 atom types; id 0 is the mask token used in pretraining.
ATOM_TYPES: tuple[str, ...] = (
    MASK_ATOM, "C", "N", "O", "S", "P", "F", "Cl", "Br", "I",
    "B", "Si", "Se", "Na", "K", "Li", "Mg", "Ca", "Fe", "Zn",
    "Cu", "Al", "As", "Sn", "Pt", "Co", "Ni", "Mn", "H", UNKNOWN_ATOM,
)  # fmt: skip
MASK_ID = 0
N_ATOM_TYPES = len(ATOM_TYPES)
_ATOM_INDEX = {sym: i for i, sym in enumerate(ATOM_TYPES)}


def atom_type_id(element: str) -> int:
    return _ATOM_INDEX.get(element, _ATOM_INDEX[UNKNOWN_ATOM])


class TokenVocab:
    """SMILES token ids assigned in first-seen order over a corpus, then frozen."""

    def __init__(self, tokens: Iterable[str] = (), max_size: int = 100):
        self.max_size = max_size
        self.tokens: list[str] = []
        self.index: dict[str, int] = {}
        for t in tokens:
            self.add(t)

    def add(self, token: str) -> int:
        if token not in self.index:
            if len(self.tokens) >= self.max_size:
                raise VocabMismatch(f"vocabulary full ({self.max_size} tokens); cannot add {token!r}")
            self.index[token] = len(self.tokens)
            self.tokens.append(token)
        return self.index[token]

    @classmethod
    def build(cls, smiles: Iterable[str], max_size: int = 100) -> TokenVocab:
        vocab = cls(max_size=max_size)
        for s in smiles:
            for tok in tokenize(s):
                vocab.add(tok.text)
        return vocab

    def encode(self, smiles: str) -> list[int]:
        ids = []
        for tok in tokenize(smiles):
            if tok.text not in self.index:
                raise VocabMismatch(f"token {tok.text!r} in {smiles!r} is not in the model vocabulary")
            ids.append(self.index[tok.text])
        return ids

    def __len__(self) -> int:
        return len(self.tokens)
