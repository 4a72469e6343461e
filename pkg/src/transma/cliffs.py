"""Similarity measures and transfection-cliff mining."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnparseableSmiles, WidthMismatch
from .fingerprints import (
    DEFAULT_RADIUS,
    DEFAULT_WIDTH,
    BitFingerprint,
    circular_fingerprint,
    murcko_scaffold,
    structural_keys_fp,
)
from .smiles import parse

SIMILARITY_THRESHOLD = 0.9
DIFFERENCE_THRESHOLD = 1.0
LOG10_2 = math.log10(2.0)


@dataclass(frozen=True)
class SimilarityTriple:
    subs: float
    scas: float
    smis: float


@dataclass(frozen=True)
class CliffPair:
    id_a: str
    id_b: str
    subs: float
    scas: float
    smis: float
    structure_similarity: float
    transfection_difference: float
    m_a: float
    m_b: float


def tanimoto(fa: BitFingerprint, fb: BitFingerprint) -> float:
    """c / (a + b - c); two empty fingerprints count as identical (1.0)."""
    if fa.kind is not fb.kind or fa.width != fb.width:
        raise WidthMismatch(f"cannot compare {fa.kind.value}/{fa.width} with {fb.kind.value}/{fb.width}")
    a = int(fa.bits.sum())
    b = int(fb.bits.sum())
    c = int(np.count_nonzero(fa.bits & fb.bits))
    if a + b - c == 0:
        return 1.0
    return c / (a + b - c)


def tanimoto_matrix(fps: list[BitFingerprint]) -> np.ndarray:
    """All-pairs Tanimoto, same convention as :func:`tanimoto`."""
    if not fps:
        return np.zeros((0, 0))
    widths = {(f.kind, f.width) for f in fps}
    if len(widths) != 1:
        raise WidthMismatch(f"mixed fingerprint kinds/widths: {sorted((k.value, w) for k, w in widths)}")
    mat = np.stack([f.bits for f in fps]).astype(np.int64)
    common = mat @ mat.T
    counts = np.diag(common)
    union = counts[:, None] + counts[None, :] - common
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(union == 0, 1.0, common / np.maximum(union, 1))
    return sim


def levenshtein(s1: str, s2: str) -> int:
    """Character-level edit distance (unit insert/delete/substitute)."""
    if len(s1) < len(s2):
        s1, s2 = s2, s1
    prev = list(range(len(s2) + 1))
    for i, c1 in enumerate(s1, 1):
        cur = [i]
        for j, c2 in enumerate(s2, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (c1 != c2)))
        prev = cur
    return prev[-1]


def smiles_similarity(s1: str, s2: str) -> float:
    if not s1 or not s2:
        raise ValueError("SMILES strings must be non-empty")
    return 1.0 - levenshtein(s1, s2) / max(len(s1), len(s2))


def structure_similarity(t: SimilarityTriple) -> float:
    return (t.subs + t.scas + t.smis) / 3.0


def transfection_difference(m1: float, m2: float) -> float:
    """|log10(2 ** (m2 - m1))| for log2-scale efficiencies."""
    return abs(m2 - m1) * LOG10_2


def is_cliff(similarity: float, difference: float) -> bool:
    return similarity > SIMILARITY_THRESHOLD and difference > DIFFERENCE_THRESHOLD


def similarity_triple(smiles_a: str, smiles_b: str, radius: int = DEFAULT_RADIUS, width: int = DEFAULT_WIDTH) -> SimilarityTriple:
    ga, gb = parse(smiles_a), parse(smiles_b)
    subs = tanimoto(circular_fingerprint(ga, radius, width), circular_fingerprint(gb, radius, width))
    scas = tanimoto(structural_keys_fp(murcko_scaffold(ga).graph), structural_keys_fp(murcko_scaffold(gb).graph))
    return SimilarityTriple(subs, scas, smiles_similarity(smiles_a, smiles_b))


def mine_cliffs(
    dataset: list[dict],
    radius: int = DEFAULT_RADIUS,
    width: int = DEFAULT_WIDTH,
) -> list[CliffPair]:
    """Every unordered pair with structure similarity > 0.9 and difference > 1.

    ``dataset`` items need ``id``, ``smiles`` and ``m`` (log2 efficiency).
    All pairs are considered; the string distance is only evaluated where the
    two fingerprint similarities leave the average able to exceed the
    threshold (``smis <= 1``), so the result equals a full scan.
    """
    if len(dataset) < 2:
        raise ValueError("need at least two molecules")
    items = sorted(dataset, key=lambda r: str(r["id"]))
    ids = [str(r["id"]) for r in items]
    smiles = [r["smiles"] for r in items]
    m = np.array([float(r["m"]) for r in items])
    ecfp, keys = [], []
    for mol_id, smi in zip(ids, smiles):
        try:
            g = parse(smi)
        except Exception as exc:
            raise UnparseableSmiles(f"molecule {mol_id}: {exc}") from exc
        ecfp.append(circular_fingerprint(g, radius, width))
        keys.append(structural_keys_fp(murcko_scaffold(g).graph))
    subs = tanimoto_matrix(ecfp)
    scas = tanimoto_matrix(keys)
    diff = np.abs(m[:, None] - m[None, :]) * LOG10_2

    # smis <= 1 bounds the attainable average from above
    upper = (subs + scas + 1.0) / 3.0
    candidate = np.triu((upper > SIMILARITY_THRESHOLD) & (diff > DIFFERENCE_THRESHOLD), k=1)
    out = []
    for i, j in zip(*np.nonzero(candidate)):
        triple = SimilarityTriple(float(subs[i, j]), float(scas[i, j]), smiles_similarity(smiles[i], smiles[j]))
        sim = structure_similarity(triple)
        d = transfection_difference(m[i], m[j])
        if is_cliff(sim, d):
            pair = CliffPair(ids[i], ids[j], triple.subs, triple.scas, triple.smis, float(sim), float(d),
                             float(m[i]), float(m[j]))  # fmt: skip
            out.append(pair)
    out.sort(key=lambda p: (-p.transfection_difference, p.id_a, p.id_b))
    return out
