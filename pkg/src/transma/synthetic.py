"""Synthetic ionizable-lipid-like datasets for fixtures, smoke runs and explanation probes."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import substream

# (fragment, effect on log2 efficiency)
HEADS = (
    ("CN(C)", 2.0),
    ("CCN(CC)", 2.5),
    ("OCCN(CCO)", 1.0),
    ("C1CCCN1", 3.0),
    ("C1CCCCN1", 3.5),
    ("C1COCCN1", 1.5),
    ("c1ccncc1", 0.5),
    ("C1CC1N(C)", 2.2),
)
SPACERS = (("CC", 0.0), ("CCC", 0.4), ("CCCC", 0.2))
LINKERS = (("OC(=O)", 1.0), ("NC(=O)", 0.3), ("C(=O)O", 0.8), ("SS", 0.6))
TAIL_LENGTHS = tuple(range(6, 15))


def _tail(length: int, unsaturated: bool) -> str:
    if unsaturated and length >= 8:
        half = length // 2
        return "C" * half + "=" + "C" * (length - half)
    return "C" * length


def lipid_library(n: int, seed: int = 0, noise: float = 0.3, cliff_rate: float = 0.15) -> list[dict]:
    """``n`` distinct molecules ``head-spacer-linker-tail`` with an additive efficiency model.

    With probability ``cliff_rate`` a molecule is followed by a partner one
    tail carbon longer whose efficiency is shifted by 4 log2 units, which
    makes the pair a transfection cliff.
    """
    rng = substream(seed, "synthetic-lipids")
    seen: set[str] = set()
    records: list[dict] = []

    def add(smiles: str, eff: float) -> None:
        seen.add(smiles)
        records.append({"id": f"L{len(records):04d}", "smiles": smiles, "efficiency": round(eff, 4), "cell_line": "synthetic"})

    while len(records) < n:
        head, he = HEADS[int(rng.integers(len(HEADS)))]
        spacer, se = SPACERS[int(rng.integers(len(SPACERS)))]
        linker, le = LINKERS[int(rng.integers(len(LINKERS)))]
        length = int(rng.choice(TAIL_LENGTHS))
        unsat = bool(rng.integers(2))
        eff = he + se + le + 0.25 * (length - 6) - 0.5 * unsat + float(rng.normal(0.0, noise))
        smiles = head + spacer + linker + _tail(length, unsat)
        if smiles in seen:
            continue
        add(smiles, eff)
        partner = head + spacer + linker + _tail(length + 1, unsat)
        if len(records) < n and partner not in seen and rng.random() < cliff_rate:
            add(partner, eff + (4.0 if rng.random() < 0.5 else -4.0))
    return records


@dataclass(frozen=True)
class KeyAtomRecord:
    id: str
    smiles: str
    efficiency: float
    key_atom: int


# heteroatom element -> label; N/O pairs are transfection cliffs, S sits between
KEY_ELEMENTS = (("N", 6.0), ("O", 1.0), ("S", 3.5))
MAX_KEY_GROUPS = 66


def key_atom_dataset(n_groups: int, seed: int = 0) -> list[KeyAtomRecord]:
    """All-carbon chains carrying exactly one heteroatom whose element fixes the label.

    Each group shares one chain shape and differs only in the heteroatom, so
    the N and O members form cliff pairs. Chain lengths on both sides vary
    from 2 to 12 atoms, so the heteroatom is the only informative atom.
    """
    if n_groups > MAX_KEY_GROUPS:
        raise ValueError(f"at most {MAX_KEY_GROUPS} distinct chain shapes, asked for {n_groups}")
    rng = substream(seed, "key-atom-groups")
    out: list[KeyAtomRecord] = []
    seen: set[tuple[int, int]] = set()
    while len(seen) < n_groups:
        left, right = (int(v) for v in rng.integers(2, 13, size=2))
        if left > right or (left, right) in seen:
            continue
        seen.add((left, right))
        for element, eff in KEY_ELEMENTS:
            out.append(KeyAtomRecord(f"K{len(out):04d}", "C" * left + element + "C" * right, eff, left))
    return out


def write_dataset_csv(path: str | Path, records: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["id", "smiles", "efficiency", "cell_line"], lineterminator="\n")
        writer.writeheader()
        for r in records:
            eff = r.get("efficiency")
            writer.writerow({**r, "efficiency": "" if eff is None else repr(float(eff))})


def efficiencies(records: list[dict]) -> np.ndarray:
    return np.array([r["efficiency"] for r in records], dtype=np.float64)
