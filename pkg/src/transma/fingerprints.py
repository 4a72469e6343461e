"""Circular fingerprints, structural keys and Murcko scaffolds."""

from __future__ import annotations

import enum
import sys
from dataclasses import dataclass, field

import numpy as np

from . import structural_keys
from .smiles import (
    AROMATIC_ORGANIC,
    VALENCES,
    BondOrder,
    MolecularGraph,
    atomic_number,
    implicit_hydrogens,
)

# Seed of the 64-bit mixing hash; changing it changes every circular fingerprint.
HASH_SEED = 0x5EED_7A45_11CE_0001
DEFAULT_RADIUS = 2
DEFAULT_WIDTH = 2048
_MASK64 = (1 << 64) - 1


class FingerprintKind(enum.Enum):
    CIRCULAR = "circular"
    STRUCTURAL_KEY = "structural_key"


@dataclass(frozen=True, eq=False)
class BitFingerprint:
    bits: np.ndarray  # uint8 0/1, shape (width,)
    kind: FingerprintKind

    @property
    def width(self) -> int:
        return int(self.bits.shape[0])

    @property
    def popcount(self) -> int:
        return int(self.bits.sum())

    def on_bits(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.bits)]

    def to_hex(self) -> str:
        return np.packbits(self.bits).tobytes().hex()

    @classmethod
    def from_hex(cls, text: str, width: int, kind: FingerprintKind) -> BitFingerprint:
        raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
        return cls(np.unpackbits(raw)[:width].astype(np.uint8), kind)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitFingerprint):
            return NotImplemented
        return self.kind is other.kind and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash((self.kind, self.bits.tobytes()))


def _mix64(x: int) -> int:
    # splitmix64 finalizer
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def hash_ints(values, seed: int = HASH_SEED) -> int:
    h = seed
    for v in values:
        h = _mix64(h ^ (v & _MASK64))
    return h


def _initial_invariant(g: MolecularGraph, i: int) -> int:
    a = g.atoms[i]
    return hash_ints((atomic_number(a.element), a.formal_charge + 16, g.degree(i), a.hydrogens, int(a.aromatic)))


def circular_identifiers(g: MolecularGraph, radius: int = DEFAULT_RADIUS) -> list[set[int]]:
    """Environment identifiers per round (round 0 .. radius)."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    ids = [_initial_invariant(g, i) for i in range(g.n_atoms)]
    rounds = [set(ids)]
    for r in range(1, radius + 1):
        new = []
        for i in range(g.n_atoms):
            env = sorted((order.value, ids[j]) for j, order in g.adjacency[i])
            new.append(hash_ints([r, ids[i], *(x for pair in env for x in pair)]))
        ids = new
        rounds.append(set(ids))
    return rounds


def circular_fingerprint(g: MolecularGraph, radius: int = DEFAULT_RADIUS, width: int = DEFAULT_WIDTH) -> BitFingerprint:
    """ECFP-style bit vector: every environment hash sets bit ``hash mod width``."""
    if width <= 0 or width & (width - 1):
        raise ValueError(f"width must be a power of two, got {width}")
    bits = np.zeros(width, dtype=np.uint8)
    for ids in circular_identifiers(g, radius):
        for h in ids:
            bits[h & (width - 1)] = 1
    return BitFingerprint(bits, FingerprintKind.CIRCULAR)


def structural_keys_fp(g: MolecularGraph) -> BitFingerprint:
    bits = np.array(structural_keys.evaluate(g), dtype=np.uint8)
    return BitFingerprint(bits, FingerprintKind.STRUCTURAL_KEY)


@dataclass(frozen=True)
class Scaffold:
    smiles_like_key: str
    graph: MolecularGraph = field(compare=False, repr=False)

    @property
    def is_empty(self) -> bool:
        return self.smiles_like_key == ""


EMPTY_GRAPH = MolecularGraph((), (), "")


def murcko_scaffold(g: MolecularGraph) -> Scaffold:
    """Ring systems plus linkers, found by pruning non-ring terminal atoms to a fixpoint."""
    if not g.ring_atoms:
        return Scaffold("", EMPTY_GRAPH)
    alive = set(range(g.n_atoms))
    degree = [g.degree(i) for i in range(g.n_atoms)]
    frontier = [i for i in alive if degree[i] <= 1 and not g.in_ring(i)]
    while frontier:
        i = frontier.pop()
        if i not in alive:
            continue
        alive.discard(i)
        for j, _ in g.adjacency[i]:
            if j in alive:
                degree[j] -= 1
                if degree[j] <= 1 and not g.in_ring(j):
                    frontier.append(j)
    sub, _ = g.subgraph(alive)
    return Scaffold(graph_key(sub), sub)


def canonical_ranks(g: MolecularGraph) -> list[int]:
    """Deterministic atom ranks from iterated neighbourhood refinement with tie breaking."""
    n = g.n_atoms
    if n == 0:
        return []
    inv = [
        (atomic_number(a.element), a.formal_charge, int(a.aromatic), g.degree(i), a.hydrogens, int(g.in_ring(i)))
        for i, a in enumerate(g.atoms)
    ]
    ranks = _dense_rank(inv)
    ranks = _refine(g, ranks)
    while len(set(ranks)) < n:
        counts: dict[int, int] = {}
        for r in ranks:
            counts[r] = counts.get(r, 0) + 1
        tied = min(r for r, c in counts.items() if c > 1)
        chosen = min(i for i in range(n) if ranks[i] == tied)
        ranks = [2 * r + (0 if i == chosen else 1) if r == tied else 2 * r for i, r in enumerate(ranks)]
        ranks = _refine(g, _dense_rank(ranks))
    return ranks


def _dense_rank(keys) -> list[int]:
    order = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def _refine(g: MolecularGraph, ranks: list[int]) -> list[int]:
    while True:
        keys = [
            (ranks[i], tuple(sorted((ranks[j], order.value) for j, order in g.adjacency[i])))
            for i in range(g.n_atoms)
        ]
        new = _dense_rank(keys)
        if len(set(new)) == len(set(ranks)):
            return new
        ranks = new


def _bond_symbol(g: MolecularGraph, i: int, j: int, order: BondOrder) -> str:
    both_aromatic = g.atoms[i].aromatic and g.atoms[j].aromatic
    if order is BondOrder.DOUBLE:
        return "="
    if order is BondOrder.TRIPLE:
        return "#"
    if order is BondOrder.AROMATIC:
        return "" if both_aromatic else ":"
    return "-" if both_aromatic else ""


def _atom_text(g: MolecularGraph, i: int) -> str:
    a = g.atoms[i]
    valence = sum(order.valence for _, order in g.adjacency[i])
    organic = a.element in VALENCES and (not a.aromatic or a.element.lower() in AROMATIC_ORGANIC)
    if organic and a.formal_charge == 0 and a.hydrogens == implicit_hydrogens(a.element, a.aromatic, valence):
        return a.symbol
    text = "[" + a.symbol
    if a.hydrogens:
        text += "H" + (str(a.hydrogens) if a.hydrogens > 1 else "")
    if a.formal_charge:
        sign = "+" if a.formal_charge > 0 else "-"
        text += sign + (str(abs(a.formal_charge)) if abs(a.formal_charge) > 1 else "")
    return text + "]"


def graph_key(g: MolecularGraph) -> str:
    """SMILES-like serialization that is identical for graphs equal up to atom order."""
    if g.n_atoms == 0:
        return ""
    ranks = canonical_ranks(g)
    nbrs = [sorted(g.adjacency[i], key=lambda x: ranks[x[0]]) for i in range(g.n_atoms)]
    visited: set[int] = set()
    children: dict[int, list[tuple[int, BondOrder]]] = {}
    ring_edges: list[tuple[int, int, BondOrder]] = []
    seen_ring: set[frozenset[int]] = set()

    def visit(u: int, parent: int) -> None:
        visited.add(u)
        children[u] = []
        for v, order in nbrs[u]:
            if v == parent:
                continue
            if v in visited:
                key = frozenset((u, v))
                if key not in seen_ring:
                    seen_ring.add(key)
                    ring_edges.append((v, u, order))
            else:
                children[u].append((v, order))
                visit(v, u)

    if g.n_atoms * 3 + 100 > sys.getrecursionlimit():
        sys.setrecursionlimit(g.n_atoms * 3 + 100)
    roots = []
    for start in sorted(range(g.n_atoms), key=lambda i: ranks[i]):
        if start not in visited:
            roots.append(start)
            visit(start, -1)

    openings: dict[int, list[tuple[int, BondOrder]]] = {}
    closings: dict[int, list[int]] = {}
    for first, second, order in ring_edges:
        openings.setdefault(first, []).append((second, order))
        closings.setdefault(second, []).append(first)

    labels: dict[frozenset[int], int] = {}
    free: list[int] = []
    next_label = [1]

    def label_text(n: int) -> str:
        return str(n) if n < 10 else f"%{n:02d}"

    def write(u: int) -> str:
        out = [_atom_text(g, u)]
        for other in sorted(closings.get(u, []), key=lambda x: ranks[x]):
            key = frozenset((u, other))
            n = labels.pop(key)
            free.append(n)
            free.sort()
            out.append(label_text(n))
        for other, order in sorted(openings.get(u, []), key=lambda x: ranks[x[0]]):
            if free:
                n = free.pop(0)
            else:
                n = next_label[0]
                next_label[0] += 1
            labels[frozenset((u, other))] = n
            out.append(_bond_symbol(g, u, other, order) + label_text(n))
        kids = children[u]
        for idx, (v, order) in enumerate(kids):
            piece = _bond_symbol(g, u, v, order) + write(v)
            out.append(piece if idx == len(kids) - 1 else f"({piece})")
        return "".join(out)

    return ".".join(write(r) for r in roots)
