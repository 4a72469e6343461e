"""A fixed 64-bit structural-key fingerprint.

Each key is a boolean predicate on a :class:`~transma.smiles.MolecularGraph`.
The table below is the single source of truth; ``data/structural_keys.tsv``
ships the same list (index, name, description) for readers and is checked
against this module by the test suite.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

from .smiles import BondOrder, MolecularGraph

HALOGENS = frozenset({"F", "Cl", "Br", "I"})


@dataclass(frozen=True)
class StructuralKey:
    name: str
    description: str
    predicate: Callable[[MolecularGraph], bool]


def _elements(g: MolecularGraph) -> list[str]:
    return [a.element for a in g.atoms]


def _count(g: MolecularGraph, element: str) -> int:
    return sum(1 for a in g.atoms if a.element == element)


def _has_element(element: str) -> Callable[[MolecularGraph], bool]:
    return lambda g: _count(g, element) > 0


def _ring_sizes(g: MolecularGraph) -> set[int]:
    return set(g.ring_bond_sizes.values())


def _has_ring_size(size: int) -> Callable[[MolecularGraph], bool]:
    return lambda g: size in _ring_sizes(g)


def _ring_element(element: str) -> Callable[[MolecularGraph], bool]:
    return lambda g: any(g.in_ring(i) and a.element == element for i, a in enumerate(g.atoms))


def _has_bond(order: BondOrder) -> Callable[[MolecularGraph], bool]:
    return lambda g: any(b.order is order for b in g.bonds)


def _bond_between(e1: str, e2: str, order: BondOrder | None = None) -> Callable[[MolecularGraph], bool]:
    def pred(g: MolecularGraph) -> bool:
        for b in g.bonds:
            pair = {g.atoms[b.a].element, g.atoms[b.b].element}
            if pair == {e1, e2} and (order is None or b.order is order):
                return True
        return False

    return pred


def _degree_present(d: int) -> Callable[[MolecularGraph], bool]:
    return lambda g: any(g.degree(i) == d for i in range(g.n_atoms))


def _longest_carbon_chain(g: MolecularGraph) -> int:
    """Longest path (in atoms) through acyclic, non-aromatic, single-bonded carbons."""
    ok = [a.element == "C" and not a.aromatic and not g.in_ring(i) for i, a in enumerate(g.atoms)]
    adj = [
        [j for j, order in g.adjacency[i] if ok[j] and order is BondOrder.SINGLE] if ok[i] else []
        for i in range(g.n_atoms)
    ]

    def farthest(src: int) -> tuple[int, int]:
        dist = {src: 1}
        stack = [src]
        best = (1, src)
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    best = max(best, (dist[v], v))
                    stack.append(v)
        return best

    longest = 0
    seen: set[int] = set()
    for i in range(g.n_atoms):
        if not ok[i] or i in seen:
            continue
        # the chain subgraph is a forest, so two sweeps give the diameter
        _, far = farthest(i)
        length, _ = farthest(far)
        longest = max(longest, length)
        stack = [i]
        seen.add(i)
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
    return longest


def _chain_at_least(n: int) -> Callable[[MolecularGraph], bool]:
    return lambda g: _longest_carbon_chain(g) >= n


def _carbonyl_neighbor(g: MolecularGraph, i: int) -> bool:
    """True if carbon ``i`` carries a double-bonded oxygen."""
    return g.atoms[i].element == "C" and any(
        g.atoms[j].element == "O" and order is BondOrder.DOUBLE for j, order in g.adjacency[i]
    )


def _ester(g: MolecularGraph) -> bool:
    for i in range(g.n_atoms):
        if not _carbonyl_neighbor(g, i):
            continue
        for j, order in g.adjacency[i]:
            if g.atoms[j].element == "O" and order is BondOrder.SINGLE:
                if any(k != i and g.atoms[k].element == "C" for k, _ in g.adjacency[j]):
                    return True
    return False


def _amide(g: MolecularGraph) -> bool:
    return any(
        _carbonyl_neighbor(g, i)
        and any(g.atoms[j].element == "N" and o is BondOrder.SINGLE for j, o in g.adjacency[i])
        for i in range(g.n_atoms)
    )


def _carboxylic_acid(g: MolecularGraph) -> bool:
    return any(
        _carbonyl_neighbor(g, i)
        and any(
            g.atoms[j].element == "O" and o is BondOrder.SINGLE and g.atoms[j].hydrogens == 1
            for j, o in g.adjacency[i]
        )
        for i in range(g.n_atoms)
    )


def _ether(g: MolecularGraph) -> bool:
    for i, a in enumerate(g.atoms):
        if a.element != "O" or a.aromatic or g.degree(i) != 2:
            continue
        nbrs = g.adjacency[i]
        if all(g.atoms[j].element == "C" and o is BondOrder.SINGLE for j, o in nbrs):
            if not any(_carbonyl_neighbor(g, j) for j, _ in nbrs):
                return True
    return False


def _tertiary_amine(g: MolecularGraph) -> bool:
    return any(
        a.element == "N"
        and not a.aromatic
        and a.formal_charge == 0
        and a.hydrogens == 0
        and g.degree(i) == 3
        and all(o is BondOrder.SINGLE and not _carbonyl_neighbor(g, j) for j, o in g.adjacency[i])
        for i, a in enumerate(g.atoms)
    )


def _hetero(element: str) -> bool:
    return element not in ("C", "H")


KEYS: tuple[StructuralKey, ...] = (
    StructuralKey("has_C", "carbon present", _has_element("C")),
    StructuralKey("has_N", "nitrogen present", _has_element("N")),
    StructuralKey("has_O", "oxygen present", _has_element("O")),
    StructuralKey("has_S", "sulfur present", _has_element("S")),
    StructuralKey("has_P", "phosphorus present", _has_element("P")),
    StructuralKey("has_F", "fluorine present", _has_element("F")),
    StructuralKey("has_Cl", "chlorine present", _has_element("Cl")),
    StructuralKey("has_Br", "bromine present", _has_element("Br")),
    StructuralKey("has_I", "iodine present", _has_element("I")),
    StructuralKey("has_B", "boron present", _has_element("B")),
    StructuralKey("has_halogen", "any halogen present", lambda g: any(e in HALOGENS for e in _elements(g))),
    StructuralKey("ring3", "smallest ring of size 3", _has_ring_size(3)),
    StructuralKey("ring4", "smallest ring of size 4", _has_ring_size(4)),
    StructuralKey("ring5", "smallest ring of size 5", _has_ring_size(5)),
    StructuralKey("ring6", "smallest ring of size 6", _has_ring_size(6)),
    StructuralKey("ring7", "smallest ring of size 7", _has_ring_size(7)),
    StructuralKey("ring8", "smallest ring of size 8", _has_ring_size(8)),
    StructuralKey("any_ring", "at least one ring", lambda g: g.cyclomatic_number >= 1),
    StructuralKey("rings_ge2", "at least two independent rings", lambda g: g.cyclomatic_number >= 2),
    StructuralKey("rings_ge3", "at least three independent rings", lambda g: g.cyclomatic_number >= 3),
    StructuralKey("ring_N", "nitrogen in a ring", _ring_element("N")),
    StructuralKey("ring_O", "oxygen in a ring", _ring_element("O")),
    StructuralKey("ring_S", "sulfur in a ring", _ring_element("S")),
    StructuralKey(
        "ring_hetero",
        "any heteroatom in a ring",
        lambda g: any(g.in_ring(i) and _hetero(a.element) for i, a in enumerate(g.atoms)),
    ),
    StructuralKey("aromatic_atom", "aromatic atom present", lambda g: any(a.aromatic for a in g.atoms)),
    StructuralKey("aromatic_bond", "aromatic bond present", _has_bond(BondOrder.AROMATIC)),
    StructuralKey("double_bond", "double bond present", _has_bond(BondOrder.DOUBLE)),
    StructuralKey("triple_bond", "triple bond present", _has_bond(BondOrder.TRIPLE)),
    StructuralKey("C=O", "carbon-oxygen double bond", _bond_between("C", "O", BondOrder.DOUBLE)),
    StructuralKey("C=N", "carbon-nitrogen double bond", _bond_between("C", "N", BondOrder.DOUBLE)),
    StructuralKey("C#N", "carbon-nitrogen triple bond", _bond_between("C", "N", BondOrder.TRIPLE)),
    StructuralKey("N~O", "any nitrogen-oxygen bond", _bond_between("N", "O")),
    StructuralKey("S~S", "any sulfur-sulfur bond", _bond_between("S", "S")),
    StructuralKey("degree0", "atom with no heavy neighbours", _degree_present(0)),
    StructuralKey("degree1", "terminal atom", _degree_present(1)),
    StructuralKey("degree3", "atom with three heavy neighbours", _degree_present(3)),
    StructuralKey("degree4", "atom with four heavy neighbours", _degree_present(4)),
    StructuralKey(
        "branch_ge2",
        "at least two atoms of degree >= 3",
        lambda g: sum(1 for i in range(g.n_atoms) if g.degree(i) >= 3) >= 2,
    ),
    StructuralKey("pos_charge", "positively charged atom", lambda g: any(a.formal_charge > 0 for a in g.atoms)),
    StructuralKey("neg_charge", "negatively charged atom", lambda g: any(a.formal_charge < 0 for a in g.atoms)),
    StructuralKey("NH", "nitrogen bearing hydrogen", lambda g: any(a.element == "N" and a.hydrogens > 0 for a in g.atoms)),
    StructuralKey("OH", "oxygen bearing hydrogen", lambda g: any(a.element == "O" and a.hydrogens > 0 for a in g.atoms)),
    StructuralKey("NH2", "nitrogen bearing two hydrogens", lambda g: any(a.element == "N" and a.hydrogens == 2 for a in g.atoms)),
    StructuralKey("tertiary_amine", "neutral sp3 nitrogen with three heavy neighbours, not amide", _tertiary_amine),
    StructuralKey("ester", "C(=O)O-C", _ester),
    StructuralKey("amide", "C(=O)N", _amide),
    StructuralKey("carboxylic_acid", "C(=O)[OH]", _carboxylic_acid),
    StructuralKey("ether", "non-carbonyl C-O-C", _ether),
    StructuralKey("N_ge2", "at least two nitrogens", lambda g: _count(g, "N") >= 2),
    StructuralKey("O_ge2", "at least two oxygens", lambda g: _count(g, "O") >= 2),
    StructuralKey("O_ge4", "at least four oxygens", lambda g: _count(g, "O") >= 4),
    StructuralKey("heavy_ge10", "at least 10 heavy atoms", lambda g: g.n_atoms >= 10),
    StructuralKey("heavy_ge20", "at least 20 heavy atoms", lambda g: g.n_atoms >= 20),
    StructuralKey("heavy_ge40", "at least 40 heavy atoms", lambda g: g.n_atoms >= 40),
    StructuralKey("chain_ge4", "acyclic carbon chain of >= 4 atoms", _chain_at_least(4)),
    StructuralKey("chain_ge8", "acyclic carbon chain of >= 8 atoms", _chain_at_least(8)),
    StructuralKey("chain_ge12", "acyclic carbon chain of >= 12 atoms", _chain_at_least(12)),
    StructuralKey("chain_ge16", "acyclic carbon chain of >= 16 atoms", _chain_at_least(16)),
    StructuralKey("CH3", "methyl carbon", lambda g: any(a.element == "C" and a.hydrogens == 3 for a in g.atoms)),
    StructuralKey(
        "CH3_ge3", "at least three methyl carbons", lambda g: sum(a.element == "C" and a.hydrogens == 3 for a in g.atoms) >= 3
    ),
    StructuralKey("fused_ring", "atom with three or more ring bonds", lambda g: any(g.ring_bond_count(i) >= 3 for i in range(g.n_atoms))),
    StructuralKey(
        "ring_substituent",
        "ring atom with a non-ring neighbour",
        lambda g: any(g.in_ring(i) and g.degree(i) > g.ring_bond_count(i) for i in range(g.n_atoms)),
    ),
    StructuralKey(
        "hetero_hetero",
        "bond between two heteroatoms",
        lambda g: any(_hetero(g.atoms[b.a].element) and _hetero(g.atoms[b.b].element) for b in g.bonds),
    ),
    StructuralKey(
        "aryl_halide",
        "halogen bonded to an aromatic atom",
        lambda g: any(
            (g.atoms[b.a].element in HALOGENS and g.atoms[b.b].aromatic)
            or (g.atoms[b.b].element in HALOGENS and g.atoms[b.a].aromatic)
            for b in g.bonds
        ),
    ),
)

assert len(KEYS) == 64, len(KEYS)


def evaluate(g: MolecularGraph) -> list[bool]:
    return [bool(key.predicate(g)) for key in KEYS]
