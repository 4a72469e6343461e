"""SMILES tokenization and parsing into molecular graphs.

Supported grammar: organic-subset atoms, bracket atoms with hydrogen counts
and charges, explicit bonds, branches, ring closures (digits and ``%nn``),
dot-separated components and lowercase aromatic atoms. Stereo bonds ``/`` and
``\\`` are tokenized as bonds and read as single bonds; chirality inside
brackets is accepted and ignored. Isotopes and the ``*`` wildcard are rejected.

Atoms are numbered in the order their tokens appear, so the i-th atom token of
:func:`tokenize` is atom i of :func:`parse`.
"""

from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass
from functools import cached_property

from .errors import (
    IllegalCharacter,
    UnbalancedBracket,
    UnclosedBranch,
    UnclosedRing,
    ValenceUnsupported,
)

ORGANIC_SUBSET = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")
AROMATIC_BRACKET = ("se", "as", "te", "b", "c", "n", "o", "p", "s")

# fmt: off
PERIODIC_TABLE = tuple("""
H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu
Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba
La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi
Po At Rn Fr Ra Ac Th Pa U Np Pu
""".split())
# fmt: on
ELEMENTS = frozenset(PERIODIC_TABLE)


def atomic_number(element: str) -> int:
    return PERIODIC_TABLE.index(element) + 1

# Default valences used to fill implicit hydrogens on organic-subset atoms.
VALENCES: dict[str, tuple[int, ...]] = {
    "B": (3,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

_BRACKET_RE = re.compile(
    r"""^\[
    (?P<isotope>\d+)?
    (?P<symbol>[A-Z][a-z]?|se|as|te|[bcnops]|\*)
    (?P<chiral>@{1,2}(?:TH[12]|AL[12]|SP[123]|TB\d{1,2}|OH\d{1,2})?)?
    (?P<hcount>H\d*)?
    (?P<charge>\+\d+|-\d+|\+{1,3}|-{1,3})?
    (?::(?P<klass>\d+))?
    \]$""",
    re.VERBOSE,
)


class TokenKind(enum.Enum):
    ATOM = "Atom"
    BRACKET_ATOM = "BracketAtom"
    BOND = "Bond"
    RING_CLOSURE = "RingClosure"
    BRANCH_OPEN = "BranchOpen"
    BRANCH_CLOSE = "BranchClose"
    DOT = "Dot"


class BondOrder(enum.Enum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def valence(self) -> int:
        # aromatic bonds count 1 here; the aromatic atom itself adds the extra electron
        return 1 if self is BondOrder.AROMATIC else self.value


_BOND_SYMBOLS = {
    "-": BondOrder.SINGLE,
    "/": BondOrder.SINGLE,
    "\\": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
}


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    atom_index: int | None = None

    @property
    def is_atom(self) -> bool:
        return self.kind in (TokenKind.ATOM, TokenKind.BRACKET_ATOM)


@dataclass(frozen=True)
class Atom:
    element: str
    formal_charge: int = 0
    aromatic: bool = False
    hydrogens: int = 0

    @property
    def symbol(self) -> str:
        """Element symbol as it would be written in SMILES (lowercase if aromatic)."""
        return self.element.lower() if self.aromatic else self.element


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: BondOrder


@dataclass(frozen=True)
class MolecularGraph:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    source: str = ""

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, BondOrder], ...], ...]:
        """Per-atom tuple of ``(neighbor, bond order)`` in bond-list order."""
        adj: list[list[tuple[int, BondOrder]]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            adj[bond.a].append((bond.b, bond.order))
            adj[bond.b].append((bond.a, bond.order))
        return tuple(tuple(x) for x in adj)

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def bond_between(self, i: int, j: int) -> BondOrder | None:
        for nbr, order in self.adjacency[i]:
            if nbr == j:
                return order
        return None

    @cached_property
    def n_components(self) -> int:
        seen = [False] * self.n_atoms
        count = 0
        for start in range(self.n_atoms):
            if seen[start]:
                continue
            count += 1
            seen[start] = True
            stack = [start]
            while stack:
                u = stack.pop()
                for v, _ in self.adjacency[u]:
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
        return count

    @property
    def cyclomatic_number(self) -> int:
        """Number of independent rings."""
        return len(self.bonds) - self.n_atoms + self.n_components

    @cached_property
    def ring_bond_sizes(self) -> dict[frozenset[int], int]:
        """Smallest ring size for every bond that lies on a ring."""
        bridges = _bridges(self.n_atoms, self.adjacency)
        ring_edges = {
            frozenset((b.a, b.b)) for b in self.bonds if frozenset((b.a, b.b)) not in bridges
        }
        out: dict[frozenset[int], int] = {}
        for edge in ring_edges:
            a, b = tuple(edge)
            out[edge] = _shortest_cycle_through(a, b, self.adjacency, ring_edges)
        return out

    @cached_property
    def ring_atoms(self) -> frozenset[int]:
        return frozenset(i for edge in self.ring_bond_sizes for i in edge)

    def in_ring(self, i: int) -> bool:
        return i in self.ring_atoms

    def ring_bond_count(self, i: int) -> int:
        return sum(1 for nbr, _ in self.adjacency[i] if frozenset((i, nbr)) in self.ring_bond_sizes)

    def subgraph(self, keep: list[int] | set[int] | frozenset[int]) -> tuple[MolecularGraph, list[int]]:
        """Induced subgraph on ``keep``; removed bonds become hydrogens.

        Returns the subgraph and the original index of each retained atom.
        """
        order = sorted(keep)
        remap = {old: new for new, old in enumerate(order)}
        extra_h = [0] * self.n_atoms
        bonds = []
        for bond in self.bonds:
            ina, inb = bond.a in remap, bond.b in remap
            if ina and inb:
                bonds.append(Bond(remap[bond.a], remap[bond.b], bond.order))
            elif ina:
                extra_h[bond.a] += bond.order.valence
            elif inb:
                extra_h[bond.b] += bond.order.valence
        atoms = tuple(
            Atom(a.element, a.formal_charge, a.aromatic, a.hydrogens + extra_h[i])
            for i, a in ((i, self.atoms[i]) for i in order)
        )
        return MolecularGraph(atoms, tuple(bonds), source=""), order


def _bridges(n: int, adj) -> set[frozenset[int]]:
    # iterative Tarjan lowlink
    index = [-1] * n
    low = [0] * n
    counter = 0
    bridges: set[frozenset[int]] = set()
    for root in range(n):
        if index[root] != -1:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            u, parent, it = stack[-1]
            advanced = False
            for v, _ in it:
                if v == parent:
                    parent = -2  # skip the tree edge only once
                    stack[-1] = (u, parent, it)
                    continue
                if index[v] == -1:
                    index[v] = low[v] = counter
                    counter += 1
                    stack.append((v, u, iter(adj[v])))
                    advanced = True
                    break
                low[u] = min(low[u], index[v])
            if advanced:
                continue
            stack.pop()
            if stack:
                p = stack[-1][0]
                low[p] = min(low[p], low[u])
                if low[u] > index[p]:
                    bridges.add(frozenset((p, u)))
    return bridges


def _shortest_cycle_through(a: int, b: int, adj, ring_edges) -> int:
    dist = {a: 0}
    queue = deque([a])
    while queue:
        u = queue.popleft()
        for v, _ in adj[u]:
            if v in dist or frozenset((u, v)) not in ring_edges:
                continue
            if u == a and v == b:
                continue
            dist[v] = dist[u] + 1
            if v == b:
                return dist[v] + 1
            queue.append(v)
    raise AssertionError("ring bond without a cycle")  # pragma: no cover


def tokenize(smiles: str) -> list[Token]:
    """Split a SMILES string into tokens; concatenated texts reproduce the input."""
    if not smiles:
        raise IllegalCharacter("empty SMILES string")
    tokens: list[Token] = []
    atom_index = 0
    i, n = 0, len(smiles)
    while i < n:
        ch = smiles[i]
        if ch == "[":
            j = smiles.find("]", i + 1)
            nested = smiles.find("[", i + 1)
            if j == -1 or (nested != -1 and nested < j):
                raise UnbalancedBracket(f"unterminated '[' at position {i} in {smiles!r}")
            tokens.append(Token(TokenKind.BRACKET_ATOM, smiles[i : j + 1], atom_index))
            atom_index += 1
            i = j + 1
        elif ch == "]":
            raise UnbalancedBracket(f"unmatched ']' at position {i} in {smiles!r}")
        elif smiles.startswith(("Cl", "Br"), i):
            tokens.append(Token(TokenKind.ATOM, smiles[i : i + 2], atom_index))
            atom_index += 1
            i += 2
        elif ch in "BCNOPSFI" or ch in AROMATIC_ORGANIC:
            tokens.append(Token(TokenKind.ATOM, ch, atom_index))
            atom_index += 1
            i += 1
        elif ch in "-=#$:/\\":
            tokens.append(Token(TokenKind.BOND, ch))
            i += 1
        elif ch.isdigit():
            tokens.append(Token(TokenKind.RING_CLOSURE, ch))
            i += 1
        elif ch == "%":
            digits = smiles[i + 1 : i + 3]
            if len(digits) == 2 and digits.isdigit():
                tokens.append(Token(TokenKind.RING_CLOSURE, smiles[i : i + 3]))
                i += 3
            else:
                raise IllegalCharacter(f"'%' must be followed by two digits at position {i}")
        elif ch == "(":
            tokens.append(Token(TokenKind.BRANCH_OPEN, ch))
            i += 1
        elif ch == ")":
            tokens.append(Token(TokenKind.BRANCH_CLOSE, ch))
            i += 1
        elif ch == ".":
            tokens.append(Token(TokenKind.DOT, ch))
            i += 1
        else:
            raise IllegalCharacter(f"illegal character {ch!r} at position {i} in {smiles!r}")
    return tokens


def atom_token_mask(tokens: list[Token]) -> list[bool]:
    """True at atom and bracket-atom tokens."""
    return [t.is_atom for t in tokens]


def _parse_bracket(text: str) -> Atom:
    m = _BRACKET_RE.match(text)
    if m is None:
        raise ValenceUnsupported(f"unsupported bracket atom {text}")
    if m.group("isotope"):
        raise ValenceUnsupported(f"isotopes are not supported: {text}")
    symbol = m.group("symbol")
    if symbol == "*":
        raise ValenceUnsupported(f"wildcard atoms are not supported: {text}")
    aromatic = symbol[0].islower()
    element = symbol.capitalize()
    if element not in ELEMENTS:
        raise ValenceUnsupported(f"unknown element in {text}")
    h = m.group("hcount")
    hydrogens = 0 if h is None else (int(h[1:]) if len(h) > 1 else 1)
    charge_text = m.group("charge")
    charge = 0
    if charge_text:
        sign = 1 if charge_text[0] == "+" else -1
        digits = charge_text.lstrip("+-")
        charge = sign * (int(digits) if digits else len(charge_text))
    return Atom(element, charge, aromatic, hydrogens)


def implicit_hydrogens(element: str, aromatic: bool, bond_valence: int) -> int:
    """Hydrogens needed to reach the smallest default valence that fits."""
    valences = VALENCES.get(element)
    if valences is None:
        return 0
    used = bond_valence + (1 if aromatic else 0)
    if aromatic:
        valences = valences[:1]
    for v in valences:
        if v >= used:
            return v - used
    return 0


def parse(smiles: str) -> MolecularGraph:
    """Parse a SMILES string into a :class:`MolecularGraph`."""
    tokens = tokenize(smiles)
    raw_atoms: list[tuple[Atom, bool]] = []  # (atom, is_bracket)
    bonds: dict[frozenset[int], Bond] = {}
    prev: int | None = None
    pending: BondOrder | None = None
    branch_stack: list[int] = []
    open_rings: dict[str, tuple[int, BondOrder | None]] = {}

    def add_bond(a: int, b: int, order: BondOrder | None) -> None:
        if a == b:
            raise ValenceUnsupported(f"atom {a} bonded to itself in {smiles!r}")
        key = frozenset((a, b))
        if key in bonds:
            raise ValenceUnsupported(f"duplicate bond {a}-{b} in {smiles!r}")
        if order is None:
            both_aromatic = raw_atoms[a][0].aromatic and raw_atoms[b][0].aromatic
            order = BondOrder.AROMATIC if both_aromatic else BondOrder.SINGLE
        bonds[key] = Bond(min(a, b), max(a, b), order)

    for tok in tokens:
        kind = tok.kind
        if tok.is_atom:
            if kind is TokenKind.ATOM:
                aromatic = tok.text.islower()
                atom = Atom(tok.text.capitalize(), 0, aromatic, 0)
            else:
                atom = _parse_bracket(tok.text)
            raw_atoms.append((atom, kind is TokenKind.BRACKET_ATOM))
            idx = len(raw_atoms) - 1
            if prev is not None:
                add_bond(prev, idx, pending)
            elif pending is not None:
                raise ValenceUnsupported(f"bond symbol with no preceding atom in {smiles!r}")
            prev, pending = idx, None
        elif kind is TokenKind.BOND:
            if tok.text == "$":
                raise ValenceUnsupported("quadruple bonds are not supported")
            if pending is not None:
                raise ValenceUnsupported(f"consecutive bond symbols in {smiles!r}")
            pending = _BOND_SYMBOLS[tok.text]
        elif kind is TokenKind.RING_CLOSURE:
            if prev is None:
                raise ValenceUnsupported(f"ring closure with no preceding atom in {smiles!r}")
            label = tok.text.lstrip("%")
            if label in open_rings:
                other, order0 = open_rings.pop(label)
                if pending is not None and order0 is not None and pending is not order0:
                    raise ValenceUnsupported(f"conflicting ring-closure bond orders for ring {label}")
                add_bond(other, prev, pending if pending is not None else order0)
            else:
                open_rings[label] = (prev, pending)
            pending = None
        elif kind is TokenKind.BRANCH_OPEN:
            if prev is None or pending is not None:
                raise ValenceUnsupported(f"misplaced '(' in {smiles!r}")
            branch_stack.append(prev)
        elif kind is TokenKind.BRANCH_CLOSE:
            if not branch_stack:
                raise UnclosedBranch(f"unmatched ')' in {smiles!r}")
            if pending is not None:
                raise ValenceUnsupported(f"dangling bond before ')' in {smiles!r}")
            prev = branch_stack.pop()
        else:  # DOT
            if branch_stack:
                raise UnclosedBranch(f"'.' inside an open branch in {smiles!r}")
            if pending is not None:
                raise ValenceUnsupported(f"dangling bond before '.' in {smiles!r}")
            prev = None

    if open_rings:
        raise UnclosedRing(f"unclosed ring label(s) {sorted(open_rings)} in {smiles!r}")
    if branch_stack:
        raise UnclosedBranch(f"unclosed branch in {smiles!r}")
    if pending is not None:
        raise ValenceUnsupported(f"dangling bond at end of {smiles!r}")

    bond_list = tuple(sorted(bonds.values(), key=lambda b: (b.a, b.b)))
    valence = [0] * len(raw_atoms)
    for bond in bond_list:
        valence[bond.a] += bond.order.valence
        valence[bond.b] += bond.order.valence
    atoms = []
    for i, (atom, bracket) in enumerate(raw_atoms):
        if not bracket:
            h = implicit_hydrogens(atom.element, atom.aromatic, valence[i])
            atom = Atom(atom.element, 0, atom.aromatic, h)
        atoms.append(atom)
    return MolecularGraph(tuple(atoms), bond_list, source=smiles)
