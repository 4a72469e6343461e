from __future__ import annotations

import csv
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transma.fingerprints import (
    BitFingerprint,
    FingerprintKind,
    circular_fingerprint,
    murcko_scaffold,
    structural_keys_fp,
)
from transma.smiles import Bond, MolecularGraph, parse
from transma.structural_keys import KEYS

MOLECULES = [
    "CCO",
    "CC(=O)O",
    "c1ccccc1",
    "CCCCc1ccccc1",
    "C1CCNCC1CCOC(=O)CCCC",
    "c1ccc2ccccc2c1",
    "CCN(CC)CCOC(=O)CCCCCCCC",
    "OCCN(CCO)CCCCc1ccncc1",
    "C1CC1CC1CCCC1",
    "[NH3+]CC([O-])=O",
]

# the same molecule written from a different starting atom
REWRITES = [
    ("CCO", "OCC"),
    ("CCCCc1ccccc1", "c1ccc(CCCC)cc1"),
    ("CC(=O)O", "OC(C)=O"),
    ("C1CCNCC1C", "CC1CNCCC1"),
    ("OCCN(CCO)C", "CN(CCO)CCO"),
]


def permute(g: MolecularGraph, perm) -> MolecularGraph:
    """Relabel atoms so that new atom k is old atom perm[k]."""
    inverse = {old: new for new, old in enumerate(perm)}
    atoms = tuple(g.atoms[old] for old in perm)
    bonds = []
    for b in g.bonds:
        a, c = sorted((inverse[b.a], inverse[b.b]))
        bonds.append(Bond(a, c, b.order))
    return MolecularGraph(atoms, tuple(sorted(bonds, key=lambda x: (x.a, x.b))), g.source)


def test_single_carbon_radius_zero_one_bit():
    assert circular_fingerprint(parse("C"), radius=0).popcount == 1


@pytest.mark.parametrize("radius", [0, 1, 2, 3])
def test_reorder_invariance_ethanol(radius):
    assert circular_fingerprint(parse("CCO"), radius) == circular_fingerprint(parse("OCC"), radius)


def test_longer_chain_has_more_environments():
    assert circular_fingerprint(parse("CCCCCC")).popcount >= circular_fingerprint(parse("CC")).popcount


def test_width_must_be_power_of_two():
    with pytest.raises(ValueError):
        circular_fingerprint(parse("CC"), 2, 1000)


def test_structural_keys_single_carbon():
    fp = structural_keys_fp(parse("C"))
    names = {KEYS[i].name for i in fp.on_bits()}
    assert fp.width == 64 and fp.kind is FingerprintKind.STRUCTURAL_KEY
    assert "has_C" in names
    assert not any(k.name.startswith("ring") and fp.bits[i] for i, k in enumerate(KEYS))
    assert not fp.bits[[i for i, k in enumerate(KEYS) if k.name == "any_ring"][0]]


def test_structural_keys_benzene():
    on = {KEYS[i].name for i in structural_keys_fp(parse("c1ccccc1")).on_bits()}
    assert {"ring6", "aromatic_bond"} <= on


def test_key_table_ships_and_matches_predicates():
    text = resources.files("transma").joinpath("data/structural_keys.tsv").read_text()
    rows = list(csv.DictReader(text.splitlines(), delimiter="\t"))
    assert len(rows) == len(KEYS) == 64
    for i, (row, key) in enumerate(zip(rows, KEYS)):
        assert int(row["index"]) == i
        assert row["name"] == key.name and row["description"] == key.description


def test_murcko_examples():
    assert murcko_scaffold(parse("CCCCc1ccccc1")).smiles_like_key == murcko_scaffold(parse("c1ccccc1")).smiles_like_key
    assert murcko_scaffold(parse("CCCCCC")).smiles_like_key == ""
    assert murcko_scaffold(parse("CCCCCC")).is_empty
    benzene = murcko_scaffold(parse("c1ccccc1"))
    assert benzene.graph.n_atoms == 6


def test_murcko_keeps_linker_between_rings():
    s = murcko_scaffold(parse("CCC1CCC(CC1)CCc1ccccc1"))
    # two rings and the two-carbon linker survive; the ethyl goes
    assert s.graph.n_atoms == 6 + 2 + 6


@pytest.mark.parametrize("smiles", MOLECULES)
def test_murcko_idempotent(smiles):
    s1 = murcko_scaffold(parse(smiles))
    s2 = murcko_scaffold(s1.graph)
    assert s1.smiles_like_key == s2.smiles_like_key


@pytest.mark.parametrize("a, b", REWRITES)
def test_rewrites_agree(a, b):
    ga, gb = parse(a), parse(b)
    assert circular_fingerprint(ga) == circular_fingerprint(gb)
    assert structural_keys_fp(ga) == structural_keys_fp(gb)
    assert murcko_scaffold(ga).smiles_like_key == murcko_scaffold(gb).smiles_like_key


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(MOLECULES), st.randoms(use_true_random=False))
def test_property_permutation_invariance(smiles, rnd):
    g = parse(smiles)
    perm = list(range(g.n_atoms))
    rnd.shuffle(perm)
    h = permute(g, perm)
    assert circular_fingerprint(g) == circular_fingerprint(h)
    assert structural_keys_fp(g) == structural_keys_fp(h)
    assert murcko_scaffold(g).smiles_like_key == murcko_scaffold(h).smiles_like_key


@pytest.mark.parametrize("smiles", MOLECULES)
def test_popcount_bounds_and_determinism(smiles):
    g = parse(smiles)
    keys = structural_keys_fp(g)
    assert keys.popcount <= 64
    fp = circular_fingerprint(g)
    assert fp.popcount <= fp.width
    assert circular_fingerprint(parse(smiles)) == fp


def test_hex_roundtrip():
    fp = circular_fingerprint(parse("CCN(CC)CCOC(=O)CCCC"), 2, 256)
    back = BitFingerprint.from_hex(fp.to_hex(), fp.width, fp.kind)
    assert back == fp
    assert np.array_equal(back.bits, fp.bits)
