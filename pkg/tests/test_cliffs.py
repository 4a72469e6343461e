from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transma.cliffs import (
    SimilarityTriple,
    is_cliff,
    levenshtein,
    mine_cliffs,
    similarity_triple,
    smiles_similarity,
    structure_similarity,
    tanimoto,
    tanimoto_matrix,
    transfection_difference,
)
from transma.errors import WidthMismatch
from transma.fingerprints import BitFingerprint, FingerprintKind, circular_fingerprint
from transma.smiles import parse
from transma.synthetic import lipid_library


def fp_from_bits(bits, kind=FingerprintKind.CIRCULAR):
    return BitFingerprint(np.array(bits, dtype=np.uint8), kind)


def brute_tanimoto(x, y):
    both = sum(1 for p, q in zip(x, y) if p and q)
    either = sum(1 for p, q in zip(x, y) if p or q)
    return 1.0 if either == 0 else both / either


def full_matrix_levenshtein(s, t):
    d = np.zeros((len(s) + 1, len(t) + 1), dtype=int)
    d[:, 0] = np.arange(len(s) + 1)
    d[0, :] = np.arange(len(t) + 1)
    for i in range(1, len(s) + 1):
        for j in range(1, len(t) + 1):
            d[i, j] = min(d[i - 1, j] + 1, d[i, j - 1] + 1, d[i - 1, j - 1] + (s[i - 1] != t[j - 1]))
    return int(d[-1, -1])


def test_tanimoto_counts_example():
    # a=4 bits, b=5 bits, c=2 shared -> 2 / (4 + 5 - 2)
    x = [1, 1, 1, 1, 0, 0, 0, 0]
    y = [1, 1, 0, 0, 1, 1, 1, 0]
    assert tanimoto(fp_from_bits(x), fp_from_bits(y)) == pytest.approx(2 / 7)


def test_tanimoto_empty_pair_is_one():
    z = fp_from_bits([0] * 8)
    assert tanimoto(z, z) == 1.0
    assert tanimoto(z, fp_from_bits([1] + [0] * 7)) == 0.0


def test_tanimoto_width_mismatch():
    with pytest.raises(WidthMismatch):
        tanimoto(fp_from_bits([1] * 8), fp_from_bits([1] * 16))
    with pytest.raises(WidthMismatch):
        tanimoto(fp_from_bits([1] * 64), fp_from_bits([1] * 64, FingerprintKind.STRUCTURAL_KEY))


bit_vectors = st.integers(1, 40).flatmap(
    lambda n: st.tuples(st.lists(st.booleans(), min_size=n, max_size=n), st.lists(st.booleans(), min_size=n, max_size=n))
)


@settings(max_examples=200, deadline=None)
@given(bit_vectors)
def test_property_tanimoto_matches_set_oracle(pair):
    x, y = pair
    fx, fy = fp_from_bits(x), fp_from_bits(y)
    t = tanimoto(fx, fy)
    assert t == pytest.approx(brute_tanimoto(x, y))
    assert 0.0 <= t <= 1.0
    assert t == tanimoto(fy, fx)
    assert tanimoto(fx, fx) == 1.0
    assert tanimoto_matrix([fx, fy])[0, 1] == pytest.approx(t)


@pytest.mark.parametrize(
    "s, t, d",
    [("kitten", "sitting", 3), ("", "abc", 3), ("abc", "abc", 0), ("CCO", "CCN", 1), ("CCO", "OCC", 2)],
)
def test_levenshtein_examples(s, t, d):
    assert levenshtein(s, t) == d


@settings(max_examples=200, deadline=None)
@given(st.text("CNO()=1c", max_size=12), st.text("CNO()=1c", max_size=12))
def test_property_levenshtein_matches_full_matrix(s, t):
    d = levenshtein(s, t)
    assert d == full_matrix_levenshtein(s, t)
    assert d == levenshtein(t, s)
    assert abs(len(s) - len(t)) <= d <= max(len(s), len(t))


def test_smiles_similarity_examples():
    assert smiles_similarity("CCO", "CCO") == 1.0
    assert smiles_similarity("CCO", "CCN") == pytest.approx(1 - 1 / 3)
    assert smiles_similarity("C", "CCCC") == pytest.approx(1 - 3 / 4)
    with pytest.raises(ValueError):
        smiles_similarity("", "C")


def test_structure_similarity_is_unweighted_mean():
    assert structure_similarity(SimilarityTriple(0.9, 0.6, 0.3)) == pytest.approx(0.6)


def test_identical_molecules_have_unit_similarity():
    t = similarity_triple("CCN(CC)CCOC(=O)CCCC", "CCN(CC)CCOC(=O)CCCC")
    assert (t.subs, t.scas, t.smis) == (1.0, 1.0, 1.0)


def test_acyclic_scaffolds_compare_equal():
    # both scaffolds are empty graphs, whose key fingerprints are all zero
    assert similarity_triple("CCCCO", "CCCCCCN").scas == 1.0


def test_transfection_difference_threshold():
    # log2 gap of 1 / log10(2) is exactly one decade of efficiency
    gap = 1 / math.log10(2)
    assert transfection_difference(0.0, gap) == pytest.approx(1.0)
    assert transfection_difference(3.0, 1.0) == pytest.approx(2 * math.log10(2))
    assert transfection_difference(1.0, 3.0) == transfection_difference(3.0, 1.0)


def test_cliff_gates_are_strict():
    assert is_cliff(0.91, 1.69)
    assert not is_cliff(0.9, 2.0)
    assert not is_cliff(0.95, 1.0)
    assert not is_cliff(0.89, 5.0)


def test_mine_cliffs_small_example():
    data = [
        {"id": "a", "smiles": "CCN(CC)CCOC(=O)CCCCCCCCCCCC", "m": 0.0},
        {"id": "b", "smiles": "CCN(CC)CCOC(=O)CCCCCCCCCCCCC", "m": 8.0},
        {"id": "c", "smiles": "CCN(CC)CCOC(=O)CCCCCCCCCCCCCC", "m": 0.5},
    ]
    pairs = mine_cliffs(data)
    got = {(p.id_a, p.id_b) for p in pairs}
    assert ("a", "b") in got and ("b", "c") in got and ("a", "c") not in got
    for p in pairs:
        assert p.id_a < p.id_b
        assert p.structure_similarity > 0.9 and p.transfection_difference > 1.0


def test_mine_cliffs_needs_two():
    with pytest.raises(ValueError):
        mine_cliffs([{"id": "a", "smiles": "C", "m": 0.0}])


def brute_force_cliffs(data):
    out = set()
    for i in range(len(data)):
        for j in range(i + 1, len(data)):
            a, b = sorted((data[i], data[j]), key=lambda r: r["id"])
            ga, gb = parse(a["smiles"]), parse(b["smiles"])
            subs = brute_tanimoto(circular_fingerprint(ga).bits, circular_fingerprint(gb).bits)
            t = similarity_triple(a["smiles"], b["smiles"])
            smis = 1 - full_matrix_levenshtein(a["smiles"], b["smiles"]) / max(len(a["smiles"]), len(b["smiles"]))
            sim = (subs + t.scas + smis) / 3
            diff = abs(a["m"] - b["m"]) * math.log10(2)
            if sim > 0.9 and diff > 1.0:
                out.add((a["id"], b["id"]))
    return out


def test_pruned_mining_equals_full_scan():
    records = lipid_library(60, seed=3)
    data = [{"id": r["id"], "smiles": r["smiles"], "m": r["efficiency"]} for r in records]
    mined = {(p.id_a, p.id_b) for p in mine_cliffs(data)}
    assert mined == brute_force_cliffs(data)
    assert mined  # the fixture plants cliffs


def test_mining_is_order_independent():
    records = lipid_library(40, seed=5)
    data = [{"id": r["id"], "smiles": r["smiles"], "m": r["efficiency"]} for r in records]
    assert mine_cliffs(data) == mine_cliffs(list(reversed(data)))


def test_raising_the_gap_never_adds_cliffs():
    records = lipid_library(40, seed=7)
    data = [{"id": r["id"], "smiles": r["smiles"], "m": r["efficiency"]} for r in records]
    base = {(p.id_a, p.id_b) for p in mine_cliffs(data)}
    shrunk = [dict(d, m=d["m"] * 0.5) for d in data]
    assert {(p.id_a, p.id_b) for p in mine_cliffs(shrunk)} <= base
