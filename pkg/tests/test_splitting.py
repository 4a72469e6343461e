from __future__ import annotations

from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transma.errors import DegenerateSplit, SingularDegree
from transma.fingerprints import murcko_scaffold
from transma.metrics import adjusted_rand_index
from transma.smiles import parse
from transma.splitting import (
    Partition,
    cliff_split,
    cluster_quota,
    kmeans,
    scaffold_split,
    spectral_cluster_affinity,
)
from transma.synthetic import lipid_library

RINGS = [
    "C1CC1",
    "C1CCC1",
    "C1CCCC1",
    "C1CCCCC1",
    "C1CCCCCC1",
    "c1ccccc1",
    "c1ccncc1",
    "C1CCNCC1",
    "C1CCOCC1",
    "c1ccc2ccccc2c1",
]


def records(smiles):
    return [{"id": f"m{i:03d}", "smiles": s} for i, s in enumerate(smiles)]


def test_ten_scaffolds_split_eight_one_one():
    data = records([r + "CCCC" if r[0] == "C" else "CCCC" + r for r in RINGS])
    keys = {murcko_scaffold(parse(d["smiles"])).smiles_like_key for d in data}
    assert len(keys) == 10
    counts = Counter(a.partition for a in scaffold_split(data))
    assert counts == {Partition.TRAIN: 8, Partition.VAL: 1, Partition.TEST: 1}


def test_single_scaffold_is_degenerate():
    data = records(["C" * n + "O" for n in range(2, 12)])
    with pytest.raises(DegenerateSplit, match="1 scaffold group"):
        scaffold_split(data)


def test_two_groups_nine_and_one():
    data = records(["CC" + "C" * n + "N" for n in range(9)] + ["c1ccccc1CC"])
    parts = {a.id: a.partition for a in scaffold_split(data, (0.9, 0.1, 0.0))}
    assert parts["m009"] is Partition.VAL
    assert sum(p is Partition.TRAIN for p in parts.values()) == 9


def test_bad_ratios():
    with pytest.raises(ValueError):
        scaffold_split(records(RINGS), (0.5, 0.5, 0.5))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000))
def test_property_scaffold_purity_and_partition(seed):
    data = lipid_library(30, seed=seed) + records(RINGS)
    try:
        out = scaffold_split(data)
    except DegenerateSplit:
        return
    assert [a.id for a in out] == [d["id"] for d in data]
    by_key: dict[str, set[Partition]] = {}
    for d, a in zip(data, out):
        by_key.setdefault(murcko_scaffold(parse(d["smiles"])).smiles_like_key, set()).add(a.partition)
    assert all(len(parts) == 1 for parts in by_key.values())
    assert scaffold_split(data) == out


@pytest.mark.parametrize(
    "size, expected",
    [(100, (10, 72, 18)), (9, (0, 7, 2)), (10, (1, 7, 2)), (1, (0, 1, 0)), (0, (0, 0, 0)), (25, (3, 18, 4))],
)
def test_cluster_quota_examples(size, expected):
    assert cluster_quota(size) == expected


@given(st.integers(0, 5000))
def test_property_cluster_quota_sums(size):
    test, train, val = cluster_quota(size)
    assert test + train + val == size
    assert min(test, train, val) >= 0
    assert (test == 0) == (size < 10)


def block_affinity(sizes, within=1.0, between=0.0):
    truth = np.repeat(np.arange(len(sizes)), sizes)
    a = np.where(truth[:, None] == truth[None, :], within, between)
    return a, truth


def test_block_affinity_is_recovered_exactly():
    a, truth = block_affinity([6, 9, 4, 7, 5], within=0.9, between=0.05)
    labels = spectral_cluster_affinity(a, k=5, seed=0)
    assert adjusted_rand_index(truth, labels) == pytest.approx(1.0)


def test_n_equals_k_gives_singletons():
    labels = spectral_cluster_affinity(np.full((4, 4), 0.5), k=4, seed=0)
    assert sorted(labels) == [0, 1, 2, 3]


def test_too_few_connected_molecules():
    with pytest.raises(SingularDegree):
        spectral_cluster_affinity(np.eye(6), k=3)
    with pytest.raises(ValueError):
        spectral_cluster_affinity(np.ones((3, 3)), k=5)


def test_isolated_molecule_joins_nearest_cluster():
    a, truth = block_affinity([5, 5])
    a = np.pad(a, ((0, 1), (0, 1)))
    feats = np.vstack([np.repeat([[0.0], [10.0]], 5, axis=0), [[9.5]]])
    labels = spectral_cluster_affinity(a, k=2, seed=0, features=feats)
    assert labels[-1] == labels[5]


def test_kmeans_finds_separated_blobs():
    rng = np.random.default_rng(0)
    centers = np.array([[0, 0], [10, 0], [0, 10]], dtype=float)
    x = np.vstack([c + rng.normal(scale=0.3, size=(20, 2)) for c in centers])
    labels, _ = kmeans(x, 3, seed=0, n_init=5)
    assert adjusted_rand_index(np.repeat([0, 1, 2], 20), labels) == pytest.approx(1.0)


def test_cliff_split_quotas_and_determinism():
    data = lipid_library(60, seed=1)
    out = cliff_split(data, k=5, seed=0)
    assert cliff_split(data, k=5, seed=0) == out
    by_cluster: dict[int, Counter] = {}
    for a in out:
        by_cluster.setdefault(a.cluster, Counter())[a.partition] += 1
    assert set(by_cluster) == set(range(5))
    for counts in by_cluster.values():
        size = sum(counts.values())
        test, train, val = cluster_quota(size)
        assert (counts[Partition.TEST], counts[Partition.TRAIN], counts[Partition.VAL]) == (test, train, val)
