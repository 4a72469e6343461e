"""Scaffold and cliff (spectral-cluster stratified) dataset splits."""

from __future__ import annotations

import enum
import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .cliffs import tanimoto_matrix
from .errors import DegenerateSplit, SingularDegree, UnparseableSmiles
from .fingerprints import DEFAULT_RADIUS, DEFAULT_WIDTH, BitFingerprint, circular_fingerprint, murcko_scaffold
from .rng import substream
from .smiles import parse

logger = logging.getLogger(__name__)

KMEANS_RESTARTS = 100
KMEANS_MAX_ITER = 300


class Partition(enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass(frozen=True)
class SplitAssignment:
    id: str
    partition: Partition
    cluster: int | None = None


@dataclass(frozen=True)
class ClusterLabel:
    id: str
    cluster: int


def _graph(record) -> object:
    try:
        return parse(record["smiles"])
    except Exception as exc:
        raise UnparseableSmiles(f"molecule {record['id']}: {exc}") from exc


def scaffold_split(
    dataset: Sequence[dict],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> list[SplitAssignment]:
    """Greedy scaffold split.

    Molecules are grouped by Murcko scaffold key. Groups are taken largest
    first (ties by key) and each goes whole to the partition that is furthest
    below its target size (ties in train, val, test order). The procedure is
    deterministic; ``seed`` is accepted for a uniform split interface.

    Raises :class:`DegenerateSplit` when a partition with a positive ratio
    ends up empty.
    """
    del seed
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    groups: dict[str, list[str]] = {}
    for record in dataset:
        key = murcko_scaffold(_graph(record)).smiles_like_key
        groups.setdefault(key, []).append(str(record["id"]))
    n = len(dataset)
    targets = [r * n for r in ratios]
    counts = [0, 0, 0]
    parts = list(Partition)
    assigned: dict[str, Partition] = {}
    for key, ids in sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0])):
        deficits = [t - c for t, c in zip(targets, counts)]
        p = int(np.argmax(deficits))
        counts[p] += len(ids)
        for mol_id in ids:
            assigned[mol_id] = parts[p]
    for part, ratio, count in zip(parts, ratios, counts):
        if ratio > 0 and count == 0:
            largest = max(len(v) for v in groups.values())
            raise DegenerateSplit(
                f"{part.value} partition is empty: {len(groups)} scaffold group(s) for {n} molecules, "
                f"largest group has {largest}"
            )
    return [SplitAssignment(str(r["id"]), assigned[str(r["id"])]) for r in dataset]


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(remaining))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return x[chosen].copy()


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int) -> tuple[np.ndarray, np.ndarray, float]:
    k = centers.shape[0]
    labels = None
    for _ in range(max_iter):
        dist = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = dist.argmin(axis=1)
        # keep every cluster populated by stealing the worst-fit point of a larger cluster
        for j in range(k):
            if not np.any(new == j):
                sizes = np.bincount(new, minlength=k)
                fit = dist[np.arange(len(x)), new]
                fit = np.where(sizes[new] > 1, fit, -1.0)
                new[int(fit.argmax())] = j
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = np.stack([x[labels == j].mean(axis=0) for j in range(k)])
    dist = ((x - centers[labels]) ** 2).sum()
    return labels, centers, float(dist)


def kmeans(
    x: np.ndarray, k: int, seed: int, n_init: int = KMEANS_RESTARTS, max_iter: int = KMEANS_MAX_ITER
) -> tuple[np.ndarray, np.ndarray]:
    """k-means++ seeded Lloyd iterations; the lowest-inertia restart wins (earliest on ties)."""
    if x.shape[0] < k:
        raise ValueError(f"need at least k={k} points, got {x.shape[0]}")
    best = None
    for restart in range(n_init):
        rng = substream(seed, "kmeans", restart)
        labels, centers, inertia = _lloyd(x, _kmeans_pp(x, k, rng), max_iter)
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia)
    return best[0], best[1]


def spectral_embedding(affinity: np.ndarray, k: int) -> np.ndarray:
    """Row-normalised eigenvectors of the k smallest eigenvalues of I - D^-1/2 A D^-1/2."""
    deg = affinity.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = np.eye(len(deg)) - inv_sqrt[:, None] * affinity * inv_sqrt[None, :]
    lap = 0.5 * (lap + lap.T)
    _, vecs = np.linalg.eigh(lap)
    u = vecs[:, :k]
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    return u / np.where(norms > 0, norms, 1.0)


def spectral_cluster_affinity(
    affinity: np.ndarray, k: int = 5, seed: int = 0, features: np.ndarray | None = None
) -> np.ndarray:
    """Cluster labels from a symmetric affinity matrix (self-affinity is ignored).

    Molecules with zero affinity to every other molecule cannot be embedded;
    they are clustered afterwards by nearest centroid in ``features`` space
    (the affinity rows when no features are given).
    """
    a = np.array(affinity, dtype=np.float64)
    n = a.shape[0]
    if n < k:
        raise ValueError(f"need n >= k, got n={n}, k={k}")
    np.fill_diagonal(a, 0.0)
    active = a.sum(axis=1) > 0
    if active.sum() < k:
        raise SingularDegree(f"only {int(active.sum())} of {n} molecules have non-zero affinity; need {k}")
    idx = np.flatnonzero(active)
    emb = spectral_embedding(a[np.ix_(idx, idx)], k)
    labels = np.full(n, -1, dtype=np.int64)
    labels[idx] = kmeans(emb, k, seed)[0]
    if not active.all():
        feats = a if features is None else np.asarray(features, dtype=np.float64)
        centroids = np.stack([feats[idx][labels[idx] == j].mean(axis=0) for j in range(k)])
        for i in np.flatnonzero(~active):
            labels[i] = int(((centroids - feats[i]) ** 2).sum(axis=1).argmin())
        logger.warning("SingularDegree: %d isolated molecule(s) assigned to nearest centroid", int((~active).sum()))
    return labels


def spectral_cluster(fingerprints: Sequence[BitFingerprint], k: int = 5, seed: int = 0) -> np.ndarray:
    feats = np.stack([f.bits for f in fingerprints]).astype(np.float64) if fingerprints else None
    return spectral_cluster_affinity(tanimoto_matrix(list(fingerprints)), k, seed, features=feats)


def cluster_quota(size: int) -> tuple[int, int, int]:
    """(test, train, val) counts for one cluster: 10% test from 10 members up, rest 8:2."""
    n_test = (size + 5) // 10 if size >= 10 else 0
    rest = size - n_test
    n_train = (8 * rest + 5) // 10
    return n_test, n_train, rest - n_train


def cliff_split(
    dataset: Sequence[dict],
    k: int = 5,
    seed: int = 0,
    radius: int = DEFAULT_RADIUS,
    width: int = DEFAULT_WIDTH,
) -> list[SplitAssignment]:
    fps = [circular_fingerprint(_graph(r), radius, width) for r in dataset]
    labels = spectral_cluster(fps, k, seed)
    partition: dict[int, Partition] = {}
    for c in range(k):
        members = np.flatnonzero(labels == c)
        n_test, n_train, _ = cluster_quota(len(members))
        perm = substream(seed, "cliff-split", c).permutation(members)
        for pos, i in enumerate(perm):
            if pos < n_test:
                partition[int(i)] = Partition.TEST
            elif pos < n_test + n_train:
                partition[int(i)] = Partition.TRAIN
            else:
                partition[int(i)] = Partition.VAL
    return [SplitAssignment(str(r["id"]), partition[i], int(labels[i])) for i, r in enumerate(dataset)]


def cluster_labels(ids: Sequence[str], labels: np.ndarray) -> list[ClusterLabel]:
    return [ClusterLabel(str(i), int(c)) for i, c in zip(ids, labels)]
