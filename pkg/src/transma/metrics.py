"""Regression, ranking and clustering agreement metrics."""

from __future__ import annotations

import numpy as np
from scipy import stats
from scipy.special import comb


def _pair(y, p) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).ravel()
    p = np.asarray(p, dtype=np.float64).ravel()
    if y.shape != p.shape or y.size == 0:
        raise ValueError(f"need equal-length non-empty vectors, got {y.shape} and {p.shape}")
    return y, p


def mse(y, p) -> float:
    y, p = _pair(y, p)
    return float(np.mean((y - p) ** 2))


def mae(y, p) -> float:
    y, p = _pair(y, p)
    return float(np.mean(np.abs(y - p)))


def r2(y, p) -> float:
    y, p = _pair(y, p)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return float("nan")
    return 1.0 - float(((y - p) ** 2).sum()) / ss_tot


def pcc(y, p) -> float:
    y, p = _pair(y, p)
    if y.size < 2 or np.ptp(y) == 0 or np.ptp(p) == 0:
        return float("nan")
    return float(stats.pearsonr(y, p)[0])


def spearman(y, p) -> float:
    y, p = _pair(y, p)
    if y.size < 2 or np.ptp(y) == 0 or np.ptp(p) == 0:
        return float("nan")
    return float(stats.spearmanr(y, p)[0])


def regression_report(y, p) -> dict[str, float]:
    return {"mse": mse(y, p), "mae": mae(y, p), "r2": r2(y, p), "pcc": pcc(y, p), "n": int(np.size(y))}


def adjusted_rand_index(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    sum_cells = comb(table, 2).sum()
    sum_a = comb(table.sum(axis=1), 2).sum()
    sum_b = comb(table.sum(axis=0), 2).sum()
    total = comb(a.size, 2)
    expected = sum_a * sum_b / total if total else 0.0
    top = 0.5 * (sum_a + sum_b)
    if top == expected:
        return 1.0
    return float((sum_cells - expected) / (top - expected))
