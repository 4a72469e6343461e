"""Deterministic pseudo-conformers and XYZ-block conformer files."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InputError
from .rng import substream, text_counter
from .smiles import MolecularGraph

BOND_LENGTH = 1.5
ANGLE_LENGTH = 2.5
REPULSION_RANGE = 3.0
ITERATIONS = 500
STEP = 0.05


def _pair_targets(g: MolecularGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Targets and stiffness for every atom pair: bonds, 1-3 pairs, and short-range repulsion."""
    n = g.n_atoms
    target = np.full((n, n), REPULSION_RANGE)
    stiff = np.full((n, n), 0.2)
    repulse_only = np.ones((n, n), dtype=bool)
    adj = g.adjacency
    for i in range(n):
        for j, _ in adj[i]:
            for k, _ in adj[j]:
                if k != i:
                    target[i, k], stiff[i, k], repulse_only[i, k] = ANGLE_LENGTH, 0.5, False
    for b in g.bonds:
        for i, j in ((b.a, b.b), (b.b, b.a)):
            target[i, j], stiff[i, j], repulse_only[i, j] = BOND_LENGTH, 1.0, False
    np.fill_diagonal(stiff, 0.0)
    return target, stiff, repulse_only


def pseudo_conformer(g: MolecularGraph, seed: int = 0, iterations: int = ITERATIONS) -> np.ndarray:
    """Spring-layout coordinates ``[n, 3]`` centred at the origin.

    Bonded atoms pull towards 1.5 A, atoms two bonds apart towards 2.5 A, and
    any other pair closer than 3 A is pushed apart. The start is drawn from a
    substream keyed by the seed and the SMILES text, so equal inputs give equal
    coordinates.
    """
    n = g.n_atoms
    if n == 0:
        return np.zeros((0, 3))
    if n == 1:
        return np.zeros((1, 3))
    rng = substream(seed, "conformer", text_counter(g.source))
    x = rng.uniform(-1.0, 1.0, size=(n, 3)) * np.cbrt(n) * BOND_LENGTH
    target, stiff, repulse_only = _pair_targets(g)
    for _ in range(iterations):
        diff = x[:, None, :] - x[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=-1))
        np.fill_diagonal(dist, 1.0)
        err = dist - target
        # repulsion is one-sided
        err = np.where(repulse_only & (err > 0), 0.0, err)
        coef = stiff * err / np.maximum(dist, 1e-6)
        grad = (coef[:, :, None] * diff).sum(axis=1)
        step = np.clip(STEP * grad, -0.5, 0.5)
        x = x - step
    return x - x.mean(axis=0)


def read_xyz_blocks(path: str | Path) -> dict[str, tuple[list[str], np.ndarray]]:
    """Parse concatenated XYZ blocks; the comment line of each block is the molecule id."""
    lines = Path(path).read_text().splitlines()
    out: dict[str, tuple[list[str], np.ndarray]] = {}
    pos = 0
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        try:
            count = int(lines[pos].strip())
        except ValueError as exc:
            raise InputError(f"{path}:{pos + 1}: expected an atom count, got {lines[pos]!r}") from exc
        mol_id = lines[pos + 1].strip() if pos + 1 < len(lines) else ""
        body = lines[pos + 2 : pos + 2 + count]
        if len(body) != count:
            raise InputError(f"{path}:{pos + 1}: block {mol_id!r} is truncated")
        elements, coords = [], []
        for offset, line in enumerate(body):
            parts = line.split()
            try:
                elements.append(parts[0])
                coords.append([float(v) for v in parts[1:4]])
            except (IndexError, ValueError) as exc:
                raise InputError(f"{path}:{pos + 3 + offset}: bad coordinate line {line!r}") from exc
            if len(coords[-1]) != 3:
                raise InputError(f"{path}:{pos + 3 + offset}: bad coordinate line {line!r}")
        if mol_id in out:
            raise InputError(f"{path}:{pos + 2}: duplicate conformer id {mol_id!r}")
        out[mol_id] = (elements, np.array(coords, dtype=np.float64).reshape(count, 3))
        pos += 2 + count
    return out


def write_xyz_blocks(path: str | Path, blocks: dict[str, tuple[list[str], np.ndarray]]) -> None:
    chunks = []
    for mol_id, (elements, coords) in blocks.items():
        chunks.append(str(len(elements)))
        chunks.append(mol_id)
        chunks.extend(f"{el} {x:.6f} {y:.6f} {z:.6f}" for el, (x, y, z) in zip(elements, coords))
    Path(path).write_text("\n".join(chunks) + "\n")
