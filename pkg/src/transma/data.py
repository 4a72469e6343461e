"""Dataset CSV ingestion and split files."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BadNumber, DuplicateId, InputError, UnparseableSmiles
from .smiles import MolecularGraph, parse
from .splitting import Partition, SplitAssignment

COLUMNS = ("id", "smiles", "efficiency", "cell_line")


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    smiles: str
    efficiency: float | None
    cell_line: str
    graph: MolecularGraph | None = field(default=None, compare=False, repr=False)

    def as_dict(self) -> dict:
        return {"id": self.id, "smiles": self.smiles, "m": self.efficiency, "efficiency": self.efficiency}


def ingest(path: str | Path, require_efficiency: bool = True) -> list[DatasetRecord]:
    """Read ``id,smiles,efficiency,cell_line``; errors name the offending line.

    With ``require_efficiency=False`` (predict mode) a blank efficiency is
    accepted and stored as ``None``.
    """
    records: list[DatasetRecord] = []
    seen: dict[str, int] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in ("id", "smiles") if c not in header]
        if require_efficiency and "efficiency" not in header:
            missing.append("efficiency")
        if missing:
            raise InputError(f"{path}: missing column(s) {', '.join(missing)}")
        for row in reader:
            line = reader.line_num
            mol_id = (row.get("id") or "").strip()
            if not mol_id:
                raise InputError(f"{path}:{line}: empty id")
            if mol_id in seen:
                raise DuplicateId(f"{path}:{line}: duplicate id {mol_id!r} (first on line {seen[mol_id]})")
            seen[mol_id] = line
            smiles = (row.get("smiles") or "").strip()
            try:
                graph = parse(smiles)
            except InputError as exc:
                raise UnparseableSmiles(f"{path}:{line}: molecule {mol_id!r}: {exc}") from exc
            raw = (row.get("efficiency") or "").strip()
            if raw == "":
                if require_efficiency:
                    raise BadNumber(f"{path}:{line}: molecule {mol_id!r} has no efficiency")
                eff = None
            else:
                try:
                    eff = float(raw)
                except ValueError as exc:
                    raise BadNumber(f"{path}:{line}: efficiency {raw!r} is not a number") from exc
                if not math.isfinite(eff):
                    raise BadNumber(f"{path}:{line}: efficiency {raw!r} is not finite")
            cell = (row.get("cell_line") or "").strip()
            records.append(DatasetRecord(mol_id, smiles, eff, cell, graph))
    return records


def write_splits(path: str | Path, assignments: list[SplitAssignment]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "partition", "cluster"])
        for a in assignments:
            w.writerow([a.id, a.partition.value, "" if a.cluster is None else a.cluster])


def read_splits(path: str | Path) -> dict[str, Partition]:
    out: dict[str, Partition] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            try:
                out[row["id"]] = Partition(row["partition"].strip().lower())
            except (KeyError, ValueError) as exc:
                raise InputError(f"{path}:{reader.line_num}: bad split row {row}") from exc
    return out
