"""Versioned checkpoint files.

Layout (all integers little-endian)::

    b"TRANSMA-CKPT\\n"          13-byte magic
    uint64                     length H of the JSON header
    H bytes                    UTF-8 JSON, keys sorted:
                               {"format_version": 1,
                                "meta": {...free-form JSON...},
                                "arrays": [{"name", "shape", "offset", "count"}, ...]}
    float64[...]               array payloads, concatenated in header order

Array names are namespaced: ``param/<name>`` for model weights and
``adam_m/<name>`` / ``adam_v/<name>`` for optimizer moments. The file has no
timestamps, so equal contents give equal bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .optim import OptimizerState

MAGIC = b"TRANSMA-CKPT\n"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    meta: dict
    params: dict[str, np.ndarray]
    optimizer: OptimizerState | None = None
    extra_arrays: dict[str, np.ndarray] = field(default_factory=dict)


def _dumps(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    arrays: list[tuple[str, np.ndarray]] = [(f"param/{k}", v) for k, v in sorted(ckpt.params.items())]
    meta = dict(ckpt.meta)
    if ckpt.optimizer is not None:
        opt = ckpt.optimizer
        meta["optimizer"] = {
            "step": opt.step,
            "lr0": opt.lr0,
            "total_steps": opt.total_steps,
            "beta1": opt.beta1,
            "beta2": opt.beta2,
            "eps": opt.eps,
        }
        arrays += [(f"adam_m/{k}", v) for k, v in sorted(opt.m.items())]
        arrays += [(f"adam_v/{k}", v) for k, v in sorted(opt.v.items())]
    arrays += [(f"extra/{k}", v) for k, v in sorted(ckpt.extra_arrays.items())]
    index = []
    offset = 0
    for name, arr in arrays:
        count = int(np.asarray(arr).size)
        index.append({"name": name, "shape": list(np.asarray(arr).shape), "offset": offset, "count": count})
        offset += count
    header = _dumps({"format_version": FORMAT_VERSION, "meta": meta, "arrays": index})
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint file")
    pos = len(MAGIC)
    (hlen,) = struct.unpack_from("<Q", raw, pos)
    pos += 8
    header = json.loads(raw[pos : pos + hlen].decode("utf-8"))
    pos += hlen
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('format_version')}")
    payload = np.frombuffer(raw, dtype="<f8", offset=pos)
    arrays = {}
    for item in header["arrays"]:
        start = item["offset"]
        arrays[item["name"]] = payload[start : start + item["count"]].reshape(item["shape"]).astype(np.float64)
    meta = header["meta"]
    params = {k[len("param/") :]: v for k, v in arrays.items() if k.startswith("param/")}
    extra = {k[len("extra/") :]: v for k, v in arrays.items() if k.startswith("extra/")}
    optimizer = None
    if "optimizer" in meta:
        o = meta.pop("optimizer")
        optimizer = OptimizerState(
            lr0=o["lr0"], total_steps=o["total_steps"], step=o["step"], beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"]
        )
        optimizer.m = {k[len("adam_m/") :]: v for k, v in arrays.items() if k.startswith("adam_m/")}
        optimizer.v = {k[len("adam_v/") :]: v for k, v in arrays.items() if k.startswith("adam_v/")}
    return Checkpoint(meta=meta, params=params, optimizer=optimizer, extra_arrays=extra)
