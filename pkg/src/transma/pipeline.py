"""End-to-end runners behind the CLI: pretraining, training, prediction and reports."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, metrics
from .cliffs import CliffPair, mine_cliffs
from .config import RunConfig
from .conformer import pseudo_conformer, read_xyz_blocks
from .data import DatasetRecord
from .encoders.structure3d import PretrainHeads, PretrainWeights, Structure3DEncoder, Structure3DInput, pretrain_loss
from .encoders.vocab import TokenVocab
from .errors import CheckpointError, InputError
from .fingerprints import circular_fingerprint, structural_keys_fp
from .fusion import TargetScaler
from .model import ModelConfig, MoleculeSample, TransMA
from .nn.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .nn.optim import OptimizerState, adam_step
from .rng import substream
from .splitting import Partition, SplitAssignment, cliff_split, scaffold_split

logger = logging.getLogger(__name__)

# published cliff-pair counts on the full 1200-lipid dataset, for a non-binding comparison
REFERENCE_CLIFF_COUNTS = {"hela": 4267, "raw": 2104}

ENCODER_PREFIX = "encoder."
HEADS_PREFIX = "heads."


def fmt(x: float | None) -> str:
    """Shortest round-tripping text for a float."""
    return "" if x is None else repr(float(x))


# ---------------------------------------------------------------- conformers


def conformers_for(records: Sequence[DatasetRecord], config: RunConfig) -> dict[str, np.ndarray]:
    """Coordinates per id: from the XYZ file when it has the id, else a seeded pseudo-conformer."""
    blocks = read_xyz_blocks(config.conformers) if config.conformers else {}
    out: dict[str, np.ndarray] = {}
    for r in records:
        if r.id in blocks:
            elements, coords = blocks[r.id]
            expected = [a.element for a in r.graph.atoms]
            if elements != expected:
                raise InputError(f"conformer for {r.id!r} lists atoms {elements} but the SMILES has {expected}")
            out[r.id] = coords
        else:
            out[r.id] = pseudo_conformer(r.graph, config.seed)
    return out


# ---------------------------------------------------------------- pretraining


@dataclass
class PretrainResult:
    encoder: Structure3DEncoder
    heads: PretrainHeads
    optimizer: OptimizerState
    losses: list[float]
    parts: list[dict[str, float]]


def _encoder_shape(config: RunConfig) -> dict[str, int]:
    return {"d_model": config.d_model, "heads": config.heads, "layers": config.layers, "ffn_dim": config.ffn_dim}


def _check_encoder_shape(meta: dict, config: RunConfig, path) -> None:
    saved = meta.get("encoder_shape", {})
    wanted = _encoder_shape(config)
    if saved != wanted:
        diffs = {k: (saved.get(k), v) for k, v in wanted.items() if saved.get(k) != v}
        raise CheckpointError(f"{path}: encoder shape mismatch (checkpoint, config): {diffs}")


def run_pretrain(
    config: RunConfig,
    corpus: Sequence[DatasetRecord],
    resume: str | Path | None = None,
    stop_after: int | None = None,
) -> PretrainResult:
    """Masked-atom denoising pretraining of the 3D encoder.

    Batch membership, masks and noise are drawn from substreams keyed by the
    global step, so a resumed run continues exactly where a straight run
    would be. ``stop_after`` halts after that many total steps.
    """
    if not corpus:
        raise InputError("pretraining corpus is empty")
    coords = conformers_for(corpus, config)
    inputs = [Structure3DInput.from_graph(r.graph, coords[r.id]) for r in corpus]
    rng = substream(config.seed, "init-3d")
    encoder = Structure3DEncoder(config.d_model, config.heads, config.layers, config.ffn_dim, rng)
    heads = PretrainHeads(config.d_model, rng)
    params = {**_prefixed(encoder, ENCODER_PREFIX), **_prefixed(heads, HEADS_PREFIX)}
    state = OptimizerState(lr0=config.pretrain_lr0, total_steps=config.pretrain_steps)
    losses: list[float] = []
    parts: list[dict[str, float]] = []
    if resume is not None:
        ckpt = load_checkpoint(resume)
        if ckpt.meta.get("kind") != "pretrain":
            raise CheckpointError(f"{resume}: not a pretraining checkpoint")
        _check_encoder_shape(ckpt.meta, config, resume)
        _load_params(params, ckpt.params, resume)
        state = ckpt.optimizer
        losses = list(ckpt.meta.get("losses", []))
        parts = list(ckpt.meta.get("parts", []))
    weights = PretrainWeights(config.weight_type, config.weight_coord, config.weight_distance)
    end = config.pretrain_steps if stop_after is None else min(stop_after, config.pretrain_steps)
    n = len(inputs)
    size = min(config.pretrain_batch_size, n)
    while state.step < end:
        step = state.step
        idx = np.sort(substream(config.seed, "pretrain-batch", step).choice(n, size=size, replace=False))
        for p in params.values():
            p.grad = None
        loss, part = pretrain_loss(
            encoder, heads, [inputs[i] for i in idx], config.seed, step, config.mask_rate, config.noise, weights
        )
        loss.backward()
        _fill_missing_grads(params)
        adam_step(params, state)
        losses.append(loss.item())
        parts.append(part)
        if step % 50 == 0:
            logger.info("pretrain step %d loss %.5f", step, losses[-1])
    return PretrainResult(encoder, heads, state, losses, parts)


def save_pretrain(path: str | Path, result: PretrainResult, config: RunConfig) -> None:
    params = {**_prefixed(result.encoder, ENCODER_PREFIX), **_prefixed(result.heads, HEADS_PREFIX)}
    meta = {
        "kind": "pretrain",
        "encoder_shape": _encoder_shape(config),
        "config": config.to_dict(),
        "losses": result.losses,
        "parts": result.parts,
    }
    save_checkpoint(path, Checkpoint(meta, {k: p.data for k, p in params.items()}, result.optimizer))


def _prefixed(module, prefix: str) -> dict:
    return {prefix + k: p for k, p in module.parameters().items()}


def _fill_missing_grads(params: dict) -> None:
    # parameters off the loss path get zero gradients so Adam still advances their moments
    for p in params.values():
        if p.grad is None:
            p.grad = np.zeros_like(p.data)


def _load_params(params: dict, arrays: dict[str, np.ndarray], path) -> None:
    missing = sorted(set(params) - set(arrays))
    if missing:
        raise CheckpointError(f"{path}: missing parameters {missing[:5]}")
    for name, p in params.items():
        if arrays[name].shape != p.data.shape:
            raise CheckpointError(f"{path}: {name} has shape {arrays[name].shape}, model expects {p.data.shape}")
        p.data = np.array(arrays[name], dtype=np.float64)


# ---------------------------------------------------------------- training


@dataclass
class TrainedModel:
    model: TransMA
    vocab: TokenVocab
    scaler: TargetScaler
    config: RunConfig
    optimizer: OptimizerState | None = None
    losses: list[float] = field(default_factory=list)


def build_samples(
    records: Sequence[DatasetRecord], vocab: TokenVocab, coords: dict[str, np.ndarray]
) -> list[MoleculeSample]:
    return [
        MoleculeSample.build(r.id, r.smiles, coords[r.id], vocab, r.efficiency, graph=r.graph) for r in records
    ]


def training_batches(n: int, batch_size: int, total_steps: int, seed: int) -> list[np.ndarray]:
    """Epoch-wise shuffled batches; a trailing single molecule joins the previous batch."""
    out: list[np.ndarray] = []
    epoch = 0
    while len(out) < total_steps:
        perm = substream(seed, "batch", epoch).permutation(n)
        chunks = [perm[i : i + batch_size] for i in range(0, n, batch_size)]
        if len(chunks) > 1 and len(chunks[-1]) == 1:
            chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
            chunks.pop()
        out.extend(chunks)
        epoch += 1
    return out[:total_steps]


def total_train_steps(config: RunConfig, n_train: int) -> int:
    if config.steps > 0:
        return config.steps
    per_epoch = max(1, math.ceil(n_train / config.batch_size))
    return config.epochs * per_epoch


def run_train(
    config: RunConfig,
    records: Sequence[DatasetRecord],
    splits: dict[str, Partition],
    pretrained: str | Path | None = None,
) -> tuple[TrainedModel, dict]:
    """Fine-tune the full model with the hybrid loss on the train partition.

    Returns the trained model and a metrics dict with per-partition MSE,
    MAE, R2 and PCC in log2 units.
    """
    missing = [r.id for r in records if r.id not in splits]
    if missing:
        raise InputError(f"split file has no partition for {len(missing)} molecule(s), e.g. {missing[:3]}")
    if any(r.efficiency is None for r in records):
        raise InputError("training data needs an efficiency for every molecule")
    vocab = TokenVocab.build([r.smiles for r in records], max_size=config.vocab_size)
    coords = conformers_for(records, config)
    samples = build_samples(records, vocab, coords)
    train_idx = [i for i, r in enumerate(records) if splits[r.id] is Partition.TRAIN]
    if not train_idx:
        raise InputError("train partition is empty")
    beta = config.resolved_beta()
    if beta != 0 and len(train_idx) < 2:
        raise InputError("the triplet term needs at least two training molecules")
    model = TransMA(config.model_config(), substream(config.seed, "init-model"))
    if pretrained is not None:
        ckpt = load_checkpoint(pretrained)
        if ckpt.meta.get("kind") != "pretrain":
            raise CheckpointError(f"{pretrained}: not a pretraining checkpoint")
        _check_encoder_shape(ckpt.meta, config, pretrained)
        enc = {k[len(ENCODER_PREFIX) :]: v for k, v in ckpt.params.items() if k.startswith(ENCODER_PREFIX)}
        model.encoder_3d.load_state_dict(enc)
    targets = np.array([records[i].efficiency for i in train_idx])
    scaler = TargetScaler.fit(targets)
    scaled = scaler.transform(np.array([r.efficiency for r in records]))
    params = model.parameters()
    total = total_train_steps(config, len(train_idx))
    state = OptimizerState(lr0=config.lr0, total_steps=total)
    losses: list[float] = []
    for step, batch in enumerate(training_batches(len(train_idx), config.batch_size, total, config.seed)):
        idx = [train_idx[i] for i in batch]
        for p in params.values():
            p.grad = None
        loss, _ = model.batch_loss([samples[i] for i in idx], scaled[idx], beta, config.margin)
        loss.backward()
        _fill_missing_grads(params)
        adam_step(params, state)
        losses.append(loss.item())
        if step % 100 == 0:
            logger.info("train step %d/%d loss %.5f", step, total, losses[-1])
    trained = TrainedModel(model, vocab, scaler, config, state, losses)
    preds = predict_samples(trained, samples)
    report: dict = {"steps": total, "beta": beta, "final_loss": losses[-1] if losses else None, "partitions": {}}
    for part in Partition:
        idx = [i for i, r in enumerate(records) if splits[r.id] is part]
        if idx:
            y = np.array([records[i].efficiency for i in idx])
            report["partitions"][part.value] = metrics.regression_report(y, preds[idx])
    report["predictions"] = {r.id: float(p) for r, p in zip(records, preds)}
    return trained, report


def save_model(path: str | Path, trained: TrainedModel) -> None:
    meta = {
        "kind": "transma",
        "model_config": trained.model.config.to_dict(),
        "encoder_shape": _encoder_shape(trained.config),
        "vocab": trained.vocab.tokens,
        "vocab_size": trained.vocab.max_size,
        "scaler": {"lo": trained.scaler.lo, "hi": trained.scaler.hi},
        "config": trained.config.to_dict(),
        "losses": trained.losses,
    }
    save_checkpoint(path, Checkpoint(meta, trained.model.state_dict(), trained.optimizer))


def load_model(path: str | Path) -> TrainedModel:
    ckpt = load_checkpoint(path)
    if ckpt.meta.get("kind") != "transma":
        raise CheckpointError(f"{path}: not a trained model checkpoint")
    mc = ModelConfig(**ckpt.meta["model_config"])
    model = TransMA(mc, np.random.default_rng(0))
    model.load_state_dict(ckpt.params)
    saved = dict(ckpt.meta["config"])
    saved.pop("beta_resolved", None)
    saved["split_ratios"] = tuple(saved["split_ratios"])
    config = RunConfig(**saved)
    vocab = TokenVocab(ckpt.meta["vocab"], max_size=ckpt.meta["vocab_size"])
    scaler = TargetScaler(ckpt.meta["scaler"]["lo"], ckpt.meta["scaler"]["hi"])
    return TrainedModel(model, vocab, scaler, config, ckpt.optimizer, list(ckpt.meta.get("losses", [])))


# ---------------------------------------------------------------- inference


def predict_samples(trained: TrainedModel, samples: Sequence[MoleculeSample]) -> np.ndarray:
    raw = np.array([trained.model.forward(s).raw.item() for s in samples])
    return trained.scaler.inverse(raw)


def inference_samples(trained: TrainedModel, records: Sequence[DatasetRecord], conformers: str = "") -> list:
    config = trained.config
    if conformers:
        config = RunConfig(**{**vars(config), "conformers": conformers})
    return build_samples(records, trained.vocab, conformers_for(records, config))


def run_predict(trained: TrainedModel, records: Sequence[DatasetRecord], conformers: str = "") -> tuple[list, dict]:
    """Predictions in log2 units, plus a rank-consistency report when truths are present."""
    samples = inference_samples(trained, records, conformers)
    preds = predict_samples(trained, samples)
    rows = [(r.id, float(p), r.efficiency) for r, p in zip(records, preds)]
    report = ranking_report([r.id for r in records], [r.efficiency for r in records], preds)
    return rows, report


def ranking_report(ids: Sequence[str], truths: Sequence[float | None], preds: Sequence[float]) -> dict:
    """Orderings by prediction and by truth, and their Spearman correlation."""
    preds = np.asarray(preds, dtype=np.float64)
    order_pred = [ids[i] for i in np.argsort(-preds, kind="stable")]
    known = [i for i, t in enumerate(truths) if t is not None]
    report: dict = {"n": len(ids), "order_by_prediction": order_pred}
    if len(known) >= 2:
        y = np.array([truths[i] for i in known], dtype=np.float64)
        p = preds[known]
        report["order_by_truth"] = [ids[known[i]] for i in np.argsort(-y, kind="stable")]
        report["spearman"] = metrics.spearman(y, p)
        report["n_with_truth"] = len(known)
    return report


@dataclass(frozen=True)
class AttentionExplanation:
    id: str
    elements: tuple[str, ...]
    scores: np.ndarray
    prediction: float


def run_explain(
    trained: TrainedModel, records: Sequence[DatasetRecord], conformers: str = ""
) -> list[AttentionExplanation]:
    samples = inference_samples(trained, records, conformers)
    out = []
    for s in samples:
        res = trained.model.forward(s)
        pred = float(trained.scaler.inverse(res.raw.item()))
        elements = tuple(a.element for a in s.graph.atoms)
        out.append(AttentionExplanation(s.id, elements, res.scores.data[:, 0].copy(), pred))
    return out


STAGES = ("z1", "z2", "fused")


def run_embeddings(
    trained: TrainedModel, records: Sequence[DatasetRecord], conformers: str = "", force_scores: float | None = None
) -> list[tuple[str, str, np.ndarray]]:
    """Per molecule: mean-pooled z1, aligned z2 and score-scaled fused features."""
    rows = []
    for s in inference_samples(trained, records, conformers):
        res = trained.model.forward(s, force_scores=force_scores)
        pooled = {
            "z1": res.z1.data.mean(axis=0),
            "z2": res.z2_aligned.data.mean(axis=0),
            "fused": trained.model.head.pool(res.fused, res.scores).data,
        }
        rows.extend((s.id, stage, pooled[stage]) for stage in STAGES)
    return rows


# ---------------------------------------------------------------- tooling runners


def run_cliffs(records: Sequence[DatasetRecord], config: RunConfig) -> list[CliffPair]:
    missing = [r.id for r in records if r.efficiency is None]
    if missing:
        raise InputError(f"cliff mining needs efficiencies; missing for {missing[:3]}")
    return mine_cliffs([r.as_dict() for r in records], config.radius, config.width)


def cliff_reference(records: Sequence[DatasetRecord], n_pairs: int) -> dict:
    lines = sorted({r.cell_line for r in records if r.cell_line})
    out: dict = {"pairs": n_pairs, "cell_lines": lines}
    for line in lines:
        key = line.lower().split()[0] if line.strip() else ""
        for name, count in REFERENCE_CLIFF_COUNTS.items():
            if key.startswith(name):
                out["reference_pairs_full_dataset"] = count
    return out


def write_cliffs(path: str | Path, pairs: Sequence[CliffPair]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id_a", "id_b", "subs", "scas", "smis", "structure_similarity", "transfection_difference"])
        for p in pairs:
            w.writerow(
                [p.id_a, p.id_b, fmt(p.subs), fmt(p.scas), fmt(p.smis), fmt(p.structure_similarity),
                 fmt(p.transfection_difference)]
            )  # fmt: skip


def run_split(records: Sequence[DatasetRecord], config: RunConfig, method: str) -> list[SplitAssignment]:
    data = [{"id": r.id, "smiles": r.smiles} for r in records]
    if method == "scaffold":
        return scaffold_split(data, config.split_ratios, config.seed)
    if method == "cliff":
        return cliff_split(data, config.clusters, config.seed, config.radius, config.width)
    raise InputError(f"unknown split method {method!r}")


def run_fingerprints(records: Sequence[DatasetRecord], config: RunConfig, kind: str) -> list[tuple[str, str, str]]:
    rows = []
    for r in records:
        if kind == "circular":
            fp = circular_fingerprint(r.graph, config.radius, config.width)
        elif kind == "keys":
            fp = structural_keys_fp(r.graph)
        else:
            raise InputError(f"unknown fingerprint kind {kind!r}")
        rows.append((r.id, fp.kind.value, fp.to_hex()))
    return rows


def graph_summary(smiles: str) -> dict:
    from .smiles import parse, tokenize

    g = parse(smiles)
    return {
        "smiles": smiles,
        "tokens": [{"kind": t.kind.value, "text": t.text, "atom_index": t.atom_index} for t in tokenize(smiles)],
        "atoms": [
            {"element": a.element, "charge": a.formal_charge, "aromatic": a.aromatic, "hydrogens": a.hydrogens}
            for a in g.atoms
        ],
        "bonds": [{"a": b.a, "b": b.b, "order": b.order.name.lower()} for b in g.bonds],
    }


# ---------------------------------------------------------------- manifests


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    path: str | Path,
    command: str,
    argv: Sequence[str],
    inputs: Sequence[str],
    outputs: Sequence[str],
    config: RunConfig | None = None,
    results: dict | None = None,
) -> None:
    manifest = {
        "tool": "transma",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "config": None if config is None else config.to_dict(),
        "inputs": {p: sha256_file(p) for p in inputs if p},
        "outputs": {p: sha256_file(p) for p in outputs if p},
        "results": results or {},
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def output_hashes(manifest: dict) -> dict[str, str]:
    return {p: sha256_file(p) for p in manifest["outputs"] if Path(p).exists()}


def embeddings_to_frame(rows) -> list[list[str]]:
    return [[mol_id, stage, str(vec.size), " ".join(fmt(v) for v in vec)] for mol_id, stage, vec in rows]


def explanation_rows(exps: Sequence[AttentionExplanation]) -> list[list[str]]:
    rows = []
    for e in exps:
        for i, (el, s) in enumerate(zip(e.elements, e.scores)):
            rows.append([e.id, str(i), el, fmt(s), fmt(e.prediction)])
    return rows


__all__ = [
    "AttentionExplanation",
    "PretrainResult",
    "TrainedModel",
    "build_samples",
    "load_model",
    "ranking_report",
    "run_cliffs",
    "run_embeddings",
    "run_explain",
    "run_predict",
    "run_pretrain",
    "run_split",
    "run_train",
    "save_model",
    "save_pretrain",
]
