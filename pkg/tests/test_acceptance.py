"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The training criteria (3 and 9) take a few minutes on one core; they are
marked ``slow`` but stay in the default run.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from transma import pipeline
from transma.cli import EXIT_OK, main
from transma.cliffs import is_cliff, levenshtein, tanimoto, transfection_difference
from transma.config import RunConfig, build_config
from transma.conformer import pseudo_conformer
from transma.data import DatasetRecord
from transma.encoders import (
    BiasedAttentionLayer,
    MambaBlock,
    PairBias,
    PretrainHeads,
    PretrainWeights,
    Structure3DEncoder,
    Structure3DInput,
    corrupt,
    pretrain_loss,
    selective_scan,
)
from transma.fingerprints import BitFingerprint, FingerprintKind, circular_fingerprint, murcko_scaffold
from transma.fusion import MolAttention, RegressionHead, triplet_loss
from transma.metrics import adjusted_rand_index
from transma.model import MoleculeSample, TransMA
from transma.encoders.vocab import TokenVocab
from transma.nn import Parameter, Tensor, grad_check
from transma.nn import functional as F
from transma.rng import substream
from transma.smiles import parse
from transma.splitting import Partition, cliff_split, cluster_quota, scaffold_split, spectral_cluster, spectral_cluster_affinity
from transma.synthetic import key_atom_dataset, lipid_library

FIXTURE = Path(__file__).parent / "data" / "lipids_100.csv"


def records_from(dicts, cell_line="synthetic"):
    out = []
    for d in dicts:
        out.append(DatasetRecord(d["id"], d["smiles"], d["efficiency"], d.get("cell_line", cell_line), parse(d["smiles"])))
    return out


# ---------------------------------------------------------------- 1


def naive_scan(u, delta, A, B, C, D):
    length, d = u.shape
    y = np.zeros((length, d))
    for c in range(d):
        for k in range(A.shape[1]):
            x = 0.0
            for t in range(length):
                x = math.exp(delta[t, c] * A[c, k]) * x + delta[t, c] * B[t, k] * u[t, c]
                y[t, c] += x * C[t, k]
        y[:, c] += D[c] * u[:, c]
    return y


def test_criterion_01_selective_scan_oracle(criterion):
    rng = np.random.default_rng(2024)
    worst, elapsed = 0.0, 0.0
    for _ in range(200):
        length, d, n = int(rng.integers(1, 65)), int(rng.integers(1, 9)), int(rng.integers(1, 5))
        args = (
            rng.normal(size=(length, d)),
            np.log1p(np.exp(rng.normal(size=(length, d)))),
            -rng.uniform(0.1, 5.0, size=(d, n)),
            rng.normal(size=(length, n)),
            rng.normal(size=(length, n)),
            rng.normal(size=d),
        )
        t0 = time.perf_counter()
        y = selective_scan(*args).data
        elapsed += time.perf_counter() - t0
        worst = max(worst, float(np.abs(y - naive_scan(*args)).max()))
    criterion(1, "selective-scan oracle", worst < 1e-10 and elapsed < 5.0,
              f"max abs diff {worst:.2e} over 200 configs, scan time {elapsed:.2f}s")  # fmt: skip


# ---------------------------------------------------------------- 2


def _primitive_cases():
    rng = np.random.default_rng(7)

    def p(*shape):
        return Parameter(rng.normal(size=shape))

    a, w, b = p(4, 5), p(5, 3), p(3)
    yield "linear", lambda: F.sum(F.square(F.linear(a, w, b))), [a, w, b]
    m1, m2 = p(2, 3, 4), p(2, 4, 3)
    yield "matmul", lambda: F.sum(F.tanh(F.matmul(m1, m2))), [m1, m2]
    x = p(3, 6)
    for name, fn in (("sigmoid", F.sigmoid), ("tanh", F.tanh), ("silu", F.silu), ("softplus", F.softplus), ("exp", F.exp)):
        yield name, (lambda fn=fn: F.sum(F.mul(fn(x), x))), [x]
    yield "relu", lambda: F.sum(F.square(F.relu(F.add(x, 0.05)))), [x]
    yield "softmax", lambda: F.sum(F.mul(F.softmax(x), F.tanh(x))), [x]
    g, be = p(6), p(6)
    yield "layer_norm", lambda: F.sum(F.tanh(F.layer_norm(x, g, be))), [x, g, be]
    k = p(4, 6)
    yield "causal_conv", lambda: F.sum(F.square(F.conv1d_depthwise(x, k))), [x, k]
    yield "pairwise_distances", lambda: F.sum(F.pairwise_distances(x)), [x]
    yield "concat_stack_index", lambda: F.sum(F.square(F.stack([F.concat([x, x], 1)[:, 2:8], F.transpose(x, (0, 1))])[:, 1:])), [x]
    t = rng.normal(size=(3, 6))
    yield "mse", lambda: F.mse(x, t), [x]
    yield "smooth_l1", lambda: F.smooth_l1(x, t * 2), [x]
    yield "cross_entropy", lambda: F.cross_entropy(x, [0, 5, 2]), [x]
    scan = [p(6, 3), Parameter(rng.uniform(0.05, 0.8, size=(6, 3))), Parameter(-rng.uniform(0.5, 2, size=(3, 2))), p(6, 2), p(6, 2), p(3)]
    yield "selective_scan", lambda: F.sum(F.square(selective_scan(*scan))), scan
    block = MambaBlock(6, 3, rng)
    h = p(5, 6)
    yield "mamba_block", lambda: F.sum(F.square(block(h))), [h, *block.parameters().values()]
    pb = PairBias(2, rng)
    dist = np.abs(rng.normal(size=(4, 4))) * 3
    dist = dist + dist.T
    bonds = rng.integers(0, 6, size=(4, 4))
    yield "pair_bias", lambda: F.sum(F.square(pb(dist, bonds))), list(pb.parameters().values())
    layer = BiasedAttentionLayer(8, 2, 16, rng)
    h8, bias = p(4, 8), p(4, 4, 2)
    yield "biased_attention", lambda: F.sum(F.square(layer(h8, bias))), [h8, bias, *layer.parameters().values()]
    heads = PretrainHeads(8, rng)
    yield "distance_head", lambda: F.sum(F.square(heads.distance_correction(h8))), [h8, heads.dist_weight, heads.dist_bias]
    att, head = MolAttention(8, rng, ratio=2), RegressionHead(8, rng, hidden=5)
    z1, z2 = p(4, 4), p(4, 4)

    def fused_head():
        s, f = att(z1, z2)
        return head(f, s)

    yield "mol_attention_head", fused_head, [z1, z2, *att.parameters().values(), *head.parameters().values()]
    e1, e2 = p(3, 4), p(3, 4)
    yield "triplet_loss", lambda: triplet_loss(e1, e2, 1.5), [e1, e2]


def test_criterion_02_gradient_suite(criterion):
    t0 = time.perf_counter()
    errors = {name: grad_check(fn, inputs, eps=1e-4, max_coords=16) for name, fn, inputs in _primitive_cases()}
    worst_name = max(errors, key=errors.get)

    config = build_config("mini")
    model = TransMA(config.model_config(), substream(0, "gradcheck"))
    dicts = lipid_library(3, seed=4)
    vocab = TokenVocab.build([d["smiles"] for d in dicts])
    samples = []
    for d in dicts:
        g = parse(d["smiles"])
        samples.append(MoleculeSample.build(d["id"], d["smiles"], pseudo_conformer(g), vocab, d["efficiency"], graph=g))
    targets = np.array([0.3, -0.5, 0.8])
    params = list(model.parameters().values())
    e2e = grad_check(lambda: model.batch_loss(samples, targets, 6.0, 1.0)[0], params, eps=1e-4, max_coords=3)
    elapsed = time.perf_counter() - t0
    ok = errors[worst_name] < 1e-4 and e2e < 1e-3 and elapsed < 60
    criterion(2, "gradient suite", ok,
              f"{len(errors)} primitives, worst {worst_name} {errors[worst_name]:.1e}; "
              f"mini hybrid loss {e2e:.1e}; {elapsed:.1f}s")  # fmt: skip


# ---------------------------------------------------------------- 3


def train_all(dicts, config):
    recs = records_from(dicts)
    splits = {r.id: Partition.TRAIN for r in recs}
    return pipeline.run_train(config, recs, splits)


@pytest.mark.slow
def test_criterion_03_overfit(criterion):
    config = build_config("mini")
    data = lipid_library(32, seed=0)
    t0 = time.perf_counter()
    _, report = train_all(data, config)
    elapsed = time.perf_counter() - t0
    mse = report["partitions"]["train"]["mse"]
    # same error in the +-0.95 band the loss is computed in; informational only
    y = np.array([r["efficiency"] for r in data])
    scaled = mse / ((y.max() - y.min()) / 1.9) ** 2
    criterion(3, "overfit 32 molecules", mse < 0.05 and report["steps"] <= 2000 and elapsed < 300,
              f"train MSE {mse:.4f} log2 units ({scaled:.4f} scaled) after {report['steps']} steps "
              f"(beta {report['beta']}), {elapsed:.0f}s")  # fmt: skip


# ---------------------------------------------------------------- 4


def test_criterion_04_cliff_gate_arithmetic(criterion):
    gap = 1.0 / math.log10(2.0)
    at_gap = abs(transfection_difference(0.0, gap) - 1.0)
    rng = np.random.default_rng(11)
    m = rng.uniform(-8, 8, size=(5000, 2))
    diffs = np.array([transfection_difference(a, b) for a, b in m])
    err = float(np.abs(diffs - np.abs(m[:, 1] - m[:, 0]) * math.log10(2.0)).max())
    agree = all((d > 1.0) == (abs(b - a) > gap) for d, (a, b) in zip(diffs, m) if abs(abs(b - a) - gap) > 1e-9)
    paper_case = is_cliff(0.91, 1.69)
    below = not is_cliff(0.89, 1.69)
    ok = at_gap < 1e-12 and err < 1e-12 and agree and paper_case and below
    criterion(4, "cliff-gate arithmetic", ok,
              f"gap {gap:.4f}, |diff(gap)-1| {at_gap:.1e}, equivalence err {err:.1e}, "
              f"(0.91, 1.69) cliff={paper_case}, (0.89, 1.69) cliff={not below}")  # fmt: skip


# ---------------------------------------------------------------- 5


def dp_levenshtein(s, t):
    d = [[0] * (len(t) + 1) for _ in range(len(s) + 1)]
    for i in range(len(s) + 1):
        d[i][0] = i
    for j in range(len(t) + 1):
        d[0][j] = j
    for i in range(1, len(s) + 1):
        for j in range(1, len(t) + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (s[i - 1] != t[j - 1]))
    return d[len(s)][len(t)]


def test_criterion_05_similarity_oracles(criterion):
    rng = np.random.default_rng(5)
    alphabet = list("CNOSc1()=#[]+-")
    lev_bad = 0
    for _ in range(1000):
        s = "".join(rng.choice(alphabet, size=int(rng.integers(0, 41))))
        t = "".join(rng.choice(alphabet, size=int(rng.integers(0, 41))))
        lev_bad += levenshtein(s, t) != dp_levenshtein(s, t)
    tan_bad = 0
    for _ in range(1000):
        width = int(rng.choice([8, 64, 256, 2048]))
        density = rng.uniform(0, 0.6)
        x = (rng.random(width) < density).astype(np.uint8)
        y = (rng.random(width) < density).astype(np.uint8)
        both = sum(1 for i in range(width) if x[i] and y[i])
        either = sum(1 for i in range(width) if x[i] or y[i])
        expected = 1.0 if either == 0 else both / either
        got = tanimoto(BitFingerprint(x, FingerprintKind.CIRCULAR), BitFingerprint(y, FingerprintKind.CIRCULAR))
        tan_bad += got != expected
    criterion(5, "similarity oracles", lev_bad == 0 and tan_bad == 0,
              f"Levenshtein mismatches {lev_bad}/1000, Tanimoto mismatches {tan_bad}/1000")  # fmt: skip


# ---------------------------------------------------------------- 6


def _ring(size, het):
    atoms = ["C"] * size
    if het:
        atoms[size // 2] = het
    atoms[0] += "1"
    atoms[-1] += "1"
    return "".join(atoms)


def random_scaffold_dataset(seed):
    """Molecules over many distinct scaffolds; each scaffold group has 1 to 3 members."""
    rng = substream(seed, "acceptance-scaffolds")
    shapes = [(s, h, link) for s in range(3, 9) for h in ("", "N", "O", "S") for link in range(1, 4)]
    n_groups = int(rng.integers(15, 40))
    chosen = rng.choice(len(shapes), size=n_groups, replace=False)
    out = []
    for gi in chosen:
        size, het, link = shapes[int(gi)]
        for tail in range(1, int(rng.integers(1, 4)) + 1):
            smiles = "C" * tail + "c1ccc(cc1)" + "C" * link + _ring(size, het)
            out.append({"id": f"S{len(out):04d}", "smiles": smiles})
    return out


def test_criterion_06_split_properties(criterion):
    worst_dev, overlaps, reproducible = 0.0, 0, True
    for seed in range(50):
        data = random_scaffold_dataset(seed)
        out = scaffold_split(data, seed=seed)
        reproducible &= scaffold_split(data, seed=seed) == out
        keys = {}
        for d, a in zip(data, out):
            keys.setdefault(murcko_scaffold(parse(d["smiles"])).smiles_like_key, set()).add(a.partition)
        overlaps += sum(len(p) > 1 for p in keys.values())
        n = len(data)
        for part, ratio in zip(Partition, (0.8, 0.1, 0.1)):
            count = sum(a.partition is part for a in out)
            worst_dev = max(worst_dev, abs(count - ratio * n))
    lib = lipid_library(120, seed=9)
    cs = cliff_split(lib, k=5, seed=0)
    reproducible &= cliff_split(lib, k=5, seed=0) == cs
    quota_dev = 0.0
    for c in range(5):
        members = [a for a in cs if a.cluster == c]
        n_test = sum(a.partition is Partition.TEST for a in members)
        quota_dev = max(quota_dev, abs(n_test - 0.1 * len(members)))
        assert (n_test, *(sum(a.partition is p for a in members) for p in (Partition.TRAIN, Partition.VAL))) == cluster_quota(len(members))
    ok = overlaps == 0 and worst_dev <= 2 and quota_dev <= 1 and reproducible
    criterion(6, "split properties", ok,
              f"scaffold overlap {overlaps}, worst size deviation {worst_dev:.1f} over 50 datasets, "
              f"cliff test-quota deviation {quota_dev:.1f}, reproducible {reproducible}")  # fmt: skip


# ---------------------------------------------------------------- 7


def test_criterion_07_spectral_clustering(criterion):
    truth = np.repeat([0, 1], [12, 9])
    rng = np.random.default_rng(3)
    affinity = np.where(truth[:, None] == truth[None, :], rng.uniform(0.6, 1.0, (21, 21)), rng.uniform(0.0, 0.05, (21, 21)))
    affinity = (affinity + affinity.T) / 2
    ari = adjusted_rand_index(truth, spectral_cluster_affinity(affinity, k=2, seed=0))
    fps = [circular_fingerprint(parse(d["smiles"])) for d in lipid_library(200, seed=1)]
    t0 = time.perf_counter()
    labels = spectral_cluster(fps, k=5, seed=0)
    elapsed = time.perf_counter() - t0
    ok = ari == 1.0 and elapsed < 30 and len(set(labels.tolist())) == 5
    criterion(7, "spectral clustering", ok, f"two-block ARI {ari:.3f}; k=5 on 200 molecules in {elapsed:.1f}s")


# ---------------------------------------------------------------- 8


def test_criterion_08_masking_contract(criterion):
    wrong = []
    for n in range(1, 41):
        g = parse("C" * n)
        inp = Structure3DInput.from_graph(g, pseudo_conformer(g))
        expected = max(1, (15 * n + 50) // 100)  # round half up in integers
        got = len(corrupt(inp, seed=0, step=n, index=0).masked)
        if got != expected:
            wrong.append((n, got, expected))
    cfg = RunConfig()
    weights = PretrainWeights(cfg.weight_type, cfg.weight_coord, cfg.weight_distance)
    rng = np.random.default_rng(0)
    enc = Structure3DEncoder(16, 2, 1, 32, rng)
    heads = PretrainHeads(16, rng)
    batch = []
    for smi in ("CCOC(=O)CCN", "c1ccccc1CCO", "CCCCCCCCN(C)C"):
        g = parse(smi)
        batch.append(Structure3DInput.from_graph(g, pseudo_conformer(g)))
    full, parts = pretrain_loss(enc, heads, batch, 0, 0, weights=weights)
    observed = {}
    for field in ("atom_type", "coord", "distance"):
        dropped = PretrainWeights(**{**weights.__dict__, field: 0.0})
        loss, _ = pretrain_loss(enc, heads, batch, 0, 0, weights=dropped)
        observed[field] = (full.item() - loss.item()) / parts[field]
    ratio_ok = all(abs(observed[f] - e) < 1e-9 for f, e in (("atom_type", 1.0), ("coord", 5.0), ("distance", 10.0)))
    shown = "/".join(f"{observed[f]:.6g}" for f in ("atom_type", "coord", "distance"))
    criterion(8, "masking contract", not wrong and ratio_ok,
              f"mask counts correct for n=1..40 (mismatches {wrong}); observed weights {shown}")  # fmt: skip


# ---------------------------------------------------------------- 9


KEY_ATOM_GROUPS = 12
KEY_ATOM_STEPS = 1200


def key_atom_run(model_seed):
    recs = key_atom_dataset(KEY_ATOM_GROUPS, seed=0)
    dicts = [{"id": r.id, "smiles": r.smiles, "efficiency": r.efficiency} for r in recs]
    config = build_config("mini", overrides={"seed": model_seed, "steps": KEY_ATOM_STEPS, "beta": 3.0})
    trained, report = train_all(dicts, config)
    exps = pipeline.run_explain(trained, records_from(dicts))
    hits = sum(int(np.argmax(e.scores)) == r.key_atom for e, r in zip(exps, recs))
    return recs, exps, hits, report


@pytest.mark.slow
def test_criterion_09_explanation_contract(criterion):
    fixture = records_from([{**r, "efficiency": float(r["efficiency"])} for r in csv.DictReader(FIXTURE.open())])
    trained, _ = pipeline.run_train(build_config("mini", overrides={"steps": 2}), fixture, {r.id: Partition.TRAIN for r in fixture})
    contract = all(
        len(e.scores) == r.graph.n_atoms and np.all((e.scores > 0) & (e.scores < 1))
        for e, r in zip(pipeline.run_explain(trained, fixture), fixture)
    )
    recs, exps, hits, report = key_atom_run(0)
    contract &= all(len(e.scores) == len(r.smiles) and np.all((e.scores > 0) & (e.scores < 1)) for e, r in zip(exps, recs))
    frac = hits / len(recs)
    detail = (f"score range and row counts ok={contract}; key atom is the top-scored atom in {hits}/{len(recs)} "
              f"({frac:.0%}) after {KEY_ATOM_STEPS} steps, train MSE {report['partitions']['train']['mse']:.3f}")  # fmt: skip
    if os.environ.get("TRANSMA_SEED_SWEEP"):
        sweep = [key_atom_run(s)[2] for s in (1, 2)]
        detail += f"; non-binding seeds 1,2: {sweep[0]}/{len(recs)}, {sweep[1]}/{len(recs)}"
    criterion(9, "explanation contract", contract and frac >= 0.8, detail)


# ---------------------------------------------------------------- 10 and 11


MINI_FAST = ["--preset", "mini", "--steps", "20", "--pretrain-steps", "5"]


@pytest.fixture(scope="module")
def e2e(tmp_path_factory):
    d = tmp_path_factory.mktemp("e2e")
    data = str(FIXTURE)
    commands = {
        "cliffs": ["cliffs", "mine", "--input", data, "--output", str(d / "cliffs.csv")],
        "split": ["split", "cliff", "--input", data, "--output", str(d / "splits.csv"), *MINI_FAST],
        "pretrain": ["pretrain", "--input", data, "--checkpoint", str(d / "pre.ckpt"), *MINI_FAST],
        "train": ["train", "--input", data, "--splits", str(d / "splits.csv"), "--checkpoint", str(d / "model.ckpt"),
                  "--metrics", str(d / "metrics.json"), "--pretrained", str(d / "pre.ckpt"), *MINI_FAST],
        "predict": ["predict", "--checkpoint", str(d / "model.ckpt"), "--input", data, "--output", str(d / "preds.csv"),
                    "--report", str(d / "ranking.json")],
        "explain": ["explain", "--checkpoint", str(d / "model.ckpt"), "--input", data, "--output", str(d / "explain.csv")],
        "embeddings": ["embeddings", "--checkpoint", str(d / "model.ckpt"), "--input", data, "--output", str(d / "emb.csv")],
    }  # fmt: skip
    codes = {name: main(argv) for name, argv in commands.items()}
    manifests = {
        "cliffs": d / "cliffs.csv.manifest.json",
        "split": d / "splits.csv.manifest.json",
        "pretrain": d / "pre.ckpt.manifest.json",
        "train": d / "model.ckpt.manifest.json",
        "predict": d / "preds.csv.manifest.json",
        "explain": d / "explain.csv.manifest.json",
        "embeddings": d / "emb.csv.manifest.json",
    }
    return d, codes, manifests


def test_criterion_10_end_to_end(criterion, e2e):
    d, codes, manifests = e2e
    reruns = {name: main(["rerun", str(path)]) for name, path in manifests.items()}
    cliffs = json.loads(manifests["cliffs"].read_text())["results"]
    ok = all(c == EXIT_OK for c in codes.values()) and all(c == EXIT_OK for c in reruns.values())
    ok &= cliffs.get("reference_pairs_full_dataset") == 4267
    failed = [n for n, c in {**codes, **{f"rerun {k}": v for k, v in reruns.items()}}.items() if c != EXIT_OK]
    criterion(10, "end-to-end smoke", ok,
              f"{len(codes)} commands and {len(reruns)} reruns, failures {failed or 'none'}; "
              f"{cliffs['pairs']} cliff pairs mined (full-dataset HeLa reference {cliffs.get('reference_pairs_full_dataset')}, "
              f"non-binding)")  # fmt: skip


def test_criterion_11_ranking_harness(criterion, e2e, tmp_path):
    ids = [f"x{i}" for i in range(12)]
    truth = np.linspace(-3, 4, 12)
    rhos = []
    for transform in (lambda v: v, np.exp, lambda v: v**3, lambda v: 0.01 * v + 7):
        rhos.append(pipeline.ranking_report(ids, list(truth), transform(truth))["spearman"])
    d, codes, _ = e2e
    external = tmp_path / "external.csv"
    with open(FIXTURE) as src, open(external, "w") as dst:
        for line in itertools.islice(src, 11):
            dst.write(",".join(line.strip().split(",")[:2]) + "\n")
    out = tmp_path / "ext_preds.csv"
    code = main(["predict", "--checkpoint", str(d / "model.ckpt"), "--input", str(external), "--output", str(out),
                 "--report", str(tmp_path / "ext.json")])  # fmt: skip
    ext = json.loads((tmp_path / "ext.json").read_text())
    fixture_report = json.loads((d / "ranking.json").read_text())
    ok = all(r == 1.0 for r in rhos) and code == EXIT_OK and len(ext["order_by_prediction"]) == 10 and "spearman" not in ext
    criterion(11, "ranking harness", ok,
              f"monotone fixtures Spearman {rhos}; external ordering of {len(ext['order_by_prediction'])} molecules "
              f"emitted; fixture Spearman after smoke training {fixture_report['spearman']:.3f} (non-binding)")  # fmt: skip
