"""``transma`` command-line interface.

Exit codes: 0 success, 2 input error, 3 contract violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections.abc import Sequence
from dataclasses import fields
from pathlib import Path

from . import pipeline
from .config import PRESETS, RunConfig, build_config, coerce
from .data import ingest, read_splits, write_splits
from .errors import ContractError, InputError

logger = logging.getLogger("transma")

EXIT_OK, EXIT_INPUT, EXIT_CONTRACT = 0, 2, 3


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration (flags override --preset and --config)")
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--config", help="flat key=value file")
    for f in fields(RunConfig):
        g.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, metavar="VALUE")


def _config(args) -> RunConfig:
    overrides = {
        k[len("cfg_") :]: coerce(k[len("cfg_") :], v)
        for k, v in vars(args).items()
        if k.startswith("cfg_") and v is not None
    }
    return build_config(args.preset, args.config, overrides)


def _manifest_path(args, primary: str) -> str:
    return args.manifest or f"{primary}.manifest.json"


def _write_rows(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transma", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="tokenize and parse SMILES to JSON")
    p.add_argument("smiles", nargs="+")

    p = sub.add_parser("fingerprint", help="circular or structural-key fingerprints as hex")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--kind", choices=["circular", "keys"], default="circular")
    p.add_argument("--manifest")
    _add_config_flags(p)

    p = sub.add_parser("cliffs", help="transfection-cliff tools")
    csub = p.add_subparsers(dest="action", required=True)
    m = csub.add_parser("mine", help="mine cliff pairs")
    m.add_argument("--input", required=True)
    m.add_argument("--output", required=True)
    m.add_argument("--manifest")
    _add_config_flags(m)

    p = sub.add_parser("split", help="scaffold or cliff dataset split")
    p.add_argument("method", choices=["scaffold", "cliff"])
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--manifest")
    _add_config_flags(p)

    p = sub.add_parser("pretrain", help="masked-atom pretraining of the 3D encoder")
    p.add_argument("--input", required=True, help="corpus CSV (id,smiles[,efficiency,cell_line])")
    p.add_argument("--checkpoint", required=True, help="output checkpoint")
    p.add_argument("--resume", help="continue from this pretraining checkpoint")
    p.add_argument("--stop-after", type=int, help="stop once this many total steps are done")
    p.add_argument("--manifest")
    _add_config_flags(p)

    p = sub.add_parser("train", help="fine-tune the full model with the hybrid loss")
    p.add_argument("--input", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--checkpoint", required=True, help="output checkpoint")
    p.add_argument("--metrics", required=True, help="output metrics JSON")
    p.add_argument("--predictions", help="optional CSV of training-time predictions for every molecule")
    p.add_argument("--pretrained", help="pretraining checkpoint for the 3D encoder")
    p.add_argument("--manifest")
    _add_config_flags(p)

    for name, help_text in (
        ("predict", "predict efficiencies (log2 units)"),
        ("explain", "per-atom attention scores"),
        ("embeddings", "pooled per-stage feature vectors"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--input", required=True)
        p.add_argument("--output", required=True)
        p.add_argument("--conformers", default="", help="XYZ-block file overriding pseudo-conformers")
        p.add_argument("--manifest")
        if name == "predict":
            p.add_argument("--report", help="rank-consistency JSON (Spearman when truths are present)")

    p = sub.add_parser("rerun", help="re-execute a manifest and verify identical outputs")
    p.add_argument("manifest")
    return parser


def cmd_parse(args, argv) -> int:
    out = [pipeline.graph_summary(s) for s in args.smiles]
    print(json.dumps(out if len(out) > 1 else out[0], indent=2))
    return EXIT_OK


def cmd_fingerprint(args, argv) -> int:
    config = _config(args)
    records = ingest(args.input, require_efficiency=False)
    _write_rows(args.output, ["id", "kind", "bits"], pipeline.run_fingerprints(records, config, args.kind))
    pipeline.write_manifest(_manifest_path(args, args.output), "fingerprint", argv, [args.input], [args.output], config)
    return EXIT_OK


def cmd_cliffs(args, argv) -> int:
    config = _config(args)
    records = ingest(args.input)
    pairs = pipeline.run_cliffs(records, config)
    pipeline.write_cliffs(args.output, pairs)
    summary = pipeline.cliff_reference(records, len(pairs))
    ref = summary.get("reference_pairs_full_dataset")
    line = f"mined {len(pairs)} cliff pairs from {len(records)} molecules"
    if ref is not None:
        line += f" (published count for this cell line on the full dataset: {ref}; non-binding)"
    print(line)
    pipeline.write_manifest(
        _manifest_path(args, args.output), "cliffs mine", argv, [args.input], [args.output], config, summary
    )
    return EXIT_OK


def cmd_split(args, argv) -> int:
    config = _config(args)
    records = ingest(args.input, require_efficiency=False)
    assignments = pipeline.run_split(records, config, args.method)
    write_splits(args.output, assignments)
    counts = {p: sum(a.partition.value == p for a in assignments) for p in ("train", "val", "test")}
    print(" ".join(f"{k}={v}" for k, v in counts.items()))
    pipeline.write_manifest(
        _manifest_path(args, args.output), f"split {args.method}", argv, [args.input], [args.output], config, counts
    )
    return EXIT_OK


def cmd_pretrain(args, argv) -> int:
    config = _config(args)
    corpus = ingest(args.input, require_efficiency=False)
    result = pipeline.run_pretrain(config, corpus, resume=args.resume, stop_after=args.stop_after)
    pipeline.save_pretrain(args.checkpoint, result, config)
    summary = {"steps": result.optimizer.step, "final_loss": result.losses[-1] if result.losses else None}
    print(f"pretrained {summary['steps']} steps, final loss {summary['final_loss']}")
    inputs = [args.input] + ([args.resume] if args.resume else []) + ([config.conformers] if config.conformers else [])
    pipeline.write_manifest(
        _manifest_path(args, args.checkpoint), "pretrain", argv, inputs, [args.checkpoint], config, summary
    )
    return EXIT_OK


def cmd_train(args, argv) -> int:
    config = _config(args)
    records = ingest(args.input)
    splits = read_splits(args.splits)
    trained, report = pipeline.run_train(config, records, splits, pretrained=args.pretrained)
    pipeline.save_model(args.checkpoint, trained)
    predictions = report.pop("predictions")
    pipeline.write_json(args.metrics, report)
    outputs = [args.checkpoint, args.metrics]
    if args.predictions:
        rows = [(r.id, pipeline.fmt(predictions[r.id]), pipeline.fmt(r.efficiency)) for r in records]
        _write_rows(args.predictions, ["id", "prediction", "efficiency"], rows)
        outputs.append(args.predictions)
    for part, m in report["partitions"].items():
        print(f"{part}: " + " ".join(f"{k}={v:.4g}" for k, v in m.items()))
    inputs = [args.input, args.splits] + ([args.pretrained] if args.pretrained else [])
    pipeline.write_manifest(_manifest_path(args, args.checkpoint), "train", argv, inputs, outputs, config, report)
    return EXIT_OK


def _inference_inputs(args) -> list[str]:
    return [args.checkpoint, args.input] + ([args.conformers] if args.conformers else [])


def cmd_predict(args, argv) -> int:
    trained = pipeline.load_model(args.checkpoint)
    records = ingest(args.input, require_efficiency=False)
    rows, report = pipeline.run_predict(trained, records, args.conformers)
    _write_rows(args.output, ["id", "prediction", "efficiency"], [(i, pipeline.fmt(p), pipeline.fmt(t)) for i, p, t in rows])
    outputs = [args.output]
    if args.report:
        pipeline.write_json(args.report, report)
        outputs.append(args.report)
    if "spearman" in report:
        print(f"spearman rank consistency: {report['spearman']:.4f} over {report['n_with_truth']} molecules")
    results = {k: v for k, v in report.items() if k in ("n", "n_with_truth", "spearman")}
    pipeline.write_manifest(
        _manifest_path(args, args.output), "predict", argv, _inference_inputs(args), outputs, trained.config, results
    )
    return EXIT_OK


def cmd_explain(args, argv) -> int:
    trained = pipeline.load_model(args.checkpoint)
    records = ingest(args.input, require_efficiency=False)
    exps = pipeline.run_explain(trained, records, args.conformers)
    _write_rows(args.output, ["id", "atom_index", "element", "attention_score", "prediction"], pipeline.explanation_rows(exps))
    pipeline.write_manifest(
        _manifest_path(args, args.output), "explain", argv, _inference_inputs(args), [args.output], trained.config
    )
    return EXIT_OK


def cmd_embeddings(args, argv) -> int:
    trained = pipeline.load_model(args.checkpoint)
    records = ingest(args.input, require_efficiency=False)
    rows = pipeline.run_embeddings(trained, records, args.conformers)
    _write_rows(args.output, ["id", "stage", "width", "values"], pipeline.embeddings_to_frame(rows))
    pipeline.write_manifest(
        _manifest_path(args, args.output), "embeddings", argv, _inference_inputs(args), [args.output], trained.config
    )
    return EXIT_OK


def cmd_rerun(args, argv) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    recorded = manifest["outputs"]
    for path, digest in manifest["inputs"].items():
        if pipeline.sha256_file(path) != digest:
            raise InputError(f"input {path} changed since the manifest was written")
    code = main(manifest["argv"])
    if code != EXIT_OK:
        return code
    now = {p: pipeline.sha256_file(p) for p in recorded}
    changed = sorted(p for p in recorded if now[p] != recorded[p])
    if changed:
        print("outputs differ from the manifest: " + ", ".join(changed))
        return EXIT_CONTRACT
    print(f"reproduced {len(recorded)} output(s) byte-for-byte")
    return EXIT_OK


COMMANDS = {
    "parse": cmd_parse,
    "fingerprint": cmd_fingerprint,
    "cliffs": cmd_cliffs,
    "split": cmd_split,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "predict": cmd_predict,
    "explain": cmd_explain,
    "embeddings": cmd_embeddings,
    "rerun": cmd_rerun,
}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, argv)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ContractError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
