"""Command-line interface.

Subcommands: synth, split, fit, predict, evaluate, report, run.
Exit codes: 0 success, 2 configuration error, 3 data error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import ConfigError, DataError, SpeciesIndex
from .assemblage import read_submission, write_submission
from .harness import (
    build_context,
    fit_method,
    load_manifest,
    MethodSpec,
    predict_method,
    report_diagnostics,
    run as run_manifest,
)
from .ingest import load_pa_csv, save_pa_csv, save_po_csv
from .metrics import evaluate_predictions
from .split import default_block_size, save_split_csv, spatial_block_split
from .synth import WorldConfig, generate_world, sample_pa, sample_po, save_world

log = logging.getLogger("sdmbench")


def _cmd_synth(args) -> int:
    cfg = WorldConfig()
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = WorldConfig.from_dict(json.load(fh))
    world = generate_world(cfg, args.seed)
    out = Path(args.out)
    save_world(world, out)
    pa = sample_pa(world, args.n_pa, args.seed)
    po = sample_po(world, args.n_po, args.seed)
    save_pa_csv(out / "pa.csv", pa, world.species_index)
    save_po_csv(out / "po.csv", po, world.species_index)
    print(f"world written to {out} ({args.n_pa} surveys, {args.n_po} records)")
    return 0


def _cmd_split(args) -> int:
    result = load_pa_csv(args.pa, crs=args.crs)
    block_size = args.block_size if args.block_size is not None else default_block_size(args.crs)
    split = spatial_block_split(
        result.surveys,
        block_size=block_size,
        test_fraction=args.test_fraction,
        seed=args.seed,
    )
    save_split_csv(args.out, split, result.surveys)
    print(
        f"{args.out}: {len(result.surveys)} surveys, "
        f"test fraction {split.test_fraction:.3f} (target {args.test_fraction})"
    )
    return 0


def _cmd_fit(args) -> int:
    manifest = load_manifest(args.manifest)
    ctx = build_context(manifest)
    spec = _method_spec(manifest, args.method)
    artifact = fit_method(
        ctx, spec, provenance={"manifest_hash": manifest.hash, "seed": manifest.seed}
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(artifact, fh)
        fh.write("\n")
    print(f"model for {spec.label} written to {args.out}")
    return 0


def _cmd_predict(args) -> int:
    manifest = load_manifest(args.manifest)
    ctx = build_context(manifest)
    with open(args.model, encoding="utf-8") as fh:
        artifact = json.load(fh)
    if artifact.get("method") != args.method:
        raise ConfigError(
            f"model file holds method {artifact.get('method')!r}, not {args.method!r}"
        )
    preds = predict_method(ctx, artifact)
    write_submission(args.out, preds, ctx.index)
    print(f"submission for {args.method} written to {args.out}")
    return 0


def _method_spec(manifest, name: str) -> MethodSpec:
    for spec in manifest.methods:
        if spec.label == name or spec.name == name:
            return spec
    raise ConfigError(f"method {name!r} not in manifest")


def _cmd_evaluate(args) -> int:
    truth_res = load_pa_csv(args.truth, crs=args.crs)
    index = truth_res.index
    if args.species_ids:
        with open(args.species_ids, encoding="utf-8") as fh:
            index = SpeciesIndex(json.load(fh)["ids"])
        truth_res = load_pa_csv(args.truth, index=index, crs=args.crs)
    preds = read_submission(args.submission, index)
    report = evaluate_predictions(truth_res.surveys, preds)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    print(f"micro_f1={report.micro_f1:.6f} macro_species_f1={report.macro_species_f1:.6f}")
    return 0


def _cmd_report(args) -> int:
    manifest = load_manifest(args.manifest) if args.manifest else None
    diag = report_diagnostics(args.run_dir, manifest)
    print(f"diagnostics written to {diag}")
    return 0


def _cmd_run(args) -> int:
    manifest = load_manifest(args.manifest)
    out = run_manifest(manifest, workers=args.workers)
    if args.report:
        report_diagnostics(out, manifest)
    print(f"run complete: {out / 'leaderboard.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdmbench",
        description="Benchmark for multi-label species composition prediction",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic world directory")
    p.add_argument("--config", help="world config JSON (defaults otherwise)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-pa", type=int, default=2500)
    p.add_argument("--n-po", type=int, default=20000)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("split", help="spatial block hold-out of a survey CSV")
    p.add_argument("--pa", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--block-size", type=float, default=None)
    p.add_argument("--test-fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--crs", choices=["lonlat", "planar"], default="lonlat")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("fit", help="fit one manifest method, save model JSON")
    p.add_argument("method")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="predict the test side from a model JSON")
    p.add_argument("method")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="score a submission against truth surveys")
    p.add_argument("--truth", required=True)
    p.add_argument("--submission", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--crs", choices=["lonlat", "planar"], default="lonlat")
    p.add_argument("--species-ids", help="JSON file with the full species id list")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="diagnostics bundle for a finished run")
    p.add_argument("run_dir")
    p.add_argument("--manifest")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("run", help="execute a run manifest end to end")
    p.add_argument("manifest")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--report", action="store_true", help="also build diagnostics")
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
