"""Command-line entry points for the analysis workflow."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .data import load_csv, summarize
from .discovery import oracle_ci_test
from .graph import MixedGraph, PriorKnowledge, to_dot
from .pipeline import (
    PipelineConfig,
    run_full,
    step1_per_category,
    step2_integrated,
    step3_predictive,
    write_report,
)
from .synth import make_clinical_synth
from .tree import tree_to_dot


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--schema", required=True, help="sidecar schema JSON")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with PipelineConfig fields")
    p.add_argument("--outcome", help="outcome column (default: the schema's outcome)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--max-cond-size", type=int)
    p.add_argument("--no-possible-dsep", action="store_true")
    p.add_argument("--no-orientation", action="store_true")
    p.add_argument("--tree-max-depth", type=int)
    p.add_argument("--cv-folds", type=int)
    p.add_argument("--permutation-trials", type=int)
    p.add_argument("--permutation-features", type=int)
    p.add_argument("--max-missing", type=int)
    p.add_argument("--min-rows", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--prior", help="prior-knowledge JSON (forbidden/required pairs)")
    p.add_argument(
        "--oracle-dag",
        help="graph JSON; replaces statistical CI tests with d-separation on it",
    )


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    payload: dict = {}
    if args.config:
        payload.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    flag_map = {
        "outcome": args.outcome,
        "alpha": args.alpha,
        "max_cond_size": args.max_cond_size,
        "tree_max_depth": args.tree_max_depth,
        "cv_folds": args.cv_folds,
        "permutation_trials": args.permutation_trials,
        "permutation_features": args.permutation_features,
        "max_missing": args.max_missing,
        "min_rows": args.min_rows,
        "seed": args.seed,
    }
    for key, value in flag_map.items():
        if value is not None:
            payload[key] = value
    if args.no_possible_dsep:
        payload["do_possible_dsep"] = False
    if args.no_orientation:
        payload["do_orientation"] = False
    config = PipelineConfig.from_json_dict(payload)
    if args.prior:
        config = replace(config, prior=PriorKnowledge.load(args.prior))
    return config


def _ci_factory(args: argparse.Namespace):
    if not getattr(args, "oracle_dag", None):
        return None
    dag = MixedGraph.load(args.oracle_dag)

    def factory(view):
        return oracle_ci_test(dag)

    return factory


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="causaltab",
        description="Causal structure learning and risk-tree analysis of clinical tables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("summarize", help="per-column occurrence summary")
    _add_data_args(p)
    p.add_argument("--no-outcome-split", action="store_true")

    p = sub.add_parser("step1", help="per-category graphs and feature selection")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("step2", help="integrated graph, bivariate tests, tree")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--features", help="comma-separated selected features")
    p.add_argument("--from-step1", help="step1 output JSON")
    p.add_argument("--out", required=True)

    p = sub.add_parser("step3", help="CV and permutation comparison")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--features", help="comma-separated tree features")
    p.add_argument("--from-step2", help="step2 output JSON")
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="full three-step pipeline")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="write the seeded synthetic cohort")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    args = parser.parse_args(argv)

    if args.command == "synth":
        dataset, truth = make_clinical_synth(args.seed)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        dataset.write_csv(outdir / "cohort.csv")
        dataset.write_schema(outdir / "cohort.schema.json")
        truth.save(outdir / "truth_graph.json")
        print(f"wrote cohort.csv, cohort.schema.json, truth_graph.json to {outdir}")
        return 0

    dataset = load_csv(args.data, args.schema)

    if args.command == "summarize":
        table = summarize(dataset, by_outcome=not args.no_outcome_split)
        print(table.to_json())
        return 0

    config = _build_config(args)
    factory = _ci_factory(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    if args.command == "step1":
        result = step1_per_category(dataset, config, factory)
        (outdir / "step1.json").write_text(
            json.dumps(result.to_json_dict(), indent=2, sort_keys=True) + "\n"
        )
        for cat in result.per_category:
            (outdir / f"category_{cat.category}.dot").write_text(to_dot(cat.graph))
        print(f"selected features: {', '.join(result.selected_features)}")
        return 0

    if args.command == "step2":
        selected = _features_arg(args, "from_step1", "selected_features")
        result = step2_integrated(dataset, selected, config, factory)
        (outdir / "step2.json").write_text(
            json.dumps(result.to_json_dict(), indent=2, sort_keys=True) + "\n"
        )
        (outdir / "integrated.dot").write_text(to_dot(result.graph))
        (outdir / "tree.dot").write_text(tree_to_dot(result.tree, dataset.schema_for))
        print(f"tree features: {', '.join(result.tree_features)}")
        return 0

    if args.command == "step3":
        feats = _features_arg(args, "from_step2", "tree_features")
        result = step3_predictive(dataset, feats, config)
        (outdir / "step3.json").write_text(
            json.dumps(result.to_json_dict(), indent=2, sort_keys=True) + "\n"
        )
        acc = result.cv_metrics.accuracy
        print(f"causal-feature CV accuracy: {acc:.3f} over {result.n_rows} rows")
        return 0

    if args.command == "run":
        report = run_full(dataset, config, factory)
        write_report(report, outdir, dataset)
        print(f"report written to {outdir}")
        return 0

    parser.error(f"unknown command {args.command!r}")
    return 2


def _features_arg(args: argparse.Namespace, from_key: str, json_field: str) -> list[str]:
    if args.features:
        return [f.strip() for f in args.features.split(",") if f.strip()]
    source = getattr(args, from_key, None)
    if source:
        payload = json.loads(Path(source).read_text(encoding="utf-8"))
        return list(payload[json_field])
    raise SystemExit("provide --features or the previous step's JSON output")


if __name__ == "__main__":
    sys.exit(main())
