"""Three-step analysis workflow over a configured clinical dataset.

Step 1 learns one graph per feature category (outcome included in each),
selecting features within two hops of the outcome. Step 2 re-learns an
integrated graph over the selected features, runs the bivariate tests,
and fits the interpretable depth-limited tree. Step 3 cross-validates the
tree's features and compares them against trees on randomly drawn feature
sets with matched subject counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import Dataset, DatasetView, complete_cases, summarize
from .discovery import CITest, LearnConfig, run_fci
from .effects import annotate_strengths, effect_table
from .errors import CausalTabError
from .graph import MixedGraph, PriorKnowledge, StyleConfig, neighbors_within, to_dot
from .stats import (
    ContingencyTable2x2,
    FoldIncrease,
    TestResult,
    fisher_exact,
    fold_increase,
    point_biserial,
)
from .tree import (
    Metrics,
    PermutationResult,
    TreeNode,
    evaluate,
    fit_tree,
    kfold_cv,
    permutation_baseline,
    tree_features,
    tree_to_dot,
)

__all__ = [
    "PipelineConfig",
    "CategoryResult",
    "Step1Result",
    "BivariateRow",
    "Step2Result",
    "Step3Result",
    "PipelineReport",
    "step1_per_category",
    "step2_integrated",
    "step3_predictive",
    "run_full",
    "write_report",
]

#: Display cutoff for fold-increase factors (one-decimal rounding first).
FOLD_DISPLAY_MIN = 1.2


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for the full workflow; defaults follow the reference protocol."""

    outcome: str | None = None
    alpha: float = 0.05
    max_cond_size: int | None = 3
    do_possible_dsep: bool = False
    do_orientation: bool = True
    tree_max_depth: int = 4
    cv_folds: int = 10
    permutation_trials: int = 1000
    permutation_features: int | None = None
    max_missing: int | None = None
    min_rows: int = 20
    seed: int = 0
    prior: PriorKnowledge | None = None

    def learn_config(self) -> LearnConfig:
        return LearnConfig(
            alpha=self.alpha,
            max_cond_size=self.max_cond_size,
            do_possible_dsep=self.do_possible_dsep,
            do_orientation=self.do_orientation,
        )

    def to_json_dict(self) -> dict:
        out = {
            "outcome": self.outcome,
            "alpha": self.alpha,
            "max_cond_size": self.max_cond_size,
            "do_possible_dsep": self.do_possible_dsep,
            "do_orientation": self.do_orientation,
            "tree_max_depth": self.tree_max_depth,
            "cv_folds": self.cv_folds,
            "permutation_trials": self.permutation_trials,
            "permutation_features": self.permutation_features,
            "max_missing": self.max_missing,
            "min_rows": self.min_rows,
            "seed": self.seed,
        }
        if self.prior is not None:
            out["prior"] = {
                "forbidden": sorted(sorted(p) for p in self.prior.forbidden),
                "required": sorted(sorted(p) for p in self.prior.required),
            }
        return out

    @classmethod
    def from_json_dict(cls, payload: dict) -> "PipelineConfig":
        prior = None
        if payload.get("prior"):
            prior = PriorKnowledge.from_pairs(
                forbidden=[tuple(p) for p in payload["prior"].get("forbidden", [])],
                required=[tuple(p) for p in payload["prior"].get("required", [])],
            )
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        kwargs = {k: v for k, v in payload.items() if k in known and k != "prior"}
        return cls(prior=prior, **kwargs)


@dataclass(frozen=True)
class CategoryResult:
    category: str
    columns: tuple[str, ...]
    dropped_constant: tuple[str, ...]
    n_rows: int
    graph: MixedGraph
    selected: tuple[str, ...]
    tests_run: int

    def to_json_dict(self) -> dict:
        return {
            "category": self.category,
            "columns": list(self.columns),
            "dropped_constant": list(self.dropped_constant),
            "n_rows": self.n_rows,
            "graph": self.graph.to_json_dict(),
            "selected": list(self.selected),
            "tests_run": self.tests_run,
        }


@dataclass(frozen=True)
class Step1Result:
    per_category: tuple[CategoryResult, ...]
    selected_features: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "per_category": [c.to_json_dict() for c in self.per_category],
            "selected_features": list(self.selected_features),
        }


@dataclass(frozen=True)
class BivariateRow:
    feature: str
    test: str
    n_rows: int
    result: TestResult
    table: tuple[int, int, int, int] | None = None
    rate_with: float | None = None
    rate_without: float | None = None
    fold: FoldIncrease | None = None
    fold_direction: str | None = None
    fold_shown: bool = False

    def to_json_dict(self) -> dict:
        out = {
            "feature": self.feature,
            "test": self.test,
            "n_rows": self.n_rows,
            "statistic": self.result.statistic,
            "p_value": self.result.p_value,
            "effect": self.result.effect,
        }
        if self.table is not None:
            out["table"] = list(self.table)
            out["rate_with"] = self.rate_with
            out["rate_without"] = self.rate_without
            out["fold"] = {
                "ratio": self.fold.ratio,
                "factor": self.fold.factor,
                "direction": self.fold_direction,
                "shown": self.fold_shown,
            }
        return out


@dataclass(frozen=True)
class Step2Result:
    columns: tuple[str, ...]
    dropped_constant: tuple[str, ...]
    n_rows: int
    graph: MixedGraph
    effects: tuple[dict, ...]
    bivariate: tuple[BivariateRow, ...]
    tree: TreeNode
    tree_features: tuple[str, ...]
    train_metrics: Metrics
    tests_run: int

    def to_json_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "dropped_constant": list(self.dropped_constant),
            "n_rows": self.n_rows,
            "graph": self.graph.to_json_dict(),
            "effects": list(self.effects),
            "bivariate": [b.to_json_dict() for b in self.bivariate],
            "tree_features": list(self.tree_features),
            "train_metrics": self.train_metrics.to_json_dict(),
            "tests_run": self.tests_run,
        }


@dataclass(frozen=True)
class Step3Result:
    tree_features: tuple[str, ...]
    n_rows: int
    cv_metrics: Metrics
    permutation: PermutationResult | None
    comparison: dict | None

    def to_json_dict(self) -> dict:
        out = {
            "tree_features": list(self.tree_features),
            "n_rows": self.n_rows,
            "cv_metrics": self.cv_metrics.to_json_dict(),
        }
        if self.permutation is not None:
            out["permutation"] = {
                "target_n": self.permutation.target_n,
                "n_trials": len(self.permutation.trials),
                "trials": [t.to_json_dict() for t in self.permutation.trials],
            }
            out["comparison"] = self.comparison
        return out


@dataclass(frozen=True)
class PipelineReport:
    config: PipelineConfig
    outcome: str
    summary: dict
    step1: Step1Result
    step2: Step2Result
    step3: Step3Result

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "outcome": self.outcome,
            "summary": self.summary,
            "step1": self.step1.to_json_dict(),
            "step2": self.step2.to_json_dict(),
            "step3": self.step3.to_json_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(_plain(self.to_json_dict()), indent=2, sort_keys=True)


def _plain(obj):
    """Coerce numpy scalars and tuples so the report serializes deterministically."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _resolve_outcome(dataset: Dataset, config: PipelineConfig) -> str:
    return config.outcome or dataset.outcome_column()


def _eligible_features(dataset: Dataset, config: PipelineConfig, outcome: str) -> list[str]:
    """Feature pool after the optional missing-count cutoff."""
    out = []
    for col in dataset.schema:
        if col.name == outcome:
            continue
        if config.max_missing is not None and dataset.missing_count(col.name) >= config.max_missing:
            continue
        out.append(col.name)
    return out


def _analysis_view(
    dataset: Dataset, columns: Sequence[str], outcome: str
) -> tuple[DatasetView, tuple[str, ...]]:
    """Complete-case view on columns + outcome, dropping in-view constant columns."""
    cols = [*columns, outcome]
    view = complete_cases(dataset, cols)
    dropped = []
    kept = []
    for c in cols:
        vals = view.coded(c)
        if vals.size and np.all(vals == vals[0]):
            dropped.append(c)
        else:
            kept.append(c)
    if dropped:
        view = DatasetView(dataset, tuple(kept), view.rows)
    return view, tuple(dropped)


def _prior_for(prior: PriorKnowledge | None, columns: Sequence[str]) -> PriorKnowledge | None:
    """Restrict constraints to pairs fully inside this analysis view."""
    if prior is None:
        return None
    cols = set(columns)
    return PriorKnowledge(
        forbidden=frozenset(p for p in prior.forbidden if p <= cols),
        required=frozenset(p for p in prior.required if p <= cols),
    )


def step1_per_category(
    dataset: Dataset,
    config: PipelineConfig,
    ci_test_factory: Callable[[DatasetView], CITest] | None = None,
) -> Step1Result:
    """Per-category structure learning; selects features within 2 hops of the outcome."""
    outcome = _resolve_outcome(dataset, config)
    if config.prior is not None:
        config.prior.validate_names(dataset.column_names)
    eligible = set(_eligible_features(dataset, config, outcome))
    results = []
    selected: dict[str, None] = {}
    for category in dataset.categories():
        cols = [
            c.name
            for c in dataset.schema
            if c.category == category and c.name in eligible
        ]
        if not cols:
            continue
        view, dropped = _analysis_view(dataset, cols, outcome)
        if view.n_rows < config.min_rows or outcome not in view.columns:
            continue
        ci = ci_test_factory(view) if ci_test_factory else None
        fci = run_fci(view, config.learn_config(), _prior_for(config.prior, view.columns), ci)
        graph = annotate_strengths(view, fci.graph, outcome)
        near = sorted(
            neighbors_within(graph, outcome, 2),
            key=dataset.column_index,
        )
        for f in near:
            selected.setdefault(f, None)
        results.append(
            CategoryResult(
                category=category,
                columns=view.columns,
                dropped_constant=dropped,
                n_rows=view.n_rows,
                graph=graph,
                selected=tuple(near),
                tests_run=fci.tests_run,
            )
        )
    ordered = sorted(selected, key=dataset.column_index)
    return Step1Result(per_category=tuple(results), selected_features=tuple(ordered))


def _bivariate_rows(
    dataset: Dataset, features: Sequence[str], outcome: str
) -> list[BivariateRow]:
    """Pairwise-complete bivariate tests of each feature against the outcome."""
    out_schema = dataset.schema_for(outcome)
    base_view = complete_cases(dataset, [outcome])
    base_codes = base_view.coded(outcome)
    base_death = float((base_codes == 0).mean())
    base_recovery = 1.0 - base_death
    rows = []
    for feat in features:
        sch = dataset.schema_for(feat)
        pair = complete_cases(dataset, [feat, outcome])
        fvals = pair.coded(feat)
        ovals = pair.coded(outcome)
        if sch.kind == "binary":
            present = fvals == 1
            a = int(((ovals == 0) & present).sum())
            b = int(((ovals == 1) & present).sum())
            c = int(((ovals == 0) & ~present).sum())
            d = int(((ovals == 1) & ~present).sum())
            res = fisher_exact(ContingencyTable2x2(a, b, c, d))
            n_with = a + b
            rate_death = a / n_with if n_with else 0.0
            rate_recovery = b / n_with if n_with else 0.0
            death_fold = fold_increase(rate_death, base_death)
            recovery_fold = fold_increase(rate_recovery, base_recovery)
            if death_fold.ratio >= recovery_fold.ratio:
                fold, direction = death_fold, "death"
            else:
                fold, direction = recovery_fold, "recovery"
            rows.append(
                BivariateRow(
                    feature=feat,
                    test="fisher_exact",
                    n_rows=pair.n_rows,
                    result=res,
                    table=(a, b, c, d),
                    rate_with=rate_death,
                    rate_without=c / (c + d) if c + d else 0.0,
                    fold=fold,
                    fold_direction=direction,
                    fold_shown=fold.factor >= FOLD_DISPLAY_MIN,
                )
            )
        else:
            # continuous and multi-level ordinal features: point-biserial on codes
            res = point_biserial((ovals == 1).astype(float), fvals)
            rows.append(
                BivariateRow(feature=feat, test="point_biserial", n_rows=pair.n_rows, result=res)
            )
    return rows


def step2_integrated(
    dataset: Dataset,
    selected: Sequence[str],
    config: PipelineConfig,
    ci_test_factory: Callable[[DatasetView], CITest] | None = None,
) -> Step2Result:
    """Joint re-analysis of the selected features plus the interpretable tree."""
    if not selected:
        raise CausalTabError("step 2 needs a non-empty selected feature set")
    outcome = _resolve_outcome(dataset, config)
    view, dropped = _analysis_view(dataset, selected, outcome)
    if outcome not in view.columns:
        raise CausalTabError("outcome is constant on the joint complete cases")
    ci = ci_test_factory(view) if ci_test_factory else None
    fci = run_fci(view, config.learn_config(), _prior_for(config.prior, view.columns), ci)
    graph = annotate_strengths(view, fci.graph, outcome)
    effects = tuple(effect_table(view, fci.graph, outcome))
    features = [c for c in view.columns if c != outcome]
    bivariate = tuple(_bivariate_rows(dataset, features, outcome))
    tree = fit_tree(view, features, outcome, config.tree_max_depth)
    used = sorted(tree_features(tree), key=dataset.column_index)
    train_metrics = evaluate(tree, view, outcome)
    return Step2Result(
        columns=view.columns,
        dropped_constant=dropped,
        n_rows=view.n_rows,
        graph=graph,
        effects=effects,
        bivariate=bivariate,
        tree=tree,
        tree_features=tuple(used),
        train_metrics=train_metrics,
        tests_run=fci.tests_run,
    )


def step3_predictive(
    dataset: Dataset,
    tree_feats: Sequence[str],
    config: PipelineConfig,
) -> Step3Result:
    """CV of the causal features versus the random-feature permutation baseline."""
    outcome = _resolve_outcome(dataset, config)
    view = complete_cases(dataset, [*tree_feats, outcome])
    cv = kfold_cv(
        view, list(tree_feats), outcome, config.cv_folds, config.tree_max_depth, config.seed
    )
    if config.permutation_trials <= 0:
        return Step3Result(tuple(tree_feats), view.n_rows, cv, None, None)
    pool = _eligible_features(dataset, config, outcome)
    n_features = config.permutation_features or len(tree_feats)
    perm = permutation_baseline(
        dataset,
        pool,
        n_features=n_features,
        n_trials=config.permutation_trials,
        k=config.cv_folds,
        max_depth=config.tree_max_depth,
        target_n=view.n_rows,
        seed=config.seed,
    )
    mis = perm.misclassification()
    causal_mis = 1.0 - cv.accuracy
    causal_set = set(tree_feats)
    overlap = [len(causal_set & set(t.features)) for t in perm.trials]
    comparison = {
        "causal_misclassification": causal_mis,
        "baseline_mean_misclassification": float(mis.mean()),
        "baseline_quantile_of_causal": float((mis <= causal_mis).mean()),
        "baseline_mean_sensitivity": perm.mean_metric("sensitivity"),
        "baseline_mean_specificity": perm.mean_metric("specificity"),
        "baseline_mean_f1": perm.mean_metric("f1"),
        "baseline_mean_accuracy": perm.mean_metric("accuracy"),
        "trials_containing_causal_feature": int(sum(1 for o in overlap if o > 0)),
        "mean_causal_features_drawn": float(np.mean(overlap)),
        "histogram": [list(row) for row in perm.histogram()],
    }
    return Step3Result(tuple(tree_feats), view.n_rows, cv, perm, comparison)


def run_full(
    dataset: Dataset,
    config: PipelineConfig,
    ci_test_factory: Callable[[DatasetView], CITest] | None = None,
) -> PipelineReport:
    outcome = _resolve_outcome(dataset, config)
    step1 = step1_per_category(dataset, config, ci_test_factory)
    step2 = step2_integrated(dataset, step1.selected_features, config, ci_test_factory)
    step3 = step3_predictive(dataset, step2.tree_features, config)
    return PipelineReport(
        config=config,
        outcome=outcome,
        summary=_plain(summarize(dataset).to_json_dict()),
        step1=step1,
        step2=step2,
        step3=step3,
    )


def write_report(
    report: PipelineReport, outdir: str | Path, dataset: Dataset | None = None
) -> None:
    """One output directory: machine report, DOT graphs, tree, histogram."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    # learned orientations are not reliable enough to publish: report
    # graphs are drawn undirected, keeping only sign and strength
    style = StyleConfig(show_marks=False)
    for cat in report.step1.per_category:
        (outdir / f"category_{cat.category}.dot").write_text(
            to_dot(cat.graph, style), encoding="utf-8"
        )
    (outdir / "integrated.dot").write_text(
        to_dot(report.step2.graph, style), encoding="utf-8"
    )
    schema_lookup = dataset.schema_for if dataset is not None else None
    (outdir / "tree.dot").write_text(
        tree_to_dot(report.step2.tree, schema_lookup), encoding="utf-8"
    )
    if report.step3.permutation is not None:
        lines = ["bin_lo,bin_hi,count"]
        for lo, hi, count in report.step3.permutation.histogram():
            lines.append(f"{lo:.6f},{hi:.6f},{count}")
        (outdir / "permutation_histogram.csv").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
