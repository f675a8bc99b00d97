"""Depth-limited binary classification trees with CV and a permutation baseline.

CART-style greedy partitioning on Gini impurity. Class 0 (the first
declared outcome level, death in the clinical encoding) is the positive
class throughout; leaf ties predict it by default since missing a death
is the costlier triage error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from .data import ColumnSchema, Dataset, DatasetView, complete_cases
from .errors import (
    EmptyDataError,
    ExhaustedDrawsError,
    IncompleteViewError,
    MissingFeatureError,
    TooFewRowsError,
)

__all__ = [
    "Leaf",
    "Split",
    "TreeNode",
    "Metrics",
    "fit_tree",
    "predict",
    "predict_matrix",
    "evaluate",
    "kfold_cv",
    "PermutationTrial",
    "PermutationResult",
    "permutation_baseline",
    "tree_depth",
    "tree_features",
    "iter_nodes",
    "tree_to_dot",
]


@dataclass(frozen=True)
class Leaf:
    class_counts: tuple[int, int]
    predicted: int


@dataclass(frozen=True)
class Split:
    feature: str
    threshold: float | None
    levels: frozenset[int] | None
    left: "TreeNode"
    right: "TreeNode"
    class_counts: tuple[int, int]

    def goes_left(self, value: float) -> bool:
        if self.levels is not None:
            return int(value) in self.levels
        return value <= self.threshold


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True)
class Metrics:
    """Confusion-derived rates with the counts they were derived from.

    Averaged cross-validation metrics keep the pooled counts for
    reference; rates are then fold-averages, not pooled-count ratios.
    """

    sensitivity: float
    specificity: float
    f1: float
    accuracy: float
    tp: int
    fn: int
    tn: int
    fp: int

    @classmethod
    def from_counts(cls, tp: int, fn: int, tn: int, fp: int) -> "Metrics":
        n = tp + fn + tn + fp
        sens = tp / (tp + fn) if tp + fn else 0.0
        spec = tn / (tn + fp) if tn + fp else 0.0
        f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
        acc = (tp + tn) / n if n else 0.0
        return cls(sens, spec, f1, acc, tp, fn, tn, fp)

    def to_json_dict(self) -> dict:
        return {
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "confusion": {"tp": self.tp, "fn": self.fn, "tn": self.tn, "fp": self.fp},
        }


def _class_counts(y: np.ndarray) -> tuple[int, int]:
    n0 = int((y == 0).sum())
    return n0, int(y.shape[0] - n0)


def _leaf(counts: tuple[int, int], tie_break: str) -> Leaf:
    if counts[0] > counts[1]:
        predicted = 0
    elif counts[1] > counts[0]:
        predicted = 1
    else:
        predicted = 0 if tie_break == "death" else 1
    return Leaf(class_counts=counts, predicted=predicted)


def _best_split_for_column(
    values: np.ndarray, y: np.ndarray, min_leaf: int
) -> tuple[float, float] | None:
    """(weighted Gini, threshold) of the best cut, or None when no cut exists."""
    order = np.argsort(values, kind="stable")
    sv = values[order]
    sy = y[order]
    cuts = np.nonzero(np.diff(sv) > 0)[0]
    if cuts.size == 0:
        return None
    n = sv.shape[0]
    ones = np.cumsum(sy == 0)
    n_left = cuts + 1
    n_right = n - n_left
    valid = (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    c0_left = ones[cuts].astype(float)
    c0_right = ones[-1] - c0_left
    p0l = c0_left / n_left
    p0r = c0_right / n_right
    gini_l = 1.0 - p0l**2 - (1.0 - p0l) ** 2
    gini_r = 1.0 - p0r**2 - (1.0 - p0r) ** 2
    weighted = (n_left * gini_l + n_right * gini_r) / n
    weighted[~valid] = np.inf
    pos = int(np.argmin(weighted))  # first minimum: smallest threshold wins ties
    thr = 0.5 * (sv[pos] + sv[pos + 1])
    return float(weighted[pos]), float(thr)


def fit_tree(
    view: DatasetView,
    features: Sequence[str],
    outcome: str,
    max_depth: int,
    min_leaf: int = 1,
    tie_break: str = "death",
) -> TreeNode:
    """Greedy Gini partitioning, depth counted in splits along a path.

    Continuous and ordinal features split at midpoints of consecutive
    distinct values; binary features split on level membership. Ties in
    impurity prefer the earliest feature in declared order, then the
    smallest threshold. Value <= threshold (or value in the level set)
    routes left.
    """
    if max_depth < 1:
        raise ValueError(f"max_depth must be >= 1, got {max_depth}")
    if tie_break not in ("death", "recovery"):
        raise ValueError(f"tie_break must be 'death' or 'recovery', got {tie_break!r}")
    features = list(features)
    X = view.matrix(features)
    y_raw = view.coded(outcome)
    if X.shape[0] == 0:
        raise EmptyDataError("no rows to fit on")
    if np.isnan(X).any() or np.isnan(y_raw).any():
        raise IncompleteViewError("tree fitting requires complete cases")
    y = y_raw.astype(np.int64)
    binary = [view.schema_for(f).kind == "binary" for f in features]

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        counts = _class_counts(y[idx])
        if (
            depth > max_depth
            or counts[0] == 0
            or counts[1] == 0
            or idx.shape[0] < 2 * min_leaf
        ):
            return _leaf(counts, tie_break)
        best: tuple[float, int, float] | None = None
        for j, feat in enumerate(features):
            found = _best_split_for_column(X[idx, j], y[idx], min_leaf)
            if found is None:
                continue
            gini, thr = found
            if best is None or gini < best[0]:
                best = (gini, j, thr)
        if best is None:
            return _leaf(counts, tie_break)
        _, j, thr = best
        mask = X[idx, j] <= thr
        left = grow(idx[mask], depth + 1)
        right = grow(idx[~mask], depth + 1)
        levels = None
        threshold = thr
        if binary[j]:
            levels = frozenset(
                k for k in range(view.schema_for(features[j]).n_levels) if k <= thr
            )
            threshold = None
        return Split(
            feature=features[j],
            threshold=threshold,
            levels=levels,
            left=left,
            right=right,
            class_counts=counts,
        )

    return grow(np.arange(X.shape[0]), 1)


def predict(tree: TreeNode, row: Mapping[str, float]) -> int:
    """Route one record of coded feature values to its leaf class."""
    node = tree
    while isinstance(node, Split):
        try:
            value = row[node.feature]
        except KeyError:
            raise MissingFeatureError(f"row lacks feature {node.feature!r}") from None
        node = node.left if node.goes_left(float(value)) else node.right
    return node.predicted


def predict_matrix(
    tree: TreeNode, X: np.ndarray, feature_index: Mapping[str, int]
) -> np.ndarray:
    """Vectorized predictions for a coded feature matrix."""
    out = np.empty(X.shape[0], dtype=np.int64)

    def walk(node: TreeNode, idx: np.ndarray) -> None:
        if isinstance(node, Leaf):
            out[idx] = node.predicted
            return
        vals = X[idx, feature_index[node.feature]]
        if node.levels is not None:
            mask = np.isin(vals.astype(np.int64), list(node.levels))
        else:
            mask = vals <= node.threshold
        walk(node.left, idx[mask])
        walk(node.right, idx[~mask])

    walk(tree, np.arange(X.shape[0]))
    return out


def evaluate(tree: TreeNode, view: DatasetView, outcome: str) -> Metrics:
    """Confusion metrics with class 0 (death) as the positive class."""
    feats = sorted(tree_features(tree))
    X = view.matrix(feats) if feats else np.empty((view.n_rows, 0))
    y = view.coded(outcome)
    if (X.size and np.isnan(X).any()) or np.isnan(y).any():
        raise IncompleteViewError("evaluation requires complete cases")
    y = y.astype(np.int64)
    index = {f: j for j, f in enumerate(feats)}
    preds = predict_matrix(tree, X, index)
    tp = int(((preds == 0) & (y == 0)).sum())
    fn = int(((preds == 1) & (y == 0)).sum())
    tn = int(((preds == 1) & (y == 1)).sum())
    fp = int(((preds == 0) & (y == 1)).sum())
    return Metrics.from_counts(tp, fn, tn, fp)


def iter_nodes(tree: TreeNode) -> Iterable[tuple[TreeNode, int]]:
    """Yield (node, depth) pairs; the root split sits at depth 1."""
    stack = [(tree, 1)]
    while stack:
        node, depth = stack.pop()
        yield node, depth
        if isinstance(node, Split):
            stack.append((node.left, depth + 1))
            stack.append((node.right, depth + 1))


def tree_depth(tree: TreeNode) -> int:
    """Number of splits along the deepest root-to-leaf path."""
    depths = [d for node, d in iter_nodes(tree) if isinstance(node, Split)]
    return max(depths) if depths else 0


def tree_features(tree: TreeNode) -> set[str]:
    return {node.feature for node, _ in iter_nodes(tree) if isinstance(node, Split)}


def _stratified_folds(
    y: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    """Fold labels: per-class round-robin with extras offset across classes."""
    fold = np.empty(y.shape[0], dtype=np.int64)
    offset = 0
    for cls in (0, 1):
        members = np.nonzero(y == cls)[0]
        if members.size == 0:
            continue
        members = members[rng.permutation(members.size)]
        fold[members] = (np.arange(members.size) + offset) % k
        offset += members.size % k
    return fold


def kfold_cv(
    view: DatasetView,
    features: Sequence[str],
    outcome: str,
    k: int,
    max_depth: int,
    seed: int,
    min_leaf: int = 1,
    tie_break: str = "death",
) -> Metrics:
    """Stratified k-fold cross-validation; rates are fold averages."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if view.n_rows < k:
        raise TooFewRowsError(f"{view.n_rows} rows cannot fill {k} folds")
    features = list(features)
    y = view.coded(outcome)
    if np.isnan(y).any():
        raise IncompleteViewError("outcome column has missing cells")
    rng = np.random.default_rng(seed)
    fold = _stratified_folds(y.astype(np.int64), k, rng)

    sums = np.zeros(4)
    pooled = np.zeros(4, dtype=np.int64)
    for f in range(k):
        test_rows = np.nonzero(fold == f)[0]
        train_rows = np.nonzero(fold != f)[0]
        if test_rows.size == 0 or train_rows.size == 0:
            raise TooFewRowsError(f"fold {f} is empty with k={k}, n={view.n_rows}")
        train = DatasetView(view.source, view.columns, view.rows[train_rows])
        test = DatasetView(view.source, view.columns, view.rows[test_rows])
        tree = fit_tree(train, features, outcome, max_depth, min_leaf, tie_break)
        m = evaluate(tree, test, outcome)
        sums += (m.sensitivity, m.specificity, m.f1, m.accuracy)
        pooled += (m.tp, m.fn, m.tn, m.fp)
    sens, spec, f1, acc = (sums / k).tolist()
    return Metrics(sens, spec, f1, acc, *(int(v) for v in pooled))


@dataclass(frozen=True)
class PermutationTrial:
    features: tuple[str, ...]
    n_rows: int
    metrics: Metrics

    def to_json_dict(self) -> dict:
        return {
            "features": list(self.features),
            "n_rows": self.n_rows,
            "metrics": self.metrics.to_json_dict(),
        }


@dataclass(frozen=True)
class PermutationResult:
    trials: tuple[PermutationTrial, ...]
    target_n: int

    def misclassification(self) -> np.ndarray:
        return np.array([1.0 - t.metrics.accuracy for t in self.trials])

    def mean_metric(self, name: str) -> float:
        return float(np.mean([getattr(t.metrics, name) for t in self.trials]))

    def histogram(self, bin_width: float = 0.01) -> list[tuple[float, float, int]]:
        """(lo, hi, count) rows over misclassification rates, fixed-width bins."""
        mis = self.misclassification()
        top = float(mis.max()) if mis.size else 0.0
        n_bins = max(1, int(math.ceil(round(top / bin_width, 9))) )
        edges = np.arange(n_bins + 1) * bin_width
        counts, _ = np.histogram(mis, bins=edges)
        return [
            (float(edges[i]), float(edges[i + 1]), int(counts[i]))
            for i in range(n_bins)
        ]


def permutation_baseline(
    dataset: Dataset,
    pool: Sequence[str],
    n_features: int,
    n_trials: int,
    k: int,
    max_depth: int,
    target_n: int,
    seed: int,
    tolerance: float = 0.10,
    retry_budget: int = 50,
    min_leaf: int = 1,
    tie_break: str = "death",
) -> PermutationResult:
    """Distribution of CV metrics over random feature draws with matched row counts.

    Each trial draws ``n_features`` distinct columns from the pool and
    redraws (up to ``retry_budget`` times) until the complete-case count
    is within ``tolerance`` of ``target_n``. Per-trial seeds derive from
    the master seed, so trials are reproducible independently.
    """
    pool = sorted(set(pool), key=dataset.column_index)
    if len(pool) < n_features:
        raise ValueError(f"pool of {len(pool)} cannot supply {n_features} features")
    outcome = dataset.outcome_column()
    trials = []
    for t in range(n_trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, t]))
        chosen = None
        for _attempt in range(retry_budget):
            picks = rng.choice(len(pool), size=n_features, replace=False)
            feats = [pool[i] for i in sorted(picks)]
            v = complete_cases(dataset, [*feats, outcome])
            if abs(v.n_rows - target_n) <= tolerance * target_n:
                chosen = (feats, v)
                break
        if chosen is None:
            raise ExhaustedDrawsError(
                f"trial {t}: no {n_features}-feature draw matched "
                f"{target_n} rows within {tolerance:.0%} in {retry_budget} attempts"
            )
        feats, v = chosen
        cv_seed = int(rng.integers(0, 2**31 - 1))
        metrics = kfold_cv(v, feats, outcome, k, max_depth, cv_seed, min_leaf, tie_break)
        trials.append(PermutationTrial(tuple(feats), v.n_rows, metrics))
    return PermutationResult(tuple(trials), target_n)


def tree_to_dot(
    tree: TreeNode,
    schema_for: Callable[[str], ColumnSchema] | None = None,
    class_names: tuple[str, str] = ("death", "recovery"),
) -> str:
    """Render nodes as subject count / question / class counts, filled by prevalence."""

    def question(node: Split) -> str:
        if node.levels is not None and schema_for is not None:
            sch = schema_for(node.feature)
            labels = ",".join(sch.levels[i] for i in sorted(node.levels))
            return f"{node.feature} = {labels}?"
        if node.levels is not None:
            labels = ",".join(str(i) for i in sorted(node.levels))
            return f"{node.feature} = {labels}?"
        return f"{node.feature} <= {node.threshold:.4g}?"

    def fill(counts: tuple[int, int]) -> str:
        if counts[0] > counts[1]:
            return "lightcoral"
        if counts[1] > counts[0]:
            return "palegreen"
        return "gray80"

    lines = ["digraph tree {", '  node [shape=box, style=filled, fontname="Helvetica"];']
    counter = {"next": 0}

    def emit(node: TreeNode) -> int:
        nid = counter["next"]
        counter["next"] += 1
        if isinstance(node, Leaf):
            total = sum(node.class_counts)
            label = (
                f"{total} subjects\\n{class_names[node.predicted]}"
                f"\\n{node.class_counts[0]}/{node.class_counts[1]}"
            )
            lines.append(
                f'  n{nid} [label="{label}", fillcolor={fill(node.class_counts)}, penwidth=2];'
            )
            return nid
        total = sum(node.class_counts)
        label = (
            f"{total} subjects\\n{question(node)}"
            f"\\n{node.class_counts[0]}/{node.class_counts[1]}"
        )
        lines.append(f'  n{nid} [label="{label}", fillcolor={fill(node.class_counts)}];')
        left = emit(node.left)
        right = emit(node.right)
        lines.append(f'  n{nid} -> n{left} [label="yes"];')
        lines.append(f'  n{nid} -> n{right} [label="no"];')
        return nid

    emit(tree)
    lines.append("}")
    return "\n".join(lines) + "\n"
