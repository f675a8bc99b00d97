"""Mixed-type clinical tables: schema, loading, views, standardization.

A Dataset stores every column as a float array of *codes*: continuous
columns hold the raw value, binary/ordinal columns hold the index of the
cell's level in the declared level order, and missing cells hold NaN.
Views are index overlays and never copy cell data.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    BadCellError,
    IncompleteViewError,
    SchemaMismatchError,
    UnknownColumnError,
    ZeroVarianceError,
)

KIND_BINARY = "binary"
KIND_ORDINAL = "ordinal"
KIND_CONTINUOUS = "continuous"
KINDS = (KIND_BINARY, KIND_ORDINAL, KIND_CONTINUOUS)

OUTCOME_CATEGORY = "outcome"

#: CSV tokens read as a missing cell. Anything else must parse per the column kind.
MISSING_TOKENS = ("", "NA")


def _normalize_level(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


@dataclass(frozen=True)
class ColumnSchema:
    """Declared name, kind, category and admissible levels of one column."""

    name: str
    kind: str
    category: str
    levels: tuple[str, ...] | None = None
    units: str = ""

    def __post_init__(self):
        if not self.name:
            raise SchemaMismatchError("column name must be non-empty")
        if self.kind not in KINDS:
            raise SchemaMismatchError(
                f"column {self.name!r}: kind must be one of {KINDS}, got {self.kind!r}"
            )
        if not self.category:
            raise SchemaMismatchError(f"column {self.name!r}: category must be non-empty")
        if self.levels is not None:
            object.__setattr__(
                self, "levels", tuple(_normalize_level(v) for v in self.levels)
            )
        if self.kind == KIND_BINARY:
            if self.levels is None or len(self.levels) != 2:
                raise SchemaMismatchError(
                    f"binary column {self.name!r} must declare exactly 2 levels"
                )
        elif self.kind == KIND_ORDINAL:
            if self.levels is None or len(self.levels) < 2:
                raise SchemaMismatchError(
                    f"ordinal column {self.name!r} must declare >= 2 ordered levels"
                )
        else:
            if self.levels is not None:
                raise SchemaMismatchError(
                    f"continuous column {self.name!r} must not declare levels"
                )
        if self.levels is not None and len(set(self.levels)) != len(self.levels):
            raise SchemaMismatchError(f"column {self.name!r}: duplicate levels")

    @property
    def is_categorical(self) -> bool:
        return self.kind in (KIND_BINARY, KIND_ORDINAL)

    @property
    def n_levels(self) -> int:
        if self.levels is None:
            raise ValueError(f"continuous column {self.name!r} has no levels")
        return len(self.levels)

    def code_of(self, raw: str) -> float:
        """Numeric code of a raw cell: level rank for categorical, float value otherwise."""
        if self.is_categorical:
            try:
                return float(self.levels.index(raw))
            except ValueError:
                raise KeyError(raw) from None
        return float(raw)

    def label_of(self, code: float) -> str:
        if self.is_categorical:
            return self.levels[int(code)]
        return repr(float(code))


class Dataset:
    """Immutable validated table of coded columns sharing one row count."""

    def __init__(self, schema: Sequence[ColumnSchema], coded: Mapping[str, np.ndarray]):
        self._schema = tuple(schema)
        names = [c.name for c in self._schema]
        if len(set(names)) != len(names):
            raise SchemaMismatchError("duplicate column names in schema")
        outcome_cols = [c.name for c in self._schema if c.category == OUTCOME_CATEGORY]
        if len(outcome_cols) > 1:
            raise SchemaMismatchError(f"multiple outcome columns: {outcome_cols}")
        missing = [n for n in names if n not in coded]
        if missing:
            raise SchemaMismatchError(f"no data for columns: {missing}")

        self._by_name = {c.name: c for c in self._schema}
        self._index = {n: i for i, n in enumerate(names)}
        self._coded: dict[str, np.ndarray] = {}
        n_rows = None
        for col in self._schema:
            arr = np.asarray(coded[col.name], dtype=float).copy()
            if arr.ndim != 1:
                raise SchemaMismatchError(f"column {col.name!r} is not 1-dimensional")
            if n_rows is None:
                n_rows = arr.shape[0]
            elif arr.shape[0] != n_rows:
                raise SchemaMismatchError(
                    f"column {col.name!r} has {arr.shape[0]} rows, expected {n_rows}"
                )
            if col.is_categorical:
                vals = arr[~np.isnan(arr)]
                if vals.size and (
                    np.any(vals != np.floor(vals))
                    or vals.min() < 0
                    or vals.max() >= col.n_levels
                ):
                    raise BadCellError(-1, col.name, "<coded>", "code outside declared levels")
            arr.flags.writeable = False
            self._coded[col.name] = arr
        if not n_rows:
            raise SchemaMismatchError("dataset must have at least one row")
        self._n_rows = int(n_rows)

    # -- basic accessors ----------------------------------------------------

    @property
    def schema(self) -> tuple[ColumnSchema, ...]:
        return self._schema

    @property
    def n_rows(self) -> int:
        return self._n_rows

    @property
    def n_cols(self) -> int:
        return len(self._schema)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self._schema)

    def column_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownColumnError(f"unknown column {name!r}") from None

    def schema_for(self, name: str) -> ColumnSchema:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownColumnError(f"unknown column {name!r}") from None

    def coded(self, name: str) -> np.ndarray:
        self.schema_for(name)
        return self._coded[name]

    def outcome_column(self) -> str:
        for col in self._schema:
            if col.category == OUTCOME_CATEGORY:
                return col.name
        raise UnknownColumnError("dataset declares no outcome column")

    def missing_count(self, name: str) -> int:
        return int(np.isnan(self.coded(name)).sum())

    def categories(self) -> tuple[str, ...]:
        """Feature categories in schema order, outcome excluded."""
        seen: dict[str, None] = {}
        for col in self._schema:
            if col.category != OUTCOME_CATEGORY:
                seen.setdefault(col.category, None)
        return tuple(seen)

    def view(self, columns: Sequence[str] | None = None) -> "DatasetView":
        cols = tuple(columns) if columns is not None else self.column_names
        for c in cols:
            self.schema_for(c)
        return DatasetView(self, cols, np.arange(self._n_rows))

    # -- persistence ---------------------------------------------------------

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.column_names)
            cols = [self._coded[n] for n in self.column_names]
            schemas = [self._by_name[n] for n in self.column_names]
            for i in range(self._n_rows):
                row = []
                for arr, sch in zip(cols, schemas):
                    v = arr[i]
                    if math.isnan(v):
                        row.append("")
                    elif sch.is_categorical:
                        row.append(sch.label_of(v))
                    else:
                        row.append(repr(float(v)))
                writer.writerow(row)

    def write_schema(self, path: str | Path) -> None:
        payload = []
        for col in self._schema:
            entry = {"name": col.name, "kind": col.kind, "category": col.category}
            if col.levels is not None:
                entry["levels"] = list(col.levels)
            if col.units:
                entry["units"] = col.units
            payload.append(entry)
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class DatasetView:
    """Read-only index overlay selecting rows and columns of a Dataset."""

    source: Dataset
    columns: tuple[str, ...]
    rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.intp)
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def n_rows(self) -> int:
        return int(self.rows.shape[0])

    def schema_for(self, name: str) -> ColumnSchema:
        return self.source.schema_for(name)

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise UnknownColumnError(f"column {name!r} not selected in view") from None

    def coded(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise UnknownColumnError(f"column {name!r} not selected in view")
        return self.source.coded(name)[self.rows]

    def matrix(self, columns: Sequence[str] | None = None) -> np.ndarray:
        cols = tuple(columns) if columns is not None else self.columns
        if not cols:
            return np.empty((self.n_rows, 0))
        return np.column_stack([self.coded(c) for c in cols])

    def is_complete(self, columns: Sequence[str] | None = None) -> bool:
        cols = tuple(columns) if columns is not None else self.columns
        return all(not np.isnan(self.coded(c)).any() for c in cols)

    def records(self, columns: Sequence[str] | None = None) -> Iterator[dict[str, float]]:
        cols = tuple(columns) if columns is not None else self.columns
        mat = self.matrix(cols)
        for i in range(self.n_rows):
            yield {c: float(mat[i, j]) for j, c in enumerate(cols)}


def complete_cases(source: Dataset | DatasetView, columns: Sequence[str]) -> DatasetView:
    """View of the rows with no missing cell among ``columns``, order preserved."""
    cols = tuple(columns)
    if isinstance(source, DatasetView):
        dataset = source.source
        base_rows = source.rows
    else:
        dataset = source
        base_rows = np.arange(source.n_rows)
    for c in cols:
        dataset.schema_for(c)
    keep = np.ones(base_rows.shape[0], dtype=bool)
    for c in cols:
        keep &= ~np.isnan(dataset.coded(c)[base_rows])
    return DatasetView(dataset, cols, base_rows[keep])


@dataclass(frozen=True)
class StandardizedMatrix:
    """Column-standardized numeric matrix with the moments needed to invert it."""

    matrix: np.ndarray
    columns: tuple[str, ...]
    means: np.ndarray
    sds: np.ndarray

    @property
    def n_rows(self) -> int:
        return int(self.matrix.shape[0])

    def index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise UnknownColumnError(f"column {name!r} not in standardized matrix") from None

    def column(self, name: str) -> np.ndarray:
        return self.matrix[:, self.index(name)]

    def inverse(self) -> np.ndarray:
        """Undo the affine transform, reproducing the coded input columns."""
        return self.matrix * self.sds + self.means


def standardize(view: DatasetView, columns: Sequence[str] | None = None) -> StandardizedMatrix:
    """Center and scale each selected column to sample mean 0, sd 1 (n-1 denominator)."""
    cols = tuple(columns) if columns is not None else view.columns
    mat = view.matrix(cols)
    if np.isnan(mat).any():
        bad = [c for j, c in enumerate(cols) if np.isnan(mat[:, j]).any()]
        raise IncompleteViewError(f"missing cells in columns {bad}; take complete cases first")
    if mat.shape[0] < 2:
        raise ZeroVarianceError("need at least 2 rows to standardize")
    means = mat.mean(axis=0)
    sds = mat.std(axis=0, ddof=1)
    for j, c in enumerate(cols):
        if sds[j] == 0.0:
            raise ZeroVarianceError(f"column {c!r} is constant in this view")
    return StandardizedMatrix((mat - means) / sds, cols, means, sds)


@dataclass(frozen=True)
class ColumnSummary:
    name: str
    category: str
    kind: str
    counts_by_class: tuple[int, ...] | None
    total_nonmissing: int
    mean: float | None = None
    sd: float | None = None
    level_counts: dict[str, int] | None = None

    def to_json_dict(self) -> dict:
        out = {
            "name": self.name,
            "category": self.category,
            "kind": self.kind,
            "total_nonmissing": self.total_nonmissing,
        }
        if self.counts_by_class is not None:
            out["counts_by_class"] = list(self.counts_by_class)
        if self.mean is not None:
            out["mean"] = self.mean
            out["sd"] = self.sd
        if self.level_counts is not None:
            out["level_counts"] = self.level_counts
        return out


@dataclass(frozen=True)
class SummaryTable:
    rows: tuple[ColumnSummary, ...]
    outcome: str | None
    outcome_levels: tuple[str, ...] | None

    def to_json_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "outcome_levels": list(self.outcome_levels) if self.outcome_levels else None,
            "columns": [r.to_json_dict() for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def summarize(dataset: Dataset, by_outcome: bool = True) -> SummaryTable:
    """Per-column occurrence counts (per outcome class) plus moments/level counts."""
    outcome = None
    outcome_levels = None
    class_masks: list[np.ndarray] | None = None
    if by_outcome:
        outcome = dataset.outcome_column()
        out_schema = dataset.schema_for(outcome)
        out_codes = dataset.coded(outcome)
        outcome_levels = out_schema.levels
        class_masks = [out_codes == k for k in range(out_schema.n_levels)]

    rows = []
    for col in dataset.schema:
        arr = dataset.coded(col.name)
        present = ~np.isnan(arr)
        counts = None
        if class_masks is not None:
            counts = tuple(int((present & m).sum()) for m in class_masks)
        mean = sd = None
        level_counts = None
        vals = arr[present]
        if col.kind == KIND_CONTINUOUS:
            if vals.size:
                mean = float(vals.mean())
                sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        else:
            level_counts = {
                lab: int((vals == k).sum()) for k, lab in enumerate(col.levels)
            }
        rows.append(
            ColumnSummary(
                name=col.name,
                category=col.category,
                kind=col.kind,
                counts_by_class=counts,
                total_nonmissing=int(present.sum()),
                mean=mean,
                sd=sd,
                level_counts=level_counts,
            )
        )
    return SummaryTable(tuple(rows), outcome, outcome_levels)


# -- CSV + sidecar schema loading -------------------------------------------

def load_schema(path: str | Path) -> list[ColumnSchema]:
    """Parse a sidecar schema file: a JSON array of column declarations."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(raw, dict) and "columns" in raw:
        raw = raw["columns"]
    if not isinstance(raw, list):
        raise SchemaMismatchError("schema file must hold a JSON array of columns")
    out = []
    for entry in raw:
        out.append(
            ColumnSchema(
                name=entry["name"],
                kind=entry["kind"],
                category=entry["category"],
                levels=tuple(entry["levels"]) if entry.get("levels") is not None else None,
                units=entry.get("units", ""),
            )
        )
    return out


def load_csv(path: str | Path, schema_path: str | Path) -> Dataset:
    """Load and validate a CSV against its sidecar schema.

    Cells equal to one of MISSING_TOKENS become missing; any other value
    that does not conform to the column kind/levels raises BadCellError
    naming the row and column rather than being coerced.
    """
    schema = load_schema(schema_path)
    want = [c.name for c in schema]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatchError(f"{path}: empty CSV") from None
        if sorted(header) != sorted(want):
            extra = sorted(set(header) - set(want))
            absent = sorted(set(want) - set(header))
            raise SchemaMismatchError(
                f"{path}: header/schema disagree (unexpected {extra}, missing {absent})"
            )
        positions = {name: header.index(name) for name in want}
        data: dict[str, list[float]] = {name: [] for name in want}
        by_name = {c.name: c for c in schema}
        for r, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise SchemaMismatchError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
            for name in want:
                cell = row[positions[name]].strip()
                if cell in MISSING_TOKENS:
                    data[name].append(math.nan)
                    continue
                col = by_name[name]
                try:
                    code = col.code_of(cell)
                except KeyError:
                    raise BadCellError(r, name, cell, f"not in levels {list(col.levels)}") from None
                except ValueError:
                    raise BadCellError(r, name, cell, "not a number") from None
                data[name].append(code)
    if not data[want[0]]:
        raise SchemaMismatchError(f"{path}: no data rows")
    return Dataset(schema, {k: np.asarray(v) for k, v in data.items()})
