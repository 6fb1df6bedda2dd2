"""CSV ingestion, quantile discretisation and dataset output.

Every column is categorical; outcome labels map to indices in sorted
lexicographic order unless a fixed variable spec is given. An optional
`count` column turns the file into a pre-aggregated table.

Usage:
    data = ingest_csv(Path("coronary.csv"))
    table = data.table()
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DatasetError, OutOfRangeError
from .estimation import ContingencyTable
from .file_lock import write_text
from .helpers import prefix_grid
from .model import VariableSpec

log = logging.getLogger(__name__)

COUNT_COLUMN = "count"


@dataclass(frozen=True, eq=False)
class Dataset:
    variables: tuple[VariableSpec, ...]
    rows: np.ndarray                      # (n, p) outcome indices, natural variable order
    weights: np.ndarray | None = None     # per-row counts for aggregated files
    source: str | None = None
    discretized: tuple[str, ...] = ()

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def n(self) -> int:
        return int(self.weights.sum()) if self.weights is not None else len(self.rows)

    def table(self) -> ContingencyTable:
        return ContingencyTable.from_rows(self.variables, self.rows, self.weights)

    def frame(self) -> pd.DataFrame:
        """Labels as a DataFrame (plus the count column when aggregated)."""
        frame = pd.DataFrame({v.name: [v.label(int(x)) for x in self.rows[:, i]]
                              for i, v in enumerate(self.variables)}, columns=self.names)
        if self.weights is not None:
            frame[COUNT_COLUMN] = self.weights.astype(np.int64)
        return frame


def _read_frame(path: Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError:
        raise DatasetError(f"{path} does not exist", path=str(path)) from None
    except pd.errors.EmptyDataError:
        raise DatasetError(f"{path} is empty", path=str(path)) from None
    except pd.errors.ParserError as e:
        raise DatasetError(f"{path}: ragged rows ({e})", path=str(path)) from None
    if frame.isna().any().any():
        raise DatasetError(f"{path}: ragged rows (missing fields)", path=str(path))
    return frame


def dataset_from_frame(frame: pd.DataFrame, variables=None, source: str | None = None,
                       discretized: tuple[str, ...] = ()) -> Dataset:
    """Categorical Dataset from a DataFrame of labels."""
    frame = frame.astype(str)
    weights = None
    columns = [c for c in frame.columns if c != COUNT_COLUMN]
    if COUNT_COLUMN in frame.columns:
        try:
            weights = frame[COUNT_COLUMN].astype(np.int64).to_numpy()
        except ValueError:
            raise DatasetError(f"column {COUNT_COLUMN!r} must hold integers", source=source) from None
        if np.any(weights < 0):
            raise DatasetError(f"column {COUNT_COLUMN!r} must be non-negative", source=source)
    if not columns:
        raise DatasetError("dataset has no variable columns", source=source)
    if any(value == "" for c in columns for value in frame[c]):
        raise DatasetError("dataset has empty values", source=source)

    if variables is None:
        if not len(frame):
            raise DatasetError("dataset has no rows to infer outcomes from", source=source)
        specs = []
        for c in columns:
            labels = sorted(frame[c].unique())
            if len(labels) < 2:
                labels.append(f"{labels[0]}_unseen" if labels else "x")
                log.warning(f"Column {c} has a single observed value; adding an unseen placeholder")
            specs.append(VariableSpec(c, len(labels), tuple(labels)))
        variables = tuple(specs)
    else:
        variables = tuple(variables)
        if [v.name for v in variables] != columns:
            raise DatasetError("columns do not match the variable specs",
                               expected=[v.name for v in variables], found=columns)

    rows = np.zeros((len(frame), len(variables)), dtype=np.int64)
    for i, v in enumerate(variables):
        codes = {label: x for x, label in enumerate(v.labels or [str(x) for x in range(v.cardinality)])}
        values = frame[v.name].to_numpy()
        unknown = sorted(set(values) - set(codes))
        if unknown:
            raise DatasetError(f"column {v.name}: unknown values {unknown[:5]}", variable=v.name)
        rows[:, i] = [codes[value] for value in values]
    log.info(f"Dataset {source or '<frame>'}: {len(frame)} rows, {len(variables)} variables")
    return Dataset(variables, rows, weights, source, tuple(discretized))


def ingest_csv(path: Path, variables=None) -> Dataset:
    path = Path(path)
    return dataset_from_frame(_read_frame(path), variables, source=str(path))


# ── Discretisation ──

def _bin_labels(bins: int) -> list[str]:
    return ["low", "high"] if bins == 2 else [f"q{j}" for j in range(1, bins + 1)]


def quantile_discretize(values, bins: int = 2) -> pd.Series:
    """Values at or below the j/bins quantile fall in bin j (lower-closed edges)."""
    if bins < 2:
        raise OutOfRangeError(f"bins must be at least 2, got {bins}", bins=bins)
    series = pd.Series(values)
    try:
        numeric = pd.to_numeric(series).to_numpy(dtype=np.float64)
    except (ValueError, TypeError):
        raise DatasetError(f"column {series.name} is not numeric", column=series.name) from None
    edges = np.quantile(numeric, [j / bins for j in range(1, bins)])
    codes = np.searchsorted(edges, numeric, side="left")
    if len(np.unique(codes)) < 2:
        raise DatasetError(f"column {series.name} falls into a single bin", column=series.name)
    labels = _bin_labels(bins)
    return pd.Series([labels[c] for c in codes], index=series.index, name=series.name)


def discretize_frame(frame: pd.DataFrame, bins: int = 2) -> tuple[pd.DataFrame, list[str]]:
    """Quantile-discretise every numeric column; returns the frame and those columns."""
    result = frame.copy()
    changed = []
    for column in frame.columns:
        if column == COUNT_COLUMN:
            continue
        numeric = pd.to_numeric(frame[column], errors="coerce")
        if numeric.notna().all() and len(frame):
            result[column] = quantile_discretize(numeric, bins)
            changed.append(column)
    log.info(f"Discretised {len(changed)} of {len(frame.columns)} columns into {bins} bins")
    return result, changed


def discretize_csv(path: Path, bins: int = 2) -> Dataset:
    path = Path(path)
    frame, changed = discretize_frame(_read_frame(path), bins)
    return dataset_from_frame(frame, source=str(path), discretized=tuple(changed))


# ── Output ──

def write_dataset(dataset: Dataset, path: Path):
    write_text(Path(path), dataset.frame().to_csv(index=False))


def write_table_csv(table: ContingencyTable, path: Path):
    """Aggregated CSV: one row per nonzero cell plus its count."""
    grid = prefix_grid(table.shape)
    flat = table.counts.reshape(-1)
    keep = np.flatnonzero(flat)
    frame = pd.DataFrame({v.name: [v.label(int(grid[i, j])) for j in keep] for i, v in enumerate(table.variables)})
    frame[COUNT_COLUMN] = flat[keep]
    write_text(Path(path), frame.to_csv(index=False))


def rows_frame(variables, rows) -> pd.DataFrame:
    """Sampled outcome indices as a labelled DataFrame."""
    rows = np.asarray(rows, dtype=np.int64)
    return pd.DataFrame({v.name: [v.label(int(x)) for x in rows[:, i]] for i, v in enumerate(variables)},
                        columns=[v.name for v in variables])
