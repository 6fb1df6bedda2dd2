"""Dataset module tests: CSV ingestion, discretisation and output."""

import numpy as np
import pandas as pd
import pytest

from lib.dataset import (
    dataset_from_frame,
    discretize_csv,
    discretize_frame,
    ingest_csv,
    quantile_discretize,
    rows_frame,
    write_dataset,
    write_table_csv,
)
from lib.errors import DatasetError, OutOfRangeError
from lib.model import VariableSpec, binary_variables


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# ── Ingestion ──

def test_ingest_labels_sorted_lexicographically(tmp_path):
    path = _write(tmp_path / "data.csv", "smoker,cough\nyes,no\nno,no\nyes,yes\n")
    data = ingest_csv(path)
    assert data.names == ["smoker", "cough"]
    assert data.variables[0].labels == ("no", "yes")
    assert data.rows.tolist() == [[1, 0], [0, 0], [1, 1]]
    assert data.n == 3
    assert data.source == str(path)


def test_ingest_count_column(tmp_path):
    path = _write(tmp_path / "agg.csv", "a,b,count\n0,0,5\n1,1,7\n0,1,0\n")
    data = ingest_csv(path)
    assert data.n == 12
    table = data.table()
    assert table.counts.tolist() == [[5, 0], [0, 7]]


def test_ingest_with_fixed_specs(tmp_path):
    path = _write(tmp_path / "data.csv", "X1,X2\n0,1\n1,1\n")
    data = ingest_csv(path, binary_variables(2))
    assert data.table().counts.tolist() == [[0, 1], [0, 1]]
    with pytest.raises(DatasetError):
        ingest_csv(_write(tmp_path / "bad.csv", "X1,X2\n0,2\n"), binary_variables(2))
    with pytest.raises(DatasetError):
        ingest_csv(path, binary_variables(2, prefix="Y"))


def test_single_valued_column_gets_placeholder(tmp_path):
    data = ingest_csv(_write(tmp_path / "data.csv", "a,b\nx,0\nx,1\n"))
    assert data.variables[0].labels == ("x", "x_unseen")
    assert data.variables[0].cardinality == 2


@pytest.mark.parametrize("text", ["", "a,b\n1,2\n3\n", "a,b\n1,\n"])
def test_unreadable_files(tmp_path, text):
    with pytest.raises(DatasetError):
        ingest_csv(_write(tmp_path / "data.csv", text))


def test_missing_file(tmp_path):
    with pytest.raises(DatasetError):
        ingest_csv(tmp_path / "nope.csv")


def test_bad_count_column():
    frame = pd.DataFrame({"a": ["0", "1"], "count": ["2", "x"]})
    with pytest.raises(DatasetError):
        dataset_from_frame(frame)
    frame = pd.DataFrame({"a": ["0", "1"], "count": ["2", "-1"]})
    with pytest.raises(DatasetError):
        dataset_from_frame(frame)


def test_frame_without_rows_needs_specs():
    empty = pd.DataFrame({"X1": [], "X2": []})
    with pytest.raises(DatasetError):
        dataset_from_frame(empty)
    data = dataset_from_frame(empty, binary_variables(2))
    assert data.n == 0


def test_dataset_frame_round_trip():
    variables = (VariableSpec("a", 2, ("off", "on")), VariableSpec("b", 3))
    data = dataset_from_frame(pd.DataFrame({"a": ["on", "off"], "b": ["2", "0"]}), variables)
    assert data.frame().to_dict("list") == {"a": ["on", "off"], "b": ["2", "0"]}


# ── Discretisation ──

def test_median_split():
    assert quantile_discretize([1, 2, 3, 4]).tolist() == ["low", "low", "high", "high"]
    assert quantile_discretize([1, 1, 1, 2]).tolist() == ["low", "low", "low", "high"]


def test_quartiles_are_balanced():
    labels = quantile_discretize(np.arange(100), bins=4)
    assert labels.value_counts().to_dict() == {"q1": 25, "q2": 25, "q3": 25, "q4": 25}


def test_discretize_rejects_degenerate_input():
    with pytest.raises(OutOfRangeError):
        quantile_discretize([1, 2], bins=1)
    with pytest.raises(DatasetError):
        quantile_discretize([3, 3, 3])
    with pytest.raises(DatasetError):
        quantile_discretize(pd.Series(["a", "b"], name="c"))


def test_discretize_frame_only_numeric_columns():
    frame = pd.DataFrame({"age": ["31", "45", "52", "60"], "sex": ["f", "m", "f", "m"]})
    result, changed = discretize_frame(frame)
    assert changed == ["age"]
    assert result["age"].tolist() == ["low", "low", "high", "high"]
    assert result["sex"].tolist() == ["f", "m", "f", "m"]


def test_discretize_csv_records_columns(tmp_path):
    path = _write(tmp_path / "raw.csv", "age,sex\n31,f\n45,m\n52,f\n60,m\n")
    data = discretize_csv(path)
    assert data.discretized == ("age",)
    # "high" sorts before "low"
    assert data.variables[0].labels == ("high", "low")
    assert data.rows[:, 0].tolist() == [1, 1, 0, 0]


# ── Output ──

def test_write_dataset(tmp_path):
    data = dataset_from_frame(pd.DataFrame({"a": ["y", "n"], "b": ["1", "0"]}))
    path = tmp_path / "out" / "data.csv"
    write_dataset(data, path)
    assert path.read_text(encoding="utf-8") == "a,b\ny,1\nn,0\n"


def test_write_table_csv_keeps_nonzero_cells(tmp_path):
    data = dataset_from_frame(pd.DataFrame({"a": ["0", "0", "1"], "b": ["1", "1", "0"]}))
    path = tmp_path / "table.csv"
    write_table_csv(data.table(), path)
    back = ingest_csv(path, data.variables)
    assert back.n == 3
    assert np.array_equal(back.table().counts, data.table().counts)


def test_rows_frame_labels():
    variables = (VariableSpec("a", 2, ("off", "on")),)
    assert rows_frame(variables, [[1], [0]])["a"].tolist() == ["on", "off"]
