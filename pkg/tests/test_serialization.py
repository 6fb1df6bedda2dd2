"""Serialization and file_lock tests."""

import json

import pytest

from lib import config
from lib.errors import DatasetError, InvalidStagingError, InvalidVariableError
from lib.file_lock import read_json, write_json, write_text
from lib.interventions import build_interventional_tree, search_targets_over_class
from lib.model import CStree, Stage, VariableSpec, binary_variables
from lib.serialization import (
    context_from_dict,
    itree_from_dict,
    itree_to_dict,
    load_document,
    load_tree,
    save_tree,
    search_result_to_dict,
    tree_from_dict,
    tree_to_dict,
    variables_from_list,
)
from tests.conftest import ctx, random_table


@pytest.fixture(autouse=True)
def _threads(monkeypatch):
    monkeypatch.setattr(config, "CSTREE_THREADS", 2)


# ── Trees ──

def test_tree_dict_round_trip(split_tree, reordered_tree):
    for tree in (split_tree, reordered_tree):
        data = tree_to_dict(tree)
        assert tree_from_dict(data) == tree
        assert tree_to_dict(tree_from_dict(data)) == data


def test_tree_document_uses_names_and_labels():
    variables = (VariableSpec("smoker", 2, ("no", "yes")), VariableSpec("cough", 2))
    tree = CStree(variables, (0, 1), ())
    data = tree_to_dict(tree)
    assert data["order"] == ["smoker", "cough"]
    assert data["variables"][0] == {"name": "smoker", "cardinality": 2, "labels": ["no", "yes"]}
    assert "labels" not in data["variables"][1]
    assert context_from_dict({"smoker": "yes"}, variables) == ctx(x0=1)


def test_missing_order_means_natural_order():
    data = {"variables": [{"name": "A"}, {"name": "B"}], "stages": []}
    assert tree_from_dict(data).order == (0, 1)


def test_tree_file_round_trip(tmp_path, split_tree):
    path = tmp_path / "models" / "tree.json"
    save_tree(split_tree, path)
    assert load_tree(path) == split_tree
    assert not (tmp_path / "models" / "tree.json.tmp").exists()


def test_unknown_order_name():
    data = {"variables": [{"name": "A"}, {"name": "B"}], "order": ["A", "C"]}
    with pytest.raises(InvalidStagingError) as exc:
        tree_from_dict(data)
    assert exc.value.context["violations"][0]["kind"] == "ordering"


def test_bad_variable_lists():
    with pytest.raises(InvalidVariableError):
        variables_from_list([{"name": "A"}, {"name": "A"}])
    with pytest.raises(InvalidVariableError):
        variables_from_list([{"cardinality": 2}])
    with pytest.raises(InvalidVariableError):
        context_from_dict({"Z": "0"}, binary_variables(2))


def test_malformed_stage_entry():
    data = tree_to_dict(CStree(binary_variables(3), (0, 1, 2), ()))
    data["stages"] = [{"context": {"X1": "0"}}]
    with pytest.raises(InvalidStagingError):
        tree_from_dict(data)


def test_stage_outside_tree_rejected():
    data = tree_to_dict(CStree(binary_variables(3), (0, 1, 2), ()))
    # X3 is decided at level 3, so it cannot appear in a level-3 context
    data["stages"] = [{"level": 3, "context": {"X3": "0"}}]
    with pytest.raises(InvalidStagingError):
        tree_from_dict(data)


# ── Interventional trees ──

def test_itree_round_trip(split_tree):
    itree = build_interventional_tree(split_tree, {"I1": [Stage(2, ctx(x0=0)), Stage(3, ctx(x0=0))]})
    data = itree_to_dict(itree)
    assert [t["name"] for t in data["targets"]] == ["I1"]
    assert len(data["targets"][0]["stages"]) == 2
    assert itree_from_dict(json.loads(json.dumps(data))) == itree


def test_search_result_document(rng):
    tree = CStree(binary_variables(3), (0, 1, 2), (Stage(3, ctx(x0=0)),))
    tables = [random_table(tree.variables, rng), random_table(tree.variables, rng)]
    result = search_targets_over_class([tree], tables)
    data = json.loads(json.dumps(search_result_to_dict(result)))
    assert data["evaluated"] == 4
    assert data["ties"] == len(data["tie_set"]) >= 1
    assert itree_from_dict(data["best"]) == result.best
    assert sorted(i for group in data["classes"] for i in group) == list(range(data["ties"]))
    assert "best_idags" in data


# ── Documents and locking ──

def test_load_document_errors(tmp_path):
    with pytest.raises(DatasetError):
        load_document(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(DatasetError):
        load_document(bad)


def test_read_json_returns_copies(tmp_path):
    path = tmp_path / "doc.json"
    write_json(path, {"stages": [1, 2]})
    first = read_json(path)
    first["stages"].append(3)
    assert read_json(path) == {"stages": [1, 2]}


def test_read_json_sees_rewrites(tmp_path):
    path = tmp_path / "doc.json"
    write_json(path, {"v": 1})
    assert read_json(path) == {"v": 1}
    write_text(path, '{"v": 2}\n')
    assert read_json(path) == {"v": 2}


def test_read_json_missing_file(tmp_path):
    assert read_json(tmp_path / "none.json", default_factory=dict) == {}
    with pytest.raises(FileNotFoundError):
        read_json(tmp_path / "none.json")
