"""JSON documents for trees, interventional trees and results.

Tree document:
    {"variables": [{"name", "cardinality", "labels"?}],
     "order": [names],
     "stages": [{"level": k, "context": {name: label}}]}

Only stored (non-singleton) stages are written; parsing then serialising a
document is idempotent up to key order.
"""

import json
import logging
from pathlib import Path

from .errors import DatasetError, InvalidStagingError, InvalidVariableError
from .file_lock import read_json, write_json
from .interventions import InterventionalCStree, SearchResult, target_set
from .model import Context, CStree, Stage, VariableSpec

log = logging.getLogger(__name__)


# ── Variables and contexts ──

def variables_to_list(variables) -> list[dict]:
    out = []
    for v in variables:
        entry = {"name": v.name, "cardinality": v.cardinality}
        if v.labels:
            entry["labels"] = list(v.labels)
        out.append(entry)
    return out


def variables_from_list(items) -> tuple[VariableSpec, ...]:
    try:
        variables = tuple(VariableSpec(str(item["name"]), int(item.get("cardinality", 2)), item.get("labels"))
                          for item in items)
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidVariableError(f"malformed variable list: {e}") from None
    names = [v.name for v in variables]
    if len(set(names)) != len(names):
        raise InvalidVariableError("variable names must be unique", names=names)
    return variables


def _index_of(variables) -> dict[str, int]:
    return {v.name: i for i, v in enumerate(variables)}


def context_to_dict(context: Context, variables) -> dict[str, str]:
    return {variables[v].name: variables[v].label(x) for v, x in context.pairs}


def context_from_dict(data: dict, variables) -> Context:
    index = _index_of(variables)
    pairs = []
    for name, label in data.items():
        if name not in index:
            raise InvalidVariableError(f"unknown variable {name!r} in context", variable=name)
        v = index[name]
        pairs.append((v, variables[v].outcome(label)))
    return Context(tuple(pairs))


def stage_to_dict(stage: Stage, variables) -> dict:
    return {"level": stage.level, "context": context_to_dict(stage.context, variables)}


def stage_from_dict(data: dict, variables) -> Stage:
    try:
        return Stage(int(data["level"]), context_from_dict(data.get("context", {}), variables))
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidStagingError(f"malformed stage entry: {e}") from None


# ── Trees ──

def tree_to_dict(tree: CStree) -> dict:
    return {
        "variables": variables_to_list(tree.variables),
        "order": [tree.variables[v].name for v in tree.order],
        "stages": [stage_to_dict(s, tree.variables) for s in tree.stages],
    }


def tree_from_dict(data: dict) -> CStree:
    variables = variables_from_list(data.get("variables", []))
    index = _index_of(variables)
    order_names = data.get("order") or [v.name for v in variables]
    unknown = [name for name in order_names if name not in index]
    if unknown:
        raise InvalidStagingError(f"order names unknown variables {unknown}",
                                  violations=[{"level": 0, "kind": "ordering"}])
    order = tuple(index[name] for name in order_names)
    stages = tuple(stage_from_dict(s, variables) for s in data.get("stages", []))
    return CStree(variables, order, stages)


def save_tree(tree: CStree, path: Path):
    write_json(Path(path), tree_to_dict(tree))
    log.info(f"Saved tree ({tree.total_stages()} stages) to {path}")


def load_document(path: Path) -> dict:
    """A JSON document from disk; unreadable files raise DatasetError."""
    try:
        return read_json(Path(path))
    except FileNotFoundError:
        raise DatasetError(f"{path} does not exist", path=str(path)) from None
    except json.JSONDecodeError as e:
        raise DatasetError(f"{path} is not valid JSON: {e}", path=str(path)) from None


def load_tree(path: Path) -> CStree:
    return tree_from_dict(load_document(path))


# ── Interventional trees ──

def itree_to_dict(itree: InterventionalCStree) -> dict:
    variables = itree.base.variables
    return {
        "tree": tree_to_dict(itree.base),
        "targets": [
            {"name": name, "stages": [stage_to_dict(s, variables) for s in sorted(itree.targets.stages(name))]}
            for name in itree.targets.names[1:]
        ],
    }


def itree_from_dict(data: dict) -> InterventionalCStree:
    tree = tree_from_dict(data["tree"])
    stage_sets = {entry["name"]: [stage_from_dict(s, tree.variables) for s in entry.get("stages", [])]
                  for entry in data.get("targets", [])}
    return InterventionalCStree(tree, target_set(tree, stage_sets))


def idags_to_dict(itree: InterventionalCStree) -> dict:
    return itree.idags.to_dict()


def search_result_to_dict(result: SearchResult) -> dict:
    data = result.to_dict()
    data["best"] = itree_to_dict(result.best)
    data["best_idags"] = idags_to_dict(result.best)
    data["tie_set"] = [itree_to_dict(t) for t in result.ties]
    data["classes"] = [[result.ties.index(t) for t in group] for group in result.classes]
    return data
