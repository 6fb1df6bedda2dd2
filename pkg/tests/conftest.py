"""Shared fixtures: the worked example trees and small helpers."""

import numpy as np
import pytest

from lib.estimation import ContingencyTable
from lib.model import Context, CStree, Stage, binary_variables


def ctx(**assignment) -> Context:
    """Context from keyword pairs like x0=1, x2=0 (0-based variable indices)."""
    return Context(tuple((int(k[1:]), v) for k, v in assignment.items()))


def node_prefix(n: int) -> tuple[int, ...]:
    """Binary tree node number (root 0, each level numbered right to left) as an outcome prefix."""
    level = (n + 1).bit_length() - 1
    j = n - (2 ** level - 1)
    lex = 2 ** level - 1 - j
    return tuple((lex >> (level - 1 - i)) & 1 for i in range(level))


def random_table(variables, rng, low: int = 1, high: int = 50) -> ContingencyTable:
    """Strictly positive random counts."""
    shape = tuple(v.cardinality for v in variables)
    return ContingencyTable(variables, rng.integers(low, high, size=shape))


@pytest.fixture
def three_context_tree() -> CStree:
    """Four binary variables; not a DAG model, three minimal contexts."""
    return CStree(binary_variables(4), (0, 1, 2, 3), (
        Stage(3, ctx(x1=0)),
        Stage(4, ctx(x0=0, x2=0)),
        Stage(4, ctx(x0=1, x2=0)),
        Stage(4, ctx(x0=0, x2=1)),
    ))


@pytest.fixture
def split_tree() -> CStree:
    return CStree(binary_variables(4), (0, 1, 2, 3), (
        Stage(3, ctx(x0=0)),
        Stage(4, ctx(x0=0, x2=1)),
        Stage(4, ctx(x0=0, x2=0)),
        Stage(4, ctx(x0=1, x1=1)),
        Stage(4, ctx(x0=1, x1=0)),
    ))


@pytest.fixture
def reordered_tree() -> CStree:
    """split_tree's model in the ordering X1 < X3 < X2 < X4."""
    return CStree(binary_variables(4), (0, 2, 1, 3), (
        Stage(3, ctx(x0=0)),
        Stage(4, ctx(x0=0, x2=0)),
        Stage(4, ctx(x0=0, x2=1)),
        Stage(4, ctx(x0=1, x1=0)),
        Stage(4, ctx(x0=1, x1=1)),
    ))


@pytest.fixture
def multinet_tree() -> CStree:
    return CStree(binary_variables(4), (0, 1, 2, 3), (
        Stage(3, ctx(x0=0)),
        Stage(4, ctx(x0=1, x2=0)),
        Stage(4, ctx(x0=1, x2=1)),
    ))


@pytest.fixture
def split_target_nodes() -> set[tuple[int, ...]]:
    return {node_prefix(n) for n in (5, 6, 11, 12, 13, 14)}


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
