"""DAG module tests."""

import itertools

import networkx as nx
import numpy as np
import pytest

from lib.dag import (
    CiStatement,
    Dag,
    augment_idag,
    complete_dag,
    d_separated,
    empty_dag,
    markov_equivalent,
    minimal_imap,
    skeleton,
    v_structures,
    w_node,
)
from lib.enumeration import enumerate_dags
from lib.errors import GraphError


def _path_separated(g: Dag, a, b, s) -> bool:
    """d-separation by blocking every simple path in the skeleton."""
    s = set(s)
    descendants = {n: nx.descendants(g.graph, n) | {n} for n in g.nodes}
    for path in nx.all_simple_paths(g.graph.to_undirected(), a, b):
        active = True
        for prev, mid, nxt in zip(path, path[1:], path[2:]):
            collider = (prev, mid) in g.edges and (nxt, mid) in g.edges
            if collider and not (descendants[mid] & s):
                active = False
                break
            if not collider and mid in s:
                active = False
                break
        if active:
            return False
    return True


def _random_dag(p: int, rng) -> Dag:
    order = rng.permutation(p).tolist()
    edges = {(order[i], order[j]) for i, j in itertools.combinations(range(p), 2) if rng.random() < 0.4}
    return Dag(tuple(range(p)), frozenset(edges))


# ── Construction ──

def test_dag_rejects_cycle():
    with pytest.raises(GraphError):
        Dag((0, 1, 2), frozenset({(0, 1), (1, 2), (2, 0)}))


def test_dag_rejects_unknown_node_and_self_loop():
    with pytest.raises(GraphError):
        Dag((0, 1), frozenset({(0, 5)}))
    with pytest.raises(GraphError):
        Dag((0, 1), frozenset({(1, 1)}))


def test_complete_and_empty():
    assert len(complete_dag((2, 0, 1)).edges) == 3
    assert (2, 0) in complete_dag((2, 0, 1)).edges
    assert not empty_dag(range(4)).edges


# ── d-separation ──

def test_chain_fork_collider():
    chain = Dag((0, 1, 2), frozenset({(0, 1), (1, 2)}))
    collider = Dag((0, 1, 2), frozenset({(0, 1), (2, 1)}))
    assert not d_separated(chain, {0}, {2})
    assert d_separated(chain, {0}, {2}, {1})
    assert d_separated(collider, {0}, {2})
    assert not d_separated(collider, {0}, {2}, {1})


def test_descendant_of_collider_opens_path():
    g = Dag((0, 1, 2, 3), frozenset({(0, 1), (2, 1), (1, 3)}))
    assert not d_separated(g, {0}, {2}, {3})


def test_d_separation_query_errors():
    g = complete_dag(range(3))
    with pytest.raises(GraphError):
        d_separated(g, {0}, {0})
    with pytest.raises(GraphError):
        d_separated(g, {0}, {1}, {0})
    with pytest.raises(GraphError):
        d_separated(g, set(), {1})
    with pytest.raises(GraphError):
        d_separated(g, {0}, {9})


def test_d_separation_matches_path_blocking():
    rng = np.random.default_rng(7)
    for _ in range(60):
        p = int(rng.integers(3, 7))
        g = _random_dag(p, rng)
        for a, b in itertools.combinations(range(p), 2):
            rest = [n for n in range(p) if n not in (a, b)]
            for r in range(len(rest) + 1):
                for s in itertools.combinations(rest, r):
                    assert d_separated(g, {a}, {b}, s) == _path_separated(g, a, b, s)


# ── Equivalence ──

def test_v_structures_and_skeleton():
    g = Dag((0, 1, 2), frozenset({(0, 1), (2, 1)}))
    assert v_structures(g) == frozenset({(0, 1, 2)})
    assert skeleton(g) == frozenset({frozenset({0, 1}), frozenset({1, 2})})


def test_markov_equivalence_of_chains_not_colliders():
    chain = Dag((0, 1, 2), frozenset({(0, 1), (1, 2)}))
    reversed_chain = Dag((0, 1, 2), frozenset({(2, 1), (1, 0)}))
    collider = Dag((0, 1, 2), frozenset({(0, 1), (2, 1)}))
    assert markov_equivalent(chain, reversed_chain)
    assert not markov_equivalent(chain, collider)
    with pytest.raises(GraphError):
        markov_equivalent(chain, empty_dag(range(4)))


@pytest.mark.slow
def test_markov_equivalence_matches_independence_models():
    def relations(g):
        out = set()
        for a, b in itertools.combinations(g.nodes, 2):
            rest = [n for n in g.nodes if n not in (a, b)]
            for r in range(len(rest) + 1):
                for s in itertools.combinations(rest, r):
                    if d_separated(g, {a}, {b}, s):
                        out.add((a, b, s))
        return frozenset(out)

    dags = list(enumerate_dags(4))
    assert len(dags) == 543
    signatures = [relations(g) for g in dags]
    for i, j in itertools.combinations(range(len(dags)), 2):
        assert markov_equivalent(dags[i], dags[j]) == (signatures[i] == signatures[j])


# ── Minimal I-MAP ──

def test_minimal_imap_from_statements():
    statements = [CiStatement.of({2}, {0}, {1})]
    g = minimal_imap(statements, (0, 1, 2))
    assert g.edges == frozenset({(0, 1), (1, 2)})


def test_minimal_imap_recovers_dag_from_its_oracle():
    g = Dag((0, 1, 2, 3), frozenset({(0, 2), (1, 2), (2, 3)}))

    def oracle(later, earlier, rest):
        return d_separated(g, {later}, {earlier}, rest)

    assert minimal_imap(oracle, (0, 1, 2, 3)) == g


def test_minimal_imap_in_other_order_is_supergraph():
    collider = Dag((0, 1, 2), frozenset({(0, 1), (2, 1)}))

    def oracle(later, earlier, rest):
        return d_separated(collider, {later}, {earlier}, rest)

    g = minimal_imap(oracle, (1, 0, 2))
    assert skeleton(collider) < skeleton(g)


# ── I-DAGs ──

def test_augment_idag_adds_w_nodes():
    base = Dag((0, 1, 2), frozenset({(0, 1)}))
    idag = augment_idag(base, {"I1": [1, 2]})
    assert idag.w_nodes == {"I1": w_node("I1")}
    assert idag.targets_of("I1") == {1, 2}
    assert v_structures(idag.dag) == frozenset({(0, 1, "w_I1")})
    assert idag.w_v_structures() == v_structures(idag.dag)


def test_augment_idag_rejects_unknown_head():
    with pytest.raises(GraphError):
        augment_idag(empty_dag(range(2)), {"I1": [5]})
