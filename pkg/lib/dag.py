"""Plain DAG machinery: d-separation, skeletons, v-structures, Markov
equivalence, minimal I-MAPs and I-DAG augmentation.

Nodes are variable indices (ints) or intervention nodes named `w_<target>`.
d-separation runs on the moralized ancestral subgraph (networkx).
"""

import itertools
import logging
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import networkx as nx

from .errors import GraphError
from .helpers import node_key

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Dag:
    nodes: tuple
    edges: frozenset = frozenset()

    def __post_init__(self):
        nodes = tuple(sorted(set(self.nodes), key=node_key))
        edges = frozenset(tuple(e) for e in self.edges)
        known = set(nodes)
        for u, v in edges:
            if u == v:
                raise GraphError(f"self-loop on {u}", node=u)
            if u not in known or v not in known:
                raise GraphError(f"edge {u}->{v} uses an unknown node", edge=(u, v))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        if not nx.is_directed_acyclic_graph(self.graph):
            raise GraphError("graph has a directed cycle", edges=sorted(edges, key=_edge_key))

    def __eq__(self, other):
        if not isinstance(other, Dag):
            return NotImplemented
        return set(self.nodes) == set(other.nodes) and self.edges == other.edges

    def __hash__(self):
        return hash((frozenset(self.nodes), self.edges))

    @cached_property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges)
        return g

    def parents(self, node) -> set:
        return set(self.graph.predecessors(node))

    def children(self, node) -> set:
        return set(self.graph.successors(node))

    def adjacent(self, u, v) -> bool:
        return (u, v) in self.edges or (v, u) in self.edges

    def sorted_edges(self) -> list[tuple]:
        return sorted(self.edges, key=_edge_key)

    def to_networkx(self) -> nx.DiGraph:
        return self.graph.copy()


def _edge_key(edge) -> tuple:
    return (node_key(edge[0]), node_key(edge[1]))


def complete_dag(order: Iterable) -> Dag:
    order = tuple(order)
    return Dag(order, frozenset(itertools.combinations(order, 2)))


def empty_dag(nodes: Iterable) -> Dag:
    return Dag(tuple(nodes))


# ──────────────────────────────────────────────
# d-separation
# ──────────────────────────────────────────────

def _moral_graph(g: nx.DiGraph) -> nx.Graph:
    moral = g.to_undirected()
    for preds in g.pred.values():
        moral.add_edges_from(itertools.combinations(preds, 2))
    return moral


def d_separated(g: Dag, a: Iterable, b: Iterable, s: Iterable = ()) -> bool:
    """True iff S d-separates A from B in g."""
    a, b, s = set(a), set(b), set(s)
    if not a or not b:
        raise GraphError("d-separation needs nonempty A and B")
    if a & b or a & s or b & s:
        raise GraphError("A, B and S must be pairwise disjoint",
                         a=sorted(a, key=node_key), b=sorted(b, key=node_key), s=sorted(s, key=node_key))
    unknown = (a | b | s) - set(g.nodes)
    if unknown:
        raise GraphError("query uses unknown nodes", nodes=sorted(unknown, key=node_key))

    relevant = a | b | s
    ancestral = set(relevant)
    for node in relevant:
        ancestral |= nx.ancestors(g.graph, node)
    moral = _moral_graph(g.graph.subgraph(ancestral))
    moral.remove_nodes_from(s)
    reachable = set()
    for node in a:
        reachable |= nx.node_connected_component(moral, node)
    return not (reachable & b)


# ──────────────────────────────────────────────
# Skeletons, v-structures, equivalence
# ──────────────────────────────────────────────

def skeleton(g: Dag) -> frozenset[frozenset]:
    return frozenset(frozenset(e) for e in g.edges)


def v_structures(g: Dag) -> frozenset[tuple]:
    """All i -> k <- j with i, j non-adjacent, as (i, k, j) with i before j."""
    found = set()
    for k in g.nodes:
        for i, j in itertools.combinations(sorted(g.parents(k), key=node_key), 2):
            if not g.adjacent(i, j):
                found.add((i, k, j))
    return frozenset(found)


def markov_equivalent(g: Dag, h: Dag) -> bool:
    if set(g.nodes) != set(h.nodes):
        raise GraphError("graphs have different node sets")
    return skeleton(g) == skeleton(h) and v_structures(g) == v_structures(h)


# ──────────────────────────────────────────────
# Minimal I-MAP
# ──────────────────────────────────────────────

class CiStatement(NamedTuple):
    """A and B independent given S, over graph nodes."""

    a: frozenset
    b: frozenset
    s: frozenset = frozenset()

    @classmethod
    def of(cls, a, b, s=()) -> "CiStatement":
        return cls(frozenset(a), frozenset(b), frozenset(s))

    def canonical(self) -> "CiStatement":
        first, second = sorted((self.a, self.b), key=lambda part: sorted(part, key=node_key))
        return CiStatement(first, second, self.s)


IndependenceOracle = Callable[[object, object, frozenset], bool]


def minimal_imap(ci: Iterable[CiStatement] | IndependenceOracle, order: Iterable) -> Dag:
    """Minimal I-MAP of a CI model with respect to an order.

    `ci` is a closed collection of statements or a callable
    (later, earlier, conditioning_set) -> bool.
    """
    order = tuple(order)
    if callable(ci):
        independent = ci
    else:
        known = {CiStatement.of(*stmt).canonical() for stmt in ci}

        def independent(later, earlier, rest):
            return CiStatement.of({later}, {earlier}, rest).canonical() in known

    edges = set()
    for j, later in enumerate(order):
        for i in range(j):
            earlier = order[i]
            rest = frozenset(order[:j]) - {earlier}
            if not independent(later, earlier, rest):
                edges.add((earlier, later))
    return Dag(order, frozenset(edges))


# ──────────────────────────────────────────────
# I-DAGs
# ──────────────────────────────────────────────

def w_node(target_name: str) -> str:
    return f"w_{target_name}"


@dataclass(frozen=True, eq=False)
class IDag:
    base: Dag
    w_nodes: Mapping[str, str] = field(default_factory=dict)
    w_edges: frozenset = frozenset()

    @cached_property
    def dag(self) -> Dag:
        """Base graph plus intervention nodes and their edges."""
        return Dag(self.base.nodes + tuple(self.w_nodes.values()), self.base.edges | self.w_edges)

    def targets_of(self, name: str) -> set:
        w = self.w_nodes[name]
        return {j for u, j in self.w_edges if u == w}

    def w_v_structures(self) -> frozenset[tuple]:
        w = set(self.w_nodes.values())
        return frozenset(t for t in v_structures(self.dag) if t[0] in w or t[2] in w)

    def __eq__(self, other):
        if not isinstance(other, IDag):
            return NotImplemented
        return self.base == other.base and dict(self.w_nodes) == dict(other.w_nodes) and self.w_edges == other.w_edges

    def __hash__(self):
        return hash((self.base, frozenset(self.w_nodes.items()), self.w_edges))


def augment_idag(g: Dag, placements: Mapping[str, Iterable]) -> IDag:
    """Add one w node per target, pointing at its head nodes."""
    nodes = set(g.nodes)
    w_nodes = {}
    w_edges = set()
    for name, heads in placements.items():
        w = w_node(name)
        if w in nodes:
            raise GraphError(f"intervention node {w} clashes with a graph node", node=w)
        w_nodes[name] = w
        for head in heads:
            if head not in nodes:
                raise GraphError(f"target {name} points at unknown node {head}", target=name, node=head)
            w_edges.add((w, head))
    return IDag(g, w_nodes, frozenset(w_edges))
