"""Context-specific independence: relations, the axiom closure, minimal
contexts, context graphs and the CStree equivalence test.

Minimal contexts and context graphs are read off per-variable relation
families: for a level variable v and an earlier variable u, the family is the
set of outcome points over the other predecessors of v at which the whole
u-line lies in one stage. Its maximal faces are the contexts that admit no
further absorption. A context that fixes variables after v reweights v's
stage vectors by the probability of those later values, so those queries are
read off the joint table under generic stage parameters. The brute-force
`axiom_closure` is kept as an oracle for small trees.
"""

import functools
import itertools
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import config
from .dag import Dag, d_separated, minimal_imap, skeleton, v_structures
from .errors import BudgetExceededError, CStreeError, VariableMismatchError
from .estimation import joint_distribution, random_parameters
from .model import EMPTY_CONTEXT, Context, CStree, Stage, VariableSpec, absorb_stage

log = logging.getLogger(__name__)


# ──────────────────────────────────────────────
# Relations
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class CsiRelation:
    """A independent of B given S in a context; A and B in canonical order."""

    a: frozenset[int]
    b: frozenset[int]
    s: frozenset[int] = frozenset()
    context: Context = field(default_factory=Context)

    def __post_init__(self):
        a, b, s = frozenset(self.a), frozenset(self.b), frozenset(self.s)
        if not a or not b:
            raise CStreeError("relation sides must be nonempty")
        parts = [a, b, s, self.context.domain]
        if sum(len(x) for x in parts) != len(frozenset().union(*parts)):
            raise CStreeError("relation sets must be pairwise disjoint")
        if sorted(b) < sorted(a):
            a, b = b, a
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "s", s)

    def __lt__(self, other):
        return self._key() < other._key()

    def _key(self):
        return (self.context, sorted(self.a), sorted(self.b), sorted(self.s))

    def format(self, variables=None) -> str:
        def names(vs):
            return ",".join(variables[v].name if variables else f"X{v + 1}" for v in sorted(vs))
        text = f"{names(self.a)} ⫫ {names(self.b)}"
        if self.s:
            text += f" | {names(self.s)}"
        if not self.context.is_empty:
            text += f" {'' if self.s else '| '}[{self.context.format(variables)}]"
        return text


@dataclass(frozen=True)
class CsiSet:
    variables: tuple[VariableSpec, ...]
    relations: frozenset[CsiRelation] = frozenset()
    closed: bool = False
    complete: bool = True

    def __contains__(self, relation) -> bool:
        return relation in self.relations

    def __len__(self) -> int:
        return len(self.relations)

    def with_context(self, context: Context) -> list[CsiRelation]:
        return sorted(r for r in self.relations if r.context == context)


def stage_relations(tree: CStree) -> CsiSet:
    """One relation per stored stage: the level variable against the earlier ones outside its context."""
    relations = set()
    for stage in tree.stages:
        v = tree.level_variable(stage.level)
        rest = frozenset(tree.order[:stage.level - 1]) - stage.context.domain
        if rest:
            relations.add(CsiRelation(frozenset({v}), rest, frozenset(), stage.context))
    return CsiSet(tree.variables, frozenset(relations))


# ──────────────────────────────────────────────
# Brute-force closure (oracle)
# ──────────────────────────────────────────────

def _proper_subsets(items: frozenset):
    items = sorted(items)
    for size in range(1, len(items)):
        for combo in itertools.combinations(items, size):
            yield frozenset(combo)


def _nonempty_subsets(items: frozenset):
    items = sorted(items)
    for size in range(1, len(items) + 1):
        for combo in itertools.combinations(items, size):
            yield frozenset(combo)


def _orientations(r: CsiRelation):
    yield r.a, r.b
    yield r.b, r.a


def _unary(r: CsiRelation, cards: dict[int, int]) -> set[CsiRelation]:
    out = set()
    for x, y in _orientations(r):
        for part in _proper_subsets(y):
            out.add(CsiRelation(x, part, r.s, r.context))                   # decomposition
            out.add(CsiRelation(x, y - part, r.s | part, r.context))        # weak union
    for t in _nonempty_subsets(r.s):                                        # specialization
        for values in itertools.product(*(range(cards[v]) for v in sorted(t))):
            ctx = Context(r.context.pairs + tuple(zip(sorted(t), values)))
            out.add(CsiRelation(r.a, r.b, r.s - t, ctx))
    return out


def _absorptions(r: CsiRelation, closed: set[CsiRelation], cards: dict[int, int]) -> set[CsiRelation]:
    out = set()
    for t in _nonempty_subsets(r.context.domain):
        base = r.context.drop(t)
        ordered = sorted(t)
        if all(CsiRelation(r.a, r.b, r.s, Context(base.pairs + tuple(zip(ordered, values)))) in closed
               for values in itertools.product(*(range(cards[v]) for v in ordered))):
            out.add(CsiRelation(r.a, r.b, r.s | t, base))
    return out


def _pairs(r: CsiRelation, q: CsiRelation) -> set[CsiRelation]:
    out = set()
    for x, y in _orientations(r):
        for x2, w in _orientations(q):
            if x != x2 or y & w:
                continue
            # contraction: X⫫Y | S∪W and X⫫W | S  =>  X⫫Y∪W | S
            if w <= r.s and r.s - w == q.s:
                out.add(CsiRelation(x, y | w, q.s, r.context))
            if y <= q.s and q.s - y == r.s:
                out.add(CsiRelation(x, y | w, r.s, r.context))
            # intersection: X⫫Y | Z1 and X⫫W | Z2 with W ⊆ Z1, Y ⊆ Z2, Z1-W = Z2-Y
            if w <= r.s and y <= q.s and r.s - w == q.s - y:
                out.add(CsiRelation(x, y | w, r.s - w, r.context))
    return out


def axiom_closure(js: CsiSet, bound: int | None = None) -> CsiSet:
    """Fixpoint of the seven CSI axioms; flagged incomplete past `bound` relations."""
    bound = bound or config.CSTREE_CLOSURE_LIMIT
    cards = {i: v.cardinality for i, v in enumerate(js.variables)}
    closed = set(js.relations)
    by_context: dict[Context, set[CsiRelation]] = {}
    for r in closed:
        by_context.setdefault(r.context, set()).add(r)
    frontier = set(closed)
    rounds = 0
    while frontier:
        rounds += 1
        derived = set()
        for r in frontier:
            derived |= _unary(r, cards)
            derived |= _absorptions(r, closed, cards)
            for q in by_context.get(r.context, ()):
                derived |= _pairs(r, q)
        fresh = derived - closed
        if len(closed) + len(fresh) > bound:
            log.warning(f"CSI closure stopped at {len(closed)} relations (bound {bound})")
            return CsiSet(js.variables, frozenset(closed), closed=True, complete=False)
        closed |= fresh
        for r in fresh:
            by_context.setdefault(r.context, set()).add(r)
        frontier = fresh
    log.debug(f"CSI closure: {len(closed)} relations after {rounds} rounds")
    return CsiSet(js.variables, frozenset(closed), closed=True, complete=True)


def minimal_contexts_from_closure(closure: CsiSet) -> list[Context]:
    """Contexts carrying a relation that no absorption can widen."""
    found = set()
    for r in closure.relations:
        widened = any(CsiRelation(r.a, r.b, r.s | t, r.context.drop(t)) in closure.relations
                      for t in _nonempty_subsets(r.context.domain))
        if not widened:
            found.add(r.context)
    return sorted(found)


# ──────────────────────────────────────────────
# Relation families
# ──────────────────────────────────────────────

class RelationFamilies:
    """Per (v, u): where over v's other predecessors the whole u-line shares a stage."""

    def __init__(self, tree: CStree):
        self.tree = tree
        self.inside: dict[tuple[int, int], tuple[tuple[int, ...], np.ndarray]] = {}
        for level in range(2, tree.p + 1):
            v = tree.level_variable(level)
            preds = tree.order[:level - 1]
            labels = tree.labels(level).reshape(tree.cards[:level - 1])
            for axis, u in enumerate(preds):
                same = np.all(labels == np.take(labels, [0], axis=axis), axis=axis)
                self.inside[(v, u)] = (preds[:axis] + preds[axis + 1:], same)

    def holds(self, v: int, u: int, context: Context) -> bool:
        """Whether v is independent of u given its other free predecessors."""
        entry = self.inside.get((v, u))
        if entry is None:
            return False
        axes, same = entry
        if u in context.domain or not context.domain <= set(axes):
            return False
        index = tuple(context.get(a) if a in context.domain else slice(None) for a in axes)
        return bool(np.all(same[index]))

    def maximal_contexts(self) -> set[Context]:
        found = set()
        for (_v, _u), (axes, same) in self.inside.items():
            for face in _maximal_faces(same):
                found.add(Context(tuple((axes[i], x) for i, x in enumerate(face) if x is not None)))
        return found


def _maximal_faces(inside: np.ndarray) -> set[tuple]:
    """Maximal faces (tuples of value-or-None) lying inside a boolean grid."""
    if inside.ndim == 0:
        return {()} if bool(inside) else set()
    memo: dict[tuple, bool] = {}

    def contained(face):
        if face not in memo:
            memo[face] = bool(np.all(inside[tuple(slice(None) if x is None else x for x in face)]))
        return memo[face]

    maximal = set()
    seen = set()
    stack = [tuple(int(x) for x in point) for point in np.argwhere(inside)]
    while stack:
        face = stack.pop()
        if face in seen:
            continue
        seen.add(face)
        grew = False
        for axis, value in enumerate(face):
            if value is None:
                continue
            wider = face[:axis] + (None,) + face[axis + 1:]
            if contained(wider):
                grew = True
                stack.append(wider)
        if not grew:
            maximal.add(face)
    return maximal


def minimal_contexts(tree: CStree) -> list[Context]:
    return sorted(tree_families(tree).maximal_contexts())


@functools.lru_cache(maxsize=256)
def tree_families(tree: CStree) -> RelationFamilies:
    return RelationFamilies(tree)


# ──────────────────────────────────────────────
# Contexts fixing later variables
# ──────────────────────────────────────────────

GENERIC_DRAWS = 2
GENERIC_TOLERANCE = 1e-9


class GenericConditionals:
    """Joint tables of a CStree under independent Dirichlet(1) stage draws."""

    def __init__(self, tree: CStree, draws: int = GENERIC_DRAWS):
        rng = np.random.default_rng(config.CSTREE_SEED)
        self.tree = tree
        self.joints = [joint_distribution(tree, random_parameters(tree, rng, alpha=1.0)) for _ in range(draws)]
        log.debug(f"Generic joint tables: {draws} x {self.joints[0].size} cells")

    def holds(self, v: int, u: int, context: Context) -> bool:
        """Whether v's conditional given its other free predecessors and `context` ignores u."""
        if u in context.domain or v in context.domain:
            return False
        order = self.tree.order
        later = tuple(w for w in order[order.index(v) + 1:] if w not in context.domain)
        free = [i for i in range(self.tree.p) if i not in context.domain]
        index = tuple(context.get(i) if i in context.domain else slice(None) for i in range(self.tree.p))
        for joint in self.joints:
            table = joint.sum(axis=later, keepdims=True)[index]
            conditional = table / table.sum(axis=free.index(v), keepdims=True)
            if np.ptp(conditional, axis=free.index(u)).max() > GENERIC_TOLERANCE:
                return False
        return True


@functools.lru_cache(maxsize=64)
def tree_conditionals(tree: CStree) -> GenericConditionals:
    return GenericConditionals(tree)


def pairwise_query(tree: CStree, context: Context):
    """minimal_imap callback for `context`: v against u given v's other free predecessors."""
    families = tree_families(tree)

    def holds(later, earlier, _rest):
        if context.domain <= set(tree.order[:tree.order.index(later)]):
            return families.holds(later, earlier, context)
        return tree_conditionals(tree).holds(later, earlier, context)
    return holds


# ──────────────────────────────────────────────
# Context graphs
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class ContextGraphSet:
    variables: tuple[VariableSpec, ...]
    order: tuple[int, ...]
    contexts: tuple[Context, ...]
    graphs: dict[Context, Dag]
    minimal: tuple[Context, ...] = ()

    def graph(self, context: Context) -> Dag:
        return self.graphs[context]

    def induced_order(self, context: Context) -> tuple[int, ...]:
        return tuple(v for v in self.order if v not in context.domain)

    def to_dict(self) -> dict:
        return {
            "contexts": [
                {"context": c.format(self.variables),
                 "edges": [[self.variables[u].name, self.variables[v].name] for u, v in self.graphs[c].sorted_edges()]}
                for c in self.contexts
            ],
        }


def context_graphs(tree: CStree) -> ContextGraphSet:
    """Minimal I-MAP per minimal context, in the induced causal order.

    A tree without any CSI relation gets the single empty context with the
    complete DAG.
    """
    minimal = tuple(minimal_contexts(tree))
    contexts = minimal or (EMPTY_CONTEXT,)
    graphs = {}
    for context in contexts:
        induced = [v for v in tree.order if v not in context.domain]
        graphs[context] = minimal_imap(pairwise_query(tree, context), induced)
    log.debug(f"Context graphs: {len(contexts)} contexts")
    return ContextGraphSet(tree.variables, tree.order, contexts, graphs, minimal)


# ──────────────────────────────────────────────
# Equivalence
# ──────────────────────────────────────────────

class EquivalenceSignature(NamedTuple):
    contexts: frozenset[Context]
    graphs: frozenset[tuple]


def equivalence_signature(tree: CStree) -> EquivalenceSignature:
    graphs = context_graphs(tree)
    return EquivalenceSignature(
        frozenset(graphs.minimal),
        frozenset((c, skeleton(g), v_structures(g)) for c, g in graphs.graphs.items()),
    )


def _check_same_variables(t1: CStree, t2: CStree):
    if not t1.same_variables(t2):
        raise VariableMismatchError("trees are over different variables",
                                    first=[v.name for v in t1.variables], second=[v.name for v in t2.variables])


def cstree_equivalent(t1: CStree, t2: CStree) -> bool:
    """Same minimal contexts, and per context the same skeleton and v-structures."""
    _check_same_variables(t1, t2)
    return equivalence_signature(t1) == equivalence_signature(t2)


def _rebuild_in_order(variables, graphs: ContextGraphSet, order: tuple[int, ...]) -> CStree:
    """CStree in `order` whose context graphs are the minimal I-MAPs of `graphs` there."""
    imaps = {}
    for context, g in graphs.graphs.items():
        induced = [v for v in order if v not in context.domain]
        imaps[context] = minimal_imap(
            lambda later, earlier, rest, g=g: d_separated(g, {later}, {earlier}, rest), induced)
    stages = []
    for level in range(2, len(order) + 1):
        v = order[level - 1]
        preds = order[:level - 1]
        contexts: list[Context] = []
        for prefix in itertools.product(*(range(variables[u].cardinality) for u in preds)):
            keep = None
            for context, imap in imaps.items():
                if v in context.domain or not context.domain <= set(preds):
                    continue
                if not context.matches(order, prefix):
                    continue
                span = context.domain | imap.parents(v)
                keep = span if keep is None else keep & span
            if keep is None:
                continue
            contexts = absorb_stage(contexts, Context.from_prefix(order, prefix).restrict(keep), level - 1)
        stages.extend(Stage(level, c) for c in contexts)
    return CStree(variables, order, tuple(stages))


def equivalence_class(tree: CStree, limit: int | None = None) -> list[CStree]:
    """Every CStree statistically equivalent to `tree`, one per qualifying ordering."""
    limit = limit or config.CSTREE_PERMUTATION_LIMIT
    if tree.p > limit:
        raise BudgetExceededError(f"{tree.p} variables exceed the ordering limit {limit}", p=tree.p, limit=limit)
    graphs = context_graphs(tree)
    signature = equivalence_signature(tree)
    members = []
    for order in itertools.permutations(range(tree.p)):
        if order == tree.order:
            members.append(tree)
            continue
        candidate = _rebuild_in_order(tree.variables, graphs, order)
        if equivalence_signature(candidate) == signature:
            members.append(candidate)
    log.info(f"Equivalence class: {len(members)} trees over {tree.p} variables")
    return members
