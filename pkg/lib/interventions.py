"""Intervention targets, interventional CStrees, minimal-context I-DAGs,
interventional equivalence and target search.

A target is a set of tree nodes: the children of every member of a union of
whole stages. An interventional CStree is the base tree plus one target per
experiment (the observational target comes first, empty, named "obs"). It is
never materialised as copies: each stage owns one shared parameter slot, and
every target that touches the stage owns an extra slot of its own.

Usage:
    targets = target_set(tree, {"I1": [Stage(2, Context.of({0: 0})), Stage(3, Context.of({0: 0}))]})
    itree = build_interventional_tree(tree, targets)
    idags = context_idags(itree)
    score = interventional_bic(itree, [obs_table, int_table])
"""

import itertools
import logging
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import config
from .csi import context_graphs
from .dag import IDag, augment_idag, complete_dag, d_separated, skeleton, v_structures, w_node
from .errors import (
    BudgetExceededError,
    IncompleteTargetError,
    InvalidStagingError,
    OutOfRangeError,
    TargetError,
    UndefinedStageError,
    VariableMismatchError,
)
from .estimation import (
    ContingencyTable,
    ParameterMap,
    Score,
    _check_same,
    make_score,
    multinomial_loglik,
    stage_counts,
)
from .helpers import node_key, prefix_grid
from .model import EMPTY_CONTEXT, Context, CStree, Stage, context_mask, context_specific_subtree, stage_of

log = logging.getLogger(__name__)

OBSERVATIONAL = "obs"
TIE_TOLERANCE = 1e-9


# ──────────────────────────────────────────────
# Targets
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class InterventionTarget:
    name: str
    nodes: frozenset[tuple[int, ...]] = frozenset()

    @property
    def is_empty(self) -> bool:
        return not self.nodes

    def sorted_nodes(self) -> list[tuple[int, ...]]:
        return sorted(self.nodes, key=lambda n: (len(n), n))


@dataclass(frozen=True)
class TargetSet:
    """Targets in experiment order, the observational one first, with the
    stage set behind each target."""

    targets: tuple[InterventionTarget, ...]
    stage_map: Mapping[str, frozenset[Stage]]

    def __post_init__(self):
        if not self.targets or self.targets[0].name != OBSERVATIONAL or not self.targets[0].is_empty:
            raise TargetError("the first target must be the empty observational target")
        names = [t.name for t in self.targets]
        if len(set(names)) != len(names):
            raise TargetError("target names must be unique", names=names)

    def __len__(self) -> int:
        return len(self.targets)

    def __iter__(self):
        return iter(self.targets)

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.targets]

    @property
    def interventional(self) -> tuple[InterventionTarget, ...]:
        return self.targets[1:]

    def stages(self, name: str) -> frozenset[Stage]:
        return self.stage_map[name]


def _check_stage(tree: CStree, stage: Stage):
    try:
        tree.stage_label(stage)
    except InvalidStagingError:
        raise TargetError(f"{stage.format(tree.variables)} is not a stage of the tree",
                          stage=stage.format(tree.variables)) from None


def target_from_stages(tree: CStree, stages: Iterable[Stage], name: str = "I") -> InterventionTarget:
    """All children of all members of the given stages."""
    nodes = set()
    for stage in stages:
        _check_stage(tree, stage)
        d = tree.cards[stage.level - 1]
        for member in stage.members(tree):
            nodes.update(member + (x,) for x in range(d))
    return InterventionTarget(name, frozenset(nodes))


def stages_for_target(tree: CStree, nodes: Iterable) -> frozenset[Stage]:
    """The stage set whose children are exactly `nodes`; TargetError otherwise."""
    by_level: dict[int, set[tuple[int, ...]]] = {}
    for node in nodes:
        node = tuple(int(x) for x in node)
        if not 1 <= len(node) <= tree.p:
            raise TargetError(f"node {node} is not a non-root tree node", node=node)
        if any(not 0 <= x < d for x, d in zip(node, tree.cards)):
            raise TargetError(f"node {node} out of range", node=node)
        by_level.setdefault(len(node), set()).add(node)
    stages = set()
    for k, group in sorted(by_level.items()):
        parents = {node[:-1] for node in group}
        for parent in sorted(parents):
            missing = [parent + (x,) for x in range(tree.cards[k - 1]) if parent + (x,) not in group]
            if missing:
                raise TargetError(f"node {missing[0]} is missing: targets take all children of a node",
                                  node=missing[0])
            try:
                stage = stage_of(tree, parent)
            except OutOfRangeError:
                raise TargetError(f"node {parent} has no stage", node=parent) from None
            absent = [m for m in stage.members(tree) if m not in parents]
            if absent:
                raise TargetError(f"stage {stage.format(tree.variables)} is only partly targeted",
                                  stage=stage.format(tree.variables), node=absent[0])
            stages.add(stage)
    return frozenset(stages)


def target_set(tree: CStree, stage_sets: Mapping[str, Iterable[Stage]] | Sequence[Iterable[Stage]]) -> TargetSet:
    """Observational target plus one target per stage set (named I1.. for sequences)."""
    if not isinstance(stage_sets, Mapping):
        stage_sets = {f"I{i}": stages for i, stages in enumerate(stage_sets, start=1)}
    if OBSERVATIONAL in stage_sets:
        raise TargetError(f"target name {OBSERVATIONAL!r} is reserved")
    targets = [InterventionTarget(OBSERVATIONAL)]
    stage_map = {OBSERVATIONAL: frozenset()}
    for name, stages in stage_sets.items():
        stages = frozenset(stages)
        targets.append(target_from_stages(tree, stages, name))
        stage_map[name] = stages
    return TargetSet(tuple(targets), stage_map)


def targets_from_nodes(tree: CStree, node_sets: Mapping[str, Iterable]) -> TargetSet:
    return target_set(tree, {name: stages_for_target(tree, nodes) for name, nodes in node_sets.items()})


# ──────────────────────────────────────────────
# Completeness
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class CompletenessReport:
    ok: bool
    witness: tuple[int, ...] | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {"ok": self.ok, "witness": list(self.witness) if self.witness is not None else None,
                "reason": self.reason}


def _completeness_contexts(tree: CStree) -> list[Context]:
    """Minimal contexts, or the empty context when the tree has none."""
    return context_graphs(tree).minimal or [EMPTY_CONTEXT]


def _level_masks(tree: CStree, level: int, contexts) -> tuple[np.ndarray, list[np.ndarray]]:
    """Prefix grid of the level and, per applicable context, its member mask."""
    preds = set(tree.order[:level - 1])
    grid = prefix_grid(tree.cards[:level - 1])
    masks = [context_mask(c, grid, tree.position) for c in contexts if c.domain <= preds]
    return grid, masks


def _level_violation(targeted: np.ndarray, masks: list[np.ndarray]) -> tuple[int, str] | None:
    """First targeted member breaking completeness, with the reason."""
    for flat in np.flatnonzero(targeted):
        applicable = [m for m in masks if m[flat]]
        if not applicable:
            return int(flat), "no minimal context is a subcontext of the node's parent"
        for m in applicable:
            if not np.all(targeted[m]):
                return int(flat), "a minimal context of the node's parent is only partly targeted"
    return None


def is_complete(tree: CStree, target: InterventionTarget | Iterable[Stage]) -> CompletenessReport:
    """Every targeted node's parent has a minimal subcontext, and every such
    subcontext is targeted across all the prefixes it covers."""
    stages = (stages_for_target(tree, target.nodes) if isinstance(target, InterventionTarget)
              else frozenset(target))
    contexts = _completeness_contexts(tree)
    for level in sorted({s.level for s in stages}):
        grid, masks = _level_masks(tree, level, contexts)
        ids = [tree.stage_label(s) for s in stages if s.level == level]
        targeted = np.isin(tree.labels(level), ids)
        violation = _level_violation(targeted, masks)
        if violation is not None:
            flat, reason = violation
            parent = tuple(int(x) for x in grid[:, flat])
            return CompletenessReport(False, parent + (0,), reason)
    return CompletenessReport(True)


def complete_targets(tree: CStree, budget: int | None = None) -> list[frozenset[Stage]]:
    """Every stage subset whose target is complete, the empty subset first.

    Completeness is checked level by level; the per-level subset count is
    bounded by `budget`.
    """
    budget = budget or config.CSTREE_TARGET_BUDGET
    contexts = _completeness_contexts(tree)
    per_level = []
    for level in range(1, tree.p + 1):
        stages = tree.all_stages(level)
        if 2 ** len(stages) > budget:
            raise BudgetExceededError(f"level {level} has {2 ** len(stages)} stage subsets (budget {budget})",
                                      level=level, budget=budget)
        _, masks = _level_masks(tree, level, contexts)
        labels = tree.labels(level)
        options = []
        for size in range(len(stages) + 1):
            for ids in itertools.combinations(range(len(stages)), size):
                if size and _level_violation(np.isin(labels, ids), masks) is not None:
                    continue
                options.append(tuple(stages[i] for i in ids))
        per_level.append(options)
    found = [frozenset(itertools.chain.from_iterable(choice)) for choice in itertools.product(*per_level)]
    log.debug(f"Complete targets: {len(found)} stage subsets over {tree.p} levels")
    return found


# ──────────────────────────────────────────────
# Interventional CStrees
# ──────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class InterventionalCStree:
    base: CStree
    targets: TargetSet

    def __post_init__(self):
        for name in self.targets.names:
            for stage in self.targets.stages(name):
                _check_stage(self.base, stage)

    def __eq__(self, other):
        if not isinstance(other, InterventionalCStree):
            return NotImplemented
        return self.base == other.base and self._key() == other._key()

    def __hash__(self):
        return hash((self.base, self._key()))

    def _key(self) -> tuple:
        return tuple((name, self.targets.stages(name)) for name in self.targets.names)

    def targeted_by(self, stage: Stage) -> list[str]:
        return [name for name in self.targets.names if stage in self.targets.stages(name)]

    @cached_property
    def split_stages(self) -> dict[Stage, tuple[str, ...]]:
        """Stages with per-copy slots, mapped to the targets owning them."""
        split = {}
        for name in self.targets.names[1:]:
            for stage in self.targets.stages(name):
                split.setdefault(stage, ())
                split[stage] += (name,)
        return split

    def free_parameters(self) -> int:
        return sum((1 + len(self.targeted_by(stage))) * (self.base.cards[k - 1] - 1)
                   for k in range(1, self.base.p + 1) for stage in self.base.all_stages(k))

    @cached_property
    def idags(self) -> "ContextIDagSet":
        return context_idags(self)

    def format(self) -> str:
        parts = []
        for name in self.targets.names[1:]:
            stages = sorted(self.targets.stages(name))
            parts.append(f"{name}: {{{', '.join(s.format(self.base.variables) for s in stages)}}}")
        return f"order={list(self.base.order)} " + ("; ".join(parts) or "no targets")


def build_interventional_tree(tree: CStree, targets) -> InterventionalCStree:
    """`targets` is a TargetSet, a mapping name -> stages, or a sequence of stage sets."""
    if not isinstance(targets, TargetSet):
        targets = target_set(tree, targets)
    return InterventionalCStree(tree, targets)


def intervened_parameters(params: ParameterMap, stages: Iterable[Stage], vectors: Mapping | None = None,
                          seed=None, alpha: float | None = None) -> ParameterMap:
    """Parameters of one interventional copy: the targeted stages get new vectors.

    Stages missing from `vectors` draw a fresh Dirichlet(alpha) vector.
    """
    tree = params.tree
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    alpha = alpha or config.CSTREE_DIRICHLET_ALPHA
    vectors = dict(vectors or {})
    result = params
    for stage in sorted(stages):
        d = tree.cards[stage.level - 1]
        vector = vectors.get(stage)
        if vector is None:
            vector = rng.dirichlet(np.full(d, alpha))
        result = result.replace(stage.level, tree.stage_label(stage), vector)
    return result


# ──────────────────────────────────────────────
# Interventional scoring
# ──────────────────────────────────────────────

class _SlotCounts:
    """Per-table stage counts of one base tree, reused across target choices."""

    def __init__(self, tree: CStree, tables: Sequence[ContingencyTable]):
        if not tables:
            raise VariableMismatchError("interventional scoring needs at least the observational table")
        for table in tables:
            _check_same(tree.variables, table.variables)
        self.tree = tree
        self.n = sum(t.n for t in tables)
        self.counts = [[stage_counts(tree, t, k) for k in range(1, tree.p + 1)] for t in tables]

    def _masks(self, level: int, stage_sets: Sequence[frozenset[Stage]]) -> np.ndarray:
        masks = np.zeros((len(stage_sets), self.tree.n_stages(level)), dtype=bool)
        for t, stages in enumerate(stage_sets):
            for stage in stages:
                if stage.level == level:
                    masks[t, self.tree.stage_label(stage)] = True
        return masks

    def slots(self, level: int, stage_sets) -> tuple[np.ndarray, list[np.ndarray], np.ndarray]:
        """Shared slot counts (stages, d), per-table own-slot counts and the masks."""
        masks = self._masks(level, stage_sets)
        per_table = [c[level - 1] for c in self.counts]
        shared = sum(c * ~m[:, None] for c, m in zip(per_table, masks))
        own = [c[m] for c, m in zip(per_table, masks)]
        return shared, own, masks

    def score(self, stage_sets, on_undefined: str = "raise", names=None) -> Score:
        loglik = 0.0
        free = 0
        for k in range(1, self.tree.p + 1):
            shared, own, masks = self.slots(k, stage_sets)
            if on_undefined == "raise":
                self._check_defined(k, shared, own, masks, names)
            loglik += float(multinomial_loglik(shared).sum())
            loglik += sum(float(multinomial_loglik(o).sum()) for o in own if len(o))
            free += (self.tree.n_stages(k) + int(masks.sum())) * (self.tree.cards[k - 1] - 1)
        return make_score(loglik, free, self.n)

    def _check_defined(self, level, shared, own, masks, names):
        empty = np.flatnonzero(shared.sum(axis=1) == 0)
        if len(empty):
            stage = self.tree.all_stages(level)[int(empty[0])]
            raise UndefinedStageError(f"stage {stage.format(self.tree.variables)} has no observations",
                                      level=level, stage=stage.format(self.tree.variables))
        for t, counts in enumerate(own):
            empty = np.flatnonzero(counts.sum(axis=1) == 0) if len(counts) else []
            if len(empty):
                stage = self.tree.all_stages(level)[int(np.flatnonzero(masks[t])[empty[0]])]
                name = names[t] if names else t
                raise UndefinedStageError(
                    f"stage {stage.format(self.tree.variables)} has no observations under target {name}",
                    level=level, stage=stage.format(self.tree.variables), target=name)


def _aligned(itree: InterventionalCStree, tables) -> list:
    tables = list(tables)
    if len(tables) != len(itree.targets):
        raise VariableMismatchError(f"expected {len(itree.targets)} tables (one per target), got {len(tables)}",
                                    targets=itree.targets.names)
    return tables


def interventional_bic(itree: InterventionalCStree, tables, on_undefined: str = "raise") -> Score:
    """BIC with one table per target, pooling counts across copies that share a slot."""
    tables = _aligned(itree, tables)
    stage_sets = [itree.targets.stages(name) for name in itree.targets.names]
    return _SlotCounts(itree.base, tables).score(stage_sets, on_undefined, itree.targets.names)


def interventional_mle(itree: InterventionalCStree, tables, on_undefined: str = "raise") -> dict[str, ParameterMap]:
    """MLE of every copy's parameters; copies agree on untargeted stages."""
    tables = _aligned(itree, tables)
    names = itree.targets.names
    stage_sets = [itree.targets.stages(name) for name in names]
    counts = _SlotCounts(itree.base, tables)
    if on_undefined == "raise":
        counts.score(stage_sets, "raise", names)
    levels: dict[str, list[np.ndarray]] = {name: [] for name in names}
    for k in range(1, itree.base.p + 1):
        shared, own, masks = counts.slots(k, stage_sets)
        shared = shared.astype(np.float64)
        shared[shared.sum(axis=1) == 0] = 1.0
        base = shared / shared.sum(axis=1, keepdims=True)
        for t, name in enumerate(names):
            level = base.copy()
            if len(own[t]):
                mine = own[t].astype(np.float64)
                mine[mine.sum(axis=1) == 0] = 1.0
                level[masks[t]] = mine / mine.sum(axis=1, keepdims=True)
            levels[name].append(level)
    return {name: ParameterMap(itree.base, tuple(levels[name])) for name in names}


@dataclass(frozen=True)
class BootstrapSummary:
    mean: float
    std: float
    replicates: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "replicates": self.replicates}


def bootstrap_bic(itrees: Sequence[InterventionalCStree], tables, replicates: int | None = None,
                  seed=None) -> list[BootstrapSummary]:
    """Mean and spread of each candidate's BIC over paired bootstrap replicates."""
    replicates = replicates or config.CSTREE_BOOTSTRAP_REPLICATES
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(
        config.CSTREE_SEED if seed is None else seed)
    tables = list(tables)
    scores = np.zeros((len(itrees), replicates))
    for r in range(replicates):
        drawn = [t.resample(rng) for t in tables]
        for i, itree in enumerate(itrees):
            scores[i, r] = interventional_bic(itree, drawn, on_undefined="uniform").bic
    log.info(f"Bootstrap: {replicates} replicates over {len(itrees)} candidates")
    return [BootstrapSummary(float(row.mean()), float(row.std()), replicates) for row in scores]


# ──────────────────────────────────────────────
# Minimal-context I-DAGs
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class ContextIDagSet:
    variables: tuple
    contexts: tuple[Context, ...]
    graphs: dict[Context, IDag]
    minimal: tuple[Context, ...] = ()
    w_names: dict[str, str] = field(default_factory=dict)

    def graph(self, context: Context) -> IDag:
        return self.graphs[context]

    def heads(self, context: Context, name: str) -> frozenset[int]:
        return frozenset(self.graphs[context].targets_of(name))

    def to_dict(self) -> dict:
        def label(node):
            return self.variables[node].name if isinstance(node, int) else node
        return {
            "contexts": [
                {"context": c.format(self.variables),
                 "edges": [[label(u), label(v)] for u, v in self.graphs[c].dag.sorted_edges()]}
                for c in self.contexts
            ],
        }


def _w_heads(tree: CStree, context: Context, stages: Iterable[Stage]) -> set[int]:
    """Variables whose subtree level holds a targeted node agreeing with the context."""
    subtree = context_specific_subtree(tree, context)
    heads = set()
    for stage in stages:
        d = tree.cards[stage.level - 1]
        for member in stage.members(tree):
            for x in range(d):
                node = member + (x,)
                if not context.matches(tree.order, node):
                    continue
                variable = subtree.level_variable(node)
                if variable is not None:
                    heads.add(variable)
    return heads


def context_idags(itree: InterventionalCStree) -> ContextIDagSet:
    """Context graphs on the minimal contexts plus the empty context, each
    augmented with one w node per interventional target."""
    tree = itree.base
    graphs = context_graphs(tree)
    contexts = tuple(sorted(set(graphs.minimal) | {EMPTY_CONTEXT}))
    names = itree.targets.names[1:]
    idags = {}
    for context in contexts:
        base = graphs.graphs.get(context) or complete_dag(tree.order)
        placements = {name: sorted(_w_heads(tree, context, itree.targets.stages(name))) for name in names}
        idags[context] = augment_idag(base, placements)
    return ContextIDagSet(tree.variables, contexts, idags, tuple(graphs.minimal),
                          {name: w_node(name) for name in names})


def imarkov_invariance_queries(idags: ContextIDagSet, name: str, a, s=(), context: Context = EMPTY_CONTEXT) -> bool:
    """True iff f(X_A | X_S, context) is invariant under target `name`: S plus
    the other w nodes d-separate A from w_name in the context's I-DAG."""
    if context not in idags.graphs:
        raise TargetError(f"{context.format(idags.variables)} is not an I-DAG context")
    if name not in idags.w_names:
        raise TargetError(f"unknown target {name!r}", target=name)
    w = idags.w_names[name]
    others = set(idags.w_names.values()) - {w}
    return d_separated(idags.graphs[context].dag, set(a), {w}, set(s) | others)


# ──────────────────────────────────────────────
# Interventional equivalence
# ──────────────────────────────────────────────

def _require_complete(itree: InterventionalCStree):
    for name in itree.targets.names[1:]:
        report = is_complete(itree.base, itree.targets.stages(name))
        if not report.ok:
            raise IncompleteTargetError(f"target {name} is not complete: {report.reason}",
                                        target=name, witness=report.witness)


def _w_pattern(idags: ContextIDagSet, name: str) -> frozenset:
    return frozenset((c, idags.heads(c, name)) for c in idags.contexts)


def compatible(it1: InterventionalCStree, it2: InterventionalCStree) -> dict[str, str] | None:
    """A bijection of targets matching w edges in every context, or None."""
    g1, g2 = it1.idags, it2.idags
    if set(g1.contexts) != set(g2.contexts) or len(it1.targets) != len(it2.targets):
        return None
    pending: dict[frozenset, list[str]] = {}
    for name in it2.targets.names[1:]:
        pending.setdefault(_w_pattern(g2, name), []).append(name)
    mapping = {OBSERVATIONAL: OBSERVATIONAL}
    for name in it1.targets.names[1:]:
        candidates = pending.get(_w_pattern(g1, name))
        if not candidates:
            return None
        mapping[name] = candidates.pop(0)
    return mapping


def interventional_equivalent(it1: InterventionalCStree, it2: InterventionalCStree) -> bool:
    """Same minimal contexts, compatible targets, and per context the same
    skeleton, v-structures and (renamed) w-v-structures."""
    if not it1.base.same_variables(it2.base):
        raise VariableMismatchError("interventional trees are over different variables")
    _require_complete(it1)
    _require_complete(it2)
    g1, g2 = it1.idags, it2.idags
    if set(g1.minimal) != set(g2.minimal):
        return False
    phi = compatible(it1, it2)
    if phi is None:
        return False
    rename = {w_node(a): w_node(b) for a, b in phi.items()}
    for context in g1.contexts:
        first, second = g1.graph(context), g2.graph(context)
        if context in g1.minimal:
            if skeleton(first.base) != skeleton(second.base):
                return False
            if v_structures(first.base) != v_structures(second.base):
                return False
        mapped = frozenset(_canonical_v(rename.get(i, i), k, rename.get(j, j)) for i, k, j in first.w_v_structures())
        if mapped != second.w_v_structures():
            return False
    return True


def _canonical_v(i, k, j) -> tuple:
    return (i, k, j) if node_key(i) <= node_key(j) else (j, k, i)


def interventional_classes(itrees: Sequence[InterventionalCStree]) -> list[list[InterventionalCStree]]:
    """Group candidates into interventional equivalence classes, first-seen order."""
    classes: list[list[InterventionalCStree]] = []
    for itree in itrees:
        for group in classes:
            if group[0].base.same_variables(itree.base) and interventional_equivalent(group[0], itree):
                group.append(itree)
                break
        else:
            classes.append([itree])
    return classes


# ──────────────────────────────────────────────
# Target search
# ──────────────────────────────────────────────

@dataclass
class SearchResult:
    best: InterventionalCStree
    score: Score
    ties: list[InterventionalCStree]
    classes: list[list[InterventionalCStree]]
    evaluated: int

    def to_dict(self) -> dict:
        return {
            "score": self.score.to_dict(),
            "evaluated": self.evaluated,
            "ties": len(self.ties),
            "class_sizes": [len(c) for c in self.classes],
        }


def search_targets_over_class(trees: Sequence[CStree], tables: Sequence[ContingencyTable],
                              budget: int | None = None) -> SearchResult:
    """Score every complete target choice on every tree; the best and all ties win.

    `tables` holds the observational table first, then one per experiment.
    """
    budget = budget or config.CSTREE_TARGET_BUDGET
    if not trees:
        raise TargetError("the search needs at least one tree")
    tables = list(tables)
    arms = len(tables) - 1
    names = [f"I{i}" for i in range(1, arms + 1)]
    plans = []
    total = 0
    for tree in trees:
        options = complete_targets(tree, budget)
        total += len(options) ** arms
        if total > budget:
            raise BudgetExceededError(f"more than {budget} interventional candidates", budget=budget)
        plans.append((tree, options))
    log.info(f"Target search: {total} candidates over {len(trees)} trees, {arms} experiments")

    def run(plan):
        tree, options = plan
        counts = _SlotCounts(tree, tables)
        scored = []
        for choice in itertools.product(options, repeat=arms):
            score = counts.score([frozenset()] + list(choice), on_undefined="uniform")
            scored.append((score, tree, dict(zip(names, choice))))
        return scored

    with ThreadPoolExecutor(max_workers=config.CSTREE_THREADS, thread_name_prefix="targets") as pool:
        scored = [item for batch in pool.map(run, plans) for item in batch]
    top = max(score.bic for score, _, _ in scored)
    ties = [build_interventional_tree(tree, choice)
            for score, tree, choice in scored if score.bic >= top - TIE_TOLERANCE]
    best_score = next(score for score, _, _ in scored if score.bic >= top - TIE_TOLERANCE)
    classes = interventional_classes(ties)
    log.info(f"Target search: best bic={top:.3f}, {len(ties)} ties in {len(classes)} classes")
    return SearchResult(ties[0], best_score, ties, classes, len(scored))
