"""Core model: variables, contexts, stages, CStrees and general staged trees.

Levels are 1-based. Level k decides variable order[k-1]; its members are the
outcome prefixes of length k-1 over order[:k-1]. Only non-singleton stages are
stored: every prefix no stored stage covers is a stage of its own. Variables
and outcomes are 0-based indices.

Usage:
    variables = binary_variables(3)
    tree = CStree(variables, order=(0, 1, 2), stages=[Stage(3, Context.of({0: 0}))])
    stage_of(tree, (0, 1))   # -> Stage(level=3, context={X1=0})
"""

import itertools
import logging
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    GraphError,
    InvalidStagingError,
    InvalidVariableError,
    OutOfRangeError,
    VariableMismatchError,
)
from .helpers import canonical_labels, prefix_grid

log = logging.getLogger(__name__)


# ──────────────────────────────────────────────
# Variables, contexts, stages
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class VariableSpec:
    name: str
    cardinality: int = 2
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if int(self.cardinality) < 2:
            raise InvalidVariableError(f"{self.name}: cardinality must be at least 2", variable=self.name)
        object.__setattr__(self, "cardinality", int(self.cardinality))
        if self.labels is not None:
            labels = tuple(str(label) for label in self.labels)
            if len(labels) != self.cardinality or len(set(labels)) != len(labels):
                raise InvalidVariableError(
                    f"{self.name}: labels must be {self.cardinality} distinct values",
                    variable=self.name, labels=labels,
                )
            object.__setattr__(self, "labels", labels)

    def label(self, outcome: int) -> str:
        return self.labels[outcome] if self.labels else str(outcome)

    def outcome(self, label) -> int:
        """Outcome index for a label (or a bare index when no labels are set)."""
        if self.labels:
            try:
                return self.labels.index(str(label))
            except ValueError:
                raise OutOfRangeError(f"{self.name}: unknown label {label!r}", variable=self.name) from None
        value = int(label)
        if not 0 <= value < self.cardinality:
            raise OutOfRangeError(f"{self.name}: outcome {value} out of range", variable=self.name)
        return value

    def same_space(self, other: "VariableSpec") -> bool:
        return self.name == other.name and self.cardinality == other.cardinality


def binary_variables(p: int, prefix: str = "X") -> tuple[VariableSpec, ...]:
    return tuple(VariableSpec(f"{prefix}{i + 1}", 2) for i in range(p))


@dataclass(frozen=True, order=True)
class Context:
    """A partial assignment variable -> outcome, stored as sorted pairs."""

    pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        pairs = tuple(sorted((int(v), int(x)) for v, x in self.pairs))
        if len({v for v, _ in pairs}) != len(pairs):
            raise InvalidStagingError("context assigns a variable twice", pairs=pairs)
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def of(cls, assignment: Mapping[int, int] | None = None) -> "Context":
        return cls(tuple((assignment or {}).items()))

    @classmethod
    def from_prefix(cls, order, prefix) -> "Context":
        return cls(tuple(zip(order, prefix)))

    @property
    def domain(self) -> frozenset[int]:
        return frozenset(v for v, _ in self.pairs)

    @property
    def size(self) -> int:
        return len(self.pairs)

    @property
    def is_empty(self) -> bool:
        return not self.pairs

    def as_dict(self) -> dict[int, int]:
        return dict(self.pairs)

    def get(self, variable: int, default=None):
        for v, x in self.pairs:
            if v == variable:
                return x
        return default

    def agrees(self, other: "Context") -> bool:
        """No variable is assigned different outcomes (the faces intersect)."""
        mine = self.as_dict()
        return all(mine.get(v, x) == x for v, x in other.pairs)

    def extends(self, other: "Context") -> bool:
        """self assigns everything other assigns (self's face lies inside other's)."""
        return set(other.pairs) <= set(self.pairs)

    def common(self, other: "Context") -> "Context":
        return Context(tuple(set(self.pairs) & set(other.pairs)))

    def restrict(self, variables) -> "Context":
        keep = set(variables)
        return Context(tuple(pair for pair in self.pairs if pair[0] in keep))

    def drop(self, variables) -> "Context":
        gone = set(variables)
        return Context(tuple(pair for pair in self.pairs if pair[0] not in gone))

    def matches(self, order, prefix) -> bool:
        """Agrees with an outcome prefix on the positions the prefix reaches."""
        position = {v: i for i, v in enumerate(order)}
        return all(position[v] >= len(prefix) or prefix[position[v]] == x for v, x in self.pairs)

    def format(self, variables=None) -> str:
        if not self.pairs:
            return "∅"
        if variables is None:
            return ", ".join(f"X{v + 1}={x}" for v, x in self.pairs)
        return ", ".join(f"{variables[v].name}={variables[v].label(x)}" for v, x in self.pairs)

    def __repr__(self):
        return f"Context({{{self.format()}}})"


EMPTY_CONTEXT = Context()


@dataclass(frozen=True, order=True)
class Stage:
    level: int
    context: Context = field(default_factory=Context)

    def members(self, tree: "CStree") -> list[tuple[int, ...]]:
        return [prefix for prefix in enumerate_prefixes(tree, self.level - 1)
                if self.context.matches(tree.order, prefix)]

    def format(self, variables=None) -> str:
        return f"L{self.level}[{self.context.format(variables)}]"


# ──────────────────────────────────────────────
# Validation
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class Violation:
    level: int
    kind: str  # ordering | level | context_domain | out_of_range | overlap | gap | non_subcube
    detail: str

    def to_dict(self) -> dict:
        return {"level": self.level, "kind": self.kind, "detail": self.detail}


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def _members_to_context(members, order, cards, level) -> tuple[Context | None, str]:
    """Context of a member set, or (None, reason) when it is not a subcube."""
    width = level - 1
    members = {tuple(int(x) for x in m) for m in members}
    if not members:
        return None, "empty stage"
    for m in members:
        if len(m) != width:
            return None, f"prefix {m} has length {len(m)}, expected {width}"
        if any(not 0 <= x < cards[i] for i, x in enumerate(m)):
            return None, f"prefix {m} out of range"
    rows = np.array(sorted(members), dtype=np.int64).reshape(len(members), width)
    fixed = [i for i in range(width) if np.all(rows[:, i] == rows[0, i])]
    expected = math.prod(cards[i] for i in range(width) if i not in fixed)
    if len(members) != expected:
        return None, f"{len(members)} members do not form a subcube"
    return Context(tuple((order[i], int(rows[0, i])) for i in fixed)), ""


def context_mask(context: Context, grid: np.ndarray, position: dict[int, int]) -> np.ndarray:
    mask = np.ones(grid.shape[1], dtype=bool)
    for v, x in context.pairs:
        mask &= grid[position[v]] == x
    return mask


def validate_cstree(staging, variables, order, complete: bool = False) -> ValidationReport:
    """Check a staging against the CStree rules.

    `staging` is an iterable of Stage values or a mapping level -> iterable of
    Stage values or member sets (collections of prefixes). Uncovered prefixes
    are implicit singletons unless `complete` is set, in which case they are
    reported as gaps.
    """
    variables = tuple(variables)
    order = tuple(int(v) for v in order)
    p = len(variables)
    violations: list[Violation] = []
    if sorted(order) != list(range(p)):
        return ValidationReport((Violation(0, "ordering", f"{order} is not a permutation of 0..{p - 1}"),))
    cards = tuple(variables[v].cardinality for v in order)
    position = {v: i for i, v in enumerate(order)}

    per_level: dict[int, list] = {}
    if isinstance(staging, Mapping):
        for level, stages in staging.items():
            per_level.setdefault(int(level), []).extend(stages)
    else:
        for stage in staging:
            per_level.setdefault(stage.level, []).append(stage)

    for level in sorted(per_level):
        if not 1 <= level <= p:
            violations.append(Violation(level, "level", f"level {level} outside 1..{p}"))
            continue
        grid = prefix_grid(cards[:level - 1])
        owner = np.full(grid.shape[1], -1, dtype=np.int64)
        for index, stage in enumerate(per_level[level]):
            if isinstance(stage, Stage):
                context = stage.context
                outside = context.domain - set(order[:level - 1])
                if outside:
                    violations.append(Violation(level, "context_domain",
                                                f"{context.format()} fixes variables not before level {level}"))
                    continue
                bad = [(v, x) for v, x in context.pairs if not 0 <= x < variables[v].cardinality]
                if bad:
                    violations.append(Violation(level, "out_of_range", f"{context.format()} outcome out of range"))
                    continue
            else:
                context, reason = _members_to_context(stage, order, cards, level)
                if context is None:
                    violations.append(Violation(level, "non_subcube", f"stage {index}: {reason}"))
                    continue
            mask = context_mask(context, grid, position)
            clash = owner[mask]
            if np.any(clash >= 0):
                violations.append(Violation(level, "overlap",
                                            f"stage {index} overlaps stage {int(clash[clash >= 0][0])}"))
                continue
            owner[mask] = index
        if complete and np.any(owner < 0):
            violations.append(Violation(level, "gap", f"{int(np.sum(owner < 0))} prefixes uncovered"))
    if complete:
        for level in range(1, p + 1):
            if level not in per_level:
                violations.append(Violation(level, "gap", "level has no stages"))
    return ValidationReport(tuple(violations))


# ──────────────────────────────────────────────
# Trees
# ──────────────────────────────────────────────

class _LevelledTree:
    """Shared level bookkeeping for CStrees and general staged trees."""

    variables: tuple[VariableSpec, ...]
    order: tuple[int, ...]

    @property
    def p(self) -> int:
        return len(self.variables)

    @cached_property
    def cards(self) -> tuple[int, ...]:
        """Cardinalities in causal order."""
        return tuple(self.variables[v].cardinality for v in self.order)

    @cached_property
    def position(self) -> dict[int, int]:
        return {v: i for i, v in enumerate(self.order)}

    def level_variable(self, level: int) -> int:
        return self.order[level - 1]

    def n_members(self, level: int) -> int:
        return math.prod(self.cards[:level - 1])

    def labels(self, level: int) -> np.ndarray:
        raise NotImplementedError

    def n_stages(self, level: int) -> int:
        return int(self.labels(level).max()) + 1

    def total_stages(self) -> int:
        return sum(self.n_stages(k) for k in range(1, self.p + 1))

    def same_variables(self, other: "_LevelledTree") -> bool:
        return len(self.variables) == len(other.variables) and all(
            a.same_space(b) for a, b in zip(self.variables, other.variables))

    def _check_order(self):
        if sorted(self.order) != list(range(len(self.variables))):
            raise InvalidStagingError(f"order {self.order} is not a permutation of 0..{len(self.variables) - 1}",
                                      violations=[{"level": 0, "kind": "ordering"}])


@dataclass(frozen=True, eq=False)
class CStree(_LevelledTree):
    """A staged tree whose stages are all subcubes of their level."""

    variables: tuple[VariableSpec, ...]
    order: tuple[int, ...]
    stages: tuple[Stage, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "order", tuple(int(v) for v in self.order))
        if not self.variables:
            raise InvalidVariableError("a CStree needs at least one variable")
        self._check_order()
        stages = sorted(set(self.stages))
        report = validate_cstree(stages, self.variables, self.order)
        if not report.ok:
            raise InvalidStagingError("invalid CStree staging",
                                      violations=[v.to_dict() for v in report.violations])
        stages = tuple(s for s in stages if s.context.size < s.level - 1)
        object.__setattr__(self, "stages", stages)

    def __eq__(self, other):
        if not isinstance(other, CStree):
            return NotImplemented
        return (self.variables, self.order, self.stages) == (other.variables, other.order, other.stages)

    def __hash__(self):
        return hash((self.variables, self.order, self.stages))

    def stages_at(self, level: int) -> tuple[Stage, ...]:
        return tuple(s for s in self.stages if s.level == level)

    def contexts_at(self, level: int) -> list[Context]:
        return [s.context for s in self.stages_at(level)]

    @cached_property
    def _levels(self) -> list[tuple[np.ndarray, tuple[Stage, ...]]]:
        levels = []
        for level in range(1, self.p + 1):
            cards = self.cards[:level - 1]
            grid = prefix_grid(cards)
            raw = np.full(grid.shape[1], -1, dtype=np.int64)
            explicit = self.stages_at(level)
            for index, stage in enumerate(explicit):
                raw[context_mask(stage.context, grid, self.position)] = index
            free = raw < 0
            raw[free] = len(explicit) + np.arange(int(free.sum()))
            labels = canonical_labels(raw)
            _, first = np.unique(labels, return_index=True)
            stages = []
            for flat in first:
                prefix = tuple(int(x) for x in grid[:, flat])
                stage = next((s for s in explicit if s.context.matches(self.order, prefix)), None)
                stages.append(stage or Stage(level, Context.from_prefix(self.order, prefix)))
            levels.append((labels, tuple(stages)))
        return levels

    def labels(self, level: int) -> np.ndarray:
        """Stage id of every member prefix (flat lexicographic index), canonical."""
        return self._levels[level - 1][0]

    def all_stages(self, level: int) -> tuple[Stage, ...]:
        """Every stage of a level, singletons included, indexed by stage id."""
        return self._levels[level - 1][1]

    def stage_label(self, stage: Stage) -> int:
        try:
            return self.all_stages(stage.level).index(stage)
        except ValueError:
            raise InvalidStagingError(f"{stage.format()} is not a stage of this tree") from None

    def to_staged_tree(self) -> "StagedTree":
        return StagedTree(self.variables, self.order,
                          tuple(tuple(int(x) for x in self.labels(k)) for k in range(1, self.p + 1)))

    def with_stages(self, stages) -> "CStree":
        return CStree(self.variables, self.order, tuple(stages))


@dataclass(frozen=True, eq=False)
class StagedTree(_LevelledTree):
    """A general (stratified, compatibly labeled) staged tree.

    level_labels[k-1] assigns a stage id to each member prefix of level k,
    in flat lexicographic prefix order.
    """

    variables: tuple[VariableSpec, ...]
    order: tuple[int, ...]
    level_labels: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "order", tuple(int(v) for v in self.order))
        self._check_order()
        if len(self.level_labels) != len(self.variables):
            raise InvalidStagingError(f"expected {len(self.variables)} levels, got {len(self.level_labels)}")
        canonical = []
        for level, labels in enumerate(self.level_labels, start=1):
            if len(labels) != self.n_members(level):
                raise InvalidStagingError(f"level {level}: expected {self.n_members(level)} labels, got {len(labels)}")
            canonical.append(tuple(int(x) for x in canonical_labels(labels)))
        object.__setattr__(self, "level_labels", tuple(canonical))

    def __eq__(self, other):
        if not isinstance(other, StagedTree):
            return NotImplemented
        return (self.variables, self.order, self.level_labels) == (other.variables, other.order, other.level_labels)

    def __hash__(self):
        return hash((self.variables, self.order, self.level_labels))

    def labels(self, level: int) -> np.ndarray:
        return np.asarray(self.level_labels[level - 1], dtype=np.int64)

    def to_cstree(self) -> CStree:
        """Convert when every stage is a subcube; raises InvalidStagingError otherwise."""
        staging = {}
        for level in range(1, self.p + 1):
            grid = prefix_grid(self.cards[:level - 1])
            labels = self.labels(level)
            staging[level] = [[tuple(int(x) for x in grid[:, i]) for i in np.flatnonzero(labels == s)]
                              for s in range(int(labels.max()) + 1)]
        return cstree_from_staging(staging, self.variables, self.order)


# ──────────────────────────────────────────────
# Operations
# ──────────────────────────────────────────────

def enumerate_prefixes(tree: _LevelledTree, k: int) -> list[tuple[int, ...]]:
    """The k-th level L_k: all outcome prefixes of length k, lexicographic."""
    if not 0 <= k <= tree.p:
        raise OutOfRangeError(f"level {k} outside 0..{tree.p}", level=k)
    return list(itertools.product(*(range(d) for d in tree.cards[:k])))


def stage_of(tree: CStree, prefix) -> Stage:
    prefix = tuple(int(x) for x in prefix)
    if len(prefix) >= tree.p:
        raise OutOfRangeError(f"prefix {prefix} is a leaf", prefix=prefix)
    if any(not 0 <= x < d for x, d in zip(prefix, tree.cards)):
        raise OutOfRangeError(f"prefix {prefix} out of range", prefix=prefix)
    level = len(prefix) + 1
    flat = int(np.ravel_multi_index(prefix, tree.cards[:level - 1])) if prefix else 0
    return tree.all_stages(level)[int(tree.labels(level)[flat])]


def cstree_from_staging(staging: Mapping, variables, order) -> CStree:
    """Build a CStree from member-set stagings; raises InvalidStagingError on violations."""
    variables = tuple(variables)
    order = tuple(order)
    report = validate_cstree(staging, variables, order)
    if not report.ok:
        raise InvalidStagingError("staging is not a CStree staging",
                                  violations=[v.to_dict() for v in report.violations])
    cards = tuple(variables[v].cardinality for v in order)
    stages = []
    for level, members in staging.items():
        for member in members:
            if isinstance(member, Stage):
                stages.append(member)
            else:
                context, _ = _members_to_context(member, order, cards, int(level))
                stages.append(Stage(int(level), context))
    return CStree(variables, order, tuple(stages))


def full_dependence(variables, order=None) -> CStree:
    variables = tuple(variables)
    return CStree(variables, tuple(order) if order is not None else tuple(range(len(variables))))


def cstree_from_dag(variables, order, parents: Mapping[int, Iterable[int]]) -> CStree:
    """The DAG-patterned CStree: level k staged by the outcomes of pa(order[k-1])."""
    variables = tuple(variables)
    order = tuple(order)
    stages = []
    for level, v in enumerate(order, start=1):
        preds = set(order[:level - 1])
        pa = sorted(set(parents.get(v, ())))
        if not set(pa) <= preds:
            raise GraphError(f"parents of {variables[v].name} must precede it in the order",
                             variable=v, parents=pa)
        if len(pa) == len(preds):
            continue
        for values in itertools.product(*(range(variables[u].cardinality) for u in pa)):
            stages.append(Stage(level, Context(tuple(zip(pa, values)))))
    return CStree(variables, order, tuple(stages))


def grow_face(contexts: Iterable[Context], context: Context) -> Context:
    """Smallest face containing `context` that no stage straddles.

    Any stage that intersects the face without lying inside it widens the face
    to their common subcontext.
    """
    contexts = list(contexts)
    merged = context
    changed = True
    while changed:
        changed = False
        for other in contexts:
            if merged.agrees(other) and not other.extends(merged):
                merged = merged.common(other)
                changed = True
    return merged


def absorb_stage(contexts: Iterable[Context], context: Context, width: int) -> list[Context]:
    """Add a face to a level's stages, growing it until the staging stays subcube.

    Stages inside the grown face are absorbed. `width` is the number of
    variables preceding the level.
    """
    contexts = list(contexts)
    merged = grow_face(contexts, context)
    kept = [c for c in contexts if not c.extends(merged)]
    if merged.size == width:
        return kept
    return sorted(kept + [merged])


def merge_stages(contexts: Iterable[Context], first: Context, second: Context, width: int) -> list[Context]:
    """Minimal CStree-valid merge of two stages (given by their contexts)."""
    return absorb_stage(contexts, first.common(second), width)


# ──────────────────────────────────────────────
# Context-specific subtree
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class SubtreeLevel:
    """One level of a context-specific subtree.

    `members` are the original prefixes (through the level's variable,
    exclusive) that agree with the context; `stages` maps each member back
    to its original stage.
    """

    variable: int
    original_level: int
    members: tuple[tuple[int, ...], ...]
    stages: tuple[Stage, ...]


@dataclass(frozen=True)
class ContextSubtree:
    context: Context
    order: tuple[int, ...]
    levels: tuple[SubtreeLevel, ...]
    source_order: tuple[int, ...]
    cardinality: dict[int, int]

    @property
    def depth(self) -> int:
        return len(self.levels)

    def nodes(self, depth: int) -> list[tuple[int, ...]]:
        """Original prefixes standing for the subtree's nodes at a depth."""
        if depth == 0:
            return [self.levels[0].members[0]] if self.levels else [()]
        level = self.levels[depth - 1]
        return [member + (x,) for member in level.members for x in range(self.cardinality[level.variable])]

    def level_variable(self, node) -> int | None:
        """Variable of the subtree level holding a node (original prefix, length >= 1).

        None when the node's own variable is fixed by the context: its edge is contracted.
        """
        variable = self.source_order[len(node) - 1]
        return None if variable in self.context.domain else variable


def context_specific_subtree(tree: CStree, context: Context) -> ContextSubtree:
    """Delete branches disagreeing with `context` and contract its levels."""
    fixed = context.domain
    levels = []
    for level, v in enumerate(tree.order, start=1):
        if v in fixed:
            continue
        members = tuple(m for m in enumerate_prefixes(tree, level - 1) if context.matches(tree.order, m))
        levels.append(SubtreeLevel(v, level, members, tuple(stage_of(tree, m) for m in members)))
    return ContextSubtree(context, tuple(v for v in tree.order if v not in fixed), tuple(levels),
                          tree.order, {v: tree.variables[v].cardinality for v in tree.order})
