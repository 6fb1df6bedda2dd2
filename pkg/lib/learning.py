"""Random model generation, forward sampling, backwards hill-climbing learners
(BHC-CS, BHC-S, BHC-CS over all orderings) and the SHD / predictive-accuracy
metrics.

Learners run level by level from the full-dependence tree: at each level they
apply the BIC-best pairwise stage merge until no merge raises BIC.

Usage:
    tree = random_cstree(6, 0.4, seed=1)
    params = random_parameters(tree, seed=2)
    table = sample(tree, params, 10_000, seed=3)
    learned = bhc_cs(table, tree.order)
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import config
from .errors import BudgetExceededError, VariableMismatchError
from .estimation import (
    ContingencyTable,
    ParameterMap,
    Score,
    bic,
    joint_distribution,
    level_counts,
    multinomial_loglik,
)
from .helpers import canonical_labels, prefix_grid, same_pair_count
from .model import (
    Context,
    CStree,
    Stage,
    StagedTree,
    VariableSpec,
    _LevelledTree,
    binary_variables,
    context_mask,
    full_dependence,
    grow_face,
    merge_stages,
)

log = logging.getLogger(__name__)

ORDERING_MODES = ("fixed", "all")


@dataclass(frozen=True)
class LearnConfig:
    ordering: str = "fixed"
    max_level: int | None = None
    tie_break: str = "lexicographic"
    score: str = "bic"

    def __post_init__(self):
        if self.ordering not in ORDERING_MODES:
            raise ValueError(f"ordering must be one of {ORDERING_MODES}")
        if self.tie_break != "lexicographic" or self.score != "bic":
            raise ValueError("only lexicographic tie-breaking with the BIC score is supported")


@dataclass
class LearnResult:
    tree: _LevelledTree
    score: Score
    trace: list[float] = field(default_factory=list)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _variables(p: int, cardinality: int) -> tuple[VariableSpec, ...]:
    if cardinality == 2:
        return binary_variables(p)
    return tuple(VariableSpec(f"X{i + 1}", cardinality) for i in range(p))


# ──────────────────────────────────────────────
# Random models
# ──────────────────────────────────────────────

def random_staged_tree(p: int, merge_prob: float, seed=None, cardinality: int = 2) -> StagedTree:
    """Full dependence, then per level 2..p-1 one Bernoulli trial per member:
    each success merges two uniformly random stages of the level."""
    if not 0 <= merge_prob <= 1:
        raise ValueError("merge_prob must lie in [0, 1]")
    rng = _rng(seed)
    tree = full_dependence(_variables(p, cardinality))
    labels = [np.arange(tree.n_members(k)) for k in range(1, p + 1)]
    for k in range(2, p):
        level = labels[k - 1]
        for _ in range(tree.n_members(k)):
            if rng.random() >= merge_prob:
                continue
            stages = np.unique(level)
            if len(stages) < 2:
                break
            keep, gone = rng.choice(stages, size=2, replace=False)
            level[level == gone] = keep
    return StagedTree(tree.variables, tree.order, tuple(tuple(int(x) for x in a) for a in labels))


def _level_stage_contexts(order, cards, level: int, contexts: list[Context]) -> list[Context]:
    """Every stage of a level as a context: stored faces, then uncovered singletons."""
    grid = prefix_grid(cards[:level - 1])
    position = {v: i for i, v in enumerate(order)}
    covered = np.zeros(grid.shape[1], dtype=bool)
    for c in contexts:
        covered |= context_mask(c, grid, position)
    singles = [Context.from_prefix(order, tuple(int(x) for x in grid[:, i])) for i in np.flatnonzero(~covered)]
    return list(contexts) + singles


def random_cstree(p: int, merge_prob: float, seed=None, cardinality: int = 2) -> CStree:
    """Like random_staged_tree over levels 2..p, with
    floor(members / (1 + 4k(q - q^2))) trials per level and every merge
    widened to the smallest valid subcube."""
    if not 0 <= merge_prob <= 1:
        raise ValueError("merge_prob must lie in [0, 1]")
    rng = _rng(seed)
    base = full_dependence(_variables(p, cardinality))
    stages = []
    for k in range(2, p + 1):
        trials = math.floor(base.n_members(k) / (1 + 4 * k * (merge_prob - merge_prob ** 2)))
        contexts: list[Context] = []
        for _ in range(trials):
            if rng.random() >= merge_prob:
                continue
            candidates = _level_stage_contexts(base.order, base.cards, k, contexts)
            if len(candidates) < 2:
                break
            i, j = rng.choice(len(candidates), size=2, replace=False)
            contexts = merge_stages(contexts, candidates[i], candidates[j], k - 1)
        stages.extend(Stage(k, c) for c in contexts)
    return CStree(base.variables, base.order, tuple(stages))


# ──────────────────────────────────────────────
# Sampling
# ──────────────────────────────────────────────

def sample_rows(tree: _LevelledTree, params: ParameterMap, n: int, seed=None) -> np.ndarray:
    """n forward draws along the causal order; columns in natural variable order."""
    rng = _rng(seed)
    draws = np.zeros((n, tree.p), dtype=np.int64)
    flat = np.zeros(n, dtype=np.int64)
    for k in range(1, tree.p + 1):
        probs = params.conditional(k)[flat]
        cdf = np.cumsum(probs, axis=1)
        u = rng.random(n)[:, None]
        x = np.minimum((cdf < u).sum(axis=1), tree.cards[k - 1] - 1)
        draws[:, k - 1] = x
        flat = flat * tree.cards[k - 1] + x
    rows = np.empty_like(draws)
    rows[:, list(tree.order)] = draws
    return rows


def sample(tree: _LevelledTree, params: ParameterMap, n: int, seed=None) -> ContingencyTable:
    return ContingencyTable.from_rows(tree.variables, sample_rows(tree, params, n, seed))


# ──────────────────────────────────────────────
# Hill climbing
# ──────────────────────────────────────────────

@dataclass
class _Level:
    """Working state of one level during hill climbing."""

    counts: np.ndarray        # (members, d)
    labels: np.ndarray        # stage id per member, canonical
    log_n: float

    def __post_init__(self):
        self.refresh()

    def refresh(self):
        self.labels = canonical_labels(self.labels)
        self.pooled = np.zeros((int(self.labels.max()) + 1, self.counts.shape[1]), dtype=np.int64)
        np.add.at(self.pooled, self.labels, self.counts)
        self.stage_ll = multinomial_loglik(self.pooled)

    def delta(self, ids: np.ndarray) -> float:
        """BIC change of pooling the given stages into one."""
        merged = multinomial_loglik(self.pooled[ids].sum(axis=0))
        d = self.counts.shape[1]
        return float(merged - self.stage_ll[ids].sum() + (len(ids) - 1) * (d - 1) / 2 * self.log_n)


def _log_n(table: ContingencyTable) -> float:
    return math.log(table.n) if table.n > 0 else 0.0


def bhc_cs(table: ContingencyTable, order=None, learn_config: LearnConfig | None = None,
           trace: list | None = None) -> CStree:
    """Backwards hill-climbing over CStree-valid stage merges, levels 2..p."""
    learn_config = learn_config or LearnConfig()
    tree = full_dependence(table.variables, order)
    log_n = _log_n(table)
    top = min(tree.p, learn_config.max_level or tree.p)
    stages = []
    for k in range(2, top + 1):
        grid = prefix_grid(tree.cards[:k - 1])
        state = _Level(level_counts(tree, table, k), np.arange(grid.shape[1]), log_n)
        contexts: list[Context] = []
        while True:
            current = _level_stage_contexts(tree.order, tree.cards, k, contexts)
            owner = np.empty(grid.shape[1], dtype=np.int64)
            for index, c in enumerate(current):
                owner[context_mask(c, grid, tree.position)] = index
            state.labels = owner
            state.refresh()
            # stage id order = first member order, for lexicographic tie-breaks
            first = np.unique(state.labels, return_index=True)[1]
            by_id = [current[int(owner[f])] for f in first]
            best = None
            seen: dict[Context, float] = {}
            for i, j in itertools.combinations(range(len(by_id)), 2):
                face = grow_face(contexts, by_id[i].common(by_id[j]))
                if face not in seen:
                    ids = np.unique(state.labels[context_mask(face, grid, tree.position)])
                    seen[face] = state.delta(ids)
                if best is None or seen[face] > best[0]:
                    best = (seen[face], by_id[i], by_id[j])
            if best is None or best[0] <= 0:
                break
            contexts = merge_stages(contexts, best[1], best[2], k - 1)
            if trace is not None:
                trace.append(best[0])
            log.debug(f"BHC-CS level {k}: merge gains {best[0]:.4f}, {len(contexts)} stored stages")
        stages.extend(Stage(k, c) for c in contexts)
    learned = CStree(tree.variables, tree.order, tuple(stages))
    log.info(f"BHC-CS order={learned.order}: {learned.total_stages()} stages")
    return learned


def bhc_s(table: ContingencyTable, order=None, learn_config: LearnConfig | None = None,
          trace: list | None = None) -> StagedTree:
    """Backwards hill-climbing over arbitrary pairwise stage merges, levels 2..p."""
    learn_config = learn_config or LearnConfig()
    tree = full_dependence(table.variables, order)
    log_n = _log_n(table)
    top = min(tree.p, learn_config.max_level or tree.p)
    labels = [np.arange(tree.n_members(k)) for k in range(1, tree.p + 1)]
    for k in range(2, top + 1):
        state = _Level(level_counts(tree, table, k), labels[k - 1], log_n)
        while True:
            best = None
            for i, j in itertools.combinations(range(len(state.pooled)), 2):
                gain = state.delta(np.array([i, j]))
                if best is None or gain > best[0]:
                    best = (gain, i, j)
            if best is None or best[0] <= 0:
                break
            _, i, j = best
            state.labels = np.where(state.labels == j, i, state.labels)
            state.refresh()
            if trace is not None:
                trace.append(best[0])
        labels[k - 1] = state.labels
    return StagedTree(tree.variables, tree.order, tuple(tuple(int(x) for x in a) for a in labels))


def bhc_cs_perm(table: ContingencyTable, learn_config: LearnConfig | None = None,
                limit: int | None = None) -> LearnResult:
    """BHC-CS once per causal ordering; the best BIC wins, ties go to the
    lexicographically first ordering."""
    learn_config = learn_config or LearnConfig(ordering="all")
    limit = limit or config.CSTREE_PERMUTATION_LIMIT
    p = len(table.variables)
    if p > limit:
        raise BudgetExceededError(f"{math.factorial(p)} orderings for {p} variables exceed the limit p <= {limit}",
                                  p=p, limit=limit)
    orders = list(itertools.permutations(range(p)))

    def run(order):
        tree = bhc_cs(table, order, learn_config)
        return tree, bic(tree, table, on_undefined="uniform")

    with ThreadPoolExecutor(max_workers=config.CSTREE_THREADS, thread_name_prefix="bhc") as pool:
        results = list(pool.map(run, orders))
    best_tree, best_score = results[0]
    for tree, score in results[1:]:
        if score.bic > best_score.bic + 1e-9:
            best_tree, best_score = tree, score
    log.info(f"BHC-CS over {len(orders)} orderings: best order={best_tree.order} bic={best_score.bic:.3f}")
    return LearnResult(best_tree, best_score)


def learn(table: ContingencyTable, order=None, learn_config: LearnConfig | None = None) -> LearnResult:
    """Dispatch on the ordering mode: one BHC-CS run, or the best over all orderings."""
    learn_config = learn_config or LearnConfig(ordering="fixed" if order is not None else "all")
    if learn_config.ordering == "all":
        return bhc_cs_perm(table, learn_config)
    trace: list[float] = []
    tree = bhc_cs(table, order, learn_config, trace)
    return LearnResult(tree, bic(tree, table, on_undefined="uniform"), trace)


# ──────────────────────────────────────────────
# Metrics
# ──────────────────────────────────────────────

def shd(t1: _LevelledTree, t2: _LevelledTree) -> int:
    """Per level, the number of member pairs whose same-stage status differs."""
    if not t1.same_variables(t2) or t1.order != t2.order:
        raise VariableMismatchError("SHD needs trees over the same variables and ordering",
                                    first=list(t1.order), second=list(t2.order))
    total = 0
    for k in range(1, t1.p + 1):
        a, b = t1.labels(k), t2.labels(k)
        joint = a * (int(b.max()) + 1) + b
        total += same_pair_count(a) + same_pair_count(b) - 2 * same_pair_count(joint)
    return total


def predictive_accuracy(tree: _LevelledTree, params: ParameterMap, rows) -> float:
    """Fraction of (row, variable) predictions of x_i from x_{-i} that are right.

    Prediction is the argmax of the fitted conditional, first outcome on ties;
    a zero-mass conditional counts as wrong.
    """
    rows = np.asarray(rows, dtype=np.int64).reshape(-1, tree.p)
    if not len(rows):
        return 0.0
    joint = joint_distribution(tree, params)
    correct = 0
    zero_mass = 0
    for i, var in enumerate(tree.variables):
        index = [rows[:, a][:, None] for a in range(tree.p)]
        index[i] = np.arange(var.cardinality)[None, :]
        cond = joint[tuple(index)]
        mass = cond.sum(axis=1)
        guess = cond.argmax(axis=1)
        ok = (guess == rows[:, i]) & (mass > 0)
        zero_mass += int(np.sum(mass == 0))
        correct += int(ok.sum())
    if zero_mass:
        log.warning(f"Predictive accuracy: {zero_mass} predictions had zero conditional mass")
    return correct / (len(rows) * tree.p)
