"""Contingency tables, closed-form MLE, log-likelihood, parameter counts and BIC.

Stage parameters are the pooled empirical proportions of the stage's member
prefixes. Logs are natural logs throughout.

Usage:
    table = ContingencyTable.from_rows(variables, rows)
    params, joint = mle(tree, table)
    score = bic(tree, table)
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from . import config
from .errors import OutOfRangeError, UndefinedStageError, VariableMismatchError
from .model import Context, CStree, Stage, VariableSpec, _LevelledTree

log = logging.getLogger(__name__)

UNDEFINED_POLICIES = ("raise", "uniform")


# ──────────────────────────────────────────────
# Contingency tables
# ──────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Dense count tensor, one axis per variable in natural variable order."""

    variables: tuple[VariableSpec, ...]
    counts: np.ndarray

    def __post_init__(self):
        variables = tuple(self.variables)
        counts = np.array(self.counts, dtype=np.int64)
        shape = tuple(v.cardinality for v in variables)
        if counts.shape != shape:
            raise VariableMismatchError(f"count tensor shape {counts.shape} does not match {shape}")
        if np.any(counts < 0):
            raise OutOfRangeError("counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_rows(cls, variables, rows, weights=None) -> "ContingencyTable":
        """Count rows of outcome indices (one column per variable)."""
        variables = tuple(variables)
        shape = tuple(v.cardinality for v in variables)
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, len(variables))
        if rows.size and (np.any(rows < 0) or np.any(rows >= np.array(shape))):
            raise OutOfRangeError("row outcome out of range")
        flat = np.ravel_multi_index(rows.T, shape) if len(rows) else np.zeros(0, dtype=np.int64)
        counts = np.bincount(flat, weights=weights, minlength=math.prod(shape))
        return cls(variables, np.rint(counts).astype(np.int64).reshape(shape))

    @classmethod
    def empty(cls, variables) -> "ContingencyTable":
        variables = tuple(variables)
        return cls(variables, np.zeros(tuple(v.cardinality for v in variables), dtype=np.int64))

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts.shape

    def marginal(self, variables) -> np.ndarray:
        """Counts summed over every variable not listed (result axes sorted)."""
        keep = set(variables)
        drop = tuple(i for i in range(len(self.variables)) if i not in keep)
        return self.counts.sum(axis=drop)

    def resample(self, rng: np.random.Generator) -> "ContingencyTable":
        """Bootstrap replicate: n multinomial draws from the empirical cells."""
        if self.n == 0:
            return self
        flat = self.counts.reshape(-1)
        drawn = rng.multinomial(self.n, flat / self.n)
        return ContingencyTable(self.variables, drawn.reshape(self.shape))

    def __add__(self, other: "ContingencyTable") -> "ContingencyTable":
        _check_same(self.variables, other.variables)
        return ContingencyTable(self.variables, self.counts + other.counts)


def _check_same(first, second):
    if len(first) != len(second) or any(not a.same_space(b) for a, b in zip(first, second)):
        raise VariableMismatchError("variable specs differ",
                                    first=[v.name for v in first], second=[v.name for v in second])


def marginal_count(u: ContingencyTable, ctx: Context) -> int:
    index = [slice(None)] * len(u.variables)
    for v, x in ctx.pairs:
        if not 0 <= v < len(u.variables) or not 0 <= x < u.variables[v].cardinality:
            raise OutOfRangeError(f"context {ctx.format()} outside the table")
        index[v] = x
    return int(np.sum(u.counts[tuple(index)]))


def level_counts(tree: _LevelledTree, u: ContingencyTable, level: int) -> np.ndarray:
    """Counts of (member prefix, next outcome) at a level: shape (members, d)."""
    _check_same(tree.variables, u.variables)
    counts = u.counts.transpose(tree.order)
    if level < tree.p:
        counts = counts.sum(axis=tuple(range(level, tree.p)))
    return counts.reshape(tree.n_members(level), tree.cards[level - 1])


def stage_counts(tree: _LevelledTree, u: ContingencyTable, level: int) -> np.ndarray:
    """Counts pooled per stage: shape (stages, d)."""
    pooled = np.zeros((tree.n_stages(level), tree.cards[level - 1]), dtype=np.int64)
    np.add.at(pooled, tree.labels(level), level_counts(tree, u, level))
    return pooled


def multinomial_loglik(counts: np.ndarray) -> np.ndarray:
    """Maximised multinomial log-likelihood of each row of counts (0 ln 0 = 0)."""
    counts = np.asarray(counts, dtype=np.float64)
    totals = counts.sum(axis=-1)
    return xlogy(counts, counts).sum(axis=-1) - xlogy(totals, totals)


# ──────────────────────────────────────────────
# Parameters
# ──────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class ParameterMap:
    """Next-variable distribution of every stage, level by level.

    levels[k-1][s] is the probability vector of stage s of level k.
    """

    tree: _LevelledTree
    levels: tuple[np.ndarray, ...]

    def __post_init__(self):
        levels = tuple(np.array(a, dtype=np.float64) for a in self.levels)
        if len(levels) != self.tree.p:
            raise VariableMismatchError(f"expected {self.tree.p} levels of parameters, got {len(levels)}")
        for k, a in enumerate(levels, start=1):
            if a.shape != (self.tree.n_stages(k), self.tree.cards[k - 1]):
                raise VariableMismatchError(f"level {k}: parameter shape {a.shape} does not match the staging")
            if np.any(a < 0) or np.any(a > 1) or np.any(np.abs(a.sum(axis=1) - 1) > 1e-12):
                raise OutOfRangeError(f"level {k}: stage vectors must be probability vectors")
            a.setflags(write=False)
        object.__setattr__(self, "levels", levels)

    def conditional(self, level: int) -> np.ndarray:
        """Per member prefix of a level: its stage's vector, shape (members, d)."""
        return self.levels[level - 1][self.tree.labels(level)]

    def stage_vector(self, stage: Stage) -> np.ndarray:
        return self.levels[stage.level - 1][self.tree.stage_label(stage)]

    def replace(self, level: int, stage_id: int, vector) -> "ParameterMap":
        levels = [a.copy() for a in self.levels]
        levels[level - 1][stage_id] = np.asarray(vector, dtype=np.float64)
        return ParameterMap(self.tree, tuple(levels))


def _normalised(a: np.ndarray) -> np.ndarray:
    return a / a.sum(axis=-1, keepdims=True)


def uniform_parameters(tree: _LevelledTree) -> ParameterMap:
    return ParameterMap(tree, tuple(np.full((tree.n_stages(k), tree.cards[k - 1]), 1.0 / tree.cards[k - 1])
                                    for k in range(1, tree.p + 1)))


def random_parameters(tree: _LevelledTree, seed=None, alpha: float | None = None) -> ParameterMap:
    """Dirichlet(alpha) vector for every stage."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    alpha = alpha or config.CSTREE_DIRICHLET_ALPHA
    levels = []
    for k in range(1, tree.p + 1):
        d = tree.cards[k - 1]
        levels.append(_normalised(rng.dirichlet(np.full(d, alpha), size=tree.n_stages(k))))
    return ParameterMap(tree, tuple(levels))


def _stage_name(tree: _LevelledTree, level: int, stage_id: int) -> str:
    if isinstance(tree, CStree):
        return tree.all_stages(level)[stage_id].format(tree.variables)
    return f"L{level}#{stage_id}"


def mle(tree: _LevelledTree, u: ContingencyTable, on_undefined: str = "raise") -> tuple[ParameterMap, np.ndarray]:
    """Closed-form MLE: stage vector = pooled member counts / pooled total.

    A stage with no observations raises UndefinedStageError, or gets the
    uniform vector when on_undefined="uniform".
    """
    if on_undefined not in UNDEFINED_POLICIES:
        raise ValueError(f"on_undefined must be one of {UNDEFINED_POLICIES}")
    levels = []
    for k in range(1, tree.p + 1):
        pooled = stage_counts(tree, u, k).astype(np.float64)
        totals = pooled.sum(axis=1)
        empty = totals == 0
        if np.any(empty):
            if on_undefined == "raise":
                stage_id = int(np.flatnonzero(empty)[0])
                raise UndefinedStageError(f"stage {_stage_name(tree, k, stage_id)} has no observations",
                                          level=k, stage=_stage_name(tree, k, stage_id))
            log.debug(f"Level {k}: {int(empty.sum())} unobserved stages set to uniform")
            pooled[empty] = 1.0
            totals = pooled.sum(axis=1)
        levels.append(pooled / totals[:, None])
    params = ParameterMap(tree, tuple(levels))
    return params, joint_distribution(tree, params)


def joint_distribution(tree: _LevelledTree, params: ParameterMap) -> np.ndarray:
    """Joint probability tensor in natural variable order."""
    joint = np.ones(())
    for k in range(1, tree.p + 1):
        cond = params.conditional(k).reshape(tree.cards[:k])
        joint = joint[..., None] * cond
    return joint.transpose(np.argsort(tree.order))


def log_likelihood(tree: _LevelledTree, params: ParameterMap, u: ContingencyTable) -> float:
    """Σ_x u_x ln p(x) with 0 ln 0 = 0; -inf when an observed cell has p = 0."""
    total = 0.0
    for k in range(1, tree.p + 1):
        total += float(np.sum(xlogy(level_counts(tree, u, k), params.conditional(k))))
    return total


def free_parameters(tree: _LevelledTree) -> int:
    return sum((tree.cards[k - 1] - 1) * tree.n_stages(k) for k in range(1, tree.p + 1))


@dataclass(frozen=True)
class Score:
    loglik: float
    free_params: int
    bic: float
    n: int

    def to_dict(self) -> dict:
        return {"loglik": self.loglik, "free_params": self.free_params, "bic": self.bic, "n": self.n}


def bic_penalty(free_params: int, n: int) -> float:
    return free_params / 2 * math.log(n) if n > 0 else 0.0


def make_score(loglik: float, free_params: int, n: int) -> Score:
    return Score(loglik, free_params, loglik - bic_penalty(free_params, n), n)


def bic(tree: _LevelledTree, u: ContingencyTable, on_undefined: str = "raise") -> Score:
    params, _ = mle(tree, u, on_undefined)
    return make_score(log_likelihood(tree, params, u), free_parameters(tree), u.n)
