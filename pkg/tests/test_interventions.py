"""Interventions module tests: targets, completeness, I-DAGs, scoring,
equivalence and target search."""

import numpy as np
import pytest

from lib import config
from lib.csi import equivalence_class
from lib.errors import (
    BudgetExceededError,
    IncompleteTargetError,
    TargetError,
    UndefinedStageError,
    VariableMismatchError,
)
from lib.estimation import ContingencyTable, ParameterMap, bic, free_parameters, random_parameters
from lib.interventions import (
    OBSERVATIONAL,
    InterventionTarget,
    TargetSet,
    bootstrap_bic,
    build_interventional_tree,
    compatible,
    complete_targets,
    context_idags,
    imarkov_invariance_queries,
    interventional_bic,
    interventional_classes,
    interventional_equivalent,
    interventional_mle,
    intervened_parameters,
    is_complete,
    search_targets_over_class,
    stages_for_target,
    target_from_stages,
    target_set,
    targets_from_nodes,
)
from lib.learning import sample
from lib.model import EMPTY_CONTEXT, CStree, Stage, VariableSpec, binary_variables
from tests.conftest import ctx, random_table

SPLIT_TARGET = [Stage(2, ctx(x0=0)), Stage(3, ctx(x0=0))]


@pytest.fixture(autouse=True)
def _threads(monkeypatch):
    monkeypatch.setattr(config, "CSTREE_THREADS", 2)


@pytest.fixture
def split_itree(split_tree):
    return build_interventional_tree(split_tree, {"I1": SPLIT_TARGET})


@pytest.fixture
def reordered_itree(reordered_tree):
    return build_interventional_tree(reordered_tree, {"I1": SPLIT_TARGET})


@pytest.fixture
def small_tree():
    """X3 independent of X2 given X1 = 0."""
    return CStree(binary_variables(3), (0, 1, 2), (Stage(3, ctx(x0=0)),))


# ── Targets ──

def test_target_nodes_are_children_of_stage_members(split_tree, split_target_nodes):
    target = target_from_stages(split_tree, SPLIT_TARGET, "I1")
    assert target.nodes == split_target_nodes
    assert target.sorted_nodes()[:2] == [(0, 0), (0, 1)]


def test_stages_for_target_inverts_target(split_tree, split_target_nodes):
    assert stages_for_target(split_tree, split_target_nodes) == frozenset(SPLIT_TARGET)


def test_target_must_take_all_children(split_tree):
    with pytest.raises(TargetError):
        stages_for_target(split_tree, [(0, 0)])


def test_target_must_take_whole_stages(split_tree):
    # children of (0, 0) only: the stage {X1=0} at level 3 also holds (0, 1)
    with pytest.raises(TargetError):
        stages_for_target(split_tree, [(0, 0, 0), (0, 0, 1)])


def test_target_rejects_root_and_out_of_range(split_tree):
    with pytest.raises(TargetError):
        stages_for_target(split_tree, [()])
    with pytest.raises(TargetError):
        stages_for_target(split_tree, [(2,)])


def test_target_rejects_foreign_stage(split_tree):
    with pytest.raises(TargetError):
        target_from_stages(split_tree, [Stage(3, ctx(x1=0))])


def test_target_set_names_and_reserved_name(split_tree):
    targets = target_set(split_tree, [SPLIT_TARGET, []])
    assert targets.names == [OBSERVATIONAL, "I1", "I2"]
    assert targets.interventional[1].is_empty
    with pytest.raises(TargetError):
        target_set(split_tree, {OBSERVATIONAL: SPLIT_TARGET})


def test_target_set_requires_observational_first():
    with pytest.raises(TargetError):
        TargetSet((InterventionTarget("I1"),), {"I1": frozenset()})
    with pytest.raises(TargetError):
        TargetSet((InterventionTarget(OBSERVATIONAL), InterventionTarget("I1"), InterventionTarget("I1")),
                  {OBSERVATIONAL: frozenset(), "I1": frozenset()})


def test_targets_from_nodes(split_tree, split_target_nodes):
    targets = targets_from_nodes(split_tree, {"I1": split_target_nodes})
    assert targets.stages("I1") == frozenset(SPLIT_TARGET)


# ── Completeness ──

def test_worked_target_is_complete(split_tree):
    report = is_complete(split_tree, SPLIT_TARGET)
    assert report.ok
    assert report.to_dict() == {"ok": True, "witness": None, "reason": ""}


def test_completeness_accepts_target_objects(split_tree):
    assert is_complete(split_tree, target_from_stages(split_tree, SPLIT_TARGET)).ok


def test_partly_targeted_context_is_incomplete(split_tree):
    report = is_complete(split_tree, [Stage(4, ctx(x0=0, x2=1))])
    assert not report.ok
    assert report.witness == (0, 0, 1, 0)
    assert "partly" in report.reason


def test_root_target_without_empty_context_is_incomplete(split_tree):
    report = is_complete(split_tree, [Stage(1)])
    assert not report.ok
    assert report.witness == (0,)


def test_root_target_complete_without_csi():
    tree = CStree(binary_variables(2), (0, 1))
    assert is_complete(tree, [Stage(1)]).ok


def test_complete_targets_enumeration(small_tree):
    found = complete_targets(small_tree)
    assert found[0] == frozenset()
    assert set(found) == {
        frozenset(),
        frozenset({Stage(2, ctx(x0=0))}),
        frozenset({Stage(3, ctx(x0=0))}),
        frozenset({Stage(2, ctx(x0=0)), Stage(3, ctx(x0=0))}),
    }


def test_complete_targets_are_complete(split_tree):
    found = complete_targets(split_tree)
    assert frozenset(SPLIT_TARGET) in found
    assert all(is_complete(split_tree, stages).ok for stages in found)


def test_complete_targets_budget(split_tree):
    with pytest.raises(BudgetExceededError):
        complete_targets(split_tree, budget=8)


# ── Interventional CStrees ──

def test_free_parameters_count_split_stages(split_itree, reordered_itree):
    assert split_itree.free_parameters() == 12
    assert reordered_itree.free_parameters() == 12
    assert split_itree.targeted_by(Stage(3, ctx(x0=0))) == ["I1"]
    assert set(split_itree.split_stages) == set(SPLIT_TARGET)


def test_itree_equality_and_format(split_tree, split_itree):
    same = build_interventional_tree(split_tree, target_set(split_tree, {"I1": list(reversed(SPLIT_TARGET))}))
    assert same == split_itree
    assert hash(same) == hash(split_itree)
    assert split_itree.format().startswith("order=[0, 1, 2, 3] I1: {")
    assert build_interventional_tree(split_tree, {}).format().endswith("no targets")


def test_intervened_parameters(split_tree):
    params = ParameterMap(split_tree, tuple(np.full((split_tree.n_stages(k), 2), 0.5) for k in range(1, 5)))
    stage = Stage(3, ctx(x0=0))
    changed = intervened_parameters(params, [stage], {stage: [0.1, 0.9]})
    assert changed.stage_vector(stage).tolist() == [0.1, 0.9]
    assert changed.stage_vector(Stage(2, ctx(x0=0))).tolist() == [0.5, 0.5]
    drawn = intervened_parameters(params, [Stage(2, ctx(x0=0))], seed=3)
    assert drawn.stage_vector(Stage(2, ctx(x0=0))).sum() == pytest.approx(1.0)


# ── I-DAGs ──

def test_context_idags_worked_example(split_itree):
    idags = context_idags(split_itree)
    assert idags.contexts == (EMPTY_CONTEXT, ctx(x0=0), ctx(x0=1))
    empty = idags.graph(EMPTY_CONTEXT)
    assert set(empty.base.edges) == {(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)}
    assert idags.heads(EMPTY_CONTEXT, "I1") == {1, 2}
    assert set(idags.graph(ctx(x0=0)).base.edges) == {(2, 3)}
    assert idags.heads(ctx(x0=0), "I1") == {1, 2}
    assert idags.heads(ctx(x0=1), "I1") == frozenset()


def test_context_idags_to_dict(split_itree):
    data = split_itree.idags.to_dict()
    panel = data["contexts"][1]
    assert panel["context"] == "X1=0"
    assert ["w_I1", "X2"] in panel["edges"]


def test_invariance_queries(split_itree):
    idags = split_itree.idags
    assert imarkov_invariance_queries(idags, "I1", {0})
    assert not imarkov_invariance_queries(idags, "I1", {3})
    assert imarkov_invariance_queries(idags, "I1", {3}, context=ctx(x0=1))
    with pytest.raises(TargetError):
        imarkov_invariance_queries(idags, "I9", {0})
    with pytest.raises(TargetError):
        imarkov_invariance_queries(idags, "I1", {0}, context=ctx(x1=0))


# ── Scoring ──

def test_empty_targets_pool_like_observational(split_tree, rng):
    t1 = random_table(split_tree.variables, rng)
    t2 = random_table(split_tree.variables, rng)
    itree = build_interventional_tree(split_tree, {"I1": []})
    score = interventional_bic(itree, [t1, t2])
    pooled = bic(split_tree, t1 + t2)
    assert score.bic == pytest.approx(pooled.bic)
    assert score.free_params == free_parameters(split_tree)


def test_interventional_bic_parameter_count(split_itree, rng):
    tables = [random_table(split_itree.base.variables, rng) for _ in range(2)]
    assert interventional_bic(split_itree, tables).free_params == split_itree.free_parameters()


def test_interventional_bic_equal_on_equivalent_pair(split_itree, reordered_itree, rng):
    for _ in range(3):
        tables = [random_table(split_itree.base.variables, rng) for _ in range(2)]
        assert interventional_bic(split_itree, tables).bic == pytest.approx(
            interventional_bic(reordered_itree, tables).bic, abs=1e-9)


def test_interventional_bic_needs_one_table_per_target(split_itree, rng):
    with pytest.raises(VariableMismatchError):
        interventional_bic(split_itree, [random_table(split_itree.base.variables, rng)])


def test_interventional_bic_undefined_copy(split_itree, rng):
    obs = random_table(split_itree.base.variables, rng)
    empty = ContingencyTable.empty(split_itree.base.variables)
    with pytest.raises(UndefinedStageError) as exc:
        interventional_bic(split_itree, [obs, empty])
    assert exc.value.context["target"] == "I1"
    assert interventional_bic(split_itree, [obs, empty], on_undefined="uniform").n == obs.n


def test_interventional_mle_shares_untargeted_stages(small_tree):
    stage = Stage(3, ctx(x0=0))
    params = ParameterMap(small_tree, (
        np.array([[0.5, 0.5]]),
        np.array([[0.3, 0.7], [0.6, 0.4]]),
        np.array([[0.8, 0.2], [0.3, 0.7], [0.7, 0.3]]),
    ))
    shifted = intervened_parameters(params, [stage], {stage: [0.1, 0.9]})
    tables = [sample(small_tree, params, 20_000, seed=1), sample(small_tree, shifted, 20_000, seed=2)]
    itree = build_interventional_tree(small_tree, {"I1": [stage]})
    fitted = interventional_mle(itree, tables)
    assert set(fitted) == {OBSERVATIONAL, "I1"}
    assert np.array_equal(fitted["obs"].levels[1], fitted["I1"].levels[1])
    assert fitted["I1"].stage_vector(stage)[1] == pytest.approx(0.9, abs=0.02)
    assert fitted["obs"].stage_vector(stage)[1] == pytest.approx(0.2, abs=0.02)


def test_bootstrap_bic_reproducible(split_itree, rng):
    tables = [random_table(split_itree.base.variables, rng) for _ in range(2)]
    other = build_interventional_tree(split_itree.base, {"I1": []})
    a = bootstrap_bic([split_itree, other], tables, replicates=5, seed=0)
    b = bootstrap_bic([split_itree, other], tables, replicates=5, seed=0)
    assert a == b
    assert len(a) == 2
    assert a[0].replicates == 5
    assert a[0].std >= 0


# ── Equivalence ──

def test_worked_pair_is_interventionally_equivalent(split_itree, reordered_itree):
    assert compatible(split_itree, reordered_itree) == {"obs": "obs", "I1": "I1"}
    assert interventional_equivalent(split_itree, reordered_itree)
    assert interventional_equivalent(split_itree, split_itree)


def test_different_heads_break_equivalence(split_tree, reordered_tree):
    only_level3 = [Stage(3, ctx(x0=0))]
    it10 = build_interventional_tree(split_tree, {"I1": only_level3})
    it12 = build_interventional_tree(reordered_tree, {"I1": only_level3})
    assert compatible(it10, it12) is None
    assert not interventional_equivalent(it10, it12)


def test_target_count_must_match(split_itree, split_tree):
    two = build_interventional_tree(split_tree, {"I1": SPLIT_TARGET, "I2": []})
    assert compatible(split_itree, two) is None
    assert not interventional_equivalent(split_itree, two)


def test_equivalence_requires_complete_targets(split_tree, split_itree):
    partial = build_interventional_tree(split_tree, {"I1": [Stage(4, ctx(x0=0, x2=1))]})
    with pytest.raises(IncompleteTargetError) as exc:
        interventional_equivalent(partial, split_itree)
    assert exc.value.context["target"] == "I1"


def test_interventional_classes_group_equivalent(split_itree, reordered_itree, split_tree):
    other = build_interventional_tree(split_tree, {"I1": [Stage(3, ctx(x0=0))]})
    classes = interventional_classes([split_itree, other, reordered_itree])
    assert classes == [[split_itree, reordered_itree], [other]]



def _protein_tree():
    """pPKCG < pNUMB < pNR1 < pCAMKII; pCAMKII ignores pNUMB, and pNR1 too when pPKCG is high."""
    variables = tuple(VariableSpec(name, 2, ("low", "high")) for name in ("pPKCG", "pNUMB", "pNR1", "pCAMKII"))
    return CStree(variables, (0, 1, 2, 3), (
        Stage(3, ctx(x1=0)), Stage(3, ctx(x1=1)),
        Stage(4, ctx(x0=0, x2=0)), Stage(4, ctx(x0=0, x2=1)), Stage(4, ctx(x0=1)),
    ))


def _whole_level(tree, variable):
    return build_interventional_tree(tree, {"I1": tree.all_stages(tree.order.index(variable) + 1)})


def _class_size(members, reference, variable):
    return sum(interventional_equivalent(reference, _whole_level(m, variable)) for m in members)


def test_protein_example_class_sizes():
    tree = _protein_tree()
    members = equivalence_class(tree)
    assert {m.order for m in members} == {(0, 1, 2, 3), (1, 0, 2, 3), (1, 2, 0, 3), (2, 1, 0, 3)}
    numb = _whole_level(tree, 1)
    assert numb.idags.heads(ctx(x0=1), "I1") == {1}
    assert _class_size(members, numb, 1) == 1
    # pPKCG is fixed in the pPKCG=high graph, so its target adds no w edge there
    chain = next(m for m in members if m.order == (2, 1, 0, 3))
    pkcg = _whole_level(chain, 0)
    assert pkcg.idags.heads(ctx(x0=1), "I1") == frozenset()
    assert _class_size(members, pkcg, 0) == 3
    assert not interventional_equivalent(numb, _whole_level(tree, 0))


# ── Target search ──

def test_search_finds_planted_target(small_tree):
    stage = Stage(3, ctx(x0=0))
    params = ParameterMap(small_tree, (
        np.array([[0.5, 0.5]]),
        np.array([[0.3, 0.7], [0.6, 0.4]]),
        np.array([[0.8, 0.2], [0.3, 0.7], [0.7, 0.3]]),
    ))
    shifted = intervened_parameters(params, [stage], {stage: [0.1, 0.9]})
    tables = [sample(small_tree, params, 20_000, seed=21), sample(small_tree, shifted, 20_000, seed=22)]
    trees = equivalence_class(small_tree)
    result = search_targets_over_class(trees, tables)
    planted = build_interventional_tree(small_tree, {"I1": [stage]})
    assert planted in result.ties
    assert result.evaluated == sum(len(complete_targets(t)) for t in trees)
    assert result.score.bic == pytest.approx(interventional_bic(planted, tables).bic, abs=1e-6)
    assert sum(len(c) for c in result.classes) == len(result.ties)
    assert result.to_dict()["ties"] == len(result.ties)



@pytest.mark.slow
def test_search_recovers_random_planted_targets(small_tree):
    stage = Stage(3, ctx(x0=0))
    trees = equivalence_class(small_tree)
    planted = build_interventional_tree(small_tree, {"I1": [stage]})
    rng = np.random.default_rng(77)
    found = 0
    for _ in range(20):
        params = random_parameters(small_tree, rng)
        shifted = intervened_parameters(params, [stage], seed=rng)
        tables = [sample(small_tree, params, 100_000, rng), sample(small_tree, shifted, 100_000, rng)]
        found += planted in search_targets_over_class(trees, tables).ties
    assert found >= 18


def test_search_budget(small_tree, rng):
    tables = [random_table(small_tree.variables, rng) for _ in range(2)]
    with pytest.raises(BudgetExceededError):
        search_targets_over_class([small_tree], tables, budget=3)


def test_search_needs_trees(small_tree, rng):
    with pytest.raises(TargetError):
        search_targets_over_class([], [random_table(small_tree.variables, rng)])
