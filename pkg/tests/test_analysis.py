# tests/test_analysis.py

import math
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from analysis import (
    BoundSpec,
    bound_for,
    brute_force_opt,
    check_corollary_saturation,
    check_ef1_pair,
    check_fef1_pair,
    check_theorem_bound,
    exante_beta,
    exante_bound_check,
    fairness_report,
    identical_additive_instance,
    opt_minus_from_trace,
    pessimistic_opt_minus,
    random_instance,
    removed_before_first_turn,
    run_fleet,
    verify_instance,
    verify_run,
)
from constraints import CardinalityConstraint, PartitionMatroid
from core import AgentSpec, BoundMismatchError, GroundSet, InstanceError, TooLargeError, allocation_of, build_instance
from engine import GreedyPolicy, ScriptedPolicy, default_policies, example1_instance, run_round_robin
from objectives import AdditiveObjective, CutObjective


@pytest.fixture
def hand_run(two_agent_instance):
    trace = run_round_robin(two_agent_instance, [GreedyPolicy(), GreedyPolicy()])
    return trace, allocation_of(trace)


class _LazyGreedy(GreedyPolicy):
    """Greedy for one pick, then passes forever."""

    def step(self, state, available, objective, constraint, config):
        if state.S:
            return None
        return super().step(state, available, objective, constraint, config)


# --- benchmarks ---

def test_brute_force_two_of_three():
    assert brute_force_opt(AdditiveObjective([3, 2, 1]), CardinalityConstraint(3, 2), range(3)) == (5.0, (0, 1))


def test_brute_force_example1_agent_one():
    instance = example1_instance(4)
    spec = instance.agents[0]
    value, chosen = brute_force_opt(spec.objective, spec.constraint, range(instance.m))
    assert value == pytest.approx(8.0)
    assert set(range(8)) <= set(chosen)


def test_brute_force_four_cycle_cut():
    value, chosen = brute_force_opt(CutObjective(nx.cycle_graph(4)), CardinalityConstraint(4, 4), range(4))
    assert value == 4.0
    assert chosen in ((0, 2), (1, 3))


def test_brute_force_empty_remainder():
    assert brute_force_opt(AdditiveObjective([1, 1]), CardinalityConstraint(2, 2), []) == (0.0, ())


def test_brute_force_too_large():
    with pytest.raises(TooLargeError):
        brute_force_opt(AdditiveObjective(np.ones(23)), CardinalityConstraint(23, 1), range(23))


def test_opt_minus_for_second_mover(hand_run):
    trace, _ = hand_run
    assert removed_before_first_turn(trace, 1) == {0}
    assert opt_minus_from_trace(trace, 1) == (5.0, (1, 2))
    assert opt_minus_from_trace(trace, 0)[0] == 5.0


@pytest.mark.parametrize("seed", range(8))
def test_pessimistic_opt_minus_is_a_lower_bound(seed):
    instance = random_instance("monotone", "partition", 3, 7, seed)
    trace = run_round_robin(instance, default_policies(instance))
    for agent, spec in enumerate(instance.agents):
        lost = len(removed_before_first_turn(trace, agent))
        pessimistic, _ = pessimistic_opt_minus(spec.objective, spec.constraint, lost)
        assert pessimistic <= opt_minus_from_trace(trace, agent)[0] + 1e-9


def test_pessimistic_rejects_impossible_loss():
    with pytest.raises(InstanceError):
        pessimistic_opt_minus(AdditiveObjective([1, 1]), CardinalityConstraint(2, 1), 3)


# --- theorem bounds ---

@pytest.mark.parametrize("theorem, factor", [
    ("T1", Fraction(1, 4)), ("T2", Fraction(1, 3)), ("T3", Fraction(1, 3)), ("T4", Fraction(1, 2)),
    ("T5", Fraction(1, 18)), ("T6", Fraction(1, 14)),
])
def test_bound_factors(theorem, factor):
    assert BoundSpec(theorem, n=3, p=1).factor == factor


def test_exante_beta_cases():
    assert exante_beta(True, True, 4, 1) == 2
    assert exante_beta(True, False, 4, 2) == Fraction(5, 2)
    assert exante_beta(False, True, 4, 1) == Fraction(11, 2)
    assert exante_beta(False, False, 4, 2) == Fraction(15, 2)
    assert BoundSpec("T7", n=4, beta=Fraction(2)).factor == Fraction(1, 8)


def test_t7_needs_beta():
    with pytest.raises(InstanceError):
        BoundSpec("T7", n=2).factor


def test_t2_on_the_hand_trace(two_agent_instance, hand_run):
    trace, allocation = hand_run
    check = check_theorem_bound(trace, 0, bound_for("T2", two_agent_instance, 0), allocation)
    assert check.achieved == 4.0 and check.benchmark == 5.0
    assert check.bound == pytest.approx(2.5)
    assert check.passed
    assert check.margin == pytest.approx(1.6)


def test_t2_rejects_non_cardinality():
    agents = [AgentSpec(AdditiveObjective([3, 2, 1, 1]), PartitionMatroid(4, [[0, 1], [2, 3]], [1, 1]))
              for _ in range(2)]
    instance = build_instance(GroundSet(4), agents)
    trace = run_round_robin(instance, [GreedyPolicy(), GreedyPolicy()])
    with pytest.raises(BoundMismatchError, match="cardinality"):
        check_theorem_bound(trace, 0, bound_for("T2", instance, 0))


def test_t2_rejects_a_single_agent():
    instance = build_instance(GroundSet(3), [AgentSpec(AdditiveObjective([3, 2, 1]), CardinalityConstraint(3, 2))])
    trace = run_round_robin(instance, [GreedyPolicy()])
    with pytest.raises(BoundMismatchError, match="n >= 2"):
        check_theorem_bound(trace, 0, bound_for("T2", instance, 0))


def test_bound_rejects_wrong_policy_and_fairness_theorems(two_agent_instance, hand_run):
    trace, _ = hand_run
    with pytest.raises(BoundMismatchError, match="simultaneous_greedy"):
        check_theorem_bound(trace, 0, bound_for("T5", two_agent_instance, 0))
    with pytest.raises(BoundMismatchError):
        check_theorem_bound(trace, 0, bound_for("T3", two_agent_instance, 0))
    with pytest.raises(BoundMismatchError):
        check_theorem_bound(trace, 0, bound_for("T7", two_agent_instance, 0))
    with pytest.raises(InstanceError):
        bound_for("T9", two_agent_instance, 0)


@pytest.mark.parametrize("seed", range(10))
def test_single_agent_greedy_beats_one_minus_one_over_e(seed):
    instance = random_instance("monotone", "cardinality", 1, 9, seed)
    report = verify_instance(instance)
    assert report.achieved[0] >= (1 - 1 / math.e) * report.opt[0] - 1e-9


# --- fairness ---

def test_fef1_self_pair_is_infinite(two_agent_instance, hand_run):
    _, allocation = hand_run
    pair = check_fef1_pair(allocation, two_agent_instance, 0, 0)
    assert pair.ef1 == pair.fef1 == math.inf
    assert pair.theorem_alpha == math.inf


def test_fef1_against_a_singleton_bundle(two_agent_instance, hand_run):
    _, allocation = hand_run
    pair = check_fef1_pair(allocation, two_agent_instance, 0, 1)
    assert pair.fef1 == math.inf
    # agent 1 moves after agent 0, so its first pick stays in the comparison
    assert (pair.theorem_num, pair.theorem_den) == (4.0, 2.0)


def test_fef1_second_mover_drops_the_first_pick(two_agent_instance, hand_run):
    _, allocation = hand_run
    pair = check_fef1_pair(allocation, two_agent_instance, 1, 0)
    assert pair.ef1 == check_ef1_pair(allocation, two_agent_instance, 1, 0) == 3.0
    assert pair.fef1 == 3.0
    assert pair.theorem_alpha == 1.5
    assert pair.meets(1 / 2)


def test_fairness_report_minimums(two_agent_instance, hand_run):
    _, allocation = hand_run
    report = fairness_report(allocation, two_agent_instance)
    assert len(report.pairs) == 2
    assert (report.min_ef1, report.min_fef1, report.min_theorem_alpha) == (3.0, 3.0, 1.5)


# --- saturation ---

def test_saturation_complete_allocation(two_agent_instance, hand_run):
    _, allocation = hand_run
    report = check_corollary_saturation(allocation, two_agent_instance)
    assert report.passed and report.regime == "cardinality"
    assert report.round_limited == [0]


def test_saturation_caps_met():
    agents = [AgentSpec(AdditiveObjective([5, 4, 3, 2, 1]), CardinalityConstraint(5, 1)) for _ in range(2)]
    instance = build_instance(GroundSet(5), agents)
    allocation = allocation_of(run_round_robin(instance, [GreedyPolicy(), GreedyPolicy()]))
    report = check_corollary_saturation(allocation, instance)
    assert report.passed and report.round_limited == []
    assert len(allocation.allocated) == 2


def test_saturation_flags_an_agent_that_stops_early():
    agents = [AgentSpec(AdditiveObjective([5, 4, 3, 2, 1]), CardinalityConstraint(5, 3)) for _ in range(2)]
    instance = build_instance(GroundSet(5), agents)
    trace = run_round_robin(instance, [_LazyGreedy(), GreedyPolicy()])
    report = check_corollary_saturation(allocation_of(trace), instance)
    assert not report.passed
    assert report.violations == [(0, 4)]
    assert not verify_run(trace).passed


def test_saturation_p_system_regime():
    agents = [AgentSpec(AdditiveObjective([3, 2, 1, 1]), PartitionMatroid(4, [[0, 1], [2, 3]], [1, 1]))
              for _ in range(2)]
    instance = build_instance(GroundSet(4), agents)
    allocation = allocation_of(run_round_robin(instance, [GreedyPolicy(), GreedyPolicy()]))
    report = check_corollary_saturation(allocation, instance)
    assert report.regime == "p_system" and report.passed


def test_scripted_runs_skip_saturation(two_agent_instance):
    report = verify_instance(two_agent_instance, [ScriptedPolicy([]), GreedyPolicy()], theorems=["T1"])
    assert report.saturation is None


# --- ex-ante ---

def test_exante_single_agent_is_the_greedy_run():
    instance = build_instance(GroundSet(3), [AgentSpec(AdditiveObjective([3, 2, 1]), CardinalityConstraint(3, 2))])
    report = exante_bound_check(instance)
    row = report.rows[0]
    assert row.expected == 5.0 and row.opt == 5.0
    assert row.factor == Fraction(1, 2) and row.exact and row.samples == 1
    assert report.passed


def test_exante_contested_top_item():
    agents = [AgentSpec(AdditiveObjective([5, 1, 1]), CardinalityConstraint(3, 1)) for _ in range(2)]
    instance = build_instance(GroundSet(3), agents)
    report = exante_bound_check(instance)
    assert [row.expected for row in report.rows] == [3.0, 3.0]
    assert all(row.bound == pytest.approx(1.25) for row in report.rows)
    assert report.passed


def test_exante_identical_agents_ratio_is_one_over_n():
    instance = identical_additive_instance(3)
    report = exante_bound_check(instance)
    for row in report.rows:
        assert row.expected / row.opt == pytest.approx(1 / 3)
        assert row.beta == 2 and row.passed


def test_exante_montecarlo_interval():
    agents = [AgentSpec(AdditiveObjective([5, 1, 1]), CardinalityConstraint(3, 1)) for _ in range(2)]
    instance = build_instance(GroundSet(3), agents)
    report = exante_bound_check(instance, mode="montecarlo", samples=400, seed=5)
    for row in report.rows:
        assert not row.exact and row.samples == 400
        assert row.ci_low <= row.expected <= row.ci_high
        assert abs(row.expected - 3.0) < 0.6
    assert report.passed


def test_exante_montecarlo_is_deterministic():
    instance = identical_additive_instance(4, 6)
    a = exante_bound_check(instance, mode="montecarlo", samples=50, seed=9)
    b = exante_bound_check(instance, mode="montecarlo", samples=50, seed=9)
    assert a.rows == b.rows


def test_exante_limits():
    with pytest.raises(TooLargeError):
        exante_bound_check(identical_additive_instance(7))
    with pytest.raises(InstanceError):
        exante_bound_check(identical_additive_instance(2), mode="bootstrap")


def test_exante_bound_override():
    instance = identical_additive_instance(2)
    # every agent gets exactly half of OPT, so beta = 1 is tight
    report = exante_bound_check(instance, bound=BoundSpec("T7", n=2, beta=Fraction(1)))
    assert report.passed
    strict = exante_bound_check(instance, bound=BoundSpec("T7", n=2, beta=Fraction(1, 2)))
    assert not strict.passed


# --- verification and fleets ---

def test_verify_hand_instance(two_agent_instance):
    report = verify_instance(two_agent_instance)
    assert report.passed
    assert report.opt == [5.0, 5.0]
    assert report.opt_minus == [5.0, 5.0]
    assert report.achieved == [4.0, 3.0]
    assert {c.theorem for c in report.checks} == {"T1", "T2", "T3", "T4"}


def test_verify_rejects_unknown_theorem(hand_run):
    with pytest.raises(InstanceError):
        verify_run(hand_run[0], ["T8"])


@pytest.mark.parametrize("constraint_kind", ["cardinality", "partition", "intersection"])
def test_small_monotone_fleet(constraint_kind):
    frame = run_fleet("monotone", constraint_kind, 15, seed=1)
    assert len(frame) == 15
    assert frame["failures"].sum() == 0
    assert frame["saturated"].all()


def test_small_nonmonotone_fleet():
    frame = run_fleet("nonmonotone", "cardinality", 10, seed=2)
    assert frame["failures"].sum() == 0
    assert (frame["checks"] > 0).all()


def test_fleet_is_deterministic():
    a = run_fleet("monotone", "partition", 5, seed=3)
    b = run_fleet("monotone", "partition", 5, seed=3)
    assert a.equals(b)


@pytest.mark.slow
@pytest.mark.parametrize("constraint_kind", ["cardinality", "partition", "intersection"])
def test_monotone_fleet(constraint_kind):
    frame = run_fleet("monotone", constraint_kind, 500, seed=0, workers=4)
    assert frame["failures"].sum() == 0, frame.loc[frame["failures"] > 0, "first_failure"].head().tolist()
    assert frame["saturated"].all()


@pytest.mark.slow
@pytest.mark.parametrize("constraint_kind", ["cardinality", "partition", "intersection"])
def test_nonmonotone_fleet(constraint_kind):
    frame = run_fleet("nonmonotone", constraint_kind, 500, seed=0, workers=4)
    assert len(frame) == 500
    assert frame["failures"].sum() == 0, frame.loc[frame["failures"] > 0, "first_failure"].head().tolist()


@pytest.mark.slow
@pytest.mark.parametrize("objective_kind", ["monotone", "nonmonotone"])
def test_exact_exante_fleet(objective_kind):
    for seed in range(100):
        constraint_kind = "cardinality" if seed % 2 else "partition"
        instance = random_instance(objective_kind, constraint_kind, 3, 4 + seed % 5, seed)
        assert exante_bound_check(instance).passed, instance.name
