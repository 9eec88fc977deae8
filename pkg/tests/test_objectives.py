# tests/test_objectives.py

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from core import InstanceError
from objectives import (
    AdditiveObjective,
    CoverageObjective,
    CutObjective,
    Example1Objective,
    InfluenceObjective,
    ObjectiveOracle,
    check_monotone,
    check_submodular,
    marginal,
    objective_from_dict,
    simulate_influence,
    value,
)


def _families(m=6):
    """One small representative of every family over m items."""
    graph = nx.cycle_graph(m)
    graph.add_edge(0, m // 2)
    return [
        AdditiveObjective(np.arange(m, dtype=float)),
        CoverageObjective(5, [[i % 5, (i + 2) % 5] for i in range(m)], [1, 2, 3, 1, 2]),
        InfluenceObjective(graph, 0.2),
        CutObjective(graph),
    ]


# --- value / marginal ---

def test_influence_single_vertex_with_two_neighbors():
    f = InfluenceObjective(nx.path_graph(3), q=0.2)
    assert value(f, [1]) == pytest.approx(1 + 2 * (1 - 0.8))


def test_influence_closed_form_on_shared_neighbor():
    f = InfluenceObjective(nx.path_graph(3), q=0.5)
    # vertex 1 has two seed neighbors
    assert value(f, [0, 2]) == pytest.approx(2 + (1 - 0.5 ** 2))


def test_cut_single_edge(single_edge_cut):
    assert value(single_edge_cut, [0]) == 1
    assert value(single_edge_cut, [0, 1]) == 0
    assert marginal(single_edge_cut, 1, [0]) == -1


def test_additive_marginal():
    assert marginal(AdditiveObjective([3, 2, 1]), 0, []) == 3


def test_marginal_rejects_member():
    with pytest.raises(InstanceError):
        marginal(AdditiveObjective([3, 2, 1]), 0, [0])


def test_value_rejects_out_of_range():
    with pytest.raises(InstanceError):
        value(AdditiveObjective([3, 2, 1]), [3])


def test_weighted_cut():
    f = CutObjective.from_edges([(0, 1), (1, 2)], 3, weights=[2.0, 5.0])
    assert value(f, [1]) == 7.0
    assert value(f, [0]) == 2.0
    assert value(f, [0, 1]) == pytest.approx(nx.cut_size(f.graph, [0, 1], weight="weight"))


def test_influence_marginals_shrink_along_a_chain():
    f = InfluenceObjective(nx.star_graph(5), q=0.3)
    chain = [[], [1], [1, 2], [1, 2, 3]]
    gains = [marginal(f, 0, S) for S in chain]
    assert all(a >= b - 1e-12 for a, b in zip(gains, gains[1:]))


@pytest.mark.parametrize("f", _families())
def test_normalized(f):
    assert value(f, []) == 0.0


@given(data=st.data())
@settings(max_examples=50, deadline=None)
def test_non_negative(data):
    for f in _families():
        S = data.draw(st.sets(st.integers(0, f.m - 1)))
        assert value(f, S) >= 0.0


def test_example1_penalised_pair():
    n, eps = 3, (1e-3, 1e-4, 1e-5, 1e-6)
    f = Example1Objective(n, 2, eps)
    anchor, partner = f.anchor, f.partner
    assert (anchor, partner) == (0, 4)
    S = [anchor, partner, 7]
    assert value(f, S) == pytest.approx(sum(f.singletons[S]) - eps[2])


def test_example1_agent_one_values_first_2n_items():
    f = Example1Objective(4, 1)
    assert f.m == 17
    assert value(f, range(17)) == pytest.approx(8.0)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_example1_partner_block_never_beats_the_tail(n):
    """Once an agent holds its anchor, nothing in g_{n+1}..g_{2n} is worth more than 1,
    while every tail item is worth 1 + eps4."""
    for i in range(2, n + 1):
        f = Example1Objective(n, i)
        held = [f.anchor]
        for x in range(n, 2 * n):
            if x != f.anchor:
                assert marginal(f, x, held) <= 1.0 + 1e-12
        for x in range(2 * n, f.m):
            assert marginal(f, x, held) == pytest.approx(1.0 + f.eps[3])


def test_example1_rejects_bad_parameters():
    with pytest.raises(InstanceError):
        Example1Objective(1, 1)
    with pytest.raises(InstanceError):
        Example1Objective(3, 4)
    with pytest.raises(InstanceError):
        Example1Objective(3, 2, (1e-3, 1e-3, 1e-5, 1e-6))


def test_influence_rejects_self_loops():
    graph = nx.path_graph(3)
    graph.add_edge(1, 1)
    with pytest.raises(InstanceError):
        InfluenceObjective(graph)
    with pytest.raises(InstanceError):
        InfluenceObjective.from_edges([(0, 1), (1, 0)], 2)


@pytest.mark.parametrize("S", [[0], [0, 5], [2, 3, 7]])
def test_influence_closed_form_matches_simulation(S):
    graph = nx.gnp_random_graph(10, 0.4, seed=11)
    f = InfluenceObjective(graph, q=0.2)
    mean, stderr = simulate_influence(f, S, samples=4000, seed=3)
    assert abs(mean - value(f, S)) <= 3 * stderr + 1e-12


# --- oracle ---

def test_oracle_counts_every_query():
    oracle = ObjectiveOracle(AdditiveObjective([1, 2, 3]))
    oracle.value([0])
    oracle.value([0])
    oracle.marginal(1, [0])
    assert oracle.queries == 4


def test_memoized_oracle_still_counts():
    oracle = ObjectiveOracle(AdditiveObjective([1, 2, 3]), memoize=True)
    assert oracle.value([2, 0]) == oracle.value([0, 2]) == 4
    assert oracle.queries == 2
    assert len(oracle._cache) == 1


# --- property checks ---

def test_additive_is_submodular():
    assert check_submodular(AdditiveObjective([5, 1, 4, 2, 3])).passed


def test_path_cut_submodular_not_monotone():
    f = CutObjective(nx.path_graph(4))
    assert check_submodular(f).passed
    assert not check_monotone(f).passed


def test_example1_agent_two_is_submodular():
    assert check_submodular(_Window(Example1Objective(3, 2), 10)).passed


def test_cut_single_edge_monotone_witness(single_edge_cut):
    report = check_monotone(single_edge_cut)
    assert not report.passed
    assert report.witness["S"] == (0,)
    assert report.witness["T"] == (0, 1)
    assert (report.witness["f_S"], report.witness["f_T"]) == (1.0, 0.0)


@pytest.mark.parametrize("f", _families(8)[:3], ids=["additive", "coverage", "influence"])
def test_monotone_families_pass(f):
    report = check_monotone(f)
    assert report.passed and report.exhaustive


@pytest.mark.parametrize("f", _families(8), ids=["additive", "coverage", "influence", "cut"])
def test_all_families_submodular(f):
    report = check_submodular(f)
    assert report.passed
    assert report.checks == {"diminishing_returns": True, "nemhauser_general": True}


def test_example1_monotone_on_a_window():
    assert check_monotone(_Window(Example1Objective(3, 3), 10)).passed


class _Supermodular:
    family, monotone, m = "square", True, 4

    def value(self, S):
        return float(len(list(S)) ** 2)

    def marginal(self, x, S):
        return self.value(list(S) + [x]) - self.value(S)


def test_supermodular_function_fails_with_witness():
    report = check_submodular(_Supermodular())
    assert not report.passed
    w = report.witness
    assert set(w["S"]) <= set(w["T"]) and w["x"] not in w["T"]
    assert w["gain_S"] < w["gain_T"]


def test_large_ground_set_falls_back_to_sampling():
    report = check_submodular(AdditiveObjective(np.ones(20)), samples=500)
    assert report.passed and not report.exhaustive
    assert 0 < report.confidence < 1


class _Window:
    """The first ``m`` items of a larger objective, so exhaustive checks stay small."""

    def __init__(self, spec, m):
        self.spec, self.m = spec, m
        self.family, self.monotone = spec.family, spec.monotone

    def value(self, S):
        return self.spec.value(S)

    def marginal(self, x, S):
        return self.spec.marginal(x, S)


# --- schemas ---

def test_objective_schemas():
    assert objective_from_dict({"family": "additive", "weights": [1, 2]}, 2).value([1]) == 2
    f = objective_from_dict({"family": "influence", "edges": [[0, 1]], "q": 0.5}, 3)
    assert f.value([0]) == pytest.approx(1.5)
    assert objective_from_dict({"family": "example1", "n": 2, "agent": 2}, 5).partner == 3
    with pytest.raises(InstanceError, match="m=4"):
        objective_from_dict({"family": "additive", "weights": [1, 2]}, 4)
    with pytest.raises(InstanceError):
        objective_from_dict({"family": "influence", "edges": [[0, 1]], "q": 1.5}, 2)
