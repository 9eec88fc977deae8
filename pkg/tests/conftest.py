# tests/conftest.py

from pathlib import Path

import networkx as nx
import pytest

from constraints import CardinalityConstraint
from core import AgentSpec, GroundSet, build_instance
from objectives import AdditiveObjective, CutObjective

ROOT = Path(__file__).resolve().parent.parent
INSTANCES = ROOT / "instances"
SPECS = ROOT / "specs"


@pytest.fixture
def two_agent_instance():
    """f_1 = [3, 2, 1], f_2 = [1, 3, 2], both with cardinality 2."""
    agents = [
        AgentSpec(AdditiveObjective([3, 2, 1]), CardinalityConstraint(3, 2)),
        AgentSpec(AdditiveObjective([1, 3, 2]), CardinalityConstraint(3, 2)),
    ]
    return build_instance(GroundSet(3), agents, name="two-agent")


@pytest.fixture
def single_edge_cut():
    return CutObjective(nx.path_graph(2))


@pytest.fixture
def triangle_edges():
    return [(0, 1), (1, 2), (2, 0)]
