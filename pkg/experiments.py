# experiments.py
"""Competing influence maximizers on synthetic social graphs.

Three competition regimes: 'low' (Erdős–Rényi), 'medium' (power-law expected degrees)
and 'high' (Erdős–Rényi plus ten implanted influencers). Every (sweep value, run) cell
derives its own seeds from the experiment seed, so cells can run in any order or in parallel.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Literal, Optional

import networkx as nx
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy import stats

from constraints import CardinalityConstraint
from core import AgentSpec, GroundSet, InstanceError, allocation_of, build_instance, rng_from, spawn_seed
from engine import GreedyPolicy, ProtocolConfig, run_round_robin, single_agent_greedy
from objectives import InfluenceObjective

logger = logging.getLogger(__name__)

IMPLANTS = 10
CSV_COLUMNS = ["sweep", "run", "agent", "value", "baseline", "ratio", "protocol", "position"]

# seed-schedule streams
GRAPH_STREAM = 0
ORDER_STREAM = 1
IMPLANT_STREAM = 2


# === GRAPH GENERATION ===

def _check_simple(graph: nx.Graph) -> nx.Graph:
    if nx.number_of_selfloops(graph) or graph.is_multigraph() or graph.is_directed():
        raise InstanceError("generated graph is not simple")
    return graph


def gen_erdos_renyi(V: int, avg_degree: float, seed: int) -> nx.Graph:
    """G(V, p) with p = avg_degree / (V - 1)."""
    if V < 2 or not 0 < avg_degree < V:
        raise InstanceError(f"need V >= 2 and 0 < avg_degree < V, got V={V}, avg_degree={avg_degree}")
    p = min(1.0, avg_degree / (V - 1))
    return _check_simple(nx.gnp_random_graph(V, p, seed=seed))


def gen_power_law(V: int, avg_degree: float, seed: int) -> nx.Graph:
    """Chung–Lu graph whose expected degrees follow a Lomax(2) law with mean avg_degree."""
    if V < 2 or not 0 < avg_degree < V:
        raise InstanceError(f"need V >= 2 and 0 < avg_degree < V, got V={V}, avg_degree={avg_degree}")
    rng = rng_from(seed)
    weights = stats.lomax(c=2).rvs(size=V, random_state=rng)
    weights = weights * (avg_degree / weights.mean())
    graph = nx.expected_degree_graph(weights.tolist(), seed=spawn_seed(seed, GRAPH_STREAM), selfloops=False)
    return _check_simple(nx.Graph(graph))


def implant_influencers(graph: nx.Graph, seed: int) -> nx.Graph:
    """Add ten vertices; vertex j reaches ceil(V / 3^j) distinct original vertices (at most V)."""
    V = graph.number_of_nodes()
    if V < 60:
        raise InstanceError(f"implanting influencers needs V >= 60, got {V}")
    rng = rng_from(seed)
    implanted = graph.copy()
    for j in range(IMPLANTS):
        reach = min(V, math.ceil(V / 3 ** j))
        targets = rng.choice(V, size=reach, replace=False)
        vertex = V + j
        implanted.add_node(vertex)
        implanted.add_edges_from((vertex, int(t)) for t in targets)
    return _check_simple(implanted)


def generate_graph(regime: str, V: int, avg_degree: float, seed: int) -> nx.Graph:
    if regime == "low":
        return gen_erdos_renyi(V, avg_degree, seed)
    if regime == "medium":
        return gen_power_law(V, avg_degree, seed)
    if regime == "high":
        return implant_influencers(gen_erdos_renyi(V, avg_degree, seed), spawn_seed(seed, IMPLANT_STREAM))
    raise InstanceError(f"unknown regime '{regime}'")


def write_edge_list(graph: nx.Graph, path: str | Path) -> None:
    nx.write_edgelist(graph, path, data=False)


def read_edge_list(path: str | Path, V: Optional[int] = None) -> nx.Graph:
    """Whitespace-separated ``u v`` pairs, 0-indexed; isolated vertices need ``V``."""
    graph = nx.read_edgelist(path, nodetype=int, data=False, create_using=nx.Graph)
    if V is not None:
        graph.add_nodes_from(range(V))
    return _check_simple(graph)


# === EXPERIMENT SPECS ===

class GraphGenSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    vertices: int = Field(100, ge=20)
    avg_degree: float = Field(10.0, gt=0)
    regime: Literal["low", "medium", "high"] = "low"
    seed: int = Field(2024, ge=0, lt=2 ** 64)

    @model_validator(mode="after")
    def _degree_below_vertices(self):
        if self.avg_degree >= self.vertices:
            raise ValueError("avg_degree must be below the vertex count")
        return self


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    graph: GraphGenSpec = GraphGenSpec()
    agents: int = Field(2, ge=1)
    cardinality: int = Field(5, ge=1)
    q: float = Field(0.2, ge=0.0, le=1.0)
    runs: int = Field(20, ge=1)
    sweep: Literal["agents", "cardinality"] = "agents"
    values: Optional[list[int]] = None
    protocol: Literal["fixed", "randomized"] = "fixed"

    @property
    def sweep_values(self) -> list[int]:
        if self.values is not None:
            return list(self.values)
        return list(range(2, 7)) if self.sweep == "agents" else list(range(2, 21))


def load_experiment_spec(path: str | Path) -> ExperimentSpec:
    try:
        return ExperimentSpec.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))
    except (ValidationError, json.JSONDecodeError) as exc:
        raise InstanceError(f"invalid experiment spec {path}: {exc}") from exc


@dataclass(frozen=True)
class ExperimentRow:
    sweep: int
    run: int
    agent: int
    value: float
    baseline: float
    ratio: float
    protocol: str
    position: int


# === RUNS ===

def _cell(args: tuple[ExperimentSpec, int, int]) -> list[ExperimentRow]:
    spec, sweep_index, run = args
    value = spec.sweep_values[sweep_index]
    n = value if spec.sweep == "agents" else spec.agents
    k = value if spec.sweep == "cardinality" else spec.cardinality
    g = spec.graph

    graph = generate_graph(g.regime, g.vertices, g.avg_degree, spawn_seed(g.seed, GRAPH_STREAM, run))
    objective = InfluenceObjective(graph, spec.q)
    m = objective.m
    constraint = CardinalityConstraint(m, k)
    instance = build_instance(GroundSet(m), [AgentSpec(objective, constraint) for _ in range(n)],
                              name=f"{g.regime}-{spec.sweep}{value}-run{run}")

    if spec.protocol == "randomized":
        config = ProtocolConfig(seed=spawn_seed(g.seed, ORDER_STREAM, sweep_index, run))
    else:
        config = ProtocolConfig()
    trace = run_round_robin(instance, [GreedyPolicy() for _ in range(n)], config)
    allocation = allocation_of(trace)
    baseline, _ = single_agent_greedy(objective, constraint)
    if baseline <= 0:
        raise InstanceError("single-agent baseline is zero; the graph has no vertices to seed")

    rows = []
    for agent in range(n):
        achieved = objective.value(allocation.bundles[agent].chosen)
        rows.append(ExperimentRow(value, run, agent, achieved, baseline, achieved / baseline,
                                  spec.protocol, trace.position(agent) + 1))
    return rows


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> list[ExperimentRow]:
    """One row per (sweep value, run, agent), in that order."""
    cells = [(spec, s, run) for s in range(len(spec.sweep_values)) for run in range(spec.runs)]
    logger.info("Experiment: %s regime, sweep %s over %s, %d runs each, %s protocol",
                spec.graph.regime, spec.sweep, spec.sweep_values, spec.runs, spec.protocol)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell, cells))
    else:
        results = []
        for cell in cells:
            results.append(_cell(cell))
            logger.debug("cell %s=%d run %d done", spec.sweep, spec.sweep_values[cell[1]], cell[2])
    rows = [row for cell_rows in results for row in cell_rows]
    logger.info("Experiment finished: %d rows", len(rows))
    return rows


def experiment_frame(rows: list[ExperimentRow]) -> pd.DataFrame:
    return pd.DataFrame([asdict(row) for row in rows], columns=CSV_COLUMNS)


def write_csv(rows: list[ExperimentRow], path: str | Path) -> None:
    experiment_frame(rows).to_csv(path, index=False, lineterminator="\n", encoding="utf-8", float_format="%.12g")
    logger.info("Wrote %d rows to %s", len(rows), path)
