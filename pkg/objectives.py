# objectives.py
"""Value oracles for the objective families, plus exhaustive property checkers.

Every family is normalized (f(empty) = 0) and non-negative. Additive, coverage,
influence and the Example-1 family are monotone; cut is not.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Annotated, Any, ClassVar, Iterable, Literal, Optional, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, NonNegativeInt, TypeAdapter, ValidationError

from core import TOL, GroundSet, InstanceError, ItemSet, item_set, rng_from

logger = logging.getLogger(__name__)

DEFAULT_EPS = (1e-3, 1e-4, 1e-5, 1e-6)
EXHAUSTIVE_LIMIT = 12


# === ORACLE FAMILIES ===

class ObjectiveSpec(ABC):
    family: ClassVar[str]
    monotone: ClassVar[bool]

    def __init__(self, m: int):
        if m < 1:
            raise InstanceError(f"objective needs m >= 1, got {m}")
        self._m = m

    @property
    def m(self) -> int:
        return self._m

    def value(self, S: Iterable[int]) -> float:
        return self._evaluate(item_set(S, self._m))

    def marginal(self, x: int, S: Iterable[int]) -> float:
        base = item_set(S, self._m)
        if x in base:
            raise InstanceError(f"marginal of item {x} requested with {x} already in S")
        return self._evaluate(item_set(base + (x,), self._m)) - self._evaluate(base)

    @abstractmethod
    def _evaluate(self, items: ItemSet) -> float:
        ...

    def __repr__(self) -> str:
        return f"{type(self).__name__}(m={self._m})"


class AdditiveObjective(ObjectiveSpec):
    family = "additive"
    monotone = True

    def __init__(self, weights: Iterable[float]):
        self.weights = np.asarray(list(weights), dtype=float)
        super().__init__(len(self.weights))
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise InstanceError("additive weights must be finite and non-negative")

    def _evaluate(self, items: ItemSet) -> float:
        if not items:
            return 0.0
        return float(self.weights[list(items)].sum())


class CoverageObjective(ObjectiveSpec):
    """Weighted coverage: f(S) is the weight of the union of the elements covered by S."""

    family = "coverage"
    monotone = True

    def __init__(self, universe: int, covers: list[Iterable[int]], weights: Optional[Iterable[float]] = None):
        super().__init__(len(covers))
        if universe < 1:
            raise InstanceError(f"coverage universe must be >= 1, got {universe}")
        self.universe = universe
        self.covers = np.zeros((len(covers), universe), dtype=bool)
        for item, covered in enumerate(covers):
            covered = list(covered)
            if any(not 0 <= e < universe for e in covered):
                raise InstanceError(f"item {item} covers an element outside [0, {universe})")
            self.covers[item, covered] = True
        self.element_weights = np.ones(universe) if weights is None else np.asarray(list(weights), dtype=float)
        if self.element_weights.shape != (universe,) or np.any(self.element_weights < 0):
            raise InstanceError("coverage needs one non-negative weight per universe element")

    def _evaluate(self, items: ItemSet) -> float:
        if not items:
            return 0.0
        covered = self.covers[list(items)].any(axis=0)
        return float(self.element_weights[covered].sum())


def _simple_graph(edges: Iterable[tuple[int, int]], m: int) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(m))
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < m and 0 <= v < m):
            raise InstanceError(f"edge ({u}, {v}) has an endpoint outside [0, {m})")
        if u == v:
            raise InstanceError(f"self-loop on vertex {u}")
        if graph.has_edge(u, v):
            raise InstanceError(f"duplicate edge ({u}, {v})")
        graph.add_edge(u, v)
    return graph


class InfluenceObjective(ObjectiveSpec):
    """Expected reach: |S| plus, for every other vertex, the chance some seed neighbor activates it."""

    family = "influence"
    monotone = True

    def __init__(self, graph: nx.Graph, q: float = 0.2):
        m = graph.number_of_nodes()
        super().__init__(m)
        if set(graph.nodes) != set(range(m)):
            raise InstanceError("influence graph vertices must be labelled 0..m-1")
        if nx.number_of_selfloops(graph):
            raise InstanceError("influence graph must not contain self-loops")
        if graph.is_multigraph() or graph.is_directed():
            raise InstanceError("influence graph must be simple and undirected")
        if not 0.0 <= q <= 1.0:
            raise InstanceError(f"activation probability q must lie in [0, 1], got {q}")
        self.graph = graph
        self.q = float(q)
        self.adjacency = nx.to_numpy_array(graph, nodelist=range(m), dtype=np.int64, weight=None)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], m: int, q: float = 0.2) -> "InfluenceObjective":
        return cls(_simple_graph(edges, m), q)

    def _evaluate(self, items: ItemSet) -> float:
        if not items:
            return 0.0
        seeds = list(items)
        counts = self.adjacency[:, seeds].sum(axis=1)
        outside = np.ones(self._m, dtype=bool)
        outside[seeds] = False
        reached = 1.0 - (1.0 - self.q) ** counts[outside]
        return float(len(seeds) + reached.sum())


class CutObjective(ObjectiveSpec):
    """Weighted cut: total weight of edges with exactly one endpoint in S."""

    family = "cut"
    monotone = False

    def __init__(self, graph: nx.Graph):
        m = graph.number_of_nodes()
        super().__init__(m)
        if set(graph.nodes) != set(range(m)):
            raise InstanceError("cut graph vertices must be labelled 0..m-1")
        if nx.number_of_selfloops(graph):
            raise InstanceError("cut graph must not contain self-loops")
        if any(w < 0 for _, _, w in graph.edges(data="weight", default=1.0)):
            raise InstanceError("cut edge weights must be non-negative")
        self.graph = graph
        self.weights = nx.to_numpy_array(graph, nodelist=range(m), weight="weight", dtype=float)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], m: int,
                   weights: Optional[Iterable[float]] = None) -> "CutObjective":
        edges = [tuple(e) for e in edges]
        graph = _simple_graph(edges, m)
        if weights is not None:
            weights = list(weights)
            if len(weights) != len(edges):
                raise InstanceError(f"{len(edges)} edges but {len(weights)} weights")
            for (u, v), w in zip(edges, weights):
                graph[u][v]["weight"] = float(w)
        return cls(graph)

    def _evaluate(self, items: ItemSet) -> float:
        if not items:
            return 0.0
        inside = np.zeros(self._m, dtype=bool)
        inside[list(items)] = True
        return float(self.weights[np.ix_(inside, ~inside)].sum())


class Example1Objective(ObjectiveSpec):
    """The lower-bound instance on which greedy agent 1 ends with value 2 out of 2n.

    Agent 1 values g_1..g_2n at 1 each. Agent i >= 2 values its anchor g_{i-1} at
    1+eps1, g_i at 1+eps2, its partner g_{n+i} at 1+eps3 and every g_j with j > 2n at
    1+eps4; holding both anchor and partner costs eps3. ``agent_index`` is 1-indexed,
    ids are 0-indexed (g_j has id j-1).
    """

    family = "example1"
    monotone = True

    def __init__(self, n: int, agent_index: int, eps: tuple[float, float, float, float] = DEFAULT_EPS):
        if n < 2:
            raise InstanceError(f"the Example-1 construction needs n >= 2, got {n}")
        if not 1 <= agent_index <= n:
            raise InstanceError(f"agent_index must lie in [1, {n}], got {agent_index}")
        eps = tuple(float(e) for e in eps)
        if len(eps) != 4 or not (1.0 > eps[0] > eps[1] > eps[2] > eps[3] > 0.0):
            raise InstanceError(f"eps must satisfy 1 > eps1 > eps2 > eps3 > eps4 > 0, got {eps}")
        super().__init__(n * n + 1)
        self.n = n
        self.agent_index = agent_index
        self.eps = eps
        self.singletons = np.zeros(self._m)
        self.anchor: Optional[int] = None
        self.partner: Optional[int] = None
        if agent_index == 1:
            self.singletons[: 2 * n] = 1.0
        else:
            i = agent_index
            self.anchor, self.partner = i - 2, n + i - 1
            self.singletons[2 * n:] = 1.0 + eps[3]
            self.singletons[i - 2] = 1.0 + eps[0]
            self.singletons[i - 1] = 1.0 + eps[1]
            self.singletons[self.partner] = 1.0 + eps[2]

    def _evaluate(self, items: ItemSet) -> float:
        if not items:
            return 0.0
        total = float(self.singletons[list(items)].sum())
        if self.anchor is not None and self.anchor in items and self.partner in items:
            total -= self.eps[2]
        return total


class ObjectiveOracle:
    """Per-run value oracle: counts every query and optionally memoizes on the canonical set."""

    def __init__(self, spec: ObjectiveSpec, memoize: bool = False):
        self.spec = spec
        self.memoize = memoize
        self.queries = 0
        self._cache: dict[ItemSet, float] = {}

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def family(self) -> str:
        return self.spec.family

    @property
    def monotone(self) -> bool:
        return self.spec.monotone

    def value(self, S: Iterable[int]) -> float:
        self.queries += 1
        key = item_set(S, self.spec.m)
        if not self.memoize:
            return self.spec._evaluate(key)
        if key not in self._cache:
            self._cache[key] = self.spec._evaluate(key)
        return self._cache[key]

    def marginal(self, x: int, S: Iterable[int]) -> float:
        base = item_set(S, self.spec.m)
        if x in base:
            raise InstanceError(f"marginal of item {x} requested with {x} already in S")
        return self.value(base + (x,)) - self.value(base)


def value(spec: ObjectiveSpec | ObjectiveOracle, S: Iterable[int]) -> float:
    return spec.value(S)


def marginal(spec: ObjectiveSpec | ObjectiveOracle, x: int, S: Iterable[int]) -> float:
    return spec.marginal(x, S)


def simulate_influence(spec: InfluenceObjective, S: Iterable[int], samples: int = 2000,
                       seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo estimate of the influence value: (mean, standard error)."""
    seeds = list(item_set(S, spec.m))
    if not seeds:
        return 0.0, 0.0
    rng = rng_from(seed)
    outside = np.ones(spec.m, dtype=bool)
    outside[seeds] = False
    links = spec.adjacency[:, seeds].astype(bool)
    attempts = rng.random((samples, spec.m, len(seeds))) < spec.q
    activated = (attempts & links[None, :, :]).any(axis=2) & outside[None, :]
    totals = len(seeds) + activated.sum(axis=1)
    return float(totals.mean()), float(totals.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0


# === PROPERTY CHECKS ===

@dataclass
class PropertyReport:
    property: str
    passed: bool
    exhaustive: bool
    checked: int
    witness: Optional[dict[str, Any]] = None
    confidence: Optional[float] = None
    checks: dict[str, bool] = field(default_factory=dict)


def _members(mask: int, m: int) -> ItemSet:
    return tuple(i for i in range(m) if mask >> i & 1)


def _value_table(spec, m: int) -> np.ndarray:
    return np.fromiter((spec.value(_members(mask, m)) for mask in range(1 << m)), dtype=float, count=1 << m)


def _submasks_ascending(mask: int):
    sub = 0
    while True:
        yield sub
        if sub == mask:
            return
        sub = (sub - mask) & mask


def _ground_size(spec, ground: Optional[GroundSet]) -> int:
    m = spec.m if ground is None else ground.m
    if m != spec.m:
        raise InstanceError(f"objective is defined over m={spec.m}, ground set has m={m}")
    return m


def _nemhauser(F: np.ndarray, m: int) -> tuple[Optional[dict], Optional[dict], int]:
    """Check both Nemhauser inequalities for every pair (S, T); return first violations."""
    N = 1 << m
    masks = np.arange(N)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(float)
    gains = np.stack([F[masks | (1 << x)] - F for x in range(m)], axis=1)
    first_general = first_monotone = None
    for S in range(N):
        added = bits[masks & ~S] @ gains[S]
        union = masks | S
        removed = np.zeros(N)
        for i in range(m):
            if S >> i & 1:
                lost = ((S & ~masks) >> i) & 1
                removed += lost * (F[union] - F[union & ~(1 << i)])
        general = F > F[S] + added - removed + TOL
        monotone = F > F[S] + added + TOL
        if first_general is None and general.any():
            T = int(np.argmax(general))
            first_general = {"S": _members(S, m), "T": _members(T, m)}
        if first_monotone is None and monotone.any():
            T = int(np.argmax(monotone))
            first_monotone = {"S": _members(S, m), "T": _members(T, m)}
        if first_general is not None and first_monotone is not None:
            break
    return first_general, first_monotone, N * N


def check_submodular(spec, ground: Optional[GroundSet] = None, *, limit: int = EXHAUSTIVE_LIMIT,
                     samples: int = 20000, seed: int = 0) -> PropertyReport:
    """Diminishing returns over all S ⊆ T, x ∉ T, plus the general Nemhauser inequality."""
    m = _ground_size(spec, ground)
    if m > limit:
        return _sample_submodular(spec, m, samples, seed)

    F = _value_table(spec, m)
    N = 1 << m
    masks = np.arange(N)
    checked = 0
    witness = None
    for x in range(m):
        bit = 1 << x
        without_x = (masks & bit) == 0
        gain = np.where(without_x, F[masks | bit] - F, np.inf)
        # smallest gain over all subsets of each mask
        floor = gain.copy()
        for i in range(m):
            has = (masks >> i & 1).astype(bool)
            floor = np.where(has, np.minimum(floor, floor[masks ^ (1 << i)]), floor)
        bad = without_x & (gain > floor + TOL)
        checked += int(without_x.sum())
        if bad.any():
            T = int(np.argmax(bad))
            S = next(s for s in _submasks_ascending(T) if gain[s] < gain[T] - TOL)
            witness = {"S": _members(S, m), "T": _members(T, m), "x": x,
                       "gain_S": float(gain[S]), "gain_T": float(gain[T])}
            break

    general, _, pairs = _nemhauser(F, m)
    checks = {"diminishing_returns": witness is None, "nemhauser_general": general is None}
    passed = all(checks.values())
    if witness is None and general is not None:
        witness = general
    return PropertyReport("submodular", passed, True, checked + pairs, witness, checks=checks)


def check_monotone(spec, ground: Optional[GroundSet] = None, *, limit: int = EXHAUSTIVE_LIMIT,
                   samples: int = 20000, seed: int = 0) -> PropertyReport:
    """Direct S ⊆ T comparisons plus the monotone Nemhauser inequality."""
    m = _ground_size(spec, ground)
    if m > limit:
        return _sample_monotone(spec, m, samples, seed)

    F = _value_table(spec, m)
    N = 1 << m
    masks = np.arange(N)
    # largest value over all subsets of each mask
    ceiling = F.copy()
    for i in range(m):
        has = (masks >> i & 1).astype(bool)
        ceiling = np.where(has, np.maximum(ceiling, ceiling[masks ^ (1 << i)]), ceiling)
    bad = F < ceiling - TOL
    witness = None
    if bad.any():
        T = int(np.argmax(bad))
        S = next(s for s in _submasks_ascending(T) if F[s] > F[T] + TOL)
        witness = {"S": _members(S, m), "T": _members(T, m), "f_S": float(F[S]), "f_T": float(F[T])}

    _, ineq, pairs = _nemhauser(F, m)
    checks = {"subset_order": witness is None, "nemhauser_monotone": ineq is None}
    if witness is None and ineq is not None:
        witness = ineq
    return PropertyReport("monotone", all(checks.values()), True, N + pairs, witness, checks=checks)


def _random_chain(rng: np.random.Generator, m: int) -> tuple[ItemSet, ItemSet, int]:
    order = rng.permutation(m)
    t = int(rng.integers(0, m))
    s = int(rng.integers(0, t + 1))
    return tuple(sorted(order[:s])), tuple(sorted(order[:t])), int(order[t])


def _sample_submodular(spec, m: int, samples: int, seed: int) -> PropertyReport:
    logger.warning("m=%d exceeds the exhaustive limit; sampling %d (S, T, x) triples", m, samples)
    rng = rng_from(seed)
    for checked in range(1, samples + 1):
        S, T, x = _random_chain(rng, m)
        gain_S, gain_T = spec.marginal(x, S), spec.marginal(x, T)
        if gain_S < gain_T - TOL:
            witness = {"S": S, "T": T, "x": x, "gain_S": gain_S, "gain_T": gain_T}
            return PropertyReport("submodular", False, False, checked, witness)
    return PropertyReport("submodular", True, False, samples, confidence=1.0 - 0.99 ** samples)


def _sample_monotone(spec, m: int, samples: int, seed: int) -> PropertyReport:
    logger.warning("m=%d exceeds the exhaustive limit; sampling %d (S, T) pairs", m, samples)
    rng = rng_from(seed)
    for checked in range(1, samples + 1):
        S, T, x = _random_chain(rng, m)
        T = T + (x,)
        f_S, f_T = spec.value(S), spec.value(T)
        if f_S > f_T + TOL:
            return PropertyReport("monotone", False, False, checked, {"S": S, "T": T, "f_S": f_S, "f_T": f_T})
    return PropertyReport("monotone", True, False, samples, confidence=1.0 - 0.99 ** samples)


# === FILE SCHEMAS ===

class _Schema(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AdditiveModel(_Schema):
    family: Literal["additive"]
    weights: list[NonNegativeFloat]


class CoverageModel(_Schema):
    family: Literal["coverage"]
    universe: int = Field(ge=1)
    covers: list[list[NonNegativeInt]]
    weights: Optional[list[NonNegativeFloat]] = None


class InfluenceModel(_Schema):
    family: Literal["influence"]
    edges: list[tuple[NonNegativeInt, NonNegativeInt]] = []
    q: float = Field(0.2, ge=0.0, le=1.0)


class CutModel(_Schema):
    family: Literal["cut"]
    edges: list[tuple[NonNegativeInt, NonNegativeInt]] = []
    weights: Optional[list[NonNegativeFloat]] = None


class Example1Model(_Schema):
    family: Literal["example1"]
    n: int = Field(ge=2)
    agent: int = Field(ge=1)
    eps: tuple[float, float, float, float] = DEFAULT_EPS


ObjectiveModel = Annotated[
    Union[AdditiveModel, CoverageModel, InfluenceModel, CutModel, Example1Model],
    Field(discriminator="family"),
]
_objective_adapter = TypeAdapter(ObjectiveModel)


def objective_from_dict(data: dict[str, Any], m: int) -> ObjectiveSpec:
    """Parse one objective document and build its oracle over ``m`` items."""
    try:
        model = _objective_adapter.validate_python(data)
    except ValidationError as exc:
        raise InstanceError(f"invalid objective: {exc}") from exc

    if isinstance(model, AdditiveModel):
        spec = AdditiveObjective(model.weights)
    elif isinstance(model, CoverageModel):
        spec = CoverageObjective(model.universe, model.covers, model.weights)
    elif isinstance(model, InfluenceModel):
        spec = InfluenceObjective.from_edges(model.edges, m, model.q)
    elif isinstance(model, CutModel):
        spec = CutObjective.from_edges(model.edges, m, model.weights)
    else:
        spec = Example1Objective(model.n, model.agent, model.eps)

    if spec.m != m:
        raise InstanceError(f"'{model.family}' objective describes {spec.m} items, instance has m={m}")
    return spec
