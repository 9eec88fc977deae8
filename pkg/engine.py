# engine.py
"""Agent policies and the Round-Robin protocols.

A run gives every agent a fresh :class:`ObjectiveOracle`, walks ``ceil(m/n)`` rounds in
permutation order and records one :class:`PickEvent` per turn, dummies included.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any, ClassVar, Iterable, Literal, NamedTuple, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, TypeAdapter, ValidationError

from constraints import CardinalityConstraint, ConstraintSpec
from core import (
    TOL,
    AgentSpec,
    GroundSet,
    Instance,
    InstanceError,
    ItemSet,
    PickEvent,
    ProtocolFault,
    Trace,
    TraceError,
    build_instance,
    check_seed,
    fisher_yates_permutation,
    item_set,
)
from objectives import DEFAULT_EPS, Example1Objective, ObjectiveOracle

logger = logging.getLogger(__name__)

DUMMY = "DUMMY"
NEGATIVE_MARGINAL_RULES = ("as_written", "skip_nonpositive")


class Pick(NamedTuple):
    item: int
    slot: Optional[int]
    gain: float


@dataclass
class AgentState:
    solutions: list[list[int]]
    cursor: int = 0

    @classmethod
    def empty(cls, slots: int = 1) -> "AgentState":
        return cls(solutions=[[] for _ in range(slots)])

    @property
    def S(self) -> list[int]:
        return self.solutions[0]


@dataclass(frozen=True)
class ProtocolConfig:
    ordering: Optional[tuple[int, ...]] = None
    seed: Optional[int] = None
    tie_break: Literal["lexicographic"] = "lexicographic"
    negative_marginal_rule: Literal["as_written", "skip_nonpositive"] = "as_written"

    def __post_init__(self):
        if self.ordering is not None and self.seed is not None:
            raise InstanceError("give either a fixed ordering or a seed, not both")
        if self.negative_marginal_rule not in NEGATIVE_MARGINAL_RULES:
            raise InstanceError(f"unknown negative_marginal_rule '{self.negative_marginal_rule}'")
        if self.tie_break != "lexicographic":
            raise InstanceError(f"unsupported tie_break '{self.tie_break}'")


# === POLICY STEPS ===

def greedy_step(state: AgentState, Q: Iterable[int], objective, constraint: ConstraintSpec) -> Optional[Pick]:
    """Add the feasible available item with the largest marginal (smallest id on ties)."""
    S = state.solutions[0]
    base = objective.value(S)
    best: Optional[Pick] = None
    for x in sorted(Q):
        candidate = S + [x]
        if not constraint.is_independent(candidate):
            continue
        gain = objective.value(candidate) - base
        if best is None or gain > best.gain + TOL:
            best = Pick(x, None, gain)
    if best is not None:
        S.append(best.item)
    return best


def simultaneous_greedy_step(state: AgentState, Q: Iterable[int], objective, constraint: ConstraintSpec,
                             rule: str = "as_written") -> Optional[Pick]:
    """Extend whichever of the two solutions gains the most; slot 1 then smaller id on ties."""
    best: Optional[Pick] = None
    items = sorted(Q)
    for slot, S in enumerate(state.solutions, start=1):
        base = objective.value(S)
        for x in items:
            candidate = S + [x]
            if not constraint.is_independent(candidate):
                continue
            gain = objective.value(candidate) - base
            if best is None or gain > best.gain + TOL:
                best = Pick(x, slot, gain)
    if best is None:
        return None
    if rule == "skip_nonpositive" and best.gain <= TOL:
        return None
    state.solutions[best.slot - 1].append(best.item)
    return best


# === POLICIES ===

class Policy(ABC):
    kind: ClassVar[str]
    slots: ClassVar[int] = 1

    def bind(self, agent: int, instance: Instance) -> None:
        """Validate that this policy may act for ``agent`` of ``instance``."""

    def new_state(self) -> AgentState:
        return AgentState.empty(self.slots)

    @abstractmethod
    def step(self, state: AgentState, available: Sequence[int], objective: ObjectiveOracle,
             constraint: ConstraintSpec, config: ProtocolConfig) -> Optional[Pick]:
        ...

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class GreedyPolicy(Policy):
    kind = "greedy"

    def step(self, state, available, objective, constraint, config):
        return greedy_step(state, available, objective, constraint)


class SimultaneousGreedyPolicy(Policy):
    kind = "simultaneous_greedy"
    slots = 2

    def step(self, state, available, objective, constraint, config):
        return simultaneous_greedy_step(state, available, objective, constraint, config.negative_marginal_rule)


class ScriptedPolicy(Policy):
    """Plays a fixed item list in order, then dummies. Illegal entries fault the run."""

    kind = "scripted"

    def __init__(self, order: Sequence[int]):
        self.order = tuple(int(x) for x in order)
        if len(set(self.order)) != len(self.order):
            raise InstanceError(f"scripted order repeats an item: {self.order}")

    def bind(self, agent, instance):
        bad = [x for x in self.order if not 0 <= x < instance.m]
        if bad:
            raise InstanceError(f"scripted order for agent {agent} names unknown items {bad}")

    def step(self, state, available, objective, constraint, config):
        if state.cursor >= len(self.order):
            return None
        x = self.order[state.cursor]
        state.cursor += 1
        S = state.solutions[0]
        gain = objective.value(S + [x]) - objective.value(S)
        S.append(x)
        return Pick(x, None, gain)

    def __repr__(self) -> str:
        return f"ScriptedPolicy({list(self.order)})"


class Example1StrategicPolicy(GreedyPolicy):
    """Agent 1's deviation on the Example-1 instance: open with g_n, then play greedily."""

    kind = "example1_strategic"

    def __init__(self, n: Optional[int] = None):
        self.n = n

    def bind(self, agent, instance):
        spec = instance.agents[agent].objective
        if agent != 0 or not isinstance(spec, Example1Objective) or spec.agent_index != 1:
            raise InstanceError("example1_strategic only plays agent 1 of an Example-1 instance")
        if self.n is not None and spec.n != self.n:
            raise InstanceError(f"policy built for n={self.n}, instance has n={spec.n}")

    def step(self, state, available, objective, constraint, config):
        if state.cursor == 0:
            state.cursor = 1
            opening = (self.n or objective.spec.n) - 1
            S = state.solutions[0]
            if opening in available and constraint.is_independent(S + [opening]):
                gain = objective.value(S + [opening]) - objective.value(S)
                S.append(opening)
                return Pick(opening, None, gain)
        return greedy_step(state, available, objective, constraint)

    def __repr__(self) -> str:
        return f"Example1StrategicPolicy(n={self.n})"


def example1_strategic_policy(n: int) -> Example1StrategicPolicy:
    if n < 2:
        raise InstanceError(f"the Example-1 construction needs n >= 2, got {n}")
    return Example1StrategicPolicy(n)


# === POLICY SCHEMAS ===

class _Schema(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GreedyModel(_Schema):
    kind: Literal["greedy"]


class SimultaneousGreedyModel(_Schema):
    kind: Literal["simultaneous_greedy"]


class ScriptedModel(_Schema):
    kind: Literal["scripted"]
    order: list[NonNegativeInt]


class Example1StrategicModel(_Schema):
    kind: Literal["example1_strategic"]
    n: Optional[int] = Field(None, ge=2)


PolicyModel = Annotated[
    Union[GreedyModel, SimultaneousGreedyModel, ScriptedModel, Example1StrategicModel],
    Field(discriminator="kind"),
]
_policy_adapter = TypeAdapter(PolicyModel)


def policy_from_dict(data: dict[str, Any] | str) -> Policy:
    if isinstance(data, str):
        data = {"kind": data}
    try:
        model = _policy_adapter.validate_python(data)
    except ValidationError as exc:
        raise InstanceError(f"invalid policy: {exc}") from exc
    if isinstance(model, GreedyModel):
        return GreedyPolicy()
    if isinstance(model, SimultaneousGreedyModel):
        return SimultaneousGreedyPolicy()
    if isinstance(model, ScriptedModel):
        return ScriptedPolicy(model.order)
    return Example1StrategicPolicy(model.n)


def default_policies(instance: Instance) -> list[Policy]:
    """Greedy for monotone agents, simultaneous greedy otherwise."""
    return [GreedyPolicy() if agent.monotone else SimultaneousGreedyPolicy() for agent in instance.agents]


# === PROTOCOLS ===

def _ordering(config: ProtocolConfig, n: int) -> tuple[tuple[int, ...], str]:
    if config.seed is not None:
        return fisher_yates_permutation(n, config.seed), "randomized"
    if config.ordering is None:
        return tuple(range(n)), "fixed"
    if sorted(config.ordering) != list(range(n)):
        raise InstanceError(f"ordering {config.ordering} is not a permutation of [{n}]")
    return tuple(config.ordering), "fixed"


def _accept(pick: Pick, agent: int, round_: int, available: set[int], state: AgentState,
            policy: Policy, constraint: ConstraintSpec) -> None:
    if pick.item not in available:
        raise ProtocolFault(agent, pick.item, round_, "item is not available")
    if (pick.slot is None) != (policy.slots == 1) or (pick.slot is not None and not 1 <= pick.slot <= policy.slots):
        raise ProtocolFault(agent, pick.item, round_, f"invalid solution slot {pick.slot}")
    solution = state.solutions[(pick.slot or 1) - 1]
    if not solution or solution[-1] != pick.item:
        raise ProtocolFault(agent, pick.item, round_, "policy state does not hold the returned item")
    if not constraint.is_independent(solution):
        raise ProtocolFault(agent, pick.item, round_, "item makes the agent's set infeasible")


def run_round_robin(instance: Instance, policies: Sequence[Policy],
                    config: Optional[ProtocolConfig] = None) -> Trace:
    """Run the Round-Robin protocol: ceil(m/n) rounds, each agent acting once per round."""
    config = config or ProtocolConfig()
    n, m = instance.n, instance.m
    if len(policies) != n:
        raise InstanceError(f"{len(policies)} policies for {n} agents")
    permutation, protocol = _ordering(config, n)

    oracles = [ObjectiveOracle(agent.objective) for agent in instance.agents]
    states = []
    for agent, policy in enumerate(policies):
        policy.bind(agent, instance)
        states.append(policy.new_state())

    available = set(range(m))
    rounds = -(-m // n)
    events: list[PickEvent] = []
    logger.info("Round-Robin on '%s': n=%d, m=%d, %d rounds, permutation %s",
                instance.name, n, m, rounds, permutation)
    for round_ in range(1, rounds + 1):
        for turn, agent in enumerate(permutation, start=1):
            constraint = instance.agents[agent].constraint
            pick = policies[agent].step(states[agent], sorted(available), oracles[agent], constraint, config)
            if pick is None:
                events.append(PickEvent(round_, turn, agent, None))
                logger.debug("round %d turn %d: agent %d passes", round_, turn, agent)
                continue
            _accept(pick, agent, round_, available, states[agent], policies[agent], constraint)
            available.discard(pick.item)
            events.append(PickEvent(round_, turn, agent, pick.item, pick.slot, pick.gain))
            logger.debug("round %d turn %d: agent %d takes %d (slot %s, gain %.6g)",
                         round_, turn, agent, pick.item, pick.slot, pick.gain)

    taken = sum(not e.is_dummy for e in events)
    logger.info("Round-Robin on '%s' done: %d of %d items allocated", instance.name, taken, m)
    return Trace(
        instance=instance,
        permutation=permutation,
        events=tuple(events),
        policy_kinds=tuple(policy.kind for policy in policies),
        slots=tuple(policy.slots for policy in policies),
        protocol=protocol,
        seed=config.seed,
        queries=tuple(oracle.queries for oracle in oracles),
    )


def run_randomized_round_robin(instance: Instance, policies: Sequence[Policy], seed: int,
                               negative_marginal_rule: str = "as_written") -> Trace:
    """Round-Robin with the agent order drawn uniformly from the seed."""
    config = ProtocolConfig(seed=check_seed(seed), negative_marginal_rule=negative_marginal_rule)
    return run_round_robin(instance, policies, config)


def single_agent_greedy(objective, constraint: ConstraintSpec,
                        over: Optional[Iterable[int]] = None) -> tuple[float, ItemSet]:
    """Greedy with the whole ground set to itself; the experiment baseline."""
    available = set(range(objective.m) if over is None else over)
    state = AgentState.empty()
    while True:
        pick = greedy_step(state, available, objective, constraint)
        if pick is None:
            break
        available.discard(pick.item)
    return objective.value(state.S), item_set(state.S)


def example1_instance(n: int, eps: tuple[float, float, float, float] = DEFAULT_EPS) -> Instance:
    """n agents over m = n^2 + 1 items, each limited only by cardinality m."""
    m = n * n + 1
    agents = [AgentSpec(Example1Objective(n, i, eps), CardinalityConstraint(m, m)) for i in range(1, n + 1)]
    return build_instance(GroundSet(m), agents, name=f"example1-n{n}")


# === TRACE FILES ===

def trace_frame(trace: Trace) -> pd.DataFrame:
    rows = [
        {
            "round": e.round,
            "turn": e.turn,
            "agent": e.agent,
            "item": DUMMY if e.is_dummy else str(e.item),
            "slot": "" if e.slot is None else str(e.slot),
            "gain": e.gain,
        }
        for e in trace.events
    ]
    return pd.DataFrame(rows, columns=["round", "turn", "agent", "item", "slot", "gain"])


def write_trace(trace: Trace, path: str | Path) -> None:
    """One line per event: ``round,turn,agent,item|DUMMY,slot``."""
    frame = trace_frame(trace)
    frame.to_csv(path, columns=["round", "turn", "agent", "item", "slot"], header=False, index=False,
                 lineterminator="\n")
    logger.info("Wrote %d trace events to %s", len(frame), path)


def read_trace(path: str | Path, instance: Instance, policies: Optional[Sequence[Policy]] = None) -> Trace:
    """Load a trace written by :func:`write_trace`; the permutation is read off round 1.

    ``policies`` are the ones the run was played with (default: :func:`default_policies`).
    They fix each agent's policy kind and slot count, so agents whose second slot stayed
    empty keep it.
    """
    policies = default_policies(instance) if policies is None else list(policies)
    if len(policies) != instance.n:
        raise InstanceError(f"{len(policies)} policies for {instance.n} agents")
    frame = pd.read_csv(path, header=None, names=["round", "turn", "agent", "item", "slot"],
                        dtype=str, keep_default_na=False)
    try:
        events = tuple(
            PickEvent(
                round=int(row.round),
                turn=int(row.turn),
                agent=int(row.agent),
                item=None if row.item == DUMMY else int(row.item),
                slot=int(row.slot) if row.slot else None,
            )
            for row in frame.itertuples(index=False)
        )
    except ValueError as exc:
        raise TraceError(f"{path}: malformed trace line ({exc})") from exc
    for e in events:
        if not 0 <= e.agent < instance.n:
            raise TraceError(f"{path}: round {e.round} names unknown agent {e.agent}")
        slots = policies[e.agent].slots
        if e.item is not None and (e.slot is None) != (slots == 1):
            raise TraceError(f"{path}: round {e.round} slot {e.slot!r} does not fit a {slots}-slot policy")
        if e.slot is not None and not 1 <= e.slot <= slots:
            raise TraceError(f"{path}: round {e.round} slot {e.slot} exceeds {slots} slots")
    permutation = tuple(e.agent for e in events if e.round == 1)
    return Trace(instance=instance, permutation=permutation, events=events,
                 policy_kinds=tuple(policy.kind for policy in policies),
                 slots=tuple(policy.slots for policy in policies))
