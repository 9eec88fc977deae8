# core.py
"""Problem statement, run artifacts and seed plumbing shared by every other module.

Items are dense integer ids in ``[0, m)`` and item sets are sorted tuples of ids, so a
set has one canonical, hashable form. Objectives and constraints are duck-typed here
(anything with ``value``/``is_independent``) to keep this module import-free of the
oracle families.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

logger = logging.getLogger(__name__)

TOL = 1e-9
SEED_BITS = 64

ItemId = int
ItemSet = tuple[int, ...]


# === ERRORS ===

class RoundRobinError(Exception):
    """Base class for every error raised by this package."""


class InstanceError(RoundRobinError, ValueError):
    """Malformed instance, objective, constraint or parameter."""


class TraceError(RoundRobinError):
    """A trace violates its structural invariants."""


class ProtocolFault(RoundRobinError):
    """A policy returned an item the protocol cannot accept."""

    def __init__(self, agent: int, item: Optional[int], round_: int, reason: str):
        self.agent = agent
        self.item = item
        self.round = round_
        self.reason = reason
        super().__init__(f"agent {agent} returned item {item} in round {round_}: {reason}")


class TooLargeError(RoundRobinError):
    """An exhaustive computation was requested beyond its size cap."""


class BoundMismatchError(RoundRobinError):
    """A theorem check was requested for a run it does not cover."""


# === ITEM SETS ===

def item_set(items: Iterable[int], m: Optional[int] = None) -> ItemSet:
    """Canonical form of a collection of item ids: sorted, duplicate-free, in range."""
    members = tuple(sorted(int(x) for x in items))
    if len(set(members)) != len(members):
        raise InstanceError(f"duplicate item ids in {members}")
    if members and members[0] < 0:
        raise InstanceError(f"negative item id {members[0]}")
    if m is not None and members and members[-1] >= m:
        raise InstanceError(f"item id {members[-1]} out of range for m={m}")
    return members


@dataclass(frozen=True)
class GroundSet:
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise InstanceError(f"ground set needs m >= 1, got {self.m}")

    @property
    def items(self) -> ItemSet:
        return tuple(range(self.m))


# === PROBLEM STATEMENT ===

@dataclass(frozen=True)
class AgentSpec:
    """An agent's objective f_i and constraint I_i.

    ``monotone`` defaults to the objective family's known monotonicity; an explicit
    value that contradicts it is rejected by :func:`build_instance`.
    """

    objective: Any
    constraint: Any
    monotone: Optional[bool] = None

    def __post_init__(self):
        if self.monotone is None:
            object.__setattr__(self, "monotone", bool(self.objective.monotone))


@dataclass(frozen=True)
class Instance:
    ground: GroundSet
    agents: tuple[AgentSpec, ...]
    name: str = ""

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def m(self) -> int:
        return self.ground.m


def build_instance(ground: GroundSet, agents: Sequence[AgentSpec], name: str = "") -> Instance:
    """Validate agent specs against the ground set and freeze them into an Instance."""
    if not agents:
        raise InstanceError("an instance needs at least one agent")
    for index, agent in enumerate(agents):
        if agent.objective.m != ground.m:
            raise InstanceError(
                f"agent {index}: objective is defined over m={agent.objective.m}, ground set has m={ground.m}")
        if agent.constraint.m != ground.m:
            raise InstanceError(
                f"agent {index}: constraint is defined over m={agent.constraint.m}, ground set has m={ground.m}")
        if agent.monotone != agent.objective.monotone:
            raise InstanceError(
                f"agent {index}: monotone={agent.monotone} contradicts the "
                f"'{agent.objective.family}' family")
    return Instance(ground=ground, agents=tuple(agents), name=name)


# === RUN ARTIFACTS ===

@dataclass(frozen=True)
class PickEvent:
    round: int
    turn: int
    agent: int
    item: Optional[int]
    slot: Optional[int] = None
    gain: Optional[float] = None

    @property
    def is_dummy(self) -> bool:
        return self.item is None


@dataclass(frozen=True)
class Trace:
    instance: Instance
    permutation: tuple[int, ...]
    events: tuple[PickEvent, ...]
    policy_kinds: tuple[str, ...]
    slots: tuple[int, ...]
    protocol: str = "fixed"
    seed: Optional[int] = None
    queries: tuple[int, ...] = ()

    @property
    def rounds(self) -> int:
        return -(-self.instance.m // self.instance.n)

    def position(self, agent: int) -> int:
        """0-indexed turn position of ``agent`` within every round."""
        return self.permutation.index(agent)


@dataclass(frozen=True)
class Bundle:
    """One agent's share. ``solutions`` has one set, or two for simultaneous greedy."""

    solutions: tuple[ItemSet, ...]
    best: int = 0
    order: tuple[int, ...] = ()
    turns: int = 0

    @property
    def chosen(self) -> ItemSet:
        return self.solutions[self.best]

    @property
    def items(self) -> ItemSet:
        return tuple(sorted(x for solution in self.solutions for x in solution))

    @property
    def first_pick(self) -> Optional[int]:
        return self.order[0] if self.order else None


@dataclass(frozen=True)
class Allocation:
    bundles: tuple[Bundle, ...]
    permutation: tuple[int, ...]
    rounds: int

    def position(self, agent: int) -> int:
        return self.permutation.index(agent)

    @property
    def allocated(self) -> frozenset[int]:
        return frozenset(x for bundle in self.bundles for x in bundle.items)


def validate_trace(trace: Trace) -> None:
    """Check round structure and item uniqueness; raise TraceError on the first problem."""
    n = trace.instance.n
    if sorted(trace.permutation) != list(range(n)):
        raise TraceError(f"permutation {trace.permutation} is not a permutation of [{n}]")
    expected = trace.rounds * n
    if len(trace.events) != expected:
        raise TraceError(f"expected {expected} events ({trace.rounds} rounds x {n} turns), got {len(trace.events)}")
    seen: set[int] = set()
    for index, event in enumerate(trace.events):
        round_, turn = divmod(index, n)
        if event.round != round_ + 1 or event.agent != trace.permutation[turn]:
            raise TraceError(f"event {index} out of order: {event}")
        if event.is_dummy:
            continue
        if not 0 <= event.item < trace.instance.m:
            raise TraceError(f"event {index} names item {event.item} outside the ground set")
        if event.item in seen:
            raise TraceError(f"item {event.item} picked twice")
        seen.add(event.item)


def allocation_of(trace: Trace) -> Allocation:
    """Rebuild every agent's final set(s) from the trace events."""
    validate_trace(trace)
    instance = trace.instance
    solutions = [[[] for _ in range(trace.slots[agent])] for agent in range(instance.n)]
    order: list[list[int]] = [[] for _ in range(instance.n)]
    turns = [0] * instance.n
    for event in trace.events:
        if event.is_dummy:
            continue
        slot = (event.slot or 1) - 1
        if slot >= trace.slots[event.agent]:
            raise TraceError(f"agent {event.agent} has no solution slot {event.slot}")
        solutions[event.agent][slot].append(event.item)
        order[event.agent].append(event.item)
        turns[event.agent] += 1

    bundles = []
    for agent, spec in enumerate(instance.agents):
        sets = tuple(item_set(s) for s in solutions[agent])
        for s in sets:
            if not spec.constraint.is_independent(s):
                raise TraceError(f"agent {agent} holds a dependent set {s}")
        values = [spec.objective.value(s) for s in sets]
        # ties go to slot 1
        best = 1 if len(sets) == 2 and values[1] > values[0] + TOL else 0
        bundles.append(Bundle(solutions=sets, best=best, order=tuple(order[agent]), turns=turns[agent]))
    return Allocation(bundles=tuple(bundles), permutation=trace.permutation, rounds=trace.rounds)


# === RANDOMNESS ===

def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2 ** SEED_BITS:
        raise InstanceError(f"seed must be an unsigned {SEED_BITS}-bit integer, got {seed}")
    return seed


def rng_from(seed: int) -> np.random.Generator:
    """The one generator used everywhere: numpy's PCG64 seeded with the 64-bit seed."""
    return np.random.Generator(np.random.PCG64(check_seed(seed)))


def spawn_seed(seed: int, *key: int) -> int:
    """Derive an independent 64-bit seed for ``key`` from ``seed`` (order-independent)."""
    sequence = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def fisher_yates_permutation(n: int, seed: int) -> tuple[int, ...]:
    """Uniform permutation of [n] by a descending Fisher-Yates shuffle driven by PCG64."""
    if n < 1:
        raise InstanceError(f"permutation size must be >= 1, got {n}")
    rng = rng_from(seed)
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return tuple(perm)


# === INSTANCE FILES ===

class AgentModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    objective: dict[str, Any]
    constraint: dict[str, Any]
    monotone: Optional[bool] = None


class InstanceModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    m: int = Field(ge=1)
    name: str = ""
    agents: list[AgentModel] = Field(min_length=1)


def instance_from_dict(data: dict[str, Any]) -> Instance:
    from constraints import constraint_from_dict
    from objectives import objective_from_dict

    try:
        model = InstanceModel.model_validate(data)
    except ValidationError as exc:
        raise InstanceError(f"invalid instance document: {exc}") from exc
    agents = [
        AgentSpec(
            objective=objective_from_dict(agent.objective, model.m),
            constraint=constraint_from_dict(agent.constraint, model.m),
            monotone=agent.monotone,
        )
        for agent in model.agents
    ]
    return build_instance(GroundSet(model.m), agents, name=model.name)


def load_instance(path: str | Path) -> Instance:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: not valid JSON ({exc})") from exc
    instance = instance_from_dict(data)
    if not instance.name:
        instance = Instance(ground=instance.ground, agents=instance.agents, name=path.stem)
    logger.info("Loaded instance '%s': n=%d agents, m=%d items", instance.name, instance.n, instance.m)
    return instance
