# constraints.py
"""Independence oracles (cardinality, partition matroid, graphic matroid, matroid
intersection), restriction to a subset, and exhaustive helpers for small ground sets."""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from fractions import Fraction
from typing import Annotated, Any, ClassVar, Iterable, Iterator, Literal, Optional, Sequence, Union

import numpy as np
from networkx.utils import UnionFind
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, TypeAdapter, ValidationError

from core import GroundSet, InstanceError, ItemSet, TooLargeError, item_set

logger = logging.getLogger(__name__)

P_SYSTEM_LIMIT = 14
ENUMERATION_LIMIT = 24


class ConstraintSpec(ABC):
    family: ClassVar[str]
    is_matroid: ClassVar[bool] = True

    def __init__(self, m: int, declared_p: int = 1):
        if m < 1:
            raise InstanceError(f"constraint needs m >= 1, got {m}")
        if declared_p < 1:
            raise InstanceError(f"declared p must be >= 1, got {declared_p}")
        self._m = m
        self._declared_p = declared_p

    @property
    def m(self) -> int:
        return self._m

    @property
    def declared_p(self) -> int:
        return self._declared_p

    def is_independent(self, S: Iterable[int]) -> bool:
        return self._independent(item_set(S, self._m))

    @abstractmethod
    def _independent(self, items: Sequence[int]) -> bool:
        ...

    def __repr__(self) -> str:
        return f"{type(self).__name__}(m={self._m}, p={self._declared_p})"


class CardinalityConstraint(ConstraintSpec):
    family = "cardinality"

    def __init__(self, m: int, k: int):
        super().__init__(m)
        if k < 0:
            raise InstanceError(f"cardinality bound must be >= 0, got {k}")
        self.k = k

    def _independent(self, items: Sequence[int]) -> bool:
        return len(items) <= self.k


class PartitionMatroid(ConstraintSpec):
    family = "partition_matroid"

    def __init__(self, m: int, parts: Sequence[Iterable[int]], caps: Sequence[int]):
        super().__init__(m)
        parts = [list(part) for part in parts]
        if len(parts) != len(caps):
            raise InstanceError(f"{len(parts)} parts but {len(caps)} capacities")
        if any(c < 0 for c in caps):
            raise InstanceError("part capacities must be >= 0")
        covered = sorted(x for part in parts for x in part)
        if covered != list(range(m)):
            raise InstanceError(f"parts must cover [0, {m}) disjointly")
        self.parts = [tuple(sorted(part)) for part in parts]
        self.caps = tuple(int(c) for c in caps)
        self.part_of = np.empty(m, dtype=np.int64)
        for index, part in enumerate(self.parts):
            self.part_of[list(part)] = index

    def _independent(self, items: Sequence[int]) -> bool:
        used = [0] * len(self.caps)
        for x in items:
            part = self.part_of[x]
            used[part] += 1
            if used[part] > self.caps[part]:
                return False
        return True


class GraphicMatroid(ConstraintSpec):
    """Items are the edges of a multigraph; a set is independent iff it is a forest."""

    family = "graphic_matroid"

    def __init__(self, edges: Sequence[tuple[int, int]]):
        super().__init__(len(edges))
        self.edges = [(int(u), int(v)) for u, v in edges]
        if any(u < 0 or v < 0 for u, v in self.edges):
            raise InstanceError("graphic matroid endpoints must be non-negative")

    def _independent(self, items: Sequence[int]) -> bool:
        forest = UnionFind()
        for x in items:
            u, v = self.edges[x]
            if forest[u] == forest[v]:
                return False
            forest.union(u, v)
        return True


class MatroidIntersection(ConstraintSpec):
    """Conjunction of k >= 2 member matroids; a k-system."""

    family = "intersection"
    is_matroid = False

    def __init__(self, members: Sequence[ConstraintSpec]):
        members = list(members)
        if len(members) < 2:
            raise InstanceError(f"an intersection needs at least 2 matroids, got {len(members)}")
        if not all(member.is_matroid for member in members):
            raise InstanceError("intersection members must be matroids")
        sizes = {member.m for member in members}
        if len(sizes) != 1:
            raise InstanceError(f"intersection members disagree on m: {sorted(sizes)}")
        super().__init__(sizes.pop(), declared_p=len(members))
        self.members = members

    def _independent(self, items: Sequence[int]) -> bool:
        return all(member._independent(items) for member in self.members)


class RestrictedConstraint(ConstraintSpec):
    """I|A: the sets of I that lie inside A."""

    family = "restriction"

    def __init__(self, base: ConstraintSpec, allowed: Iterable[int]):
        super().__init__(base.m, base.declared_p)
        self.base = base
        self.allowed = frozenset(item_set(allowed, base.m))
        self.is_matroid = base.is_matroid

    def _independent(self, items: Sequence[int]) -> bool:
        return all(x in self.allowed for x in items) and self.base._independent(items)


def is_independent(spec: ConstraintSpec, S: Iterable[int]) -> bool:
    return spec.is_independent(S)


def restrict(spec: ConstraintSpec, A: Iterable[int]) -> RestrictedConstraint:
    return RestrictedConstraint(spec, A)


def is_cardinality(spec: ConstraintSpec) -> bool:
    """True for a cardinality constraint, also when seen through restrictions."""
    while isinstance(spec, RestrictedConstraint):
        spec = spec.base
    return isinstance(spec, CardinalityConstraint)


def enumerate_independent_sets(spec: ConstraintSpec, over: Iterable[int]) -> Iterator[ItemSet]:
    """Every independent subset of ``over`` exactly once, in lexicographic DFS order.

    Supersets of a dependent set are never visited.
    """
    items = sorted(set(int(x) for x in over))
    if len(items) > ENUMERATION_LIMIT:
        raise TooLargeError(f"enumeration over {len(items)} items exceeds the cap of {ENUMERATION_LIMIT}")
    current: list[int] = []

    def extend(start: int) -> Iterator[ItemSet]:
        yield tuple(current)
        for index in range(start, len(items)):
            current.append(items[index])
            if spec._independent(current):
                yield from extend(index + 1)
            current.pop()

    return extend(0)


def _submasks(mask: int, m: int) -> np.ndarray:
    subs = np.zeros(1, dtype=np.int64)
    for i in range(m):
        if mask >> i & 1:
            subs = np.concatenate((subs, subs | (1 << i)))
    return subs


def verify_p_system(spec: ConstraintSpec, ground: Optional[GroundSet] = None) -> Fraction:
    """Exact max over S of ur(S)/lr(S), the largest/smallest basis sizes inside S.

    An independent X is a basis of exactly the sets X ∪ Y with Y avoiding every item
    that could extend X, so each X pushes its size to all of those sets at once.
    Raises InstanceError when the measured ratio exceeds ``declared_p``.
    """
    m = spec.m if ground is None else ground.m
    if m > P_SYSTEM_LIMIT:
        raise TooLargeError(f"p-system verification needs m <= {P_SYSTEM_LIMIT}, got {m}")
    N = 1 << m
    masks = np.arange(N, dtype=np.int64)
    independent = np.fromiter(
        (spec.is_independent([i for i in range(m) if mask >> i & 1]) for mask in range(N)), dtype=bool, count=N)
    sizes = np.array([bin(mask).count("1") for mask in range(N)], dtype=np.int64)

    extendable = np.zeros(N, dtype=np.int64)
    for y in range(m):
        bit = 1 << y
        ok = independent & ((masks & bit) == 0) & independent[masks | bit]
        extendable |= np.where(ok, bit, 0)

    full = N - 1
    upper = np.zeros(N, dtype=np.int64)
    lower = np.full(N, m + 1, dtype=np.int64)
    for X in np.flatnonzero(independent):
        free = full & ~(int(X) | int(extendable[X]))
        targets = int(X) | _submasks(free, m)
        np.maximum.at(upper, targets, sizes[X])
        np.minimum.at(lower, targets, sizes[X])

    valid = lower > 0
    ratios = {Fraction(int(u), int(l)) for u, l in zip(upper[valid], lower[valid])}
    measured = max(ratios, default=Fraction(1))
    measured = max(measured, Fraction(1))
    if measured > spec.declared_p:
        raise InstanceError(f"measured p = {measured} exceeds declared p = {spec.declared_p}")
    logger.debug("verified %r: measured p = %s", spec, measured)
    return measured


# === FILE SCHEMAS ===

class _Schema(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CardinalityModel(_Schema):
    family: Literal["cardinality"]
    k: NonNegativeInt


class PartitionModel(_Schema):
    family: Literal["partition_matroid"]
    parts: list[list[NonNegativeInt]]
    caps: list[NonNegativeInt]


class GraphicModel(_Schema):
    family: Literal["graphic_matroid"]
    edges: list[tuple[NonNegativeInt, NonNegativeInt]]


MatroidModel = Annotated[Union[CardinalityModel, PartitionModel, GraphicModel], Field(discriminator="family")]


class IntersectionModel(_Schema):
    family: Literal["intersection"]
    members: list[MatroidModel] = Field(min_length=2)


ConstraintModel = Annotated[
    Union[CardinalityModel, PartitionModel, GraphicModel, IntersectionModel],
    Field(discriminator="family"),
]
_constraint_adapter = TypeAdapter(ConstraintModel)


def _build(model, m: int) -> ConstraintSpec:
    if isinstance(model, CardinalityModel):
        return CardinalityConstraint(m, model.k)
    if isinstance(model, PartitionModel):
        return PartitionMatroid(m, model.parts, model.caps)
    if isinstance(model, GraphicModel):
        return GraphicMatroid(model.edges)
    return MatroidIntersection([_build(member, m) for member in model.members])


def constraint_from_dict(data: dict[str, Any], m: int) -> ConstraintSpec:
    try:
        model = _constraint_adapter.validate_python(data)
    except ValidationError as exc:
        raise InstanceError(f"invalid constraint: {exc}") from exc
    spec = _build(model, m)
    if spec.m != m:
        raise InstanceError(f"'{model.family}' constraint describes {spec.m} items, instance has m={m}")
    return spec
