# analysis.py
"""Brute-force benchmarks, approximation-bound checks, fairness certifiers and fleets.

Everything here recomputes from scratch what the engine claims; nothing trusts the
policies' own bookkeeping.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from constraints import (
    CardinalityConstraint,
    ConstraintSpec,
    MatroidIntersection,
    PartitionMatroid,
    enumerate_independent_sets,
    is_cardinality,
    restrict,
)
from core import (
    TOL,
    AgentSpec,
    Allocation,
    BoundMismatchError,
    GroundSet,
    Instance,
    InstanceError,
    ItemSet,
    TooLargeError,
    Trace,
    allocation_of,
    build_instance,
    fisher_yates_permutation,
    rng_from,
    spawn_seed,
)
from engine import Policy, ProtocolConfig, default_policies, run_round_robin
from objectives import AdditiveObjective, CoverageObjective, CutObjective

logger = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 22
EXACT_EXANTE_LIMIT = 6
THEOREMS = ("T1", "T2", "T3", "T4", "T5", "T6", "T7")
INF = math.inf


# === BENCHMARKS ===

def brute_force_opt(objective, constraint: ConstraintSpec, over: Iterable[int]) -> tuple[float, ItemSet]:
    """Exact optimum over the independent subsets of ``over``; lexicographically smallest witness."""
    over = sorted(set(over))
    if len(over) > BRUTE_FORCE_LIMIT:
        raise TooLargeError(f"brute force over {len(over)} items exceeds the cap of {BRUTE_FORCE_LIMIT}")
    best_value, best_set = 0.0, ()
    for S in enumerate_independent_sets(constraint, over):
        f = objective.value(S)
        if f > best_value + TOL:
            best_value, best_set = f, S
    return best_value, best_set


def removed_before_first_turn(trace: Trace, agent: int) -> set[int]:
    """Items other agents took strictly before ``agent``'s first turn."""
    taken = set()
    for event in trace.events:
        if event.agent == agent:
            break
        if not event.is_dummy:
            taken.add(event.item)
    return taken


def opt_minus_from_trace(trace: Trace, agent: int) -> tuple[float, ItemSet]:
    spec = trace.instance.agents[agent]
    lost = removed_before_first_turn(trace, agent)
    remainder = [x for x in range(trace.instance.m) if x not in lost]
    return brute_force_opt(spec.objective, spec.constraint, remainder)


def pessimistic_opt_minus(objective, constraint: ConstraintSpec, lost: int) -> tuple[float, ItemSet]:
    """Worst case over every way of losing ``lost`` items before the first turn."""
    m = objective.m
    if lost < 0 or lost > m:
        raise InstanceError(f"cannot lose {lost} of {m} items")
    worst: Optional[tuple[float, ItemSet]] = None
    for gone in itertools.combinations(range(m), lost):
        remainder = [x for x in range(m) if x not in gone]
        candidate = brute_force_opt(objective, constraint, remainder)
        if worst is None or candidate[0] < worst[0] - TOL:
            worst = candidate
    return worst


# === THEOREM BOUNDS ===

@dataclass(frozen=True)
class BoundSpec:
    theorem: str
    n: int
    p: int = 1
    beta: Optional[Fraction] = None

    @property
    def factor(self) -> Fraction:
        n, p = self.n, self.p
        if self.theorem == "T1":
            return Fraction(1, n + p)
        if self.theorem == "T2":
            return Fraction(1, n)
        if self.theorem == "T3":
            return Fraction(1, p + 2)
        if self.theorem == "T4":
            return Fraction(1, 2)
        if self.theorem == "T5":
            return Fraction(1, 4 * n + 4 * p + 2)
        if self.theorem == "T6":
            return Fraction(1, 4 * n + 2)
        if self.theorem == "T7":
            if self.beta is None:
                raise InstanceError("T7 needs beta")
            return 1 / (self.beta * n)
        raise InstanceError(f"unknown theorem '{self.theorem}'")


def exante_beta(monotone: bool, cardinality: bool, n: int, p: int) -> Fraction:
    if monotone:
        return Fraction(2) if cardinality else 2 + Fraction(p, n)
    return 5 + Fraction(2, n) if cardinality else 5 + Fraction(4 * p + 2, n)


def bound_for(theorem: str, instance: Instance, agent: int) -> BoundSpec:
    """The BoundSpec that ``theorem`` gives ``agent`` of ``instance``."""
    if theorem not in THEOREMS:
        raise InstanceError(f"unknown theorem '{theorem}'; expected one of {', '.join(THEOREMS)}")
    spec = instance.agents[agent]
    n, p = instance.n, spec.constraint.declared_p
    beta = exante_beta(spec.monotone, is_cardinality(spec.constraint), n, p) if theorem == "T7" else None
    return BoundSpec(theorem, n, p, beta)


_POLICY_OF = {"T1": "greedy", "T2": "greedy", "T3": "greedy", "T4": "greedy",
              "T5": "simultaneous_greedy", "T6": "simultaneous_greedy"}


def _applicability(theorem: str, trace: Trace, agent: int) -> Optional[str]:
    """None if ``theorem`` covers ``agent`` in ``trace``, else the reason it does not."""
    spec = trace.instance.agents[agent]
    if theorem == "T7":
        return "T7 is an ex-ante statement; use exante_bound_check"
    if trace.policy_kinds[agent] != _POLICY_OF[theorem]:
        return f"{theorem} covers {_POLICY_OF[theorem]} agents, agent {agent} played {trace.policy_kinds[agent]}"
    if theorem in ("T1", "T2", "T3", "T4") and not spec.monotone:
        return f"{theorem} needs a monotone objective"
    if theorem in ("T2", "T4", "T6") and not is_cardinality(spec.constraint):
        return f"{theorem} needs a cardinality constraint"
    if theorem == "T2" and trace.instance.n < 2:
        return "T2 needs n >= 2"
    return None


@dataclass(frozen=True)
class BoundCheck:
    theorem: str
    agent: int
    factor: Fraction
    achieved: float
    benchmark: float
    other: Optional[int] = None

    @property
    def bound(self) -> float:
        return float(self.factor) * self.benchmark

    @property
    def passed(self) -> bool:
        return self.achieved >= self.bound - TOL

    @property
    def margin(self) -> float:
        """achieved / bound; infinite when the bound is zero."""
        return self.achieved / self.bound if self.bound > 0 else INF


def _achieved(trace: Trace, allocation: Allocation, agent: int) -> float:
    return trace.instance.agents[agent].objective.value(allocation.bundles[agent].chosen)


def check_theorem_bound(trace: Trace, agent: int, bound: BoundSpec,
                        allocation: Optional[Allocation] = None,
                        opt_minus: Optional[float] = None) -> BoundCheck:
    """f_i(S_i) >= factor * OPT⁻_i for the per-run theorems T1, T2, T5 and T6."""
    if bound.theorem in ("T3", "T4"):
        raise BoundMismatchError(f"{bound.theorem} is a fairness statement; use check_fef1_pair")
    reason = _applicability(bound.theorem, trace, agent)
    if reason:
        raise BoundMismatchError(reason)
    if bound.n != trace.instance.n:
        raise BoundMismatchError(f"bound built for n={bound.n}, run has n={trace.instance.n}")
    allocation = allocation or allocation_of(trace)
    if opt_minus is None:
        opt_minus = opt_minus_from_trace(trace, agent)[0]
    return BoundCheck(bound.theorem, agent, bound.factor, _achieved(trace, allocation, agent), opt_minus)


# === FAIRNESS ===

@dataclass(frozen=True)
class FairnessPair:
    i: int
    j: int
    ef1: float
    fef1: float
    theorem_num: float
    theorem_den: float

    @property
    def theorem_alpha(self) -> float:
        return _ratio(self.theorem_num, self.theorem_den)

    def meets(self, factor: float) -> bool:
        return self.theorem_num >= factor * self.theorem_den - TOL


def _ratio(num: float, den: float) -> float:
    return INF if den <= TOL else num / den


def check_ef1_pair(allocation: Allocation, instance: Instance, i: int, j: int) -> float:
    """Envy-freeness up to one item with feasibility ignored."""
    A_j = allocation.bundles[j].chosen
    if i == j or not A_j:
        return INF
    f = instance.agents[i].objective
    own = f.value(allocation.bundles[i].chosen)
    return max(_ratio(own, f.value([x for x in A_j if x != g])) for g in A_j)


def check_fef1_pair(allocation: Allocation, instance: Instance, i: int, j: int) -> FairnessPair:
    """Feasible EF1 over all removable g, and the fixed-g form where j's first pick is dropped
    only when j moves before i."""
    A_j = allocation.bundles[j].chosen
    if i == j or not A_j:
        return FairnessPair(i, j, INF, INF, 0.0, 0.0)
    spec = instance.agents[i]
    own = spec.objective.value(allocation.bundles[i].chosen)

    def best_inside(items: Sequence[int]) -> float:
        return brute_force_opt(spec.objective, restrict(spec.constraint, items), items)[0]

    fef1 = max(_ratio(own, best_inside([x for x in A_j if x != g])) for g in A_j)
    if allocation.position(i) < allocation.position(j):
        compared = list(A_j)
    else:
        first = allocation.bundles[j].first_pick
        compared = [x for x in A_j if x != first]
    return FairnessPair(i, j, check_ef1_pair(allocation, instance, i, j), fef1, own, best_inside(compared))


@dataclass
class FairnessReport:
    pairs: list[FairnessPair]

    @property
    def min_ef1(self) -> float:
        return min((p.ef1 for p in self.pairs), default=INF)

    @property
    def min_fef1(self) -> float:
        return min((p.fef1 for p in self.pairs), default=INF)

    @property
    def min_theorem_alpha(self) -> float:
        return min((p.theorem_alpha for p in self.pairs), default=INF)


def fairness_report(allocation: Allocation, instance: Instance) -> FairnessReport:
    pairs = [check_fef1_pair(allocation, instance, i, j)
             for i in range(instance.n) for j in range(instance.n) if i != j]
    return FairnessReport(pairs)


# === SATURATION ===

@dataclass
class SaturationReport:
    regime: str
    passed: bool
    violations: list[tuple[int, int]] = field(default_factory=list)
    round_limited: list[int] = field(default_factory=list)


def check_corollary_saturation(allocation: Allocation, instance: Instance) -> SaturationReport:
    """No leftover item fits any agent that stopped picking of its own accord.

    Agents that took an item at every one of their turns were stopped by the round
    count, not by their constraint, and are listed in ``round_limited`` instead.
    """
    regime = "cardinality" if all(is_cardinality(a.constraint) for a in instance.agents) else "p_system"
    leftovers = sorted(set(range(instance.m)) - allocation.allocated)
    violations, round_limited = [], []
    for agent, (spec, bundle) in enumerate(zip(instance.agents, allocation.bundles)):
        if bundle.turns == allocation.rounds:
            round_limited.append(agent)
            continue
        for x in leftovers:
            if any(spec.constraint.is_independent(solution + (x,)) for solution in bundle.solutions):
                violations.append((agent, x))
    return SaturationReport(regime, not violations, violations, round_limited)


# === EX-ANTE ===

@dataclass(frozen=True)
class ExAnteRow:
    agent: int
    expected: float
    opt: float
    beta: Fraction
    factor: Fraction
    passed: bool
    exact: bool
    samples: int
    ci_low: float
    ci_high: float

    @property
    def bound(self) -> float:
        return float(self.factor) * self.opt


@dataclass
class ExAnteReport:
    rows: list[ExAnteRow]

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)


def exante_bound_check(instance: Instance, policies: Optional[Sequence[Policy]] = None,
                       bound: Optional[BoundSpec] = None, mode: str = "exact", *,
                       samples: int = 1000, seed: int = 0, confidence: float = 0.99) -> ExAnteReport:
    """E_pi[f_i(S_i)] >= OPT_i / (beta n) for every agent, exactly or by Monte-Carlo.

    ``bound`` overrides the per-agent beta; by default each agent gets the beta of its
    own (monotone, cardinality) case.
    """
    n = instance.n
    policies = list(policies) if policies is not None else default_policies(instance)
    if mode == "exact":
        if n > EXACT_EXANTE_LIMIT:
            raise TooLargeError(f"exact ex-ante enumeration needs n <= {EXACT_EXANTE_LIMIT}, got {n}")
        configs = [ProtocolConfig(ordering=perm) for perm in itertools.permutations(range(n))]
    elif mode == "montecarlo":
        configs = [ProtocolConfig(ordering=fisher_yates_permutation(n, spawn_seed(seed, s))) for s in range(samples)]
    else:
        raise InstanceError(f"unknown ex-ante mode '{mode}'")

    values = np.zeros((len(configs), n))
    for row, config in enumerate(configs):
        trace = run_round_robin(instance, policies, config)
        allocation = allocation_of(trace)
        values[row] = [_achieved(trace, allocation, agent) for agent in range(n)]

    rows = []
    for agent, spec in enumerate(instance.agents):
        opt = brute_force_opt(spec.objective, spec.constraint, range(instance.m))[0]
        agent_bound = bound or bound_for("T7", instance, agent)
        target = float(agent_bound.factor) * opt
        column = values[:, agent]
        expected = float(column.mean())
        if mode == "exact":
            low = high = expected
            passed = expected >= target - TOL
        else:
            half = 0.0
            if len(column) > 1 and column.std(ddof=1) > 0:
                half = stats.t.ppf(0.5 + confidence / 2, len(column) - 1) * column.std(ddof=1) / math.sqrt(len(column))
            low, high = expected - half, expected + half
            passed = high >= target - TOL
            if passed and expected < target - TOL:
                logger.warning("agent %d: ex-ante estimate %.6g below bound %.6g but within the %.0f%% interval",
                               agent, expected, target, 100 * confidence)
        rows.append(ExAnteRow(agent, expected, opt, agent_bound.beta, agent_bound.factor, passed,
                              mode == "exact", len(column), low, high))
    return ExAnteReport(rows)


# === VERIFICATION ===

@dataclass
class VerificationReport:
    instance: Instance
    trace: Trace
    opt: list[float]
    opt_minus: list[float]
    achieved: list[float]
    checks: list[BoundCheck]
    saturation: Optional[SaturationReport] = None

    @property
    def passed(self) -> bool:
        checks_ok = all(check.passed for check in self.checks)
        return checks_ok and (self.saturation is None or self.saturation.passed)


def verify_run(trace: Trace, theorems: Optional[Iterable[str]] = None) -> VerificationReport:
    """Check every requested theorem that applies to each agent of one run."""
    theorems = list(theorems) if theorems is not None else list(THEOREMS[:6])
    unknown = [t for t in theorems if t not in THEOREMS]
    if unknown:
        raise InstanceError(f"unknown theorems {unknown}")
    instance = trace.instance
    allocation = allocation_of(trace)
    opt, opt_minus, achieved, checks = [], [], [], []
    for agent, spec in enumerate(instance.agents):
        opt.append(brute_force_opt(spec.objective, spec.constraint, range(instance.m))[0])
        opt_minus.append(opt_minus_from_trace(trace, agent)[0])
        achieved.append(_achieved(trace, allocation, agent))
        for theorem in theorems:
            if theorem == "T7" or _applicability(theorem, trace, agent):
                continue
            bound = bound_for(theorem, instance, agent)
            if theorem in ("T3", "T4"):
                for j in range(instance.n):
                    if j == agent:
                        continue
                    pair = check_fef1_pair(allocation, instance, agent, j)
                    checks.append(BoundCheck(theorem, agent, bound.factor, pair.theorem_num, pair.theorem_den, j))
            else:
                checks.append(check_theorem_bound(trace, agent, bound, allocation, opt_minus[-1]))

    saturation = None
    if all(kind == "greedy" for kind in trace.policy_kinds):
        saturation = check_corollary_saturation(allocation, instance)
    report = VerificationReport(instance, trace, opt, opt_minus, achieved, checks, saturation)
    failed = sum(not c.passed for c in checks)
    logger.info("Verified '%s' (permutation %s): %d checks, %d failed",
                instance.name, trace.permutation, len(checks), failed)
    return report


def verify_instance(instance: Instance, policies: Optional[Sequence[Policy]] = None,
                    theorems: Optional[Iterable[str]] = None,
                    config: Optional[ProtocolConfig] = None) -> VerificationReport:
    policies = list(policies) if policies is not None else default_policies(instance)
    return verify_run(run_round_robin(instance, policies, config), theorems)


# === RANDOM FLEETS ===

OBJECTIVE_KINDS = ("monotone", "nonmonotone")
CONSTRAINT_KINDS = ("cardinality", "partition", "intersection")


def _random_objective(rng: np.random.Generator, kind: str, m: int):
    if kind == "nonmonotone":
        edges, weights = [], []
        for u, v in itertools.combinations(range(m), 2):
            if rng.random() < 0.4:
                edges.append((u, v))
                weights.append(float(rng.integers(1, 5)))
        return CutObjective.from_edges(edges, m, weights)
    if rng.random() < 0.5:
        return AdditiveObjective(rng.integers(0, 10, size=m).astype(float))
    universe = int(rng.integers(4, 9))
    covers = [np.flatnonzero(rng.random(universe) < 0.35).tolist() for _ in range(m)]
    return CoverageObjective(universe, covers, rng.integers(1, 5, size=universe).astype(float))


def _random_partition(rng: np.random.Generator, m: int) -> PartitionMatroid:
    labels = rng.integers(0, int(rng.integers(2, 5)), size=m)
    parts = [np.flatnonzero(labels == label).tolist() for label in np.unique(labels)]
    caps = rng.integers(1, 3, size=len(parts)).tolist()
    return PartitionMatroid(m, parts, caps)


def _random_constraint(rng: np.random.Generator, kind: str, n: int, m: int) -> ConstraintSpec:
    if kind == "cardinality":
        return CardinalityConstraint(m, int(rng.integers(1, -(-m // n) + 2)))
    if kind == "partition":
        return _random_partition(rng, m)
    if kind == "intersection":
        return MatroidIntersection([_random_partition(rng, m), _random_partition(rng, m)])
    raise InstanceError(f"unknown constraint kind '{kind}'")


def random_instance(objective_kind: str, constraint_kind: str, n: int, m: int, seed: int) -> Instance:
    """A seeded random instance: additive/coverage (monotone) or cut (non-monotone) objectives."""
    if objective_kind not in OBJECTIVE_KINDS:
        raise InstanceError(f"unknown objective kind '{objective_kind}'")
    rng = rng_from(seed)
    agents = [AgentSpec(_random_objective(rng, objective_kind, m), _random_constraint(rng, constraint_kind, n, m))
              for _ in range(n)]
    return build_instance(GroundSet(m), agents, name=f"{objective_kind}-{constraint_kind}-{seed}")


def identical_additive_instance(n: int, m: Optional[int] = None) -> Instance:
    """n agents that all value every item at 1 and face no real constraint; m defaults to n."""
    m = n if m is None else m
    agents = [AgentSpec(AdditiveObjective(np.ones(m)), CardinalityConstraint(m, m)) for _ in range(n)]
    return build_instance(GroundSet(m), agents, name=f"identical-additive-n{n}-m{m}")


def _fleet_member(args: tuple) -> dict:
    index, objective_kind, constraint_kind, seed, n_choices, m_range, theorems = args
    member_seed = spawn_seed(seed, index)
    rng = rng_from(member_seed)
    n = int(rng.choice(n_choices))
    m = int(rng.integers(max(n, m_range[0]), m_range[1] + 1))
    instance = random_instance(objective_kind, constraint_kind, n, m, member_seed)
    report = verify_instance(instance, theorems=theorems)
    failures = [c for c in report.checks if not c.passed]
    return {
        "index": index,
        "instance": instance.name,
        "n": n,
        "m": m,
        "checks": len(report.checks),
        "failures": len(failures),
        "saturated": report.saturation.passed if report.saturation else True,
        "min_margin": min((c.margin for c in report.checks), default=INF),
        "first_failure": repr(failures[0]) if failures else "",
    }


def run_fleet(objective_kind: str, constraint_kind: str, count: int, seed: int = 0, *,
              n_choices: Sequence[int] = (2, 3, 4), m_range: tuple[int, int] = (4, 10),
              theorems: Optional[Sequence[str]] = None, workers: int = 1) -> pd.DataFrame:
    """Verify ``count`` random instances of one regime; one row per instance, in index order."""
    jobs = [(index, objective_kind, constraint_kind, seed, tuple(n_choices), m_range, theorems)
            for index in range(count)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_fleet_member, jobs, chunksize=max(1, count // (4 * workers))))
    else:
        rows = [_fleet_member(job) for job in jobs]
    frame = pd.DataFrame(rows).sort_values("index", ignore_index=True)
    logger.info("Fleet %s/%s: %d instances, %d failing checks", objective_kind, constraint_kind,
                count, int(frame["failures"].sum()))
    return frame
