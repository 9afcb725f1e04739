"""Randomized assignment mechanisms.

Three families are implemented, all over strict ordinal preferences:

* `ebm` - the eager Boston matching engine.  In each pass every active agent
  applies for its favourite remaining item, every applied-for item is awarded
  to one applicant chosen uniformly at random (losers stay active), and the
  engine repeats on the shrunken item set until agents or items run out.
* `gebm_*` - the multi-item extension: ceil(m/n) rounds, each running the
  engine over the still-unallocated items with all agents re-activated.
  Available in sampled, exact-lottery, and exact-expected modes.
* `gpbm` - the probabilistic variant: a simultaneous-eating scheme where, in
  each round, agents hold one unit of budget and consume the item they rank
  r-th globally during consumption round r, splitting supply at equal rates.
* `rsdq` - the quota serial dictatorship baseline: agents pick whole quota
  blocks in priority order.

Runs are pure functions of (instance, seed); the exact modes involve no
randomness at all.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence, Union

from .model import (
    ONE,
    ZERO,
    DeterministicAssignment,
    InputError,
    Instance,
    Lottery,
    RandomAssignment,
    RoundDecomposition,
    SizeLimitError,
)

DEFAULT_BRANCH_CAP = 10**6


class ModularRng:
    """Seeded deterministic random source (SplitMix64 core).

    Draws are 64-bit words reduced modulo the requested range (no rejection
    loop), computed with plain integer arithmetic, so sequences depend only on
    the seed and are reproducible across platforms and interpreter versions.
    """

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int) -> None:
        self._state = seed & self._MASK

    def _word(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & self._MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound)."""
        if bound < 1:
            raise InputError("bound must be at least 1")
        return self._word() % bound

    def pick(self, items: Sequence) -> object:
        return items[self.below(len(items))]

    def unit(self) -> Fraction:
        """Uniform rational in [0, 1) at 64-bit resolution."""
        return Fraction(self._word(), 1 << 64)

    def shuffle(self, values: list) -> None:
        for i in range(len(values) - 1, 0, -1):
            j = self.below(i + 1)
            values[i], values[j] = values[j], values[i]


#: Tie-breaks are either a random source or an explicit script: a sequence of
#: agent indices consumed one entry per contested item, in item-index order.
TieBreaker = Union[ModularRng, Sequence[int]]


def _top_of(instance: Instance, agent: int, available: frozenset[int] | set[int]) -> int:
    for o in instance.pref_order[agent]:
        if o in available:
            return o
    raise AssertionError("agent queried against an empty item set")


# ---------------------------------------------------------------------------
# Eager Boston matching engine


def ebm(
    instance: Instance, available_items: Iterable[int], tie_breaker: TieBreaker
) -> dict[int, int]:
    """One engine run over `available_items`; returns a matching agent -> item.

    Applicant sets are computed simultaneously against the pass-start state:
    winners are drawn independently per item, then all applied-for items and
    all winners are removed together.
    """
    items = set(available_items)
    if not items:
        raise InputError("the eager Boston engine needs a nonempty item set")
    if not items <= set(range(instance.item_count)):
        raise InputError("available items contain unknown indices")
    script: Iterator[int] | None = None
    if not isinstance(tie_breaker, ModularRng):
        script = iter(tie_breaker)

    active = list(range(instance.agent_count))
    matching: dict[int, int] = {}
    while active and items:
        applicants: dict[int, list[int]] = {}
        for j in active:
            applicants.setdefault(_top_of(instance, j, items), []).append(j)
        winners: set[int] = set()
        for o in sorted(applicants):
            group = applicants[o]
            if len(group) == 1:
                winner = group[0]
            elif script is not None:
                try:
                    winner = next(script)
                except StopIteration:
                    raise InputError("tie-break script exhausted") from None
                if winner not in group:
                    raise InputError(
                        f"scripted winner {winner} did not apply for item {o}"
                    )
            else:
                winner = group[tie_breaker.below(len(group))]
            matching[winner] = o
            winners.add(winner)
        items.difference_update(applicants)
        active = [j for j in active if j not in winners]
    return matching


# ---------------------------------------------------------------------------
# Generalized eager Boston mechanism


@dataclass(frozen=True)
class GebmOutcome:
    """A realized multi-round run: total assignment plus its round structure."""

    total: DeterministicAssignment
    per_round: RoundDecomposition
    remaining_items_per_round: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        n = self.total.agent_count
        m = self.total.item_count
        acc = [[0] * m for _ in range(n)]
        expected_remaining = frozenset(range(m))
        if len(self.remaining_items_per_round) != self.per_round.round_count:
            raise InputError("round item sets do not match the round count")
        for stage, remaining in zip(self.per_round.rounds, self.remaining_items_per_round):
            if remaining != expected_remaining:
                raise InputError("round item sets are not nested-decreasing")
            allocated = set()
            for j, row in enumerate(stage.rows):
                for o, v in enumerate(row):
                    if v:
                        allocated.add(o)
                        acc[j][o] += 1
            if not allocated <= remaining:
                raise InputError("a round allocated an item outside its remaining set")
            expected_remaining = remaining - allocated
        if tuple(tuple(row) for row in acc) != self.total.rows:
            raise InputError("round matchings do not sum to the total assignment")


def gebm_sample(instance: Instance, seed: int) -> GebmOutcome:
    """One seeded run: ceil(m/n) rounds of the engine over the leftover items."""
    rng = ModularRng(seed)
    n = instance.agent_count
    m = instance.item_count
    remaining = set(range(m))
    stages: list[DeterministicAssignment] = []
    item_sets: list[frozenset[int]] = []
    total = [[0] * m for _ in range(n)]
    for _ in range(instance.rounds_needed):
        item_sets.append(frozenset(remaining))
        matching = ebm(instance, remaining, rng)
        stages.append(DeterministicAssignment.from_matching(n, m, matching))
        for j, o in matching.items():
            total[j][o] = 1
        remaining.difference_update(matching.values())
    return GebmOutcome(
        DeterministicAssignment._from_validated_rows(tuple(tuple(row) for row in total)),
        RoundDecomposition(tuple(stages)),
        tuple(item_sets),
    )


def _engine_branches(
    instance: Instance, items: frozenset[int]
) -> Iterator[tuple[Fraction, tuple[tuple[int, int], ...]]]:
    """All tie-break branches of one engine run, as (probability, matching pairs)."""

    def explode(
        active: frozenset[int], remaining: frozenset[int]
    ) -> Iterator[tuple[Fraction, tuple[tuple[int, int], ...]]]:
        if not active or not remaining:
            yield ONE, ()
            return
        applicants: dict[int, list[int]] = {}
        for j in sorted(active):
            applicants.setdefault(_top_of(instance, j, remaining), []).append(j)
        contested = sorted(applicants)
        weight = Fraction(1, math.prod(len(applicants[o]) for o in contested))
        next_remaining = remaining.difference(contested)
        for winners in itertools.product(*(applicants[o] for o in contested)):
            pairs = tuple(zip(winners, contested))
            next_active = active.difference(winners)
            for sub_prob, sub_pairs in explode(next_active, next_remaining):
                yield weight * sub_prob, pairs + sub_pairs

    yield from explode(frozenset(range(instance.agent_count)), items)


def gebm_branches(
    instance: Instance, max_branches: int = DEFAULT_BRANCH_CAP
) -> list[tuple[Fraction, tuple[tuple[tuple[int, int], ...], ...]]]:
    """Exhaustive branch enumeration: (probability, per-round matching pairs).

    Branch probabilities are products of 1/|applicant set| factors.  Raises
    `SizeLimitError` once more than `max_branches` leaves are produced.
    """

    leaves: list[tuple[Fraction, tuple[tuple[tuple[int, int], ...], ...]]] = []

    def rounds(
        round_index: int, remaining: frozenset[int]
    ) -> Iterator[tuple[Fraction, tuple[tuple[tuple[int, int], ...], ...]]]:
        if round_index == instance.rounds_needed:
            yield ONE, ()
            return
        for prob, pairs in _engine_branches(instance, remaining):
            matched = frozenset(o for _, o in pairs)
            for sub_prob, sub_rounds in rounds(round_index + 1, remaining - matched):
                yield prob * sub_prob, (pairs,) + sub_rounds

    for leaf in rounds(0, frozenset(range(instance.item_count))):
        leaves.append(leaf)
        if len(leaves) > max_branches:
            raise SizeLimitError(
                f"instance too large for exact mode (more than {max_branches} "
                "tie-break branches); use sampled mode instead"
            )
    return leaves


def gebm_lottery(instance: Instance, max_branches: int = DEFAULT_BRANCH_CAP) -> Lottery:
    """The exact output distribution, with identical leaf assignments merged."""
    atoms = []
    for prob, round_pairs in gebm_branches(instance, max_branches):
        bundles: dict[int, list[int]] = {}
        for pairs in round_pairs:
            for j, o in pairs:
                bundles.setdefault(j, []).append(o)
        atoms.append(
            (
                prob,
                DeterministicAssignment.from_bundles(
                    instance.agent_count, instance.item_count, bundles
                ),
            )
        )
    return Lottery.of(atoms)


def gebm_expected(
    instance: Instance, max_branches: int = DEFAULT_BRANCH_CAP
) -> RandomAssignment:
    """Exact expected matrix: the probability-weighted mean of the lottery."""
    return gebm_lottery(instance, max_branches).expected()


# ---------------------------------------------------------------------------
# Generalized probabilistic Boston mechanism


@dataclass(frozen=True)
class ConsumptionStep:
    """One waterfilling event: who ate how much of an item, and when."""

    round_index: int
    consumption_round: int
    item: int
    consumers: tuple[int, ...]
    amounts: tuple[Fraction, ...]


@dataclass(frozen=True)
class GpbmOutcome:
    total: RandomAssignment
    per_round: RoundDecomposition
    supply_trace: tuple[ConsumptionStep, ...] | None = None

    def __post_init__(self) -> None:
        if self.per_round.total_random() != self.total:
            raise InputError("per-round matrices do not sum to the total")
        for o in range(self.total.item_count):
            if self.total.column_sum(o) != ONE:
                raise InputError(f"item column {o} does not sum to 1")
        last = self.per_round.round_count - 1
        for c, stage in enumerate(self.per_round.rounds):
            for j, row in enumerate(stage.rows):
                row_sum = sum(row, ZERO)
                if c < last and row_sum != ONE:
                    raise InputError(
                        f"agent {j} consumed {row_sum} in non-final round {c + 1}, expected 1"
                    )


def _equal_rate_split(
    budgets: Sequence[Fraction], supply: Fraction
) -> tuple[list[Fraction], Fraction]:
    """Split `supply` among consumers eating at one common rate.

    Each consumer stops when its own budget is exhausted; everything stops when
    the supply is.  Waterfilling: advance time by the smallest binding amount,
    drop finished consumers, repeat; at most len(budgets) passes.
    """
    eaten = [ZERO] * len(budgets)
    left = supply
    active = [i for i in range(len(budgets)) if budgets[i] > ZERO]
    while active and left > ZERO:
        step = min(
            min(budgets[i] - eaten[i] for i in active),
            left / len(active),
        )
        for i in active:
            eaten[i] += step
        left -= step * len(active)
        active = [i for i in active if eaten[i] < budgets[i]]
    return eaten, left


def gpbm(instance: Instance, keep_trace: bool = True) -> GpbmOutcome:
    """The simultaneous-eating mechanism, computed exactly.

    Rounds repeat while supply remains; within a round every agent holds one
    unit of budget and consumption rounds r = 1..m run in order.  During
    consumption round r, each unexhausted item is eaten at an equal rate by
    the budget-positive agents whose global rank of it is exactly r.  Every
    agent ranks one item per position, so items within a consumption round
    never compete for the same agent.
    """
    n = instance.agent_count
    m = instance.item_count
    ranks = instance.global_rank
    supply: list[Fraction] = [ONE] * m
    stages: list[RandomAssignment] = []
    trace: list[ConsumptionStep] = []
    round_index = 0
    while any(s > ZERO for s in supply):
        round_index += 1
        shares = [[ZERO] * m for _ in range(n)]
        budget: list[Fraction] = [ONE] * n
        for r in range(1, m + 1):
            if all(s == ZERO for s in supply) or all(b == ZERO for b in budget):
                break
            for o in range(m):
                if supply[o] == ZERO:
                    continue
                eaters = [j for j in range(n) if budget[j] > ZERO and ranks[j][o] == r]
                if not eaters:
                    continue
                amounts, supply[o] = _equal_rate_split([budget[j] for j in eaters], supply[o])
                for j, amount in zip(eaters, amounts):
                    shares[j][o] += amount
                    budget[j] -= amount
                if keep_trace:
                    trace.append(
                        ConsumptionStep(round_index, r, o, tuple(eaters), tuple(amounts))
                    )
        stages.append(RandomAssignment(tuple(tuple(row) for row in shares)))
    if round_index != instance.rounds_needed:
        raise AssertionError(
            f"eating ran {round_index} rounds, expected {instance.rounds_needed}"
        )
    total = RandomAssignment.zero(n, m)
    for stage in stages:
        total = total.add(stage)
    return GpbmOutcome(
        total,
        RoundDecomposition(tuple(stages)),
        tuple(trace) if keep_trace else None,
    )


# ---------------------------------------------------------------------------
# Quota serial dictatorship baseline


def rsdq(
    instance: Instance, priority_order: Sequence[int], quota: int | None = None
) -> DeterministicAssignment:
    """Agents pick their whole quota of best remaining items in priority order."""
    if sorted(priority_order) != list(range(instance.agent_count)):
        raise InputError("priority order is not a permutation of the agent indices")
    if quota is None:
        quota = instance.rounds_needed
    if quota < 1:
        raise InputError("quota must be at least 1")
    remaining = set(range(instance.item_count))
    bundles: dict[int, list[int]] = {}
    for j in priority_order:
        picks: list[int] = []
        for o in instance.pref_order[j]:
            if len(picks) == quota:
                break
            if o in remaining:
                picks.append(o)
        bundles[j] = picks
        remaining.difference_update(picks)
    return DeterministicAssignment.from_bundles(
        instance.agent_count, instance.item_count, bundles
    )


def rsdq_lottery(instance: Instance, quota: int | None = None) -> Lottery:
    """Uniform mixture of the dictatorship over all n! priority orders."""
    n = instance.agent_count
    weight = Fraction(1, math.factorial(n))
    return Lottery.of(
        (weight, rsdq(instance, order, quota))
        for order in itertools.permutations(range(n))
    )
