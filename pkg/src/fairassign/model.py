"""Core types for the indivisible-item assignment problem.

Agents hold strict preferences over m distinct items.  Outcomes are
deterministic assignments (binary matrices), random assignments (matrices of
exact rational shares), and lotteries (finite distributions over deterministic
assignments).  All arithmetic is exact: shares are `fractions.Fraction` values
and no routine in this module ever rounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

ZERO = Fraction(0)
ONE = Fraction(1)


class InputError(ValueError):
    """A caller supplied malformed or inconsistent input."""


class SizeLimitError(RuntimeError):
    """An exact computation would exceed its configured cap."""


def parse_fraction(text: str) -> Fraction:
    """Parse a rational serialized as 'p/q' ('0', '1' and plain integers allowed)."""
    if not isinstance(text, str):
        raise InputError(f"expected a rational string, got {text!r}")
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"invalid rational {text!r}") from exc


def format_fraction(value: Fraction) -> str:
    """Canonical reduced 'p/q' form (integers render without a denominator)."""
    return str(Fraction(value))


# ---------------------------------------------------------------------------
# Instances


@dataclass(frozen=True)
class Agent:
    """One agent: a unique name and a strict preference order over all items."""

    name: str
    prefs: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "prefs", tuple(self.prefs))


@dataclass(frozen=True)
class Instance:
    """An assignment problem: items plus one strict preference order per agent.

    Items and agents are addressed by dense integer indices everywhere in the
    computational API; names appear only in files and reports.  Index order
    follows construction (file) order.
    """

    items: tuple[str, ...]
    agents: tuple[Agent, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "agents", tuple(self.agents))
        if not self.items:
            raise InputError("an instance needs at least one item")
        if not self.agents:
            raise InputError("an instance needs at least one agent")
        seen_items: set[str] = set()
        for name in self.items:
            if name in seen_items:
                raise InputError(f"duplicate item {name!r}")
            seen_items.add(name)
        item_set = set(self.items)
        seen_agents: set[str] = set()
        for agent in self.agents:
            if agent.name in seen_agents:
                raise InputError(f"duplicate agent {agent.name!r}")
            seen_agents.add(agent.name)
            if len(agent.prefs) != len(self.items) or set(agent.prefs) != item_set:
                raise InputError(
                    f"preferences of agent {agent.name!r} are not a permutation of the item set"
                )

    # -- construction helpers

    @classmethod
    def from_prefs(
        cls,
        prefs: Mapping[str, Sequence[str]] | Sequence[Sequence[str]],
        items: Sequence[str] | None = None,
    ) -> "Instance":
        """Build an instance from preference lists.

        `prefs` maps agent names to orders (or is a plain sequence of orders,
        in which case agents are named "1", "2", ...).  When `items` is
        omitted, the first agent's order fixes the item indexing.
        """
        if isinstance(prefs, Mapping):
            named = list(prefs.items())
        else:
            named = [(str(i + 1), order) for i, order in enumerate(prefs)]
        if not named:
            raise InputError("an instance needs at least one agent")
        if items is None:
            items = tuple(named[0][1])
        return cls(tuple(items), tuple(Agent(name, tuple(order)) for name, order in named))

    def with_agent_order(self, agent: int, order: Sequence[int]) -> "Instance":
        """Copy of this instance with one agent's preference order replaced.

        `order` lists item indices from most to least preferred.
        """
        if sorted(order) != list(range(self.item_count)):
            raise InputError("replacement order is not a permutation of the item indices")
        prefs = tuple(self.items[o] for o in order)
        agents = tuple(
            Agent(a.name, prefs) if j == agent else a for j, a in enumerate(self.agents)
        )
        return Instance(self.items, agents)

    # -- derived views (cached; the dataclass itself stays immutable)

    @cached_property
    def agent_count(self) -> int:
        return len(self.agents)

    @cached_property
    def item_count(self) -> int:
        return len(self.items)

    @cached_property
    def rounds_needed(self) -> int:
        """ceil(m / n): the round count of the multi-round mechanisms."""
        return -(-self.item_count // self.agent_count)

    @cached_property
    def item_index(self) -> dict[str, int]:
        return {name: o for o, name in enumerate(self.items)}

    @cached_property
    def agent_index(self) -> dict[str, int]:
        return {a.name: j for j, a in enumerate(self.agents)}

    @cached_property
    def pref_order(self) -> tuple[tuple[int, ...], ...]:
        """pref_order[j] lists item indices from most to least preferred."""
        idx = self.item_index
        return tuple(tuple(idx[name] for name in a.prefs) for a in self.agents)

    @cached_property
    def global_rank(self) -> tuple[tuple[int, ...], ...]:
        """global_rank[j][o] is the 1-based rank of item o in agent j's full order."""
        out = []
        for order in self.pref_order:
            row = [0] * self.item_count
            for pos, o in enumerate(order):
                row[o] = pos + 1
            out.append(tuple(row))
        return tuple(out)

    @cached_property
    def first_choices(self) -> tuple[int, ...]:
        """first_choices[j] is agent j's most preferred item index."""
        return tuple(order[0] for order in self.pref_order)

    def order_of(self, agent: int) -> tuple[int, ...]:
        return self.pref_order[agent]


# ---------------------------------------------------------------------------
# Preference queries and dominance relations


def rank(instance: Instance, agent: int, item: int, subset: Iterable[int]) -> int:
    """1-based rank of `item` among `subset` under the agent's order.

    With `subset` equal to the full item set this is the global rank.
    """
    sub = set(subset)
    if not sub <= set(range(instance.item_count)):
        raise InputError("subset contains unknown item indices")
    if item not in sub:
        raise InputError(f"item index {item} is not in the queried subset")
    ranks = instance.global_rank[agent]
    return 1 + sum(1 for o in sub if ranks[o] < ranks[item])


def top(instance: Instance, agent: int, subset: Iterable[int]) -> int:
    """The unique item of `subset` the agent ranks highest within it."""
    sub = set(subset)
    if not sub:
        raise InputError("cannot take the top of an empty item subset")
    if not sub <= set(range(instance.item_count)):
        raise InputError("subset contains unknown item indices")
    ranks = instance.global_rank[agent]
    return min(sub, key=ranks.__getitem__)


def upper_contour(order: Sequence[int], item: int) -> frozenset[int]:
    """Items weakly preferred to `item` under `order` (most preferred first)."""
    contour: list[int] = []
    for o in order:
        contour.append(o)
        if o == item:
            return frozenset(contour)
    raise InputError(f"unknown item index {item}")


def _check_comparison(order: Sequence[int], p: Sequence[Fraction], q: Sequence[Fraction]) -> None:
    m = len(order)
    if set(order) != set(range(m)):
        raise InputError("order is not a permutation of the item indices")
    if len(p) != m or len(q) != m:
        raise InputError("allocation vectors do not match the order's length")


def sd_dominates(order: Sequence[int], p: Sequence[Fraction], q: Sequence[Fraction]) -> bool:
    """Weak stochastic dominance: every upper-contour cumulative share of `p`
    is at least that of `q`.  Comparison is exact."""
    _check_comparison(order, p, q)
    cum_p = ZERO
    cum_q = ZERO
    for o in order:
        cum_p += p[o]
        cum_q += q[o]
        if cum_p < cum_q:
            return False
    return True


def lex_dominates(order: Sequence[int], p: Sequence[Fraction], q: Sequence[Fraction]) -> bool:
    """Strict lexicographic dominance: `p` gives strictly more of the best item
    on which the two vectors differ.  Returns False when p equals q."""
    _check_comparison(order, p, q)
    for o in order:
        if p[o] != q[o]:
            return p[o] > q[o]
    return False


# ---------------------------------------------------------------------------
# Assignments


@dataclass(frozen=True)
class DeterministicAssignment:
    """A concrete allocation: binary n x m matrix, each item held at most once."""

    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(int(v) for v in row) for row in self.rows)
        object.__setattr__(self, "rows", rows)
        if not rows:
            raise InputError("assignment needs at least one agent row")
        m = len(rows[0])
        for row in rows:
            if len(row) != m:
                raise InputError("assignment rows have inconsistent lengths")
            for v in row:
                if v not in (0, 1):
                    raise InputError("assignment entries must be 0 or 1")
        for o in range(m):
            if sum(row[o] for row in rows) > 1:
                raise InputError(f"item column {o} is allocated more than once")

    @classmethod
    def _from_validated_rows(
        cls, rows: tuple[tuple[int, ...], ...]
    ) -> "DeterministicAssignment":
        """Skip re-validation for rows a factory just built itself."""
        out = object.__new__(cls)
        object.__setattr__(out, "rows", rows)
        return out

    @classmethod
    def zero(cls, agent_count: int, item_count: int) -> "DeterministicAssignment":
        return cls._from_validated_rows(tuple((0,) * item_count for _ in range(agent_count)))

    @classmethod
    def from_bundles(
        cls, agent_count: int, item_count: int, bundles: Mapping[int, Iterable[int]]
    ) -> "DeterministicAssignment":
        rows = [[0] * item_count for _ in range(agent_count)]
        taken: set[int] = set()
        for j, bundle in bundles.items():
            if not 0 <= j < agent_count:
                raise InputError(f"agent index {j} out of range")
            row = rows[j]
            for o in bundle:
                if not 0 <= o < item_count:
                    raise InputError(f"item index {o} out of range")
                if o in taken:
                    raise InputError(f"item column {o} is allocated more than once")
                taken.add(o)
                row[o] = 1
        return cls._from_validated_rows(tuple(tuple(row) for row in rows))

    @classmethod
    def from_matching(
        cls, agent_count: int, item_count: int, matching: Mapping[int, int]
    ) -> "DeterministicAssignment":
        return cls.from_bundles(agent_count, item_count, {j: (o,) for j, o in matching.items()})

    @property
    def agent_count(self) -> int:
        return len(self.rows)

    @property
    def item_count(self) -> int:
        return len(self.rows[0])

    @cached_property
    def bundles(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(o for o, v in enumerate(row) if v) for row in self.rows)

    @cached_property
    def holders(self) -> tuple[int | None, ...]:
        """holders[o] is the agent holding item o, or None if unallocated."""
        out: list[int | None] = [None] * self.item_count
        for j, row in enumerate(self.rows):
            for o, v in enumerate(row):
                if v:
                    out[o] = j
        return tuple(out)

    @cached_property
    def is_complete(self) -> bool:
        return all(h is not None for h in self.holders)

    @cached_property
    def is_matching(self) -> bool:
        return all(sum(row) <= 1 for row in self.rows)

    def indicator(self, agent: int) -> tuple[Fraction, ...]:
        return tuple(Fraction(v) for v in self.rows[agent])

    def add(self, other: "DeterministicAssignment") -> "DeterministicAssignment":
        if self.item_count != other.item_count or self.agent_count != other.agent_count:
            raise InputError("cannot add assignments of different shapes")
        return DeterministicAssignment(
            tuple(
                tuple(a + b for a, b in zip(ra, rb)) for ra, rb in zip(self.rows, other.rows)
            )
        )

    def to_random(self) -> "RandomAssignment":
        return RandomAssignment(tuple(tuple(Fraction(v) for v in row) for row in self.rows))


@dataclass(frozen=True)
class RandomAssignment:
    """Probabilistic shares: n x m matrix of exact rationals in [0, 1]."""

    rows: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(Fraction(v) for v in row) for row in self.rows)
        object.__setattr__(self, "rows", rows)
        if not rows:
            raise InputError("random assignment needs at least one agent row")
        m = len(rows[0])
        for row in rows:
            if len(row) != m:
                raise InputError("random assignment rows have inconsistent lengths")
            for v in row:
                if v < ZERO or v > ONE:
                    raise InputError(f"share {v} is outside [0, 1]")

    @classmethod
    def zero(cls, agent_count: int, item_count: int) -> "RandomAssignment":
        return cls(tuple((ZERO,) * item_count for _ in range(agent_count)))

    @property
    def agent_count(self) -> int:
        return len(self.rows)

    @property
    def item_count(self) -> int:
        return len(self.rows[0])

    def row(self, agent: int) -> tuple[Fraction, ...]:
        return self.rows[agent]

    def entry(self, agent: int, item: int) -> Fraction:
        return self.rows[agent][item]

    def column_sum(self, item: int) -> Fraction:
        return sum((row[item] for row in self.rows), ZERO)

    @cached_property
    def is_fully_allocating(self) -> bool:
        return all(self.column_sum(o) == ONE for o in range(self.item_count))

    def add(self, other: "RandomAssignment") -> "RandomAssignment":
        if self.item_count != other.item_count or self.agent_count != other.agent_count:
            raise InputError("cannot add random assignments of different shapes")
        return RandomAssignment(
            tuple(
                tuple(a + b for a, b in zip(ra, rb)) for ra, rb in zip(self.rows, other.rows)
            )
        )

    def scaled(self, factor: Fraction) -> "RandomAssignment":
        return RandomAssignment(tuple(tuple(v * factor for v in row) for row in self.rows))


@dataclass(frozen=True)
class Lottery:
    """A finite probability distribution over deterministic assignments.

    Atoms are deduplicated, carry strictly positive probabilities summing to
    exactly one, and are kept in a canonical order so equal lotteries compare
    equal.  Construct through `Lottery.of` unless the input is already normal.
    """

    atoms: tuple[tuple[Fraction, DeterministicAssignment], ...]

    def __post_init__(self) -> None:
        if not self.atoms:
            raise InputError("a lottery needs at least one atom")
        total = ZERO
        seen: set[tuple[tuple[int, ...], ...]] = set()
        for prob, assignment in self.atoms:
            if prob <= ZERO:
                raise InputError("lottery probabilities must be positive")
            if assignment.rows in seen:
                raise InputError("lottery atoms must be deduplicated")
            seen.add(assignment.rows)
            total += prob
        if total != ONE:
            raise InputError(f"lottery probabilities sum to {total}, expected 1")

    @classmethod
    def of(
        cls, pairs: Iterable[tuple[Fraction, DeterministicAssignment]]
    ) -> "Lottery":
        """Merge duplicate assignments, drop zero-probability atoms, sort canonically."""
        merged: dict[tuple[tuple[int, ...], ...], tuple[Fraction, DeterministicAssignment]] = {}
        for prob, assignment in pairs:
            prob = Fraction(prob)
            if prob == ZERO:
                continue
            key = assignment.rows
            if key in merged:
                merged[key] = (merged[key][0] + prob, assignment)
            else:
                merged[key] = (prob, assignment)
        atoms = tuple(
            (prob, assignment)
            for _, (prob, assignment) in sorted(merged.items(), key=lambda kv: kv[0])
        )
        return cls(atoms)

    @property
    def atom_count(self) -> int:
        return len(self.atoms)

    def expected(self) -> RandomAssignment:
        """The probability-weighted mean matrix of the lottery."""
        n = self.atoms[0][1].agent_count
        m = self.atoms[0][1].item_count
        rows = [[ZERO] * m for _ in range(n)]
        for prob, assignment in self.atoms:
            for j, row in enumerate(assignment.rows):
                for o, v in enumerate(row):
                    if v:
                        rows[j][o] += prob
        return RandomAssignment(tuple(tuple(r) for r in rows))

    def probability_of(self, assignment: DeterministicAssignment) -> Fraction:
        for prob, atom in self.atoms:
            if atom == assignment:
                return prob
        return ZERO


@dataclass(frozen=True)
class RoundDecomposition:
    """An ordered sequence of per-round matrices (or matchings) whose entrywise
    sum is a total assignment; exactly ceil(m/n) rounds."""

    rounds: tuple[DeterministicAssignment | RandomAssignment, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rounds", tuple(self.rounds))
        if not self.rounds:
            raise InputError("a round decomposition needs at least one round")
        first = self.rounds[0]
        n = first.agent_count
        m = first.item_count
        expected_rounds = -(-m // n)
        if len(self.rounds) != expected_rounds:
            raise InputError(
                f"decomposition has {len(self.rounds)} rounds, expected ceil(m/n) = {expected_rounds}"
            )
        for stage in self.rounds:
            if stage.agent_count != n or stage.item_count != m:
                raise InputError("round matrices have inconsistent shapes")
            for row in stage.rows:
                if sum(row) > 1:
                    raise InputError("an agent exceeds one unit within a single round")

    @property
    def round_count(self) -> int:
        return len(self.rounds)

    def total_random(self) -> RandomAssignment:
        total = RandomAssignment.zero(self.rounds[0].agent_count, self.rounds[0].item_count)
        for stage in self.rounds:
            stage_random = stage.to_random() if isinstance(stage, DeterministicAssignment) else stage
            total = total.add(stage_random)
        return total


# ---------------------------------------------------------------------------
# Item-relabeling permutations


def _check_permutation(item_count: int, perm: Mapping[int, int]) -> None:
    if sorted(perm) != list(range(item_count)) or sorted(perm.values()) != list(
        range(item_count)
    ):
        raise InputError("permutation is not a bijection over the item indices")


def permute_instance(instance: Instance, perm: Mapping[int, int]) -> Instance:
    """Relabel items inside every preference list (the item set itself is fixed)."""
    _check_permutation(instance.item_count, perm)
    agents = tuple(
        Agent(a.name, tuple(instance.items[perm[o]] for o in order))
        for a, order in zip(instance.agents, instance.pref_order)
    )
    return Instance(instance.items, agents)


def permute_deterministic(
    assignment: DeterministicAssignment, perm: Mapping[int, int]
) -> DeterministicAssignment:
    _check_permutation(assignment.item_count, perm)
    rows = []
    for row in assignment.rows:
        new = [0] * len(row)
        for o, v in enumerate(row):
            new[perm[o]] = v
        rows.append(tuple(new))
    return DeterministicAssignment(tuple(rows))


def permute_random(matrix: RandomAssignment, perm: Mapping[int, int]) -> RandomAssignment:
    _check_permutation(matrix.item_count, perm)
    rows = []
    for row in matrix.rows:
        new = [ZERO] * len(row)
        for o, v in enumerate(row):
            new[perm[o]] = v
        rows.append(tuple(new))
    return RandomAssignment(tuple(rows))


def permute_lottery(lottery: Lottery, perm: Mapping[int, int]) -> Lottery:
    return Lottery.of(
        (prob, permute_deterministic(assignment, perm)) for prob, assignment in lottery.atoms
    )


# ---------------------------------------------------------------------------
# File formats


def parse_instance(text: str) -> Instance:
    """Parse the JSON instance format; see `serialize_instance` for the layout."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"instance document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError("instance document must be a JSON object")
    items = doc.get("items")
    agents = doc.get("agents")
    if not isinstance(items, list) or not all(isinstance(i, str) for i in items):
        raise InputError('"items" must be an array of strings')
    if not isinstance(agents, list):
        raise InputError('"agents" must be an array of objects')
    parsed_agents = []
    for entry in agents:
        if (
            not isinstance(entry, dict)
            or not isinstance(entry.get("name"), str)
            or not isinstance(entry.get("prefs"), list)
            or not all(isinstance(p, str) for p in entry["prefs"])
        ):
            raise InputError('each agent must be an object {"name": str, "prefs": [str, ...]}')
        parsed_agents.append(Agent(entry["name"], tuple(entry["prefs"])))
    return Instance(tuple(items), tuple(parsed_agents))


def serialize_instance(instance: Instance) -> str:
    doc = {
        "items": list(instance.items),
        "agents": [{"name": a.name, "prefs": list(a.prefs)} for a in instance.agents],
    }
    return json.dumps(doc, indent=2) + "\n"


def assignment_to_payload(
    instance: Instance, assignment: DeterministicAssignment
) -> dict[str, list[str]]:
    """{"agent": [items...]} with items listed in instance item order."""
    return {
        instance.agents[j].name: [instance.items[o] for o in sorted(assignment.bundles[j])]
        for j in range(instance.agent_count)
    }


def assignment_from_payload(
    instance: Instance, payload: Mapping[str, Sequence[str]]
) -> DeterministicAssignment:
    bundles: dict[int, list[int]] = {}
    for name, items in payload.items():
        if name not in instance.agent_index:
            raise InputError(f"unknown agent {name!r} in assignment payload")
        try:
            bundles[instance.agent_index[name]] = [instance.item_index[i] for i in items]
        except KeyError as exc:
            raise InputError(f"unknown item {exc.args[0]!r} in assignment payload") from exc
    return DeterministicAssignment.from_bundles(
        instance.agent_count, instance.item_count, bundles
    )


def random_to_payload(instance: Instance, matrix: RandomAssignment) -> list[list[str]]:
    """Matrix of rational strings; rows follow agent order, columns item order."""
    return [[format_fraction(v) for v in row] for row in matrix.rows]


def random_from_payload(
    instance: Instance, payload: Sequence[Sequence[str]]
) -> RandomAssignment:
    if len(payload) != instance.agent_count:
        raise InputError("random assignment payload has the wrong number of rows")
    rows = []
    for row in payload:
        if len(row) != instance.item_count:
            raise InputError("random assignment payload has the wrong number of columns")
        rows.append(tuple(parse_fraction(v) for v in row))
    return RandomAssignment(tuple(rows))


def lottery_to_payload(instance: Instance, lottery: Lottery) -> list[dict]:
    return [
        {"prob": format_fraction(prob), "assignment": assignment_to_payload(instance, a)}
        for prob, a in lottery.atoms
    ]


def lottery_from_payload(instance: Instance, payload: Sequence[Mapping]) -> Lottery:
    atoms = []
    for entry in payload:
        if "prob" not in entry or "assignment" not in entry:
            raise InputError('each lottery atom needs "prob" and "assignment"')
        atoms.append(
            (parse_fraction(entry["prob"]), assignment_from_payload(instance, entry["assignment"]))
        )
    return Lottery.of(atoms)
