"""Lottery realization for fractional round-decomposed assignments.

The eating mechanism outputs per-round share matrices.  To realize them
ex-post, each agent j is expanded into one subagent per round whose row is
that round's share vector; a nil column tops the final-round rows up to unit
sum.  Splitting the nil column into unit-sum virtual columns yields a square
doubly stochastic matrix, which a Birkhoff-von Neumann decomposition writes as
a convex combination of permutation matrices.  Each permutation maps back to a
deterministic assignment together with its per-round matchings.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .mechanisms import ModularRng, gpbm
from .model import (
    ONE,
    ZERO,
    DeterministicAssignment,
    InputError,
    Instance,
    Lottery,
    RandomAssignment,
    RoundDecomposition,
)


@dataclass(frozen=True)
class SubagentMatrix:
    """Row-stochastic expansion of per-round shares over (agent, round) pairs.

    Rows are ordered agent-major: row j * round_count + c holds agent j's
    round-(c+1) shares.  The final column is the nil share; it is positive only
    in last-round rows and its column total is n * ceil(m/n) - m.
    """

    entries: tuple[tuple[Fraction, ...], ...]
    agent_count: int
    round_count: int
    item_count: int

    def __post_init__(self) -> None:
        rows = self.agent_count * self.round_count
        if len(self.entries) != rows:
            raise InputError("subagent matrix has the wrong number of rows")
        for row in self.entries:
            if len(row) != self.item_count + 1:
                raise InputError("subagent rows must have one column per item plus nil")
            if any(v < ZERO for v in row):
                raise InputError("subagent shares must be nonnegative")
            if sum(row, ZERO) != ONE:
                raise InputError("every subagent row must sum to exactly 1")
        for o in range(self.item_count):
            if sum((row[o] for row in self.entries), ZERO) != ONE:
                raise InputError(f"item column {o} must sum to exactly 1")
        nil_total = sum((row[self.item_count] for row in self.entries), ZERO)
        if nil_total != rows - self.item_count:
            raise InputError("nil column total must equal n * rounds - m")

    def row_index(self, agent: int, round_index: int) -> int:
        return agent * self.round_count + round_index

    def nil_share(self, row: int) -> Fraction:
        return self.entries[row][self.item_count]


def expand_subagents(per_round: Sequence[RandomAssignment]) -> SubagentMatrix:
    """Stack per-round share rows into subagent rows, topping up with nil."""
    stages = list(per_round.rounds) if isinstance(per_round, RoundDecomposition) else list(per_round)
    if not stages:
        raise InputError("need at least one round matrix")
    n = stages[0].agent_count
    m = stages[0].item_count
    rounds = len(stages)
    last = rounds - 1
    entries: list[tuple[Fraction, ...]] = []
    for j in range(n):
        for c, stage in enumerate(stages):
            row = stage.row(j)
            consumed = sum(row, ZERO)
            if consumed > ONE:
                raise InputError(f"agent {j} consumed more than one unit in round {c + 1}")
            if c < last and consumed != ONE:
                raise InputError(
                    f"agent {j} consumed {consumed} in non-final round {c + 1}; "
                    "only final-round rows may carry nil share"
                )
            entries.append(tuple(row) + (ONE - consumed,))
    return SubagentMatrix(tuple(entries), n, rounds, m)


@dataclass(frozen=True)
class DecomposedLottery:
    """A convex combination of subagent matchings realizing a subagent matrix.

    Each atom matches every subagent to one item or to nil (None); projecting
    an atom merges each agent's subagents into one bundle.  `projected` is the
    corresponding lottery over deterministic assignments (atoms that project
    to the same assignment are merged there, not here).
    """

    source: SubagentMatrix
    atoms: tuple[tuple[Fraction, tuple[int | None, ...]], ...]
    projected: Lottery

    def __post_init__(self) -> None:
        m = self.source.item_count
        rows = self.source.agent_count * self.source.round_count
        total = ZERO
        reconstructed = [[ZERO] * (m + 1) for _ in range(rows)]
        for coefficient, matching in self.atoms:
            if coefficient <= ZERO:
                raise InputError("decomposition coefficients must be positive")
            total += coefficient
            if len(matching) != rows:
                raise InputError("an atom does not match every subagent")
            seen_items: set[int] = set()
            for row, target in enumerate(matching):
                if target is None:
                    if self.source.nil_share(row) <= ZERO:
                        raise InputError(
                            f"subagent row {row} matched to nil without nil share"
                        )
                    reconstructed[row][m] += coefficient
                else:
                    if self.source.entries[row][target] <= ZERO:
                        raise InputError(
                            f"atom uses pair (row {row}, item {target}) with zero share"
                        )
                    if target in seen_items:
                        raise InputError(f"item {target} matched twice within one atom")
                    seen_items.add(target)
                    reconstructed[row][target] += coefficient
            if len(seen_items) != m:
                raise InputError("an atom leaves some item unmatched")
        if total != ONE:
            raise InputError(f"decomposition coefficients sum to {total}, expected 1")
        for row in range(rows):
            for col in range(m + 1):
                if reconstructed[row][col] != self.source.entries[row][col]:
                    raise InputError(
                        "coefficient-weighted matchings do not reconstruct the matrix"
                    )

    @property
    def atom_count(self) -> int:
        return len(self.atoms)

    def atom_assignment(self, index: int) -> DeterministicAssignment:
        """Merge each agent's subagents of one atom into a single bundle."""
        _, matching = self.atoms[index]
        bundles: dict[int, list[int]] = {}
        for row, target in enumerate(matching):
            if target is not None:
                bundles.setdefault(row // self.source.round_count, []).append(target)
        return DeterministicAssignment.from_bundles(
            self.source.agent_count, self.source.item_count, bundles
        )

    def atom_round_matchings(self, index: int) -> tuple[DeterministicAssignment, ...]:
        """Per-round one-to-one matchings of one atom."""
        _, matching = self.atoms[index]
        stages = []
        for c in range(self.source.round_count):
            stage: dict[int, int] = {}
            for j in range(self.source.agent_count):
                target = matching[self.source.row_index(j, c)]
                if target is not None:
                    stage[j] = target
            stages.append(
                DeterministicAssignment.from_matching(
                    self.source.agent_count, self.source.item_count, stage
                )
            )
        return tuple(stages)

    def atom_round_item_sets(self, index: int) -> tuple[frozenset[int], ...]:
        """Items still unallocated at the start of each round of one atom.

        Items a subagent left to nil stay available for later rounds.
        """
        remaining = frozenset(range(self.source.item_count))
        out = []
        for stage in self.atom_round_matchings(index):
            out.append(remaining)
            remaining = remaining - {
                o for row in stage.rows for o, v in enumerate(row) if v
            }
        return tuple(out)


def _square_doubly_stochastic(matrix: SubagentMatrix) -> list[list[Fraction]]:
    """Split the nil column into unit-sum virtual columns by greedy filling."""
    rows = matrix.agent_count * matrix.round_count
    m = matrix.item_count
    virtual = rows - m
    square = [list(row[:m]) + [ZERO] * virtual for row in matrix.entries]
    col = 0
    room = ONE
    for row in range(rows):
        share = matrix.nil_share(row)
        while share > ZERO:
            poured = min(share, room)
            if poured == ZERO:
                raise AssertionError("nil shares exceed the virtual column capacity")
            square[row][m + col] += poured
            share -= poured
            room -= poured
            if room == ZERO and col < virtual - 1:
                col += 1
                room = ONE
    return square


def _perfect_matching(square: list[list[Fraction]]) -> list[int]:
    """Deterministic augmenting-path matching on the strictly positive entries."""
    size = len(square)
    col_owner = [-1] * size

    def try_row(row: int, visited: list[bool]) -> bool:
        for col in range(size):
            if square[row][col] > ZERO and not visited[col]:
                visited[col] = True
                if col_owner[col] < 0 or try_row(col_owner[col], visited):
                    col_owner[col] = row
                    return True
        return False

    for row in range(size):
        if not try_row(row, [False] * size):
            raise RuntimeError(
                "no perfect matching on the positive entries; "
                "the matrix is not doubly stochastic"
            )
    matching = [-1] * size
    for col, row in enumerate(col_owner):
        matching[row] = col
    return matching


def birkhoff_decompose(matrix: SubagentMatrix) -> DecomposedLottery:
    """Write the squared matrix as a convex combination of permutation matrices.

    Repeatedly extracts a perfect matching on the positive entries, subtracts
    it scaled by its minimum matched entry, and records the pair.  Terminates
    with at most s*s - 2s + 2 atoms for s = n * ceil(m/n).
    """
    square = _square_doubly_stochastic(matrix)
    size = len(square)
    m = matrix.item_count
    raw_atoms: list[tuple[Fraction, list[int]]] = []
    remaining = ONE
    while remaining > ZERO:
        matching = _perfect_matching(square)
        coefficient = min(square[row][matching[row]] for row in range(size))
        for row in range(size):
            square[row][matching[row]] -= coefficient
        raw_atoms.append((coefficient, matching))
        remaining -= coefficient
    bound = size * size - 2 * size + 2 if size > 1 else 1
    if len(raw_atoms) > bound:
        raise AssertionError(f"{len(raw_atoms)} atoms exceed the bound {bound}")
    atoms = tuple(
        (
            coefficient,
            tuple(col if col < m else None for col in matching),
        )
        for coefficient, matching in raw_atoms
    )
    return DecomposedLottery(matrix, atoms, _project(matrix, atoms))


def _project(
    matrix: SubagentMatrix, atoms: tuple[tuple[Fraction, tuple[int | None, ...]], ...]
) -> Lottery:
    pairs = []
    for coefficient, matching in atoms:
        bundles: dict[int, list[int]] = {}
        for row, target in enumerate(matching):
            if target is not None:
                bundles.setdefault(row // matrix.round_count, []).append(target)
        pairs.append(
            (
                coefficient,
                DeterministicAssignment.from_bundles(
                    matrix.agent_count, matrix.item_count, bundles
                ),
            )
        )
    return Lottery.of(pairs)


@dataclass(frozen=True)
class Realization:
    """One sampled draw: the assignment plus its recovered round structure."""

    atom_index: int
    assignment: DeterministicAssignment
    round_matchings: RoundDecomposition
    round_item_sets: tuple[frozenset[int], ...]


def sample_realization(decomposed: DecomposedLottery, seed: int) -> Realization:
    """Draw one atom with probability equal to its coefficient."""
    rng = ModularRng(seed)
    u = rng.unit()
    cumulative = ZERO
    index = decomposed.atom_count - 1
    for i, (coefficient, _) in enumerate(decomposed.atoms):
        cumulative += coefficient
        if u < cumulative:
            index = i
            break
    return Realization(
        index,
        decomposed.atom_assignment(index),
        RoundDecomposition(decomposed.atom_round_matchings(index)),
        decomposed.atom_round_item_sets(index),
    )


def gpbm_lottery(instance: Instance) -> tuple[Lottery, DecomposedLottery]:
    """Eat, expand, decompose: the ex-post lottery with per-atom round structure."""
    outcome = gpbm(instance, keep_trace=False)
    decomposed = birkhoff_decompose(expand_subagents(outcome.per_round))
    return decomposed.projected, decomposed
