"""Independent ground truth and adversarial audits.

Brute-force routines here deliberately avoid the graph-based checkers in
`properties`: efficiency is re-derived by exhaustive enumeration so the two
routes can be compared, and the misreport auditor replays the exact mechanisms
under every possible unilateral deviation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from .mechanisms import DEFAULT_BRANCH_CAP, gebm_expected, gebm_lottery, gpbm
from .model import (
    Agent,
    DeterministicAssignment,
    InputError,
    Instance,
    RandomAssignment,
    SizeLimitError,
    format_fraction,
    lex_dominates,
    permute_instance,
    permute_lottery,
    permute_random,
    sd_dominates,
    serialize_instance,
)
from .properties import PropertyReport, check_sd_ef, check_sde_acyclic, fcm_count

DEFAULT_ENUM_CAP = 10**6


def default_item_names(item_count: int) -> tuple[str, ...]:
    if item_count <= 26:
        return tuple(chr(ord("a") + i) for i in range(item_count))
    width = len(str(item_count))
    return tuple(f"o{i + 1:0{width}d}" for i in range(item_count))


def default_agent_names(agent_count: int) -> tuple[str, ...]:
    return tuple(str(j + 1) for j in range(agent_count))


def instance_from_orders(orders: Sequence[Sequence[int]], item_count: int) -> Instance:
    """Build an instance from index-level preference orders."""
    items = default_item_names(item_count)
    names = default_agent_names(len(orders))
    return Instance(
        items,
        tuple(
            Agent(name, tuple(items[o] for o in order))
            for name, order in zip(names, orders)
        ),
    )


# ---------------------------------------------------------------------------
# Exhaustive enumeration


def enumerate_assignments(
    instance: Instance, balanced_only: bool = False, cap: int = DEFAULT_ENUM_CAP
) -> Iterator[DeterministicAssignment]:
    """Every complete assignment (all n^m functions items -> agents).

    With `balanced_only`, keeps only assignments whose bundle sizes are all
    floor(m/n) or ceil(m/n).
    """
    n = instance.agent_count
    m = instance.item_count
    if n**m > cap:
        raise SizeLimitError(f"enumeration of {n}^{m} assignments exceeds the cap {cap}")
    low = m // n
    high = -(-m // n)
    for owners in itertools.product(range(n), repeat=m):
        if balanced_only:
            counts = [0] * n
            for j in owners:
                counts[j] += 1
            if any(c < low or c > high for c in counts):
                continue
        rows = [[0] * m for _ in range(n)]
        for o, j in enumerate(owners):
            rows[j][o] = 1
        yield DeterministicAssignment._from_validated_rows(tuple(tuple(row) for row in rows))


def pe_bruteforce(
    instance: Instance, assignment: DeterministicAssignment, cap: int = DEFAULT_ENUM_CAP
) -> bool:
    """Pareto efficiency by exhaustion: no reallocation lexicographically
    improves a nonempty agent set while leaving everyone else's bundle intact."""
    if not assignment.is_complete:
        raise InputError("Pareto efficiency is checked on complete assignments")
    base = [assignment.indicator(j) for j in range(instance.agent_count)]
    for candidate in enumerate_assignments(instance, cap=cap):
        changed = [
            j for j in range(instance.agent_count) if candidate.rows[j] != assignment.rows[j]
        ]
        if not changed:
            continue
        if all(
            lex_dominates(instance.pref_order[j], candidate.indicator(j), base[j])
            for j in changed
        ):
            return False
    return True


def fcm_bruteforce_max(instance: Instance, cap: int = DEFAULT_ENUM_CAP) -> int:
    """Maximal first-choice count over every complete assignment."""
    return max(fcm_count(instance, a) for a in enumerate_assignments(instance, cap=cap))


# ---------------------------------------------------------------------------
# Strategyproofness auditing


@dataclass(frozen=True)
class SpWitness:
    """A profitable unilateral misreport for an exact mechanism.

    The manipulated expected allocation row stochastically dominates the
    truthful one under the agent's true order and differs from it.
    """

    mechanism: str
    instance: Instance
    agent: int
    misreport: tuple[int, ...]
    truthful_row: tuple[Fraction, ...]
    manipulated_row: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        order = self.instance.pref_order[self.agent]
        if self.truthful_row == self.manipulated_row:
            raise InputError("witness rows must differ")
        if not sd_dominates(order, self.manipulated_row, self.truthful_row):
            raise InputError("witness rows must exhibit dominance under the true order")

    def misreport_instance(self) -> Instance:
        return self.instance.with_agent_order(self.agent, self.misreport)

    def replay(self, max_branches: int = DEFAULT_BRANCH_CAP) -> bool:
        """Recompute both mechanism runs and confirm both rows bit-exactly."""
        truthful = _expected_matrix(self.mechanism, self.instance, max_branches)
        manipulated = _expected_matrix(self.mechanism, self.misreport_instance(), max_branches)
        return (
            truthful.row(self.agent) == self.truthful_row
            and manipulated.row(self.agent) == self.manipulated_row
        )

    def dominance_trace(self) -> list[dict]:
        """Cumulative shares along the true order, for both rows."""
        order = self.instance.pref_order[self.agent]
        trace = []
        cum_truthful = Fraction(0)
        cum_manipulated = Fraction(0)
        for o in order:
            cum_truthful += self.truthful_row[o]
            cum_manipulated += self.manipulated_row[o]
            trace.append(
                {
                    "item": self.instance.items[o],
                    "cumulative_truthful": format_fraction(cum_truthful),
                    "cumulative_manipulated": format_fraction(cum_manipulated),
                }
            )
        return trace

    def to_payload(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "agent": self.instance.agents[self.agent].name,
            "true_profile": serialize_instance(self.instance),
            "misreport_profile": serialize_instance(self.misreport_instance()),
            "misreport": [self.instance.items[o] for o in self.misreport],
            "truthful_row": [format_fraction(v) for v in self.truthful_row],
            "manipulated_row": [format_fraction(v) for v in self.manipulated_row],
            "dominance_trace": self.dominance_trace(),
        }


def _expected_matrix(
    mechanism: str, instance: Instance, max_branches: int
) -> RandomAssignment:
    if mechanism == "gebm":
        return gebm_expected(instance, max_branches)
    if mechanism == "gpbm":
        return gpbm(instance, keep_trace=False).total
    raise InputError(f"unknown exact mechanism {mechanism!r}")


def sd_wsp_audit(
    mechanism: str,
    instance: Instance,
    max_items: int = 6,
    max_branches: int = DEFAULT_BRANCH_CAP,
) -> SpWitness | None:
    """Search every unilateral misreport for a dominance-improving deviation.

    Agents and the m! reported orders are scanned in a fixed order, so the
    first witness is deterministic.  Returns None when no deviation helps.
    """
    m = instance.item_count
    if m > max_items:
        raise SizeLimitError(
            f"misreport audit over {m}! orders per agent exceeds max_items={max_items}"
        )
    truthful = _expected_matrix(mechanism, instance, max_branches)
    for agent in range(instance.agent_count):
        true_order = instance.pref_order[agent]
        truthful_row = truthful.row(agent)
        for reported in itertools.permutations(range(m)):
            if reported == true_order:
                continue
            manipulated = _expected_matrix(
                mechanism, instance.with_agent_order(agent, reported), max_branches
            )
            row = manipulated.row(agent)
            if row != truthful_row and sd_dominates(true_order, row, truthful_row):
                return SpWitness(
                    mechanism, instance, agent, tuple(reported), truthful_row, row
                )
    return None


# ---------------------------------------------------------------------------
# Neutrality auditing


def neutrality_audit(
    mechanism: str,
    instance: Instance,
    permutation: Mapping[int, int],
    max_branches: int = DEFAULT_BRANCH_CAP,
) -> PropertyReport:
    """Compare mechanism(relabelled instance) against relabelled mechanism output.

    Both sides are computed exactly: matrices for the eating mechanism,
    lotteries for the eager Boston mechanism.
    """
    relabelled = permute_instance(instance, permutation)
    if mechanism == "gebm":
        lhs = gebm_lottery(relabelled, max_branches)
        rhs = permute_lottery(gebm_lottery(instance, max_branches), permutation)
        equal = lhs == rhs
    elif mechanism == "gpbm":
        lhs_matrix = gpbm(relabelled, keep_trace=False).total
        rhs_matrix = permute_random(gpbm(instance, keep_trace=False).total, permutation)
        equal = lhs_matrix == rhs_matrix
    else:
        raise InputError(f"unknown exact mechanism {mechanism!r}")
    if equal:
        return PropertyReport("neutrality", True)
    return PropertyReport(
        "neutrality",
        False,
        {"permutation": {instance.items[a]: instance.items[b] for a, b in permutation.items()}},
    )


# ---------------------------------------------------------------------------
# Counterexample search for the exact eager mechanism


def remark1_search(
    bound_n: int,
    bound_m: int,
    properties: Sequence[str] = ("sde", "sdef"),
    max_profiles: int = DEFAULT_ENUM_CAP,
    max_branches: int = DEFAULT_BRANCH_CAP,
) -> tuple[Instance, str] | None:
    """First preference profile whose exact expected output fails one of the
    requested ex-ante properties ("sde", "sdef").

    Profiles with n = bound_n agents over m = bound_m items are enumerated in
    lexicographic order.
    """
    for prop in properties:
        if prop not in ("sde", "sdef"):
            raise InputError(f"unknown searchable property {prop!r}")
    total = math.factorial(bound_m) ** bound_n
    if total > max_profiles:
        raise SizeLimitError(
            f"profile enumeration of {total} profiles exceeds the cap {max_profiles}"
        )
    orders = list(itertools.permutations(range(bound_m)))
    for profile in itertools.product(orders, repeat=bound_n):
        instance = instance_from_orders(profile, bound_m)
        expected = gebm_expected(instance, max_branches)
        if "sde" in properties and not check_sde_acyclic(instance, expected).verdict:
            return instance, "sde"
        if "sdef" in properties and not check_sd_ef(instance, expected).verdict:
            return instance, "sdef"
    return None
