"""Decision procedures for efficiency and fairness properties.

Every checker returns a `PropertyReport`; a false verdict always carries a
witness that can be re-checked independently (a cycle of items, an agent pair,
or a failing lottery atom).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .model import (
    DeterministicAssignment,
    InputError,
    Instance,
    Lottery,
    RandomAssignment,
    ZERO,
    sd_dominates,
)


@dataclass(frozen=True)
class PropertyReport:
    name: str
    verdict: bool
    witness: object | None = None

    def __post_init__(self) -> None:
        if not self.verdict and self.witness is None:
            raise InputError("a failing report must carry a witness")

    def to_payload(self) -> dict:
        return {"property": self.name, "verdict": self.verdict, "witness": self.witness}


# ---------------------------------------------------------------------------
# Item-relation acyclicity (efficiency)


def _first_cycle(item_count: int, edges: Mapping[int, set[int]]) -> list[int] | None:
    """First directed cycle under depth-first search with ascending vertex order."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * item_count
    for start in range(item_count):
        if color[start] != WHITE:
            continue
        stack: list[tuple[int, Iterable[int]]] = [(start, iter(sorted(edges.get(start, ()))))]
        path = [start]
        color[start] = GRAY
        while stack:
            node, neighbours = stack[-1]
            advanced = False
            for nxt in neighbours:
                if color[nxt] == GRAY:
                    return path[path.index(nxt):] + [nxt]
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    path.append(nxt)
                    stack.append((nxt, iter(sorted(edges.get(nxt, ())))))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                path.pop()
                stack.pop()
    return None


def _cycle_witness(instance: Instance, cycle: list[int]) -> dict:
    return {"cycle": [instance.items[o] for o in cycle]}


def check_pe_acyclic(instance: Instance, assignment: DeterministicAssignment) -> PropertyReport:
    """Pareto efficiency via acyclicity of the held-item improvement relation.

    There is an edge from item o to item o' whenever some holder of o strictly
    prefers o'.
    """
    if not assignment.is_complete:
        raise InputError("Pareto efficiency is checked on complete assignments")
    edges: dict[int, set[int]] = {}
    for j in range(instance.agent_count):
        order = instance.pref_order[j]
        better: list[int] = []
        held = assignment.bundles[j]
        for o in order:
            if o in held and better:
                edges.setdefault(o, set()).update(better)
            better.append(o)
    cycle = _first_cycle(instance.item_count, edges)
    if cycle is None:
        return PropertyReport("pe", True)
    return PropertyReport("pe", False, _cycle_witness(instance, cycle))


def check_sde_acyclic(
    instance: Instance,
    matrix: RandomAssignment,
    require_fully_allocating: bool = True,
) -> PropertyReport:
    """Ex-ante efficiency via acyclicity over positive probabilistic shares.

    Total outputs must be fully allocating; pass `require_fully_allocating=False`
    to run the same acyclicity criterion on one round's partial matrix.
    """
    if require_fully_allocating and not matrix.is_fully_allocating:
        raise InputError("ex-ante efficiency is checked on fully allocating matrices")
    edges: dict[int, set[int]] = {}
    for j in range(instance.agent_count):
        order = instance.pref_order[j]
        row = matrix.row(j)
        better: list[int] = []
        for o in order:
            if row[o] > ZERO and better:
                edges.setdefault(o, set()).update(better)
            better.append(o)
    cycle = _first_cycle(instance.item_count, edges)
    if cycle is None:
        return PropertyReport("sde", True)
    return PropertyReport("sde", False, _cycle_witness(instance, cycle))


# ---------------------------------------------------------------------------
# First-choice maximality


def fcm_count(instance: Instance, assignment: DeterministicAssignment) -> int:
    """How many agents hold their global first choice."""
    return sum(
        1
        for j in range(instance.agent_count)
        if instance.first_choices[j] in assignment.bundles[j]
    )


def fcm_max(instance: Instance) -> int:
    """The attainable maximum: the number of distinct first-choice items."""
    return len(set(instance.first_choices))


def check_fcm(instance: Instance, assignment: DeterministicAssignment) -> PropertyReport:
    """True iff every item that is somebody's first choice goes to such an agent."""
    if not assignment.is_complete:
        raise InputError("first-choice maximality is checked on complete assignments")
    for o in sorted(set(instance.first_choices)):
        holder = assignment.holders[o]
        if instance.first_choices[holder] != o:
            return PropertyReport(
                "fcm",
                False,
                {"item": instance.items[o], "holder": instance.agents[holder].name},
            )
    return PropertyReport("fcm", True)


# ---------------------------------------------------------------------------
# Envy


def check_ef1(instance: Instance, assignment: DeterministicAssignment) -> PropertyReport:
    """Envy-freeness up to one item, compared through stochastic dominance.

    An empty envied bundle passes vacuously; the removed item may be any item
    of the envied bundle.
    """
    for j in range(instance.agent_count):
        order = instance.pref_order[j]
        own = assignment.indicator(j)
        for k in range(instance.agent_count):
            if j == k:
                continue
            envied = assignment.bundles[k]
            if not envied:
                continue
            ok = False
            for removed in sorted(envied):
                reduced = tuple(
                    v if o != removed else ZERO
                    for o, v in enumerate(assignment.indicator(k))
                )
                if sd_dominates(order, own, reduced):
                    ok = True
                    break
            if not ok:
                return PropertyReport(
                    "ef1",
                    False,
                    {
                        "envious": instance.agents[j].name,
                        "envied": instance.agents[k].name,
                    },
                )
    return PropertyReport("ef1", True)


def check_sd_wef(instance: Instance, matrix: RandomAssignment) -> PropertyReport:
    """Weak ex-ante envy-freeness: no agent's row is sd-dominated by a
    different row under the agent's own order."""
    if not matrix.is_fully_allocating:
        raise InputError("ex-ante envy is checked on fully allocating matrices")
    for j in range(instance.agent_count):
        order = instance.pref_order[j]
        own = matrix.row(j)
        for k in range(instance.agent_count):
            if j == k:
                continue
            other = matrix.row(k)
            if other != own and sd_dominates(order, other, own):
                return PropertyReport(
                    "sdwef",
                    False,
                    {
                        "envious": instance.agents[j].name,
                        "envied": instance.agents[k].name,
                    },
                )
    return PropertyReport("sdwef", True)


def check_sd_ef(instance: Instance, matrix: RandomAssignment) -> PropertyReport:
    """Strong ex-ante envy-freeness: every row sd-dominates every other row
    under the owner's order."""
    if not matrix.is_fully_allocating:
        raise InputError("ex-ante envy is checked on fully allocating matrices")
    for j in range(instance.agent_count):
        order = instance.pref_order[j]
        own = matrix.row(j)
        for k in range(instance.agent_count):
            if j != k and not sd_dominates(order, own, matrix.row(k)):
                return PropertyReport(
                    "sdef",
                    False,
                    {
                        "envious": instance.agents[j].name,
                        "envied": instance.agents[k].name,
                    },
                )
    return PropertyReport("sdef", True)


# ---------------------------------------------------------------------------
# Rank-based matching properties


def _domain_ranks(
    instance: Instance, domain: frozenset[int]
) -> tuple[dict[int, int], ...]:
    ranks = []
    for order in instance.pref_order:
        filtered = [o for o in order if o in domain]
        ranks.append({o: pos + 1 for pos, o in enumerate(filtered)})
    return tuple(ranks)


def check_fhr(
    instance: Instance,
    assignment: DeterministicAssignment,
    ranking_domain: Iterable[int] | None = None,
) -> PropertyReport:
    """Favoring higher ranks: for any held items o_j and o_k, either the holder
    of o_j ranks it at least as high as the other agent does, or the other
    agent ranks its own item strictly above o_j.  Ranks are computed within
    `ranking_domain` (the full item set by default)."""
    domain = (
        frozenset(range(instance.item_count))
        if ranking_domain is None
        else frozenset(ranking_domain)
    )
    if not domain <= frozenset(range(instance.item_count)):
        raise InputError("ranking domain contains unknown item indices")
    allocated = {o for bundle in assignment.bundles for o in bundle}
    if not allocated <= domain:
        raise InputError("assignment allocates items outside the ranking domain")
    ranks = _domain_ranks(instance, domain)
    for j in range(instance.agent_count):
        for o_j in sorted(assignment.bundles[j]):
            for k in range(instance.agent_count):
                if k == j:
                    continue
                if ranks[j][o_j] <= ranks[k][o_j]:
                    continue
                for o_k in sorted(assignment.bundles[k]):
                    if not ranks[k][o_k] < ranks[k][o_j]:
                        return PropertyReport(
                            "fhr",
                            False,
                            {
                                "holder": instance.agents[j].name,
                                "item": instance.items[o_j],
                                "other": instance.agents[k].name,
                                "other_item": instance.items[o_k],
                            },
                        )
    return PropertyReport("fhr", True)


def check_feri(
    instance: Instance,
    matching: DeterministicAssignment,
    item_domain: Iterable[int],
) -> PropertyReport:
    """Favoring eagerness for remaining items, tier by tier.

    Tier r collects the items that are the favourite remaining item of some
    agent whose own match is not in an earlier tier.  Every tier item must be
    held by an agent whose favourite remaining item it is.
    """
    domain = frozenset(item_domain)
    if not domain <= frozenset(range(instance.item_count)):
        raise InputError("item domain contains unknown item indices")
    if not matching.is_matching:
        raise InputError("eagerness is checked on one-to-one matchings")
    allocated = {o for bundle in matching.bundles for o in bundle}
    if not allocated <= domain:
        raise InputError("matching allocates items outside the item domain")
    ranks = instance.global_rank
    remaining = set(domain)
    served: set[int] = set()
    while remaining:
        active = []
        for j in range(instance.agent_count):
            match = matching.bundles[j]
            if not match or next(iter(match)) not in served:
                active.append(j)
        if not active:
            break
        tier = {min(remaining, key=ranks[j].__getitem__) for j in active}
        for o in sorted(tier):
            holder = matching.holders[o]
            if holder is None:
                return PropertyReport(
                    "feri",
                    False,
                    {"item": instance.items[o], "holder": None},
                )
            if min(remaining, key=ranks[holder].__getitem__) != o:
                return PropertyReport(
                    "feri",
                    False,
                    {"item": instance.items[o], "holder": instance.agents[holder].name},
                )
        served |= tier
        remaining -= tier
    return PropertyReport("feri", True)


# ---------------------------------------------------------------------------
# Ex-post lifting


_DETERMINISTIC_CHECKERS = {
    "pe": check_pe_acyclic,
    "fcm": check_fcm,
    "ef1": check_ef1,
}


def check_lottery_expost(
    instance: Instance, lottery: Lottery, properties: Sequence[str]
) -> dict[str, PropertyReport]:
    """Run deterministic checkers on every atom; a property holds ex-post iff
    it holds on each atom of the convex combination."""
    reports: dict[str, PropertyReport] = {}
    for prop in properties:
        if prop not in _DETERMINISTIC_CHECKERS:
            raise InputError(f"unknown ex-post property {prop!r}")
        checker = _DETERMINISTIC_CHECKERS[prop]
        verdict = PropertyReport(f"expost-{prop}", True)
        for index, (_, assignment) in enumerate(lottery.atoms):
            inner = checker(instance, assignment)
            if not inner.verdict:
                verdict = PropertyReport(
                    f"expost-{prop}",
                    False,
                    {"atom": index, "inner": inner.to_payload()},
                )
                break
        reports[prop] = verdict
    return reports
