"""Command-line surface: gen / run / check / decompose / audit / experiment.

Exit codes: 0 success, 1 strict-mode property violation (or a failed audit
self-check), 2 input or size error.  Every command is deterministic given its
full argument list including seeds.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import decomposition, mechanisms, oracle, properties
from .model import (
    DeterministicAssignment,
    InputError,
    Instance,
    SizeLimitError,
    assignment_from_payload,
    assignment_to_payload,
    format_fraction,
    lottery_from_payload,
    lottery_to_payload,
    parse_instance,
    random_from_payload,
    random_to_payload,
    serialize_instance,
)

CHECKABLE_PROPERTIES = (
    "pe",
    "sde",
    "fcm",
    "ef1",
    "sdwef",
    "sdef",
    "fhr",
    "feri",
    "expost-pe",
    "expost-fcm",
    "expost-ef1",
)

EXPERIMENT_PROPERTIES = ("fcm", "pe", "ef1")

EXPERIMENT_CSV_COLUMNS = (
    "mechanism",
    "n",
    "m",
    "trials",
    "seed",
    "first_choice_frac",
    "first_choice_float",
    "rank_histogram",
    "viol_fcm",
    "viol_pe",
    "viol_ef1",
    "wall_ms",
)


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_instance(path: str) -> Instance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read instance file {path}: {exc}") from exc
    return parse_instance(text)


def _load_artifact(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read artifact file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"artifact file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "kind" not in doc:
        raise InputError('artifact files must be JSON objects with a "kind" field')
    return doc


# ---------------------------------------------------------------------------
# gen


def cmd_gen(args: argparse.Namespace) -> int:
    if args.agents < 1 or args.items < 1:
        raise InputError("need at least one agent and one item")
    rng = mechanisms.ModularRng(args.seed)
    orders = []
    for _ in range(args.agents):
        order = list(range(args.items))
        rng.shuffle(order)
        orders.append(order)
    instance = oracle.instance_from_orders(orders, args.items)
    _write_text(args.out, serialize_instance(instance))
    return 0


# ---------------------------------------------------------------------------
# run


def _run_gebm(instance: Instance, args: argparse.Namespace) -> dict:
    if args.mode == "sample":
        outcome = mechanisms.gebm_sample(instance, args.seed)
        return {
            "kind": "assignment",
            "mechanism": "gebm",
            "mode": "sample",
            "seed": args.seed,
            "assignment": assignment_to_payload(instance, outcome.total),
            "rounds": [
                assignment_to_payload(instance, stage) for stage in outcome.per_round.rounds
            ],
            "round_items": [
                sorted(instance.items[o] for o in remaining)
                for remaining in outcome.remaining_items_per_round
            ],
        }
    if args.mode == "expected":
        matrix = mechanisms.gebm_expected(instance, args.max_branch)
        return {
            "kind": "random",
            "mechanism": "gebm",
            "mode": "expected",
            "matrix": random_to_payload(instance, matrix),
        }
    if args.mode == "lottery":
        lottery = mechanisms.gebm_lottery(instance, args.max_branch)
        return {
            "kind": "lottery",
            "mechanism": "gebm",
            "mode": "lottery",
            "atoms": lottery_to_payload(instance, lottery),
        }
    raise InputError(f"unknown gebm mode {args.mode!r} (use sample, expected or lottery)")


def _decomposed_payload(instance: Instance, decomposed) -> list[dict]:
    atoms = []
    for index, (coefficient, _) in enumerate(decomposed.atoms):
        atoms.append(
            {
                "prob": format_fraction(coefficient),
                "assignment": assignment_to_payload(
                    instance, decomposed.atom_assignment(index)
                ),
                "rounds": [
                    assignment_to_payload(instance, stage)
                    for stage in decomposed.atom_round_matchings(index)
                ],
            }
        )
    return atoms


def _run_gpbm(instance: Instance, args: argparse.Namespace) -> dict:
    if args.mode == "fractional":
        outcome = mechanisms.gpbm(instance, keep_trace=False)
        return {
            "kind": "random",
            "mechanism": "gpbm",
            "mode": "fractional",
            "matrix": random_to_payload(instance, outcome.total),
            "rounds": [
                random_to_payload(instance, stage) for stage in outcome.per_round.rounds
            ],
        }
    if args.mode == "lottery":
        _, decomposed = decomposition.gpbm_lottery(instance)
        return {
            "kind": "decomposed_lottery",
            "mechanism": "gpbm",
            "mode": "lottery",
            "atoms": _decomposed_payload(instance, decomposed),
        }
    raise InputError(f"unknown gpbm mode {args.mode!r} (use fractional or lottery)")


def _run_rsdq(instance: Instance, args: argparse.Namespace) -> dict:
    if args.mode == "lottery":
        lottery = mechanisms.rsdq_lottery(instance, args.quota)
        return {
            "kind": "lottery",
            "mechanism": "rsdq",
            "mode": "lottery",
            "atoms": lottery_to_payload(instance, lottery),
        }
    if args.mode == "sample":
        if args.order:
            names = [name.strip() for name in args.order.split(",")]
            try:
                order = [instance.agent_index[name] for name in names]
            except KeyError as exc:
                raise InputError(f"unknown agent {exc.args[0]!r} in --order") from exc
        else:
            order = list(range(instance.agent_count))
            mechanisms.ModularRng(args.seed).shuffle(order)
        assignment = mechanisms.rsdq(instance, order, args.quota)
        return {
            "kind": "assignment",
            "mechanism": "rsdq",
            "mode": "sample",
            "priority_order": [instance.agents[j].name for j in order],
            "assignment": assignment_to_payload(instance, assignment),
        }
    raise InputError(f"unknown rsdq mode {args.mode!r} (use sample or lottery)")


def cmd_run(args: argparse.Namespace) -> int:
    instance = _load_instance(args.instance)
    if args.mechanism == "gebm":
        doc = _run_gebm(instance, args)
    elif args.mechanism == "gpbm":
        doc = _run_gpbm(instance, args)
    elif args.mechanism == "rsdq":
        doc = _run_rsdq(instance, args)
    else:
        raise InputError(f"unknown mechanism {args.mechanism!r} (use gebm, gpbm or rsdq)")
    _write_text(args.out, json.dumps(doc, indent=2) + "\n")
    return 0


# ---------------------------------------------------------------------------
# check


def _check_one(
    instance: Instance, prop: str, doc: dict
) -> properties.PropertyReport:
    kind = doc["kind"]

    def need(*kinds: str) -> None:
        if kind not in kinds:
            raise InputError(
                f"property {prop!r} cannot be checked on a {kind!r} artifact"
            )

    if prop in ("pe", "fcm", "ef1", "fhr", "feri"):
        need("assignment")
        assignment = assignment_from_payload(instance, doc["assignment"])
        if prop == "pe":
            return properties.check_pe_acyclic(instance, assignment)
        if prop == "fcm":
            return properties.check_fcm(instance, assignment)
        if prop == "ef1":
            return properties.check_ef1(instance, assignment)
        if prop == "fhr":
            return properties.check_fhr(instance, assignment)
        return properties.check_feri(instance, assignment, range(instance.item_count))
    if prop in ("sde", "sdwef", "sdef"):
        need("random", "assignment")
        if kind == "random":
            matrix = random_from_payload(instance, doc["matrix"])
        else:
            matrix = assignment_from_payload(instance, doc["assignment"]).to_random()
        if prop == "sde":
            return properties.check_sde_acyclic(instance, matrix)
        if prop == "sdwef":
            return properties.check_sd_wef(instance, matrix)
        return properties.check_sd_ef(instance, matrix)
    if prop.startswith("expost-"):
        need("lottery", "decomposed_lottery")
        lottery = lottery_from_payload(instance, doc["atoms"])
        inner = prop.removeprefix("expost-")
        return properties.check_lottery_expost(instance, lottery, [inner])[inner]
    raise InputError(f"unknown property {prop!r}")


def cmd_check(args: argparse.Namespace) -> int:
    instance = _load_instance(args.instance)
    doc = _load_artifact(args.input)
    requested = [p.strip() for p in args.properties.split(",") if p.strip()]
    if not requested:
        raise InputError("no properties requested")
    for prop in requested:
        if prop not in CHECKABLE_PROPERTIES:
            raise InputError(f"unknown property {prop!r}")
    reports = [_check_one(instance, prop, doc) for prop in requested]
    for report in reports:
        status = "ok" if report.verdict else "VIOLATED"
        print(f"{report.name}: {status}")
    if args.out:
        _write_text(
            args.out, json.dumps([r.to_payload() for r in reports], indent=2) + "\n"
        )
    if args.strict and any(not r.verdict for r in reports):
        return 1
    return 0


# ---------------------------------------------------------------------------
# decompose


def cmd_decompose(args: argparse.Namespace) -> int:
    instance = _load_instance(args.instance)
    _, decomposed = decomposition.gpbm_lottery(instance)
    doc = {
        "kind": "decomposed_lottery",
        "mechanism": "gpbm",
        "atoms": _decomposed_payload(instance, decomposed),
    }
    _write_text(args.out, json.dumps(doc, indent=2) + "\n")
    return 0


# ---------------------------------------------------------------------------
# audit


def _parse_permutation(instance: Instance, text: str) -> dict[int, int]:
    mapping: dict[int, int] = {}
    for pair in text.split(","):
        src, _, dst = pair.partition(":")
        src = src.strip()
        dst = dst.strip()
        if src not in instance.item_index or dst not in instance.item_index:
            raise InputError(f"unknown item in permutation pair {pair!r}")
        mapping[instance.item_index[src]] = instance.item_index[dst]
    for o in range(instance.item_count):
        mapping.setdefault(o, o)
    return mapping


def cmd_audit(args: argparse.Namespace) -> int:
    if args.what in ("sp", "neutrality") and args.instance is None:
        raise InputError(f"audit {args.what} needs --instance")
    if args.what == "sp":
        instance = _load_instance(args.instance)
        witness = oracle.sd_wsp_audit(
            args.mechanism, instance, max_items=args.max_items, max_branches=args.max_branch
        )
        if witness is None:
            print("no witness")
            _write_text(args.out, json.dumps({"witness": None}, indent=2) + "\n")
            return 0
        print(
            f"witness: agent {instance.agents[witness.agent].name} misreports "
            f"{' > '.join(instance.items[o] for o in witness.misreport)}"
        )
        _write_text(
            args.out, json.dumps({"witness": witness.to_payload()}, indent=2) + "\n"
        )
        if not witness.replay(args.max_branch):
            print("reproducibility self-check FAILED", file=sys.stderr)
            return 1
        return 0
    if args.what == "neutrality":
        instance = _load_instance(args.instance)
        if args.perm:
            permutations = [_parse_permutation(instance, args.perm)]
        else:
            permutations = [
                {**{o: o for o in range(instance.item_count)}, a: b, b: a}
                for a in range(instance.item_count)
                for b in range(a + 1, instance.item_count)
            ]
        results = []
        all_equal = True
        for perm in permutations:
            report = oracle.neutrality_audit(
                args.mechanism, instance, perm, max_branches=args.max_branch
            )
            all_equal = all_equal and report.verdict
            results.append(report.to_payload())
        print("equal" if all_equal else "UNEQUAL")
        _write_text(args.out, json.dumps(results, indent=2) + "\n")
        return 0
    if args.what == "remark1":
        found = oracle.remark1_search(
            args.max, args.max, max_profiles=args.max_enum, max_branches=args.max_branch
        )
        if found is None:
            print("no witness")
            _write_text(args.out, json.dumps({"witness": None}, indent=2) + "\n")
            return 0
        instance, prop = found
        print(f"witness profile found; expected output fails {prop}")
        _write_text(
            args.out,
            json.dumps(
                {"witness": {"profile": serialize_instance(instance), "fails": prop}},
                indent=2,
            )
            + "\n",
        )
        return 0
    raise InputError(f"unknown audit {args.what!r} (use sp, neutrality or remark1)")


# ---------------------------------------------------------------------------
# experiment


def _experiment_trial(
    mechanism: str, instance: Instance, seed: int
) -> DeterministicAssignment:
    if mechanism == "gebm":
        return mechanisms.gebm_sample(instance, seed).total
    if mechanism == "gpbm":
        _, decomposed = decomposition.gpbm_lottery(instance)
        return decomposition.sample_realization(decomposed, seed).assignment
    if mechanism == "rsdq":
        order = list(range(instance.agent_count))
        mechanisms.ModularRng(seed).shuffle(order)
        return mechanisms.rsdq(instance, order)
    raise InputError(f"unknown mechanism {mechanism!r}")


def run_experiment(config: dict) -> list[dict]:
    """Run the Monte Carlo grid and return one result row per cell.

    Each trial draws an impartial-culture instance, runs the mechanism once,
    and checks the configured deterministic properties on the realized
    assignment.  Sub-seeds are derived deterministically from the master seed,
    the cell index, and the trial index.
    """
    mechanisms_list = config.get("mechanisms")
    sizes = config.get("sizes")
    trials = config.get("trials")
    seed = config.get("seed", 0)
    props = config.get("properties", list(EXPERIMENT_PROPERTIES))
    if (
        not isinstance(mechanisms_list, list)
        or not mechanisms_list
        or not all(m in ("gebm", "gpbm", "rsdq") for m in mechanisms_list)
    ):
        raise InputError('config "mechanisms" must be a nonempty list over gebm/gpbm/rsdq')
    if not isinstance(sizes, list) or not all(
        isinstance(cell, list)
        and len(cell) == 2
        and all(isinstance(v, int) and v >= 1 for v in cell)
        for cell in sizes
    ):
        raise InputError('config "sizes" must be a list of [agents, items] pairs')
    if not isinstance(trials, int) or trials < 1:
        raise InputError('config "trials" must be a positive integer')
    for prop in props:
        if prop not in EXPERIMENT_PROPERTIES:
            raise InputError(f"unknown experiment property {prop!r}")

    rows = []
    cell_index = 0
    for mechanism in mechanisms_list:
        for n, m in sizes:
            cell_index += 1
            start = time.perf_counter()
            first_choice_total = Fraction(0)
            rank_histogram = [0] * m
            violations = {prop: 0 for prop in props}
            for trial in range(trials):
                sub_seed = seed * 1_000_003 + cell_index * 10_007 + trial
                rng = mechanisms.ModularRng(sub_seed)
                orders = []
                for _ in range(n):
                    order = list(range(m))
                    rng.shuffle(order)
                    orders.append(order)
                instance = oracle.instance_from_orders(orders, m)
                assignment = _experiment_trial(mechanism, instance, sub_seed + 1)
                first_choice_total += Fraction(properties.fcm_count(instance, assignment), n)
                for j in range(n):
                    for o in assignment.bundles[j]:
                        rank_histogram[instance.global_rank[j][o] - 1] += 1
                for prop in props:
                    if prop == "fcm":
                        ok = properties.check_fcm(instance, assignment).verdict
                    elif prop == "pe":
                        ok = properties.check_pe_acyclic(instance, assignment).verdict
                    else:
                        ok = properties.check_ef1(instance, assignment).verdict
                    if not ok:
                        violations[prop] += 1
            elapsed_ms = (time.perf_counter() - start) * 1000.0
            frac = first_choice_total / trials
            rows.append(
                {
                    "mechanism": mechanism,
                    "n": n,
                    "m": m,
                    "trials": trials,
                    "seed": seed,
                    "first_choice_frac": format_fraction(frac),
                    "first_choice_float": float(frac),
                    "rank_histogram": "|".join(str(c) for c in rank_histogram),
                    "viol_fcm": violations.get("fcm", ""),
                    "viol_pe": violations.get("pe", ""),
                    "viol_ef1": violations.get("ef1", ""),
                    "wall_ms": f"{elapsed_ms:.3f}",
                }
            )
    return rows


def cmd_experiment(args: argparse.Namespace) -> int:
    try:
        config = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise InputError(f"cannot read config {args.config}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from exc
    rows = run_experiment(config)
    out = config.get("out", args.out)
    if out is None or out == "-":
        writer = csv.DictWriter(sys.stdout, fieldnames=EXPERIMENT_CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    else:
        with open(out, "w", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=EXPERIMENT_CSV_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairassign",
        description="Randomized assignment mechanisms with exact property checking",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate an impartial-culture instance")
    p_gen.add_argument("--agents", type=int, required=True)
    p_gen.add_argument("--items", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", default=None)
    p_gen.set_defaults(func=cmd_gen)

    p_run = sub.add_parser("run", help="run a mechanism on an instance")
    p_run.add_argument("--instance", required=True)
    p_run.add_argument("--mechanism", required=True)
    p_run.add_argument("--mode", default="sample")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--quota", type=int, default=None)
    p_run.add_argument("--order", default=None, help="rsdq priority order (agent names)")
    p_run.add_argument("--max-branch", type=int, default=mechanisms.DEFAULT_BRANCH_CAP)
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="check properties of a mechanism output")
    p_check.add_argument("--instance", required=True)
    p_check.add_argument("--input", required=True, help="artifact file written by run")
    p_check.add_argument("--properties", required=True, help="comma-separated list")
    p_check.add_argument("--strict", action="store_true")
    p_check.add_argument("--out", default=None)
    p_check.set_defaults(func=cmd_check)

    p_dec = sub.add_parser("decompose", help="realize the eating mechanism as a lottery")
    p_dec.add_argument("--instance", required=True)
    p_dec.add_argument("--out", default=None)
    p_dec.set_defaults(func=cmd_decompose)

    p_audit = sub.add_parser("audit", help="strategyproofness / neutrality / search audits")
    p_audit.add_argument("what", choices=["sp", "neutrality", "remark1"])
    p_audit.add_argument("--mechanism", default="gebm")
    p_audit.add_argument("--instance", default=None)
    p_audit.add_argument("--perm", default=None, help='item permutation, e.g. "c:d,d:c"')
    p_audit.add_argument("--max", type=int, default=3, help="profile search bound (n = m)")
    p_audit.add_argument("--max-items", type=int, default=6, help="sp audit item limit")
    p_audit.add_argument("--max-branch", type=int, default=mechanisms.DEFAULT_BRANCH_CAP)
    p_audit.add_argument("--max-enum", type=int, default=oracle.DEFAULT_ENUM_CAP)
    p_audit.add_argument("--out", default=None)
    p_audit.set_defaults(func=cmd_audit)

    p_exp = sub.add_parser("experiment", help="seeded Monte Carlo property report")
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--out", default=None)
    p_exp.set_defaults(func=cmd_experiment)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, SizeLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
