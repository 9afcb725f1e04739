"""Exact-arithmetic randomized assignment mechanisms and property checkers."""

from .model import (
    Agent,
    DeterministicAssignment,
    InputError,
    Instance,
    Lottery,
    RandomAssignment,
    RoundDecomposition,
    SizeLimitError,
    lex_dominates,
    parse_instance,
    permute_instance,
    rank,
    sd_dominates,
    serialize_instance,
    top,
    upper_contour,
)
from .mechanisms import (
    GebmOutcome,
    GpbmOutcome,
    ModularRng,
    ebm,
    gebm_expected,
    gebm_lottery,
    gebm_sample,
    gpbm,
    rsdq,
    rsdq_lottery,
)
from .decomposition import (
    DecomposedLottery,
    SubagentMatrix,
    birkhoff_decompose,
    expand_subagents,
    gpbm_lottery,
    sample_realization,
)
from .properties import (
    PropertyReport,
    check_ef1,
    check_fcm,
    check_feri,
    check_fhr,
    check_lottery_expost,
    check_pe_acyclic,
    check_sd_ef,
    check_sd_wef,
    check_sde_acyclic,
    fcm_count,
    fcm_max,
)
from .oracle import (
    SpWitness,
    enumerate_assignments,
    fcm_bruteforce_max,
    neutrality_audit,
    pe_bruteforce,
    remark1_search,
    sd_wsp_audit,
)

__all__ = [
    "Agent",
    "DecomposedLottery",
    "DeterministicAssignment",
    "GebmOutcome",
    "GpbmOutcome",
    "InputError",
    "Instance",
    "Lottery",
    "ModularRng",
    "PropertyReport",
    "RandomAssignment",
    "RoundDecomposition",
    "SizeLimitError",
    "SpWitness",
    "SubagentMatrix",
    "birkhoff_decompose",
    "check_ef1",
    "check_fcm",
    "check_feri",
    "check_fhr",
    "check_lottery_expost",
    "check_pe_acyclic",
    "check_sd_ef",
    "check_sd_wef",
    "check_sde_acyclic",
    "ebm",
    "enumerate_assignments",
    "expand_subagents",
    "fcm_bruteforce_max",
    "fcm_count",
    "fcm_max",
    "gebm_expected",
    "gebm_lottery",
    "gebm_sample",
    "gpbm",
    "gpbm_lottery",
    "lex_dominates",
    "neutrality_audit",
    "parse_instance",
    "pe_bruteforce",
    "permute_instance",
    "rank",
    "remark1_search",
    "rsdq",
    "rsdq_lottery",
    "sample_realization",
    "sd_dominates",
    "sd_wsp_audit",
    "serialize_instance",
    "top",
    "upper_contour",
]
