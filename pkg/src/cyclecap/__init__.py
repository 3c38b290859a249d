"""Exact and asymptotic analysis of weighted random permutations whose
cycle lengths are capped.

The model: permutations of n elements weighted by theta per cycle,
conditioned on every cycle having length at most alpha. The package
computes the normalizing constant and exact distributions by dynamic
programming, solves the tilt (saddle-point) equation and its asymptotic
replacements, draws exact samples via a counter-based deterministic RNG,
and tests the limit laws (longest-cycle behaviour, Poisson point-process
structure, total-variation Poisson approximation, and the central limit
theorem for single cycle counts) against those exact references.
"""

from .errors import (
    ConfigError,
    ConstraintError,
    CycleCapError,
    DegenerateWeightsError,
    DomainError,
    NumericalError,
    RegimeError,
    SizeGuardError,
    StructuralError,
)
from .exact import (
    CoefficientTable,
    CompoundPoissonDist,
    TVReport,
    brute_force_distribution,
    chernoff_tail_bound,
    compound_poisson_pmf,
    cycle_count_distribution,
    egf_coefficients,
    exact_tv_distance,
    expected_cycle_count,
    joint_cycle_count_logpmf,
    longest_cycle_cdf,
    partition_function,
    poisson_means,
)
from .limits import (
    CLTReport,
    CriticalTable,
    ProcessBatteryReport,
    TightnessEstimate,
    build_process,
    check_longest_critical,
    check_longest_diverging,
    clt_battery,
    d_cutoff,
    exact_standardized_ks,
    gamma_floor_pmf,
    longest_k,
    poisson_process_battery,
    tightness_moment_estimate,
    tightness_scaling_check,
)
from .model import (
    AlphaRule,
    ConstraintModel,
    CycleType,
    Permutation,
    WeightArray,
    alpha_of,
    bounded_partitions,
    cycle_type_of,
    ewens_log_weight,
)
from .numerics import LogReal, log_sum_exp, log_sum_exp_value
from .saddle import (
    AsymptoticTilt,
    HCalculus,
    SaddleSolution,
    TruncatedSaddle,
    admissibility_report,
    asymptotic_x,
    clt_h_calculus,
    expected_count,
    mgf_Cm,
    mu,
    mu_alpha_of,
    regime_report,
    saddle_point_coefficient,
    solve_model_saddle,
    solve_saddle,
    solve_truncated_saddle,
    solve_y,
)
from .sampler import (
    RNG_ID,
    SamplerState,
    first_cycle_pmf,
    sample_batch,
    sample_cycle_type,
    sample_lengths,
    sample_permutation,
    sample_type_array,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "CycleCapError",
    "ConfigError",
    "DomainError",
    "ConstraintError",
    "StructuralError",
    "DegenerateWeightsError",
    "SizeGuardError",
    "NumericalError",
    "RegimeError",
    # numerics
    "LogReal",
    "log_sum_exp",
    "log_sum_exp_value",
    # model
    "AlphaRule",
    "alpha_of",
    "ConstraintModel",
    "WeightArray",
    "CycleType",
    "Permutation",
    "cycle_type_of",
    "ewens_log_weight",
    "bounded_partitions",
    # exact
    "CoefficientTable",
    "egf_coefficients",
    "partition_function",
    "CompoundPoissonDist",
    "compound_poisson_pmf",
    "poisson_means",
    "joint_cycle_count_logpmf",
    "TVReport",
    "exact_tv_distance",
    "chernoff_tail_bound",
    "brute_force_distribution",
    "cycle_count_distribution",
    "expected_cycle_count",
    "longest_cycle_cdf",
    # saddle
    "SaddleSolution",
    "solve_saddle",
    "solve_model_saddle",
    "mu",
    "mu_alpha_of",
    "AsymptoticTilt",
    "asymptotic_x",
    "solve_y",
    "TruncatedSaddle",
    "solve_truncated_saddle",
    "regime_report",
    "admissibility_report",
    "saddle_point_coefficient",
    "mgf_Cm",
    "expected_count",
    "HCalculus",
    "clt_h_calculus",
    # sampler
    "RNG_ID",
    "SamplerState",
    "first_cycle_pmf",
    "sample_cycle_type",
    "sample_permutation",
    "sample_batch",
    "sample_lengths",
    "sample_type_array",
    # limits
    "longest_k",
    "d_cutoff",
    "build_process",
    "gamma_floor_pmf",
    "check_longest_diverging",
    "CriticalTable",
    "check_longest_critical",
    "ProcessBatteryReport",
    "poisson_process_battery",
    "TightnessEstimate",
    "tightness_moment_estimate",
    "tightness_scaling_check",
    "CLTReport",
    "clt_battery",
    "exact_standardized_ks",
]
