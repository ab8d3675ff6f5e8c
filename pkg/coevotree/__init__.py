# Coevotree Core Library
from .config import Settings, get_settings
from .constants import (
    ModelConstants,
    compute_constants,
    compute_kappa0,
    compute_R,
    perron_eigen,
    predicted_degree_exponent,
    predicted_pagerank_exponent,
    solve_qstar,
    solve_s0,
    truncated_kernel,
    verify_subinvariant,
)
from .distribution import StepDistribution, parse_pmf_spec
from .errors import CoevoError
from .harness import ExperimentKind, ExperimentReport, ExperimentSpec, preset_specs, run_experiment, run_suite
from .loader import load_tree, serialize_tree
from .observables import (
    degree_histogram,
    depth_profile,
    fringe_histogram,
    height,
    martingale_w,
    pagerank_bruteforce,
    pagerank_scores,
    root_degree,
    tail_exponent,
    weighted_profile,
)
from .random_walk import (
    expected_profile,
    hitting_ratio_trace,
    hitting_time_table,
    survival_prob_estimate,
    tilted_step_pmf,
)
from .simulator import (
    GrowthConfig,
    Variant,
    grow,
    grow_continuous,
    grow_discrete,
    grow_killed,
    grow_pagerank_attachment,
    sample_fringe,
    simulate_brw,
    simulate_urn,
)
from .tree import TreeState

__all__ = [
    "Settings", "get_settings",
    "ModelConstants", "compute_constants", "compute_kappa0", "compute_R", "perron_eigen",
    "predicted_degree_exponent", "predicted_pagerank_exponent", "solve_qstar", "solve_s0",
    "truncated_kernel", "verify_subinvariant",
    "StepDistribution", "parse_pmf_spec", "CoevoError",
    "ExperimentKind", "ExperimentReport", "ExperimentSpec", "preset_specs", "run_experiment", "run_suite",
    "load_tree", "serialize_tree",
    "degree_histogram", "depth_profile", "fringe_histogram", "height", "martingale_w",
    "pagerank_bruteforce", "pagerank_scores", "root_degree", "tail_exponent", "weighted_profile",
    "expected_profile", "hitting_ratio_trace", "hitting_time_table", "survival_prob_estimate", "tilted_step_pmf",
    "GrowthConfig", "Variant", "grow", "grow_continuous", "grow_discrete", "grow_killed",
    "grow_pagerank_attachment", "sample_fringe", "simulate_brw", "simulate_urn",
    "TreeState",
]
