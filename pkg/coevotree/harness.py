"""
Experiment Harness - Ensemble runner binding limit statements to Monte-Carlo checks

Each ExperimentSpec names a kind, a step law, sizes and a replica count. Replicas run
on independent counter-based streams, results are reduced in replica order, and the
estimate is compared with the prediction from the constants module.
"""
import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator
from scipy import stats

from .config import Settings, get_settings
from .constants import (
    alpha_k_trace,
    alpha_star,
    brw_rate,
    closed_form_constants,
    compute_constants,
    compute_R,
    predicted_pagerank_exponent,
    small_fringe_masses,
    solve_qstar,
    solve_s0,
)
from .distribution import parse_pmf_spec
from .errors import CoevoError, ParamOutOfRange
from .loader import tree_to_bytes
from .observables import (
    ccdf_table,
    degree_histogram,
    degrees,
    fringe_histogram,
    FringeHistogram,
    height,
    hill_sweep,
    pagerank_bruteforce,
    pagerank_scores,
    root_degree,
    tail_exponent,
    vertex_degree,
    weighted_profile,
    SMALL_TREE_CODES,
)
from .random_walk import expected_profile, expected_profile_ode, hitting_time_table
from .simulator import (
    GrowthConfig,
    Variant,
    grow,
    grow_discrete,
    grow_killed,
    grow_pagerank_attachment,
    sample_fringe,
    simulate_brw,
)
from .streams import replica_seed, seeded_rng

logger = logging.getLogger(__name__)

# Replica seeds listed in full up to this count; beyond it only the derivation rule
MAX_LISTED_SEEDS = 1000


class ExperimentKind(str, Enum):
    ROOT_CONDENSATION = "RootCondensation"
    HEIGHT = "Height"
    DEGREE_TAIL = "DegreeTail"
    PAGERANK_TAIL = "PageRankTail"
    FRINGE_CONVERGENCE = "FringeConvergence"
    PROFILE_SERIES = "ProfileSeries"
    BRW_SPEED = "BrwSpeed"
    ALPHA_K = "AlphaK"
    EQUIVALENCE = "Equivalence"
    CLOSED_FORM_CONSTANTS = "ClosedFormConstants"
    LIMIT_MEAN_DEGREE = "LimitMeanDegree"
    PAGERANK_ORACLE = "PageRankOracle"
    MOMENT_BOUND = "MomentBound"
    DETERMINISM = "Determinism"
    FIXED_VERTEX_DEGREE = "FixedVertexDegree"
    ROOT_PAGERANK = "RootPageRank"


# Default pass/fail tolerance per kind
DEFAULT_TOLERANCES = {
    ExperimentKind.ROOT_CONDENSATION: 0.02,      # absolute, on deg(v0)/n
    ExperimentKind.HEIGHT: 0.15,                 # relative, on H_n / ln n
    ExperimentKind.DEGREE_TAIL: 0.10,            # relative, around the predicted interval
    ExperimentKind.PAGERANK_TAIL: 0.8,           # minimum exponent drop from low to high damping
    ExperimentKind.FRINGE_CONVERGENCE: 0.02,     # total variation on trees of size <= 3
    ExperimentKind.PROFILE_SERIES: 3.0,          # standard errors
    ExperimentKind.BRW_SPEED: 0.15,              # relative, on B(t)/t
    ExperimentKind.ALPHA_K: 1e-2,                # absolute gap of the last alpha_k to 1/R
    ExperimentKind.EQUIVALENCE: 1e-3,            # chi-square significance level
    ExperimentKind.CLOSED_FORM_CONSTANTS: 1e-9,  # absolute
    ExperimentKind.LIMIT_MEAN_DEGREE: 0.02,      # relative
    ExperimentKind.PAGERANK_ORACLE: 1e-12,       # absolute
    ExperimentKind.MOMENT_BOUND: 3.0,            # relative standard errors
    ExperimentKind.DETERMINISM: 0.0,
    ExperimentKind.FIXED_VERTEX_DEGREE: 0.3,     # relative
    ExperimentKind.ROOT_PAGERANK: 0.0,
}


class ExperimentSpec(BaseModel):
    """One experiment: kind, step law, sizes, replicas, seed and tolerance"""

    name: str = ""
    kind: ExperimentKind
    pmf: str = Field(..., description="pmf spec, e.g. 'geometric:0.3'")
    sizes: List[int] = Field(default=[], description="Tree sizes n")
    horizon: Optional[float] = Field(default=None, ge=0.0, description="Time horizon t")
    replicas: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    damping: Optional[float] = None
    params: Dict[str, float] = Field(default={}, description="Kind-specific parameters")
    tolerance: Optional[float] = Field(default=None, description="Overrides the kind's default")

    model_config = {
        "json_schema_extra": {
            "examples": [
                {"name": "A5", "kind": "RootCondensation", "pmf": "geometric:0.3",
                 "sizes": [1000000], "replicas": 10, "seed": 5}
            ]
        }
    }

    @field_validator("sizes")
    @classmethod
    def _sizes_fit(cls, sizes: List[int]) -> List[int]:
        cap = get_settings().memory_cap_vertices
        for n in sizes:
            if not 1 <= n <= cap:
                raise ValueError(f"size {n} outside [1, {cap}]")
        return sizes

    @property
    def effective_tolerance(self) -> float:
        return DEFAULT_TOLERANCES[self.kind] if self.tolerance is None else self.tolerance

    def param(self, key: str, default: float) -> float:
        return float(self.params.get(key, default))


class ExperimentReport(BaseModel):
    """Prediction, estimate and verdict of one experiment"""

    name: str
    kind: ExperimentKind
    pmf: str
    predicted: Optional[float] = None
    provenance: str = "numeric"
    estimate: Optional[float] = None
    dispersion: Optional[float] = None
    tolerance: float
    passed: bool
    details: Dict[str, Any] = {}
    notes: List[str] = []
    config: Dict[str, Any] = {}
    replica_seeds: List[int] = []
    seed_rule: str = "replica_seed(master_seed, replica_index)"
    failed_replicas: List[int] = []
    tables: Dict[str, List[List[Any]]] = {}
    wall_time: float = 0.0

    def comparable(self) -> Dict[str, Any]:
        """Everything except the wall time"""
        return self.model_dump(mode="json", exclude={"wall_time"})


# ==================== FAN-OUT AND REDUCTION ====================

def _fan_out(spec: ExperimentSpec, work: Callable[[np.random.Generator], Any], count: Optional[int] = None,
             offset: int = 0, settings: Optional[Settings] = None):
    """
    Run `work` once per replica stream and return (results, seeds, failed) in replica order

    Replicas raising a library error are recorded as failed with a None result.
    """
    settings = settings or get_settings()
    count = spec.replicas if count is None else count
    seeds = [replica_seed(spec.seed, offset + r) for r in range(count)]
    blocks = [b.tolist() for b in np.array_split(np.arange(count), min(count, settings.threads * 4)) if len(b)]

    def run_block(block: List[int]):
        out = []
        for r in block:
            try:
                out.append((r, work(seeded_rng(seeds[r]))))
            except CoevoError as exc:
                logger.warning("%s replica %d failed: %s", spec.name or spec.kind.value, r, exc)
                out.append((r, exc))
        return out

    results: List[Any] = [None] * count
    failed: List[int] = []
    with ThreadPoolExecutor(max_workers=max(1, min(settings.threads, len(blocks)))) as pool:
        for block_result in pool.map(run_block, blocks):
            for r, value in block_result:
                if isinstance(value, CoevoError):
                    failed.append(r)
                else:
                    results[r] = value
    return results, seeds, sorted(failed)


def _summary(values: Sequence[float]) -> Tuple[float, float, float]:
    """(mean, sample std, standard error) with pairwise summation"""
    x = np.asarray([v for v in values if v is not None], dtype=np.float64)
    n = len(x)
    if n == 0:
        return math.nan, math.nan, math.nan
    mean = float(np.sum(x) / n)
    if n == 1:
        return mean, 0.0, 0.0
    std = float(math.sqrt(np.sum((x - mean) ** 2) / (n - 1)))
    return mean, std, std / math.sqrt(n)


def _report(spec: ExperimentSpec, seeds: Sequence[int], failed: Sequence[int], **fields) -> ExperimentReport:
    fields.setdefault("tolerance", spec.effective_tolerance)
    return ExperimentReport(
        name=spec.name or spec.kind.value,
        kind=spec.kind,
        pmf=spec.pmf,
        config=spec.model_dump(mode="json"),
        replica_seeds=list(seeds[:MAX_LISTED_SEEDS]),
        failed_replicas=list(failed),
        **fields,
    )


def _all_failed(spec: ExperimentSpec, seeds: Sequence[int], failed: Sequence[int], **fields) -> ExperimentReport:
    """Failed verdict for a run in which no replica produced a result"""
    logger.error("%s: all %d replicas failed", spec.name or spec.kind.value, len(failed))
    fields.setdefault("notes", []).append("no replica produced a result")
    return _report(spec, seeds, failed, passed=False, **fields)


def _size(spec: ExperimentSpec, default: int) -> int:
    return spec.sizes[-1] if spec.sizes else default


def _log_corrected(kappa0: float, minimizer: float, t: float) -> Optional[float]:
    """kappa0 t - 3/(2 theta) log t with theta = log(1/s) at the kappa0 minimizer"""
    if t <= 1.0 or not 0.0 < minimizer < 1.0:
        return None
    theta = -math.log(minimizer)
    return kappa0 * t - 1.5 / theta * math.log(t)


# ==================== EXPERIMENT KINDS ====================

def _closed_form_constants(spec: ExperimentSpec) -> ExperimentReport:
    d = parse_pmf_spec(spec.pmf)
    exact = closed_form_constants(d)
    if exact is None:
        raise ParamOutOfRange(f"{spec.pmf} has no closed-form constants")
    s0 = solve_s0(d)
    numeric = {"s0": s0, "R": compute_R(d, s0), "q_star": solve_qstar(d)}
    errors = {}
    for key, value in numeric.items():
        x = value if isinstance(value, float) else value.as_float()
        y = exact[key].as_float()
        errors[key] = 0.0 if (math.isinf(x) and math.isinf(y)) else abs(x - y)
    worst = max(errors.values())
    return _report(spec, [], [], predicted=0.0, provenance="closed-form", estimate=worst,
                   passed=worst <= spec.effective_tolerance,
                   details={"numeric": {k: v if isinstance(v, float) else str(v) for k, v in numeric.items()},
                            "closed_form": {k: str(v) for k, v in exact.items()}, "errors": errors})


def _alpha_k(spec: ExperimentSpec) -> ExperimentReport:
    d = parse_pmf_spec(spec.pmf)
    k_min = int(spec.param("k_min", 5))
    k_max = int(spec.param("k_max", 200))
    k_step = int(spec.param("k_step", 1))
    trace = alpha_k_trace(d, range(k_min, k_max + 1, k_step))
    if not trace:
        raise ParamOutOfRange(f"{spec.pmf}: no irreducible truncation in {k_min}..{k_max}")
    alphas = np.array([point.alpha for point in trace])
    monotone = bool(np.all(np.diff(alphas) >= -1e-12))
    target = 1.0 / compute_R(d, solve_s0(d)).as_float()
    gap = abs(float(alphas[-1]) - target)
    return _report(spec, [], [], predicted=target, estimate=float(alphas[-1]), dispersion=gap,
                   passed=monotone and gap <= spec.effective_tolerance,
                   details={"monotone": monotone, "gap": gap, "k_last": trace[-1].k},
                   tables={"alpha_k": [["k", "alpha"]] + [[p.k, p.alpha] for p in trace]})


def _profile_series(spec: ExperimentSpec) -> ExperimentReport:
    d = parse_pmf_spec(spec.pmf)
    k = int(spec.param("k", 1))
    t = 2.0 if spec.horizon is None else spec.horizon
    N = int(math.ceil(t + 12.0 * math.sqrt(t) + 40.0))
    table = hitting_time_table(d, max(k, 1), N)
    series = expected_profile(table, k, t)
    ode = float(expected_profile_ode(d, "A", k + int(spec.param("ode_levels", 60)), t)[k])

    def one(rng):
        tree = grow_killed(GrowthConfig(pmf=spec.pmf, horizon=t, variant=Variant.KILLED), rng)
        return float(np.count_nonzero(tree.depth == k))

    results, seeds, failed = _fan_out(spec, one)
    mean, std, stderr = _summary(results)
    z = spec.effective_tolerance
    passed = abs(mean - series.value) <= z * stderr + series.error_bound
    return _report(spec, seeds, failed, predicted=series.value, provenance="series", estimate=mean,
                   dispersion=stderr, passed=bool(passed),
                   details={"k": k, "t": t, "series_error_bound": series.error_bound, "ode_value": ode,
                            "std": std, "z_score": (mean - series.value) / stderr if stderr > 0 else 0.0})


def _limit_mean_degree(spec: ExperimentSpec) -> ExperimentReport:
    d = parse_pmf_spec(spec.pmf)
    q_star = solve_qstar(d)
    notes = []
    if d.mean() > 1.0:
        notes.append("non-fringe: the root degree of a fringe sample has a tail index close to 1, so the "
                     "sample mean converges slowly and typically sits a few percent below q*; a 2% band "
                     "is met only by some seeds")
    size_cap = spec.params.get("size_cap")
    cap = int(size_cap) if size_cap else None

    def one(rng):
        tree = sample_fringe(d, rng, size_cap=cap)
        return float(root_degree(tree)), tree.truncated

    results, seeds, failed = _fan_out(spec, one)
    mean, std, stderr = _summary([r[0] for r in results if r is not None])
    truncated = sum(1 for r in results if r is not None and r[1])
    rel = abs(mean - q_star) / q_star
    return _report(spec, seeds, failed, predicted=q_star, estimate=mean, dispersion=stderr,
                   passed=rel <= spec.effective_tolerance, notes=notes,
                   details={"relative_error": rel, "std": std, "truncated_samples": truncated,
                            "regime": "NonFringe" if d.mean() > 1.0 else "Fringe"})


def _root_condensation(spec: ExperimentSpec) -> ExperimentReport:
    n = _size(spec, 10**6)
    d = parse_pmf_spec(spec.pmf)
    target = 1.0 - solve_qstar(d)

    def one(rng):
        return root_degree(grow_discrete(GrowthConfig(pmf=spec.pmf, n=n), rng)) / n

    results, seeds, failed = _fan_out(spec, one)
    mean, std, stderr = _summary(results)
    return _report(spec, seeds, failed, predicted=target, estimate=mean, dispersion=std,
                   passed=abs(mean - target) <= spec.effective_tolerance,
                   details={"n": n, "stderr": stderr},
                   tables={"root_share": [["replica", "share"]] + [[r, v] for r, v in enumerate(results)]})


def _fringe_convergence(spec: ExperimentSpec) -> ExperimentReport:
    n = _size(spec, 10**5)
    d = parse_pmf_spec(spec.pmf)
    max_size = int(spec.param("max_size", 3))
    samples = int(spec.param("samples", 10**5))
    exact = small_fringe_masses(d)

    results, tree_seeds, tree_failed = _fan_out(
        spec, lambda rng: fringe_histogram(grow_discrete(GrowthConfig(pmf=spec.pmf, n=n), rng), max_size),
        count=1)
    if results[0] is None:
        return _all_failed(spec, tree_seeds, tree_failed, predicted=0.0, provenance="exact sampler")
    empirical: FringeHistogram = results[0]
    draws, seeds, failed = _fan_out(spec, lambda rng: sample_fringe(d, rng, size_cap=max_size),
                                    count=samples, offset=1)
    limit = FringeHistogram.from_samples([t for t in draws if t is not None], max_size)

    tv = empirical.total_variation(limit)
    singleton = exact["()"]
    observed = limit.proportion(SMALL_TREE_CODES["singleton"])
    sigma = math.sqrt(singleton * (1.0 - singleton) / max(limit.total, 1))
    singleton_ok = abs(observed - singleton) <= 3.0 * sigma
    rows = [["code", "tree", "samples", "exact"]]
    for name, code in SMALL_TREE_CODES.items():
        rows.append([code, empirical.proportion(code), limit.proportion(code), exact[code]])
    return _report(spec, list(tree_seeds) + list(seeds), list(tree_failed) + [1 + r for r in failed],
                   predicted=0.0, provenance="exact sampler", estimate=tv, dispersion=sigma,
                   passed=bool(tv <= spec.effective_tolerance and singleton_ok),
                   details={"n": n, "samples": samples, "singleton_exact": singleton,
                            "singleton_samples": observed,
                            "singleton_tree": empirical.proportion(SMALL_TREE_CODES["singleton"]),
                            "tv_tree_vs_exact": _tv_to_masses(empirical, exact)},
                   tables={"fringe": rows})


def _tv_to_masses(histogram: FringeHistogram, masses: Dict[str, float]) -> float:
    mine = [histogram.proportion(code) for code in masses]
    theirs = list(masses.values())
    return 0.5 * (sum(abs(a - b) for a, b in zip(mine, theirs)) + abs(sum(theirs) - sum(mine)))


def _height(spec: ExperimentSpec) -> ExperimentReport:
    d = parse_pmf_spec(spec.pmf)
    constants = compute_constants(d, k_max=0)
    sizes = spec.sizes or [10**4, 10**5, 10**6]
    ratios = []
    all_seeds: List[int] = []
    all_failed: List[int] = []
    rows = [["n", "mean_height", "ratio", "log_corrected"]]
    for index, n in enumerate(sizes):
        def one(rng, n=n):
            return float(height(grow_discrete(GrowthConfig(pmf=spec.pmf, n=n), rng)))

        results, seeds, failed = _fan_out(spec, one, offset=index * spec.replicas)
        all_seeds += seeds
        all_failed += [index * spec.replicas + r for r in failed]
        mean, _, _ = _summary(results)
        ratio = mean / math.log(n)
        ratios.append(ratio)
        rows.append([n, mean, ratio, _log_corrected(constants.kappa0, constants.kappa0_minimizer, math.log(n))])

    kappa0 = constants.kappa0
    final = ratios[-1]
    if "band_lo" in spec.params or "band_hi" in spec.params:
        in_band = spec.param("band_lo", -math.inf) <= final <= spec.param("band_hi", math.inf)
    else:
        in_band = abs(final - kappa0) / kappa0 <= spec.effective_tolerance
    trend = abs(final - kappa0) <= abs(ratios[0] - kappa0) + spec.param("trend_slack", 0.1)
    return _report(spec, all_seeds, all_failed, predicted=kappa0, estimate=final,
                   passed=bool(in_band and trend), notes=["slow convergence: logarithmic corrections"],
                   details={"ratios": ratios, "trend_toward_prediction": bool(trend)},
                   tables={"height": rows})


def _brw_speed(spec: ExperimentSpec) -> ExperimentReport:
    d = parse_pmf_spec(spec.pmf)
    constants = compute_constants(d, k_max=0)
    t = 14.0 if spec.horizon is None else spec.horizon

    results, seeds, failed = _fan_out(spec, lambda rng: simulate_brw(d, t, None, rng).rightmost_at(t) / t)
    mean, std, stderr = _summary(results)
    kappa0 = constants.kappa0
    minimizer = constants.kappa0_minimizer
    corrected = _log_corrected(kappa0, minimizer, t)
    notes = ["slow convergence: logarithmic corrections"]
    if corrected is not None:
        notes.append(f"B(t)/t approaches kappa0 from below like kappa0 - 3/(2 theta) log(t)/t; at t={t:g} the "
                     f"corrected reference is {corrected / t:.4g}, so a miss of the relative band at moderate t "
                     "reflects the horizon, not the simulation")
    return _report(spec, seeds, failed, predicted=kappa0, estimate=mean, dispersion=std,
                   passed=abs(mean - kappa0) / kappa0 <= spec.effective_tolerance, notes=notes,
                   details={"t": t, "stderr": stderr,
                            "log_corrected_speed": None if corrected is None else corrected / t,
                            "alpha_star_at_kappa0": alpha_star(d, kappa0),
                            "rate_at_minimizer": brw_rate(d, math.log(minimizer)) if minimizer > 0 else None})


def _degree_tail(spec: ExperimentSpec) -> ExperimentReport:
    n = _size(spec, 10**6)
    d = parse_pmf_spec(spec.pmf)
    constants = compute_constants(d, k_max=0)
    prediction = constants.degree_exponent

    results, seeds, failed = _fan_out(spec, lambda rng: degrees(grow_discrete(GrowthConfig(pmf=spec.pmf, n=n), rng)),
                                      count=1)
    if results[0] is None:
        return _all_failed(spec, seeds, failed, predicted=prediction.midpoint())
    sample = results[0]
    fit = tail_exponent(sample, "hill")
    sweep = hill_sweep(sample, fit.m)
    tol = spec.effective_tolerance
    passed = prediction.lo.as_float() * (1 - tol) <= fit.estimate <= prediction.hi.as_float() * (1 + tol)
    return _report(spec, seeds, failed, predicted=prediction.midpoint(), estimate=fit.estimate,
                   dispersion=fit.stderr, passed=bool(passed),
                   notes=["tail exponents are log-asymptotic; band is wide"] + constants.assumption_flags,
                   details={"n": n, "prediction": prediction.model_dump(mode="json"),
                            "sweep": [f.model_dump() for f in sweep]},
                   tables={"degree_ccdf": [["k", "count", "ccdf"]] + [list(row) for row in ccdf_table(sample)]})


def _pagerank_tail(spec: ExperimentSpec) -> ExperimentReport:
    n = _size(spec, 10**6)
    d = parse_pmf_spec(spec.pmf)
    low = spec.param("damping_low", 0.15)
    high = spec.param("damping_high", 0.9)
    constants = compute_constants(d, k_max=0)
    predicted = {c: predicted_pagerank_exponent(constants, c, d) for c in (low, high)}

    results, seeds, failed = _fan_out(spec, lambda rng: grow_discrete(GrowthConfig(pmf=spec.pmf, n=n), rng),
                                      count=1)
    if results[0] is None:
        return _all_failed(spec, seeds, failed)
    tree = results[0]
    fits = {c: tail_exponent(pagerank_scores(tree, c).scores, "hill") for c in (low, high)}
    drop = fits[low].estimate - fits[high].estimate
    return _report(spec, seeds, failed,
                   predicted=predicted[low].midpoint() - predicted[high].midpoint(),
                   estimate=drop, passed=drop >= spec.effective_tolerance,
                   notes=["directional check; absolute exponents are not gated"],
                   details={"n": n,
                            "exponents": {str(c): fits[c].model_dump() for c in fits},
                            "predicted": {str(c): predicted[c].model_dump(mode="json") for c in predicted}})


def _pagerank_oracle(spec: ExperimentSpec) -> ExperimentReport:
    max_n = int(spec.param("max_n", 50))

    def one(rng):
        n = int(rng.integers(1, max_n + 1))
        c = spec.damping if spec.damping is not None else float(rng.uniform(0.05, 0.95))
        tree = grow_discrete(GrowthConfig(pmf=spec.pmf, n=n), rng)
        fast = pagerank_scores(tree, c).scores
        slow = pagerank_bruteforce(tree, c).scores
        return float(np.max(np.abs(fast - slow)))

    results, seeds, failed = _fan_out(spec, one)
    values = [r for r in results if r is not None]
    if not values:
        return _all_failed(spec, seeds, failed, predicted=0.0, provenance="path-count oracle")
    worst = max(values)
    return _report(spec, seeds, failed, predicted=0.0, provenance="path-count oracle", estimate=worst,
                   passed=worst <= spec.effective_tolerance, details={"trees": spec.replicas, "max_n": max_n})


def _chi_square_bins(a: np.ndarray, b: np.ndarray, minimum: int = 5) -> np.ndarray:
    """2 x B table of per-degree counts with the tail lumped so every cell has >= minimum"""
    size = max(len(a), len(b))
    a = np.pad(a, (0, size - len(a)))
    b = np.pad(b, (0, size - len(b)))
    columns = []
    k = 1
    while k < size and a[k] >= minimum and b[k] >= minimum:
        columns.append([a[k], b[k]])
        k += 1
    tail = [int(a[k:].sum()), int(b[k:].sum())]
    if min(tail) >= minimum or not columns:
        columns.append(tail)
    else:
        columns[-1] = [columns[-1][0] + tail[0], columns[-1][1] + tail[1]]
    return np.array(columns, dtype=np.int64).T


def _equivalence(spec: ExperimentSpec) -> ExperimentReport:
    n = _size(spec, 10**4)
    c = 0.7 if spec.damping is None else spec.damping

    pr, pr_seeds, pr_failed = _fan_out(
        spec, lambda rng: degree_histogram(grow_pagerank_attachment(
            GrowthConfig(pmf=spec.pmf, n=n, variant=Variant.PAGERANK, damping=c), rng)))
    ex, ex_seeds, ex_failed = _fan_out(
        spec, lambda rng: degree_histogram(grow_discrete(GrowthConfig(pmf=spec.pmf, n=n), rng)),
        offset=spec.replicas)
    seeds = pr_seeds + ex_seeds
    failed = pr_failed + [spec.replicas + r for r in ex_failed]
    if all(h is None for h in pr) or all(h is None for h in ex):
        return _all_failed(spec, seeds, failed, predicted=spec.effective_tolerance)

    def pooled(histograms):
        size = max(len(h) for h in histograms if h is not None)
        return np.sum([np.pad(h, (0, size - len(h))) for h in histograms if h is not None], axis=0)

    table = _chi_square_bins(pooled(pr), pooled(ex))
    statistic, p_value, dof, _ = stats.chi2_contingency(table)
    rows = [["bin", "pagerank", "exploration"]] + [[i, int(x), int(y)] for i, (x, y) in enumerate(table.T)]
    return _report(spec, seeds, failed,
                   predicted=spec.effective_tolerance, provenance="chi-square significance level",
                   estimate=float(p_value), passed=bool(p_value > spec.effective_tolerance),
                   details={"n": n, "damping": c, "statistic": float(statistic), "dof": int(dof)},
                   tables={"degree_bins": rows})


def _moment_bound(spec: ExperimentSpec) -> ExperimentReport:
    d = parse_pmf_spec(spec.pmf)
    t = 2.0 if spec.horizon is None else spec.horizon
    s = spec.params.get("s")
    s = solve_s0(d).as_float() if s is None else float(s)
    f = d.pgf(s)
    bound = d.p0 / f * math.exp(f / s * t)

    def one(rng):
        return weighted_profile(grow_killed(GrowthConfig(pmf=spec.pmf, horizon=t, variant=Variant.KILLED), rng), s)

    results, seeds, failed = _fan_out(spec, one)
    mean, std, stderr = _summary(results)
    rel = stderr / mean if mean > 0 else 0.0
    passed = mean <= bound * (1.0 + spec.effective_tolerance * rel)
    return _report(spec, seeds, failed, predicted=bound, provenance="upper bound", estimate=mean,
                   dispersion=stderr, passed=bool(passed), details={"s": s, "t": t, "relative_stderr": rel})


def _determinism(spec: ExperimentSpec) -> ExperimentReport:
    n = _size(spec, 2000)
    t = 5.0 if spec.horizon is None else spec.horizon
    c = 0.5 if spec.damping is None else spec.damping
    configs = [
        GrowthConfig(pmf=spec.pmf, n=n, variant=Variant.DISCRETE, seed=spec.seed),
        GrowthConfig(pmf=spec.pmf, n=n, variant=Variant.CONTINUOUS, seed=spec.seed),
        GrowthConfig(pmf=spec.pmf, horizon=t, variant=Variant.CONTINUOUS, seed=spec.seed),
        GrowthConfig(pmf=spec.pmf, horizon=t, variant=Variant.KILLED, seed=spec.seed),
        GrowthConfig(pmf=spec.pmf, n=n, variant=Variant.PAGERANK, damping=c, seed=spec.seed),
    ]
    identical = {}
    for config in configs:
        first = tree_to_bytes(grow(config, seeded_rng(config.seed)))
        second = tree_to_bytes(grow(config, seeded_rng(config.seed)))
        label = config.variant.value + (f"@n={config.n}" if config.n else f"@t={config.horizon}")
        identical[label] = first == second
    matches = sum(identical.values())
    return _report(spec, [spec.seed], [], predicted=float(len(configs)), provenance="exact",
                   estimate=float(matches), passed=matches == len(configs), details={"identical": identical})


def _fixed_vertex_degree(spec: ExperimentSpec) -> ExperimentReport:
    n = _size(spec, 10**5)
    v = int(spec.param("vertex", 1))
    d = parse_pmf_spec(spec.pmf)
    target = 1.0 / compute_R(d, solve_s0(d)).as_float()
    notes = ["loose band: the degree exponent is log-asymptotic"]
    if d.mean() > 1.0:
        notes.append("non-fringe law: the 1/R growth applies to the fringe regime")

    def one(rng):
        return math.log(vertex_degree(grow_discrete(GrowthConfig(pmf=spec.pmf, n=n), rng), v)) / math.log(n)

    results, seeds, failed = _fan_out(spec, one)
    mean, std, stderr = _summary(results)
    return _report(spec, seeds, failed, predicted=target, estimate=mean, dispersion=std,
                   passed=abs(mean - target) <= spec.effective_tolerance * target, notes=notes,
                   details={"n": n, "vertex": v, "stderr": stderr})


def _root_pagerank(spec: ExperimentSpec) -> ExperimentReport:
    n = _size(spec, 10**5)
    c = 0.5 if spec.damping is None else spec.damping
    d = parse_pmf_spec(spec.pmf)
    bound = c * (1.0 - c) * (1.0 - solve_qstar(d))

    def one(rng):
        return float(pagerank_scores(grow_discrete(GrowthConfig(pmf=spec.pmf, n=n), rng), c).scores[0]) / n

    results, seeds, failed = _fan_out(spec, one)
    mean, std, stderr = _summary(results)
    return _report(spec, seeds, failed, predicted=bound, provenance="lower bound", estimate=mean, dispersion=std,
                   passed=mean >= bound * (1.0 - spec.effective_tolerance),
                   details={"n": n, "damping": c, "stderr": stderr})


RUNNERS: Dict[ExperimentKind, Callable[[ExperimentSpec], ExperimentReport]] = {
    ExperimentKind.CLOSED_FORM_CONSTANTS: _closed_form_constants,
    ExperimentKind.ALPHA_K: _alpha_k,
    ExperimentKind.PROFILE_SERIES: _profile_series,
    ExperimentKind.LIMIT_MEAN_DEGREE: _limit_mean_degree,
    ExperimentKind.ROOT_CONDENSATION: _root_condensation,
    ExperimentKind.FRINGE_CONVERGENCE: _fringe_convergence,
    ExperimentKind.HEIGHT: _height,
    ExperimentKind.BRW_SPEED: _brw_speed,
    ExperimentKind.DEGREE_TAIL: _degree_tail,
    ExperimentKind.PAGERANK_TAIL: _pagerank_tail,
    ExperimentKind.PAGERANK_ORACLE: _pagerank_oracle,
    ExperimentKind.EQUIVALENCE: _equivalence,
    ExperimentKind.MOMENT_BOUND: _moment_bound,
    ExperimentKind.DETERMINISM: _determinism,
    ExperimentKind.FIXED_VERTEX_DEGREE: _fixed_vertex_degree,
    ExperimentKind.ROOT_PAGERANK: _root_pagerank,
}


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """
    Run one experiment end to end

    Args:
        spec: experiment specification

    Returns:
        ExperimentReport with prediction, estimate, verdict and wall time
    """
    started = time.perf_counter()
    logger.info("running %s (%s, %s, %d replicas)", spec.name or spec.kind.value, spec.kind.value,
                spec.pmf, spec.replicas)
    report = RUNNERS[spec.kind](spec)
    report.wall_time = time.perf_counter() - started
    logger.info("%s: estimate=%s predicted=%s -> %s (%.1fs)", report.name, report.estimate, report.predicted,
                "PASS" if report.passed else "FAIL", report.wall_time)
    return report


# ==================== PRESETS ====================

def preset_specs(name: str, seed: int = 20240601) -> List[ExperimentSpec]:
    """Acceptance experiments A1..A14 at their full sizes"""
    key = name.upper()
    K = ExperimentKind
    presets: Dict[str, List[Dict[str, Any]]] = {
        "A1": [{"kind": K.CLOSED_FORM_CONSTANTS, "pmf": pmf} for pmf in
               ("geometric:0.1", "geometric:0.3", "geometric:0.7", "geometric:0.9",
                "srw:0.3", "srw:0.4", "srw:0.6", "affine:0.5")],
        "A2": [{"kind": K.ALPHA_K, "pmf": "geometric:0.3", "params": {"k_min": 5, "k_max": 200}}],
        "A3": [{"kind": K.PROFILE_SERIES, "pmf": pmf, "horizon": 2.0, "replicas": 10**5, "params": {"k": 1}}
               for pmf in ("geometric:0.5", "srw:0.4")],
        "A4": [{"kind": K.LIMIT_MEAN_DEGREE, "pmf": pmf, "replicas": 10**5}
               for pmf in ("geometric:0.9", "geometric:0.3")],
        "A5": [{"kind": K.ROOT_CONDENSATION, "pmf": "geometric:0.3", "sizes": [10**6], "replicas": 10}],
        "A6": [{"kind": K.FRINGE_CONVERGENCE, "pmf": "geometric:0.5", "sizes": [10**5],
                "params": {"samples": 10**5, "max_size": 3}}],
        "A7": [{"kind": K.HEIGHT, "pmf": "det:0", "sizes": [10**4, 10**5, 10**6], "replicas": 3,
                "params": {"band_lo": 2.2, "band_hi": 3.0}},
               {"kind": K.HEIGHT, "pmf": "geometric:0.5", "sizes": [10**4, 10**5, 10**6], "replicas": 3}],
        "A8": [{"kind": K.BRW_SPEED, "pmf": "geometric:0.5", "horizon": 14.0, "replicas": 20}],
        "A9": [{"kind": K.DEGREE_TAIL, "pmf": "affine:0.5", "sizes": [10**6]}],
        "A10": [{"kind": K.PAGERANK_TAIL, "pmf": "geometric:0.9", "sizes": [10**6],
                 "params": {"damping_low": 0.15, "damping_high": 0.9}}],
        "A11": [{"kind": K.PAGERANK_ORACLE, "pmf": "geometric:0.5", "replicas": 500, "params": {"max_n": 50}}],
        "A12": [{"kind": K.EQUIVALENCE, "pmf": "geometric:0.3", "damping": 0.7, "sizes": [10**4],
                 "replicas": 50}],
        "A13": [{"kind": K.MOMENT_BOUND, "pmf": "geometric:0.3", "horizon": 2.0, "replicas": 10**5}],
        "A14": [{"kind": K.DETERMINISM, "pmf": pmf, "sizes": [5000], "horizon": 6.0}
                for pmf in ("geometric:0.3", "srw:0.4", "det:0")],
    }
    if key == "ALL":
        return [spec for preset in presets for spec in preset_specs(preset, seed)]
    if key not in presets:
        raise ParamOutOfRange(f"unknown preset '{name}' (A1..A14 or ALL)")
    return [ExperimentSpec(name=key, seed=seed, **fields) for fields in presets[key]]


# ==================== SUITES AND OUTPUT ====================

def run_suite(specs: Sequence[ExperimentSpec]) -> List[ExperimentReport]:
    return [run_experiment(spec) for spec in specs]


def write_reports(reports: Sequence[ExperimentReport], out: Optional[Path] = None,
                  csv_dir: Optional[Path] = None) -> None:
    """JSON list of reports, plus one CSV file per report table"""
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        payload = [report.model_dump(mode="json") for report in reports]
        out.write_text(json.dumps(payload, indent=2))
        logger.info("wrote %d reports to %s", len(reports), out)
    if csv_dir is not None:
        csv_dir = Path(csv_dir)
        csv_dir.mkdir(parents=True, exist_ok=True)
        for index, report in enumerate(reports):
            for table, rows in report.tables.items():
                target = csv_dir / f"{index:02d}_{report.name}_{report.kind.value}_{table}.csv"
                with target.open("w", newline="") as handle:
                    csv.writer(handle).writerows(rows)
