"""
Random Walk - Hitting times of the walk with increments Z - 1 and the profile series

The walk S_n = S_0 + sum (Z_i - 1) is skip-free downward, so hitting 0 from k is
equivalent (by time reversal) to the dual walk with increments 1 - Z climbing from 0
to k while staying positive. One forward pass over the dual walk fills the whole
P(T_k = i) grid.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from pydantic import BaseModel
from scipy import linalg, special, stats

from .config import get_settings
from .constants import level_generator, solve_s0
from .distribution import StepDistribution
from .errors import ParamOutOfRange, PgfInfinite, PreconditionViolated, TruncationBudgetExceeded

logger = logging.getLogger(__name__)

# Poisson tail beyond the table must stay below this fraction of e^t
SERIES_BUDGET = 1e-12


@dataclass(frozen=True)
class HittingTimeTable:
    """q[k][i] = P(T_k = i) for 1 <= k <= K, 0 <= i <= N (row 0 unused)"""

    pmf: str
    K: int
    N: int
    q: np.ndarray
    trunc_error: float

    def row(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.K:
            raise ParamOutOfRange(f"start level {k} outside 1..{self.K}")
        return self.q[k]


class ProfileEstimate(BaseModel):
    k: int
    t: float
    value: float
    error_bound: float


class RatioPoint(BaseModel):
    n: int
    ratio: float


class SurvivalEstimate(BaseModel):
    estimate: float
    stderr: float
    horizon_steps: int
    replicas: int
    note: str = "finite horizon overestimates survival"


@dataclass(frozen=True)
class TiltedStep:
    """Increment law of the tilted walk: P(increment = 1 - j) = s^j p_j / f(s)"""

    s: float
    z_law: StepDistribution
    drift: float

    @property
    def increments(self) -> np.ndarray:
        return 1 - np.arange(len(self.z_law.probs))

    @property
    def probs(self) -> np.ndarray:
        return self.z_law.probs


def hitting_time_table(d: StepDistribution, K: int, N: int,
                       support_eps: Optional[float] = None) -> HittingTimeTable:
    """
    P(T_k = i) on the grid 1 <= k <= K, 0 <= i <= N

    Args:
        d: step law
        K: largest start level
        N: largest step count
        support_eps: tail mass allowed to be dropped from an infinite support

    Returns:
        HittingTimeTable with trunc_error bounding the mass lost to truncation
    """
    if K < 1 or N < 1:
        raise ParamOutOfRange(f"hitting table needs K, N >= 1, got K={K}, N={N}")
    eps = get_settings().support_eps if support_eps is None else support_eps
    p = d.support_probs(eps)
    lost_per_step = d.discarded_mass(eps)

    q = np.zeros((K + 1, N + 1))
    rows = min(K, N)
    # Dual walk mass on states 0..N; states only grow by one per step
    mass = np.zeros(N + 1)
    mass[0] = 1.0
    padding = np.zeros(len(p) - 1)
    for step in range(1, N + 1):
        shifted = np.correlate(np.concatenate([mass, padding]), p, mode="valid")
        mass = np.zeros(N + 1)
        mass[1:] = shifted[:N]
        q[1:rows + 1, step] = mass[1:rows + 1]

    trunc_error = min(1.0, N * lost_per_step)
    logger.debug("hitting table %s: K=%d N=%d trunc_error=%.3g", d.spec, K, N, trunc_error)
    return HittingTimeTable(pmf=d.spec, K=K, N=N, q=q, trunc_error=trunc_error)


def expected_profile(table: HittingTimeTable, k: int, t: float) -> ProfileEstimate:
    """
    E[P_k(t)] = sum_i t^i/i! P(T_k = i) for the killed tree

    Evaluated as e^t sum_i Pois(t, i) q[k][i] in log space.

    Raises:
        TruncationBudgetExceeded: the Poisson tail beyond N is too heavy for this t
    """
    if t < 0:
        raise ParamOutOfRange(f"time must be nonnegative, got {t}")
    row = table.row(k)
    if t == 0.0:
        return ProfileEstimate(k=k, t=t, value=float(row[0]), error_bound=0.0)

    poisson_tail = float(stats.poisson.sf(table.N, t))
    if poisson_tail >= SERIES_BUDGET:
        raise TruncationBudgetExceeded(
            f"P(Pois({t}) > {table.N}) = {poisson_tail:.3g}; grow the table beyond N={table.N}"
        )

    i = np.arange(table.N + 1)
    log_weights = i * math.log(t) - special.gammaln(i + 1)
    positive = row > 0
    if not np.any(positive):
        value = 0.0
    else:
        value = float(np.exp(special.logsumexp(log_weights[positive], b=row[positive])))
    bound_terms = poisson_tail + table.trunc_error
    error_bound = math.exp(min(t + math.log(bound_terms), 700.0)) if bound_terms > 0 else 0.0
    return ProfileEstimate(k=k, t=t, value=value, error_bound=error_bound)


def expected_profile_ode(d: StepDistribution, kind: str, K: int, t: float) -> np.ndarray:
    """Mean depth profile (levels 0..K) from the matrix exponential of the level generator"""
    M = level_generator(d, kind, K)
    return linalg.expm(M * t)[:, 0]


def hitting_ratio_trace(table: HittingTimeTable, k: int = 1, n_range: Optional[range] = None,
                        lag: int = 1, corrected: bool = False) -> List[RatioPoint]:
    """
    q[k][n+lag] / q[k][n] along n; zero denominators are skipped

    With corrected=True each ratio is multiplied by ((n+lag)/n)^(3/2), removing the
    polynomial prefactor of the local hitting-time law.
    """
    row = table.row(k)
    if n_range is None:
        n_range = range(1, table.N - lag + 1)
    trace = []
    for n in n_range:
        if n + lag > table.N or n < 1:
            continue
        if row[n] == 0.0:
            continue
        ratio = row[n + lag] / row[n]
        if corrected:
            ratio *= ((n + lag) / n) ** 1.5
        trace.append(RatioPoint(n=n, ratio=float(ratio)))
    return trace


def tilted_step_pmf(d: StepDistribution, s: float) -> TiltedStep:
    """Increment law of the walk tilted by s; drift (f(s) - s f'(s)) / f(s)"""
    if s <= 0:
        raise ParamOutOfRange(f"tilt must be positive, got {s}")
    f = d.pgf(s)
    if math.isinf(f):
        raise PgfInfinite(f"f({s}) diverges for {d.spec}")
    if d.kind == "geometric":
        z_law = StepDistribution.preset("geometric", 1.0 - d.q * s)
    else:
        weights = d.probs * float(s) ** np.arange(len(d.probs))
        z_law = StepDistribution.from_pmf(weights / weights.sum())
    drift = (f - s * d.pgf_prime(s)) / f
    return TiltedStep(s=float(s), z_law=z_law, drift=drift)


def survival_prob_estimate(d: StepDistribution, s: float, horizon_steps: int, replicas: int,
                           rng: np.random.Generator) -> SurvivalEstimate:
    """
    Fraction of tilted walks from 0 that stay >= 1 for steps 1..horizon_steps

    Blocks of steps are drawn with sizes depending only on the surviving population,
    so a longer horizon replays the same paths and the estimate is nonincreasing in it.
    """
    if d.mean() >= 1.0:
        raise PreconditionViolated(f"{d.spec}: survival needs E[Z] < 1")
    s0 = solve_s0(d).as_float()
    if not 1.0 <= s < s0:
        raise PreconditionViolated(f"tilt {s} outside [1, s0={s0:.6g})")
    if replicas < 1 or horizon_steps < 1:
        raise ParamOutOfRange("need at least one replica and one step")

    law = tilted_step_pmf(d, s).z_law
    position = np.zeros(replicas, dtype=np.int64)
    alive = np.arange(replicas)
    done = 0
    while done < horizon_steps and len(alive):
        block = int(max(8, min(256, 4_000_000 // len(alive))))
        z = law.sample_many(rng, len(alive) * block).reshape(len(alive), block)
        paths = position[alive, None] + np.cumsum(1 - z, axis=1)
        used = min(block, horizon_steps - done)
        survived = np.all(paths[:, :used] >= 1, axis=1)
        position[alive] = paths[:, used - 1]
        alive = alive[survived]
        done += used

    estimate = len(alive) / replicas
    stderr = math.sqrt(max(estimate * (1.0 - estimate), 0.0) / replicas)
    return SurvivalEstimate(estimate=estimate, stderr=stderr,
                            horizon_steps=horizon_steps, replicas=replicas)
