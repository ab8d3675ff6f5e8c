"""
Growth Simulator - Random tree growth under exploration attachment

Builds the discrete tree, its continuous-time embedding, the killed tree, exact fringe
samples, PageRank-driven attachment, and the companion branching random walk and urn.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .config import get_settings
from .constants import truncated_kernel
from .distribution import StepDistribution, parse_pmf_spec
from .errors import HorizonExplosion, ParamOutOfRange
from .observables import pagerank_scores
from .streams import clock_rng
from .tree import ROOT, TreeState

logger = logging.getLogger(__name__)

# First chunk of clock draws when the stopping size is unknown
CLOCK_CHUNK = 64
MAX_CLOCK_CHUNK = 1 << 20


class Variant(str, Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"
    KILLED = "killed"
    PAGERANK = "pagerank"


class GrowthConfig(BaseModel):
    """What to grow: step law, one target, dynamics and seed"""

    pmf: str = Field(..., description="pmf spec, e.g. 'geometric:0.3'")
    n: Optional[int] = Field(default=None, ge=1, description="Target vertex count")
    horizon: Optional[float] = Field(default=None, ge=0.0, description="Target time horizon")
    variant: Variant = Variant.DISCRETE
    damping: Optional[float] = Field(default=None, description="PageRank damping c for pagerank attachment")
    seed: int = Field(default=0, ge=0, lt=2**64)

    model_config = {
        "json_schema_extra": {
            "examples": [
                {"pmf": "geometric:0.3", "n": 1000, "variant": "discrete", "seed": 7}
            ]
        }
    }

    @model_validator(mode="after")
    def _check_target(self) -> "GrowthConfig":
        if (self.n is None) == (self.horizon is None):
            raise ValueError("exactly one of n and horizon must be given")
        if self.variant == Variant.PAGERANK:
            if self.damping is None or not 0.0 < self.damping < 1.0:
                raise ValueError("pagerank attachment needs damping c in (0, 1)")
            if self.n is None:
                raise ValueError("pagerank attachment grows to a vertex count")
        if self.variant == Variant.DISCRETE and self.n is None:
            raise ValueError("discrete growth grows to a vertex count")
        if self.variant == Variant.KILLED and self.horizon is None:
            raise ValueError("killed growth runs to a time horizon")
        return self

    @classmethod
    def from_variant_arg(cls, variant: str, **fields) -> "GrowthConfig":
        """Accept 'pr:<c>' as shorthand for pagerank attachment with damping c"""
        if variant.startswith("pr:"):
            try:
                damping = float(variant[3:])
            except ValueError:
                raise ParamOutOfRange(f"bad damping in variant '{variant}'")
            return cls(variant=Variant.PAGERANK, damping=damping, **fields)
        return cls(variant=Variant(variant), **fields)

    def distribution(self) -> StepDistribution:
        return parse_pmf_spec(self.pmf)


# ==================== ATTACHMENT CORE ====================

def _attachment_draws(d: StepDistribution, n: int, rng: np.random.Generator):
    """Uniform picks V_i in [0, i) for arrivals 2..n-1, then their Z values"""
    if n <= 2:
        return [], []
    picks = rng.integers(0, np.arange(2, n, dtype=np.int64))
    steps = d.sample_many(rng, n - 2)
    return picks.tolist(), steps.tolist()


def _attach(n: int, picks: List[int], steps: List[int]):
    """Parent and depth lists of the tree v0-v1 grown by the given draws"""
    if n == 1:
        return [ROOT], [0]
    parent = [ROOT, 0] + [0] * (n - 2)
    depth = [0, 1] + [1] * (n - 2)
    for i in range(2, n):
        v = picks[i - 2]
        z = steps[i - 2]
        dv = depth[v]
        if z >= dv:
            continue
        a = v
        for _ in range(z):
            a = parent[a]
        parent[i] = a
        depth[i] = dv - z + 1
    return parent, depth


def _check_cap(size: int, cap: int, what: str) -> None:
    if size > cap:
        raise HorizonExplosion(f"{what} reached {size} vertices, above the cap of {cap}")


def _check_horizon(horizon: float, cap: int) -> None:
    if horizon > math.log(cap):
        raise HorizonExplosion(f"horizon t={horizon} projects e^t={math.exp(min(horizon, 700.0)):.3g} "
                               f"vertices, above the cap of {cap}")


def _birth_times_until(clock: np.random.Generator, horizon: float, cap: int) -> np.ndarray:
    """Yule birth times <= horizon, root at 0; the j-th wait is Exp(j)"""
    pieces = [np.zeros(1)]
    last = 0.0
    size = 1
    chunk = CLOCK_CHUNK
    while True:
        waits = clock.exponential(size=chunk) / np.arange(size, size + chunk)
        cum = last + np.cumsum(waits)
        kept = int(np.searchsorted(cum, horizon, side="right"))
        pieces.append(cum[:kept])
        size += kept
        _check_cap(size, cap, f"growth to t={horizon}")
        if kept < chunk:
            break
        last = float(cum[-1])
        chunk = min(chunk * 2, MAX_CLOCK_CHUNK)
    return np.concatenate(pieces)


def _birth_times_count(clock: np.random.Generator, n: int) -> np.ndarray:
    waits = clock.exponential(size=n - 1) / np.arange(1, n)
    return np.concatenate([np.zeros(1), np.cumsum(waits)])


def _state(parent, depth, config: GrowthConfig, rng_state, birth_time=None, truncated=False) -> TreeState:
    return TreeState(parent, depth, birth_time=birth_time, seed=config.seed, variant=config.variant.value,
                     pmf=config.pmf, rng_state=rng_state, truncated=truncated)


# ==================== GROWTH VARIANTS ====================

def grow_discrete(config: GrowthConfig, rng: np.random.Generator) -> TreeState:
    """
    Discrete exploration tree on n vertices, started from the edge v0-v1

    Each arrival picks a uniform existing vertex V and a step count Z, then attaches
    to the ancestor of V at distance Z (the root when Z >= depth(V)).

    Args:
        config: growth configuration with target n
        rng: attachment stream

    Returns:
        TreeState
    """
    if config.n is None:
        raise ParamOutOfRange("grow_discrete needs a vertex target")
    d = config.distribution()
    _check_cap(config.n, get_settings().memory_cap_vertices, "discrete growth")
    start_state = rng.bit_generator.state
    picks, steps = _attachment_draws(d, config.n, rng)
    parent, depth = _attach(config.n, picks, steps)
    return _state(parent, depth, config, start_state)


def grow_continuous(config: GrowthConfig, rng: np.random.Generator) -> TreeState:
    """
    Continuous-time embedding started from a single vertex

    The clock runs on a jumped copy of `rng`, so the attachment draws match
    grow_discrete on the same stream. The first birth always attaches to the root.
    """
    cap = get_settings().memory_cap_vertices
    start_state = rng.bit_generator.state
    clock = clock_rng(rng)
    if config.horizon is not None:
        _check_horizon(config.horizon, cap)
        times = _birth_times_until(clock, config.horizon, cap)
    else:
        _check_cap(config.n, cap, "continuous growth")
        times = _birth_times_count(clock, config.n)
    n = len(times)
    picks, steps = _attachment_draws(config.distribution(), n, rng)
    parent, depth = _attach(n, picks, steps)
    logger.debug("continuous growth: %d vertices, last birth at %.4f", n, times[-1])
    return _state(parent, depth, config, start_state, birth_time=times)


def _grow_killed(d: StepDistribution, horizon: float, rng: np.random.Generator, cap: int,
                 size_cap: Optional[int] = None):
    """Gillespie run of the killed tree; rejected events still advance the clock"""
    parent = [ROOT]
    depth = [0]
    births = [0.0]
    size = 1
    now = 0.0
    chunk = 16
    truncated = False
    while True:
        waits = rng.exponential(size=chunk).tolist()
        picks = rng.random(chunk).tolist()
        steps = d.sample_many(rng, chunk).tolist()
        for e, u, z in zip(waits, picks, steps):
            now += e / size
            if now > horizon:
                return parent, depth, births, truncated
            v = int(u * size)
            dv = depth[v]
            if z > dv:
                continue
            a = v
            for _ in range(z):
                a = parent[a]
            parent.append(a)
            depth.append(dv - z + 1)
            births.append(now)
            size += 1
            if size_cap is not None and size > size_cap:
                truncated = True
                return parent, depth, births, truncated
            _check_cap(size, cap, f"killed growth to t={horizon}")
        chunk = min(chunk * 2, 4096)


def grow_killed(config: GrowthConfig, rng: np.random.Generator) -> TreeState:
    """Killed tree to the configured horizon: events with Z > depth(v) are discarded"""
    if config.horizon is None:
        raise ParamOutOfRange("grow_killed needs a time horizon")
    start_state = rng.bit_generator.state
    parent, depth, births, truncated = _grow_killed(config.distribution(), config.horizon, rng,
                                                    get_settings().memory_cap_vertices)
    return _state(parent, depth, config, start_state, birth_time=births, truncated=truncated)


def sample_fringe(d: StepDistribution, rng: np.random.Generator, size_cap: Optional[int] = None) -> TreeState:
    """
    One exact draw from the fringe limit: the killed tree at an independent Exp(1) time

    Args:
        d: step law
        rng: random stream
        size_cap: stop once the tree exceeds this size and flag it truncated

    Returns:
        TreeState with birth times
    """
    start_state = rng.bit_generator.state
    tau = float(rng.exponential())
    parent, depth, births, truncated = _grow_killed(d, tau, rng, get_settings().memory_cap_vertices, size_cap)
    return TreeState(parent, depth, birth_time=births, variant="fringe", pmf=d.spec,
                     rng_state=start_state, truncated=truncated)


# ==================== PAGERANK ATTACHMENT ====================

class FenwickSampler:
    """Prefix-sum tree over nonnegative weights with inverse-CDF lookup"""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.tree = [0.0] * (capacity + 1)
        self.count = 0
        self._top = 1 << (capacity.bit_length() - 1) if capacity > 0 else 0

    def add(self, index: int, delta: float) -> None:
        i = index + 1
        tree = self.tree
        while i <= self.capacity:
            tree[i] += delta
            i += i & -i

    def rebuild(self, weights: np.ndarray) -> None:
        """Linear-time rebuild from exact weights"""
        tree = [0.0] * (self.capacity + 1)
        tree[1:len(weights) + 1] = [float(w) for w in weights]
        for i in range(1, self.capacity + 1):
            j = i + (i & -i)
            if j <= self.capacity:
                tree[j] += tree[i]
        self.tree = tree
        self.count = len(weights)

    def total(self) -> float:
        total = 0.0
        i = self.capacity
        while i > 0:
            total += self.tree[i]
            i -= i & -i
        return total

    def find(self, u: float) -> int:
        """Smallest index whose prefix sum exceeds u, clamped to the live range"""
        pos = 0
        step = self._top
        tree = self.tree
        while step:
            nxt = pos + step
            if nxt <= self.capacity and tree[nxt] <= u:
                pos = nxt
                u -= tree[nxt]
            step >>= 1
        return min(pos, self.count - 1)


class PageRankAttachment:
    """
    Incremental PageRank-driven growth

    Scores follow R_v = (1 - c) + c * sum of children's R. A vertex is picked with
    weight R_v, the root with weight R_root / (1 - c), so the weights sum to the
    vertex count.
    """

    def __init__(self, damping: float, capacity: int, rebuild_every: Optional[int] = None):
        if not 0.0 < damping < 1.0:
            raise ParamOutOfRange(f"damping must lie in (0, 1), got {damping}")
        if capacity < 2:
            raise ParamOutOfRange("pagerank attachment needs room for at least two vertices")
        self.c = damping
        self.capacity = capacity
        self.rebuild_every = rebuild_every or get_settings().pagerank_rebuild_every
        self.parent = [ROOT]
        self.depth = [0]
        self.scores = [1.0 - damping]
        self.sampler = FenwickSampler(capacity)
        self.sampler.rebuild(np.array([1.0]))
        self.total = 1.0
        self._since_rebuild = 0
        self.attach(0)

    @property
    def size(self) -> int:
        return len(self.parent)

    def weight(self, v: int) -> float:
        return self.scores[v] / (1.0 - self.c) if v == 0 else self.scores[v]

    def attach(self, u: int) -> int:
        """Add a leaf under u and push its score contribution up the ancestor path"""
        c = self.c
        leaf = self.size
        self.parent.append(u)
        self.depth.append(self.depth[u] + 1)
        self.scores.append(1.0 - c)
        self.sampler.count = leaf + 1
        self.sampler.add(leaf, 1.0 - c)
        self.total += 1.0 - c

        inc = (1.0 - c) * c
        a = u
        while a != ROOT:
            self.scores[a] += inc
            delta = inc / (1.0 - c) if a == 0 else inc
            self.sampler.add(a, delta)
            self.total += delta
            inc *= c
            a = self.parent[a]

        self._since_rebuild += 1
        if self._since_rebuild >= self.rebuild_every:
            self.rebuild()
        return leaf

    def step(self, u: float) -> int:
        """One arrival driven by a uniform u in [0, 1)"""
        target = self.sampler.find(u * self.total)
        return self.attach(target)

    def rebuild(self) -> None:
        """Recompute scores and prefix sums exactly"""
        scores = pagerank_scores(TreeState(self.parent, self.depth), self.c).scores
        self.scores = scores.tolist()
        weights = scores.copy()
        weights[0] /= (1.0 - self.c)
        self.sampler.rebuild(weights)
        self.total = float(np.sum(weights))
        self._since_rebuild = 0
        logger.debug("pagerank sampler rebuilt at n=%d (total %.12f)", self.size, self.total)


def grow_pagerank_attachment(config: GrowthConfig, rng: np.random.Generator) -> TreeState:
    """
    Grow n vertices, each attaching to a vertex drawn with probability proportional
    to its PageRank
    """
    if config.n is None or config.damping is None:
        raise ParamOutOfRange("pagerank attachment needs a vertex target and a damping factor")
    n = config.n
    _check_cap(n, get_settings().memory_cap_vertices, "pagerank attachment")
    start_state = rng.bit_generator.state
    if n == 1:
        return _state([ROOT], [0], config, start_state)
    process = PageRankAttachment(config.damping, n)
    for u in rng.random(n - 2).tolist():
        process.step(u)
    return _state(process.parent, process.depth, config, start_state)


def grow(config: GrowthConfig, rng: np.random.Generator) -> TreeState:
    """Dispatch on the configured variant"""
    if config.variant == Variant.DISCRETE:
        return grow_discrete(config, rng)
    if config.variant == Variant.CONTINUOUS:
        return grow_continuous(config, rng)
    if config.variant == Variant.KILLED:
        return grow_killed(config, rng)
    return grow_pagerank_attachment(config, rng)


# ==================== BRANCHING RANDOM WALK ====================

@dataclass
class BrwTrajectory:
    """Birth times and running maxima; entry i covers the particles born up to times[i]"""

    times: np.ndarray
    rightmost: np.ndarray
    reflected: Optional[np.ndarray] = None
    killed: Optional[np.ndarray] = None

    @property
    def particles(self) -> int:
        return len(self.times)

    def _at(self, series: np.ndarray, t: float) -> int:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return int(series[max(i, 0)])

    def rightmost_at(self, t: float) -> int:
        return self._at(self.rightmost, t)

    def reflected_at(self, t: float) -> int:
        return self._at(self.reflected, t)

    def killed_at(self, t: float) -> int:
        return self._at(self.killed, t)

    def pairs(self) -> List[tuple]:
        """(time, B(time)) at every change of the running maximum"""
        change = np.nonzero(np.diff(self.rightmost, prepend=self.rightmost[0] - 1))[0]
        return [(float(self.times[i]), int(self.rightmost[i])) for i in change]


def _free_locations(parent: np.ndarray, disp: np.ndarray) -> np.ndarray:
    """Sum of displacements along each ancestral line by pointer doubling"""
    acc = disp.copy()
    ptr = parent.copy()
    while np.any(ptr != 0):
        acc = acc + acc[ptr]
        ptr = ptr[ptr]
    return acc


def simulate_brw(d: StepDistribution, horizon: float, cap: Optional[int], rng: np.random.Generator,
                 coupled: bool = False) -> BrwTrajectory:
    """
    Branching random walk on a Yule genealogy with displacements 1 - Z

    Args:
        d: step law
        horizon: final time
        cap: particle budget (None for the configured cap); e^horizon above it raises HorizonExplosion
        rng: random stream (birth clock, then parents, then displacements)
        coupled: also track the reflected walk max(x + 1 - Z, 1) and the killed walk
            on the same draws, whose maxima are the heights of the tree and the killed tree

    Returns:
        BrwTrajectory
    """
    cap = cap or get_settings().memory_cap_vertices
    _check_horizon(horizon, cap)
    times = _birth_times_until(rng, horizon, cap)
    n = len(times)
    parent = np.zeros(n, dtype=np.int64)
    disp = np.zeros(n, dtype=np.int64)
    if n > 1:
        parent[1:] = rng.integers(0, np.arange(1, n, dtype=np.int64))
        disp[1:] = 1 - d.sample_many(rng, n - 1)
    location = _free_locations(parent, disp)
    trajectory = BrwTrajectory(times=times, rightmost=np.maximum.accumulate(location))
    if coupled:
        trajectory.reflected, trajectory.killed = _coupled_maxima(parent.tolist(), disp.tolist())
    logger.debug("brw to t=%.3f: %d particles, B=%d", horizon, n, int(trajectory.rightmost[-1]))
    return trajectory


def _coupled_maxima(parent: List[int], disp: List[int]):
    n = len(parent)
    reflected = [0] * n
    killed = [0] * n
    alive = [True] * n
    for i in range(1, n):
        p = parent[i]
        x = reflected[p] + disp[i]
        reflected[i] = x if x > 1 else 1
        if alive[p]:
            y = killed[p] + disp[i]
            killed[i] = y
            alive[i] = y >= 1
        else:
            alive[i] = False
    killed_max = np.maximum.accumulate(np.where(alive, killed, 0))
    return np.maximum.accumulate(np.array(reflected, dtype=np.int64)), killed_max.astype(np.int64)


# ==================== MULTITYPE URN ====================

@dataclass
class UrnTrajectory:
    times: np.ndarray
    totals: np.ndarray
    counts: np.ndarray


def simulate_urn(d: StepDistribution, k: int, horizon: float, rng: np.random.Generator,
                 cap: Optional[int] = None) -> UrnTrajectory:
    """
    Continuous-time urn over levels 1..k started from one level-1 ball

    Every ball fires at rate 1; a level-j ball adds a level-i ball with probability
    (A_k)_ij and nothing otherwise, so the mean count vector is expm(A_k t) e_1.
    """
    cap = cap or get_settings().memory_cap_vertices
    columns = np.cumsum(truncated_kernel(d, "A", k).entries, axis=0).T.tolist()
    counts = [0] * k
    counts[0] = 1
    total = 1
    now = 0.0
    times = [0.0]
    totals = [1]
    chunk = 64
    while True:
        waits = rng.exponential(size=chunk).tolist()
        picks = rng.random(chunk).tolist()
        targets = rng.random(chunk).tolist()
        for e, u, w in zip(waits, picks, targets):
            now += e / total
            if now > horizon:
                return UrnTrajectory(times=np.array(times), totals=np.array(totals),
                                     counts=np.array(counts, dtype=np.int64))
            r = u * total
            j = 0
            while j < k - 1 and r >= counts[j]:
                r -= counts[j]
                j += 1
            column = columns[j]
            if w >= column[-1]:
                continue
            i = 0
            while column[i] <= w:
                i += 1
            counts[i] += 1
            total += 1
            times.append(now)
            totals.append(total)
            _check_cap(total, cap, f"urn to t={horizon}")
        chunk = min(chunk * 2, 4096)
