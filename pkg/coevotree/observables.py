"""
Observables - Read-only statistics over grown trees

Degrees, depth profiles, height, PageRank, fringe-shape histograms, tail-exponent
fits and the Yule martingale.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, Field
from scipy import stats

from .errors import DegenerateSample, MissingBirthTimes, ParamOutOfRange, PreconditionViolated
from .tree import ROOT, TreeState

logger = logging.getLogger(__name__)

# Rooted trees with at most three vertices, as AHU codes
SMALL_TREE_CODES = {
    "singleton": "()",
    "edge": "(())",
    "path": "((()))",
    "cherry": "(()())",
}

# Component marker for fringe components larger than max_size
OVERFLOW = "*"

MAX_FRINGE_SIZE = 12
MAX_EXTENDED_K = 3
MIN_HILL_SAMPLES = 1000


# ==================== DEGREES AND PROFILES ====================

def degrees(tree: TreeState) -> np.ndarray:
    """Degree of every vertex: children plus one for the parent edge"""
    deg = tree.child_counts().copy()
    deg[1:] += 1
    return deg


def degree_histogram(tree: TreeState) -> np.ndarray:
    """counts[k] = number of vertices of degree k"""
    return np.bincount(degrees(tree))


def root_degree(tree: TreeState) -> int:
    return int(tree.child_counts()[0])


def vertex_degree(tree: TreeState, v: int) -> int:
    if not 0 <= v < tree.n:
        raise ParamOutOfRange(f"vertex {v} not in a tree of {tree.n} vertices")
    return int(tree.child_counts()[v]) + (1 if v != 0 else 0)


def height(tree: TreeState) -> int:
    return int(tree.depth.max())


@dataclass
class ProfileVector:
    """counts[i] = number of vertices at depth i"""

    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def weighted(self, s: float) -> float:
        if s <= 0:
            raise ParamOutOfRange(f"profile weight base must be positive, got {s}")
        levels = np.arange(1, len(self.counts))
        return float(np.sum(self.counts[1:] * np.power(float(s), -levels.astype(np.float64))))


def depth_profile(tree: TreeState) -> ProfileVector:
    return ProfileVector(counts=np.bincount(tree.depth).astype(np.int64))


def weighted_profile(tree: TreeState, s: float) -> float:
    """Sum over depths i >= 1 of s^-i times the level count"""
    return depth_profile(tree).weighted(s)


# ==================== PAGERANK ====================

@dataclass
class PageRankVector:
    """Graph-normalized PageRank scores (n times the stationary probabilities)"""

    scores: np.ndarray
    damping: float

    def adjusted_total(self) -> float:
        """Sum of scores with the root's dangling correction; equals n"""
        c = self.damping
        return float(np.sum(self.scores) + c / (1.0 - c) * self.scores[0])

    def stationary(self) -> np.ndarray:
        """Probability-normalized scores, root corrected, summing to 1"""
        n = len(self.scores)
        probs = self.scores / n
        probs = probs.copy()
        probs[0] /= (1.0 - self.damping)
        return probs


def pagerank_scores(tree: TreeState, c: float) -> PageRankVector:
    """
    Scores from R_v = (1 - c) + c * (sum of children's R), one bottom-up sweep

    Args:
        tree: any tree
        c: damping factor in (0, 1)

    Returns:
        PageRankVector
    """
    if not 0.0 < c < 1.0:
        raise ParamOutOfRange(f"damping must lie in (0, 1), got {c}")
    scores = np.full(tree.n, 1.0 - c)
    order = np.argsort(tree.depth, kind="stable")
    bounds = np.searchsorted(tree.depth[order], np.arange(int(tree.depth.max()) + 2))
    for level in range(len(bounds) - 2, 0, -1):
        members = order[bounds[level]:bounds[level + 1]]
        np.add.at(scores, tree.parent[members], c * scores[members])
    return PageRankVector(scores=scores, damping=c)


def to_networkx(tree: TreeState) -> nx.DiGraph:
    return tree.to_networkx()


def pagerank_bruteforce(tree: TreeState, c: float, l_max: Optional[int] = None) -> PageRankVector:
    """Oracle: (1 - c)(1 + sum_l c^l P_l(v)) with P_l counted by explicit traversal"""
    l_max = height(tree) if l_max is None else l_max
    graph = tree.to_networkx()
    scores = np.empty(tree.n)
    for v in range(tree.n):
        total = 1.0
        for level in range(1, l_max + 1):
            paths = len(nx.descendants_at_distance(graph, v, level))
            if paths == 0:
                break
            total += c ** level * paths
        scores[v] = (1.0 - c) * total
    return PageRankVector(scores=scores, damping=c)


# ==================== FRINGE SHAPES ====================

def subtree_sizes(tree: TreeState) -> np.ndarray:
    sizes = np.ones(tree.n, dtype=np.int64)
    order = np.argsort(tree.depth, kind="stable")
    bounds = np.searchsorted(tree.depth[order], np.arange(int(tree.depth.max()) + 2))
    for level in range(len(bounds) - 2, 0, -1):
        members = order[bounds[level]:bounds[level + 1]]
        np.add.at(sizes, tree.parent[members], sizes[members])
    return sizes


def fringe_codes(tree: TreeState, max_size: int) -> List[Optional[str]]:
    """AHU code of every fringe subtree with at most max_size vertices, else None"""
    offsets, order = tree.children()
    sizes = subtree_sizes(tree).tolist()
    offsets = offsets.tolist()
    order = order.tolist()
    codes: List[Optional[str]] = [None] * tree.n
    for v in range(tree.n - 1, -1, -1):
        if sizes[v] > max_size:
            continue
        kids = sorted(codes[u] for u in order[offsets[v]:offsets[v + 1]])
        codes[v] = "(" + "".join(kids) + ")"
    return codes


def canonical_code(tree: TreeState) -> str:
    """AHU code of the whole tree"""
    return fringe_codes(tree, tree.n)[0]


@dataclass
class FringeHistogram:
    """Counts of fringe shapes keyed by AHU code, with an overflow bucket"""

    counts: Dict[str, int]
    max_size: int
    overflow: int = 0
    extended_k: int = 0
    extended: Dict[Tuple[str, ...], int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values()) + self.overflow

    def proportions(self) -> Dict[str, float]:
        total = self.total
        return {code: count / total for code, count in self.counts.items()} if total else {}

    def proportion(self, code: str) -> float:
        total = self.total
        return self.counts.get(code, 0) / total if total else 0.0

    def total_variation(self, other: "FringeHistogram", codes: Optional[Sequence[str]] = None) -> float:
        """TV distance over the given shapes plus one bucket for everything else"""
        codes = list(codes or SMALL_TREE_CODES.values())
        mine = [self.proportion(code) for code in codes]
        theirs = [other.proportion(code) for code in codes]
        mine.append(1.0 - sum(mine))
        theirs.append(1.0 - sum(theirs))
        return 0.5 * float(np.sum(np.abs(np.array(mine) - np.array(theirs))))

    def to_dict(self) -> Dict:
        result = {"max_size": self.max_size, "overflow": self.overflow, "counts": dict(self.counts)}
        if self.extended_k:
            result["extended_k"] = self.extended_k
            result["extended"] = {"|".join(key): count for key, count in self.extended.items()}
        return result

    @classmethod
    def from_samples(cls, trees: Sequence[TreeState], max_size: int) -> "FringeHistogram":
        """Histogram of whole-tree shapes, e.g. of fringe-limit draws"""
        counts: Counter = Counter()
        overflow = 0
        for tree in trees:
            if tree.n > max_size or tree.truncated:
                overflow += 1
            else:
                counts[canonical_code(tree)] += 1
        return cls(counts=dict(counts), max_size=max_size, overflow=overflow)


def fringe_histogram(tree: TreeState, max_size: int = 4, extended_k: int = 0) -> FringeHistogram:
    """
    Empirical fringe distribution of a tree

    Args:
        tree: tree to decompose
        max_size: largest fringe subtree given its own code (at most 12)
        extended_k: also record (f_0, ..., f_k) along each vertex's root path (at most 3);
            f_i is the subtree of the i-th ancestor with the branch toward the vertex cut
            off, OVERFLOW when it exceeds max_size and "" beyond the root

    Returns:
        FringeHistogram
    """
    if not 1 <= max_size <= MAX_FRINGE_SIZE:
        raise ParamOutOfRange(f"max_size must lie in [1, {MAX_FRINGE_SIZE}], got {max_size}")
    if not 0 <= extended_k <= MAX_EXTENDED_K:
        raise ParamOutOfRange(f"extended_k must lie in [0, {MAX_EXTENDED_K}], got {extended_k}")

    codes = fringe_codes(tree, max_size)
    counts = Counter(code for code in codes if code is not None)
    overflow = tree.n - sum(counts.values())
    histogram = FringeHistogram(counts=dict(counts), max_size=max_size, overflow=overflow,
                                extended_k=extended_k)
    if extended_k:
        histogram.extended = dict(_extended_counts(tree, codes, max_size, extended_k))
    return histogram


def _extended_counts(tree: TreeState, codes: List[Optional[str]], max_size: int, k: int) -> Counter:
    offsets, order = tree.children()
    offsets = offsets.tolist()
    order = order.tolist()
    sizes = subtree_sizes(tree).tolist()
    parent = tree.parent.tolist()
    extended: Counter = Counter()
    for v in range(tree.n):
        key = [codes[v] if codes[v] is not None else OVERFLOW]
        prev = v
        a = parent[v]
        for _ in range(k):
            if a == ROOT:
                key.append("")
                continue
            if sizes[a] - sizes[prev] > max_size:
                key.append(OVERFLOW)
            else:
                kids = sorted(codes[u] for u in order[offsets[a]:offsets[a + 1]] if u != prev)
                key.append("(" + "".join(kids) + ")")
            prev = a
            a = parent[a]
        extended[tuple(key)] += 1
    return extended


# ==================== TAIL FITS ====================

class TailFitResult(BaseModel):
    """Power-law tail exponent alpha in P(X >= x) ~ x^-alpha"""

    estimate: float
    stderr: float
    method: str = Field(..., description="Hill or LogLogLS")
    m: Optional[int] = Field(default=None, description="Order statistics used by Hill")
    k_min: Optional[float] = Field(default=None, description="Lower cutoff for LogLogLS")


def _positive_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    x = x[np.isfinite(x)]
    if len(x) == 0 or np.any(x <= 0):
        raise PreconditionViolated("tail fits need a nonempty sample of positive values")
    if np.all(x == x[0]):
        raise DegenerateSample("all sample values are equal")
    return x


def tail_exponent(samples, method: str = "hill", m: Optional[int] = None,
                  k_min: Optional[float] = None) -> TailFitResult:
    """
    Estimate a tail exponent

    Args:
        samples: positive observations
        method: 'hill' (top-m order statistics) or 'loglog' (least squares on the log CCDF)
        m: Hill order count, default floor(n^(2/3))
        k_min: LogLogLS lower cutoff, default the sample median

    Returns:
        TailFitResult
    """
    x = _positive_samples(samples)
    if method.lower() in ("hill",):
        if len(x) < MIN_HILL_SAMPLES:
            raise PreconditionViolated(f"Hill needs at least {MIN_HILL_SAMPLES} samples, got {len(x)}")
        m = int(len(x) ** (2.0 / 3.0)) if m is None else int(m)
        m = max(1, min(m, len(x) - 1))
        top = -np.sort(-x)[:m + 1]
        logs = np.log(top[:m] / top[m])
        mean_log = float(np.mean(logs))
        if mean_log <= 0:
            raise DegenerateSample(f"top {m} order statistics are all equal")
        estimate = 1.0 / mean_log
        return TailFitResult(estimate=estimate, stderr=estimate / math.sqrt(m), method="Hill", m=m)

    if method.lower() in ("loglog", "loglogls", "ls"):
        k_min = float(np.median(x)) if k_min is None else float(k_min)
        values, counts = np.unique(x, return_counts=True)
        ccdf = np.cumsum(counts[::-1])[::-1] / len(x)
        keep = values >= k_min
        if np.count_nonzero(keep) < 3:
            raise DegenerateSample(f"fewer than three distinct values above k_min={k_min}")
        fit = stats.linregress(np.log(values[keep]), np.log(ccdf[keep]))
        stderr = float(fit.stderr) if fit.stderr > 0 else float(np.finfo(float).eps)
        return TailFitResult(estimate=-float(fit.slope), stderr=stderr, method="LogLogLS", k_min=k_min)

    raise ParamOutOfRange(f"unknown tail method '{method}'")


def hill_sweep(samples, m: Optional[int] = None) -> List[TailFitResult]:
    """Hill estimates at m/2, m and 2m"""
    x = _positive_samples(samples)
    m = int(len(x) ** (2.0 / 3.0)) if m is None else int(m)
    return [tail_exponent(x, "hill", m=mm) for mm in (max(1, m // 2), m, 2 * m)]


def ccdf_table(samples) -> List[Tuple[int, int, float]]:
    """Rows (k, count, P(X >= k)) over the distinct integer values"""
    x = np.asarray(samples, dtype=np.int64)
    values, counts = np.unique(x, return_counts=True)
    ccdf = np.cumsum(counts[::-1])[::-1] / len(x)
    return [(int(k), int(c), float(p)) for k, c, p in zip(values, counts, ccdf)]


# ==================== MARTINGALE ====================

def martingale_w(tree: TreeState) -> float:
    """n * exp(-T), T the birth time of the last vertex"""
    if tree.birth_time is None:
        raise MissingBirthTimes("martingale_w needs a tree grown in continuous time")
    return float(tree.n * math.exp(-float(tree.birth_time[-1])))
