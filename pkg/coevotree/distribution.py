"""
Step Distribution - The exploration-length law p = {p_k}, its pgf and samplers
"""
import logging
import math
import warnings
from functools import reduce
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import (
    AssumptionViolated,
    EmptySupport,
    MassNotOne,
    NegativeWeight,
    ParamOutOfRange,
)

logger = logging.getLogger(__name__)


class StepDistribution:
    """Law of Z, the number of steps a newcomer walks toward the root"""

    # Mass tolerance for explicit supports
    MASS_TOL = 1e-12

    # Default tail mass dropped when an infinite support is materialized
    TRUNC_EPS = 1e-12

    FAMILIES = ("explicit", "geometric", "affine", "srw", "deterministic")

    # Accepted spellings in preset() and the pmf grammar
    ALIASES = {
        "geometric": "geometric",
        "geom": "geometric",
        "affine": "affine",
        "bernoulli-affine": "affine",
        "srw": "srw",
        "two-point-srw": "srw",
        "det": "deterministic",
        "deterministic": "deterministic",
        "pmf": "explicit",
        "explicit": "explicit",
    }

    def __init__(self, kind: str, probs: np.ndarray, param: Optional[float] = None,
                 trunc_eps: float = 0.0, spec: Optional[str] = None):
        self.kind = kind
        self.param = param
        self.probs = np.asarray(probs, dtype=np.float64)
        self.probs.setflags(write=False)
        self.trunc_eps = float(trunc_eps)
        self.spec = spec or self._default_spec()
        self._alias_prob, self._alias_index = self._build_alias(self.probs)

    # ==================== CONSTRUCTION ====================

    @classmethod
    def from_pmf(cls, weights: Sequence[float]) -> "StepDistribution":
        """
        Validate explicit weights p_0..p_K

        Raises:
            EmptySupport, NegativeWeight, MassNotOne
        """
        values = [float(w) for w in weights]
        if not values:
            raise EmptySupport("pmf needs at least one weight")
        for k, w in enumerate(values):
            if not math.isfinite(w) or w < 0:
                raise NegativeWeight(f"weight p_{k}={w} is not a finite nonnegative number")
        total = math.fsum(values)
        if abs(total - 1.0) > cls.MASS_TOL:
            raise MassNotOne(f"weights sum to {total!r}, expected 1")
        # Trailing zeros carry no information
        while len(values) > 1 and values[-1] == 0.0:
            values.pop()
        spec = "pmf:" + ",".join(repr(w) for w in values)
        return cls("explicit", np.array(values), spec=spec)

    @classmethod
    def preset(cls, kind: str, param: float) -> "StepDistribution":
        """Named analytic family with exact pgf"""
        family = cls.ALIASES.get(kind.lower())
        if family is None or family == "explicit":
            raise ParamOutOfRange(f"unknown family '{kind}'")

        if family == "geometric":
            p = float(param)
            if not 0.0 < p <= 1.0:
                raise ParamOutOfRange(f"geometric needs p in (0,1], got {param}")
            q = 1.0 - p
            if q == 0.0:
                return cls("geometric", np.array([1.0]), param=p, spec=f"geometric:{p!r}")
            # Materialize until the discarded tail q^(K+1) drops below TRUNC_EPS
            K = max(0, math.ceil(math.log(cls.TRUNC_EPS) / math.log(q)) - 1)
            probs = p * q ** np.arange(K + 1)
            return cls("geometric", probs, param=p, trunc_eps=q ** (K + 1), spec=f"geometric:{p!r}")

        if family == "affine":
            p = float(param)
            if not 0.0 <= p <= 1.0:
                raise ParamOutOfRange(f"affine needs p in [0,1], got {param}")
            return cls("affine", np.array([1.0 - p, p]), param=p, spec=f"affine:{p!r}")

        if family == "srw":
            p = float(param)
            if not 0.0 <= p <= 1.0:
                raise ParamOutOfRange(f"srw needs p in [0,1], got {param}")
            return cls("srw", np.array([p, 0.0, 1.0 - p]), param=p, spec=f"srw:{p!r}")

        k = float(param)
        if k < 0 or k != int(k):
            raise ParamOutOfRange(f"deterministic needs a nonnegative integer, got {param}")
        probs = np.zeros(int(k) + 1)
        probs[-1] = 1.0
        return cls("deterministic", probs, param=int(k), spec=f"det:{int(k)}")

    def _default_spec(self) -> str:
        if self.kind == "explicit":
            return "pmf:" + ",".join(repr(float(w)) for w in self.probs)
        return f"{self.kind}:{self.param}"

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepDistribution):
            return NotImplemented
        return (self.trunc_eps == other.trunc_eps
                and self.probs.shape == other.probs.shape
                and bool(np.all(self.probs == other.probs)))

    def __hash__(self) -> int:
        return hash((self.probs.tobytes(), self.trunc_eps))

    def __repr__(self) -> str:
        return f"StepDistribution({self.spec})"

    # ==================== PMF ====================

    @property
    def q(self) -> float:
        """1 - p for the geometric family"""
        return 1.0 - float(self.param) if self.kind == "geometric" else float("nan")

    @property
    def p0(self) -> float:
        return self.prob(0)

    @property
    def is_infinite_support(self) -> bool:
        return self.kind == "geometric" and self.q > 0.0

    @property
    def radius(self) -> float:
        """Radius of convergence r_f of the pgf"""
        if self.is_infinite_support:
            return 1.0 / self.q
        return math.inf

    def prob(self, k: int) -> float:
        """Exact p_k"""
        if k < 0:
            return 0.0
        if self.kind == "geometric":
            return float(self.param) * self.q ** k
        return float(self.probs[k]) if k < len(self.probs) else 0.0

    def pmf_array(self, K: int) -> np.ndarray:
        """Exact p_0..p_K"""
        if self.kind == "geometric":
            return float(self.param) * self.q ** np.arange(K + 1)
        out = np.zeros(K + 1)
        m = min(K + 1, len(self.probs))
        out[:m] = self.probs[:m]
        return out

    def support_probs(self, eps: Optional[float] = None) -> np.ndarray:
        """Finite support with tail mass at most eps discarded"""
        eps = self.TRUNC_EPS if eps is None else eps
        if self.is_infinite_support and eps != self.TRUNC_EPS:
            K = max(0, math.ceil(math.log(eps) / math.log(self.q)) - 1)
            return self.pmf_array(K)
        return np.array(self.probs)

    def discarded_mass(self, eps: Optional[float] = None) -> float:
        """Tail mass lost by support_probs(eps)"""
        return max(0.0, 1.0 - math.fsum(self.support_probs(eps)))

    def tail(self, i: int) -> float:
        """c_i = sum_{k>=i} p_k, with c_0 = 1"""
        if i <= 0:
            return 1.0
        if self.kind == "geometric":
            return self.q ** i
        return math.fsum(self.probs[i:]) if i < len(self.probs) else 0.0

    # ==================== GENERATING FUNCTION ====================

    def pgf(self, s: float) -> float:
        """f(s) = sum p_k s^k; +inf beyond the radius of convergence"""
        if s < 0:
            raise ParamOutOfRange(f"pgf needs s >= 0, got {s}")
        if self.kind == "geometric":
            q = self.q
            if q * s >= 1.0:
                return math.inf
            return float(self.param) / (1.0 - q * s)
        return _horner(self.probs, s)

    def pgf_many(self, s: np.ndarray) -> np.ndarray:
        """Vectorized pgf over a grid of points"""
        s = np.asarray(s, dtype=np.float64)
        if self.kind == "geometric":
            q = self.q
            out = np.full(s.shape, np.inf)
            inside = q * s < 1.0
            out[inside] = float(self.param) / (1.0 - q * s[inside])
            return out
        return np.polyval(self.probs[::-1], s)

    def pgf_prime(self, s: float) -> float:
        """f'(s) by closed form or term-wise differentiation"""
        if self.kind == "geometric":
            q = self.q
            if q * s >= 1.0:
                return math.inf
            return float(self.param) * q / (1.0 - q * s) ** 2
        coeffs = self.probs[1:] * np.arange(1, len(self.probs))
        return _horner(coeffs, s) if len(coeffs) else 0.0

    def mean(self) -> float:
        """E[Z] = f'(1)"""
        if self.kind == "geometric":
            return self.q / float(self.param)
        return math.fsum(self.probs * np.arange(len(self.probs)))

    # ==================== SAMPLING ====================

    @staticmethod
    def _build_alias(probs: np.ndarray):
        """Vose alias tables for constant-time draws"""
        K = len(probs)
        scaled = probs / probs.sum() * K
        prob = np.zeros(K)
        alias = np.arange(K)
        small = [i for i in range(K) if scaled[i] < 1.0]
        large = [i for i in range(K) if scaled[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] = scaled[l] + scaled[s] - 1.0
            (small if scaled[l] < 1.0 else large).append(l)
        for i in large + small:
            prob[i] = 1.0
        return prob, alias

    def sample(self, rng: np.random.Generator) -> int:
        """One draw of Z"""
        return int(self.sample_many(rng, 1)[0])

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Vectorized draws of Z; geometric by inversion, everything else by alias"""
        if self.kind == "geometric":
            return rng.geometric(float(self.param), size=size).astype(np.int64) - 1
        if self.kind == "deterministic":
            return np.full(size, int(self.param), dtype=np.int64)
        K = len(self.probs)
        idx = rng.integers(0, K, size=size)
        u = rng.random(size)
        return np.where(u < self._alias_prob[idx], idx, self._alias_index[idx]).astype(np.int64)

    # ==================== ASSUMPTIONS ====================

    def period(self) -> int:
        """gcd{j : p_j > 0} of the walk with increments Z - 1"""
        support = [j for j, w in enumerate(self.probs) if w > 0]
        return reduce(math.gcd, support, 0) or 1

    def assumption_flags(self) -> List[str]:
        """Model assumption checks; empty when all hold"""
        flags = []
        p0 = self.p0
        if not 0.0 < p0 < 1.0:
            flags.append(f"p0={p0} outside (0,1)")
        period = self.period()
        if period != 1:
            flags.append(f"periodic walk (gcd={period})")
        if 0.0 < p0 < 1.0 and abs(p0 + self.prob(1) - 1.0) <= self.MASS_TOL:
            flags.append("p0+p1=1: affine case, covered by extension only")
        return flags

    def check_assumptions(self) -> List[str]:
        """Warn once per violated assumption and return the flags"""
        flags = self.assumption_flags()
        for flag in flags:
            warnings.warn(AssumptionViolated(f"{self.spec}: {flag}"), stacklevel=2)
        return flags

    def describe(self) -> Dict:
        return {
            "spec": self.spec,
            "kind": self.kind,
            "param": self.param,
            "p0": self.p0,
            "mean": self.mean(),
            "radius": None if math.isinf(self.radius) else self.radius,
            "support_size": len(self.probs),
            "trunc_eps": self.trunc_eps,
        }


def _horner(coeffs: Sequence[float], s: float) -> float:
    value = 0.0
    for c in reversed(list(coeffs)):
        value = value * s + float(c)
    return value


def parse_pmf_spec(text: str) -> StepDistribution:
    """
    Parse the command-line pmf grammar

    Args:
        text: 'geometric:0.3', 'affine:0.4', 'srw:0.4', 'det:2' or 'pmf:0.4,0,0.6'

    Returns:
        StepDistribution
    """
    if ":" not in text:
        raise ParamOutOfRange(f"pmf spec '{text}' must look like family:param")
    family, _, arg = text.strip().partition(":")
    family = StepDistribution.ALIASES.get(family.strip().lower())
    if family is None:
        raise ParamOutOfRange(f"unknown family in pmf spec '{text}'")
    try:
        if family == "explicit":
            return StepDistribution.from_pmf([float(w) for w in arg.split(",") if w.strip()])
        return StepDistribution.preset(family, float(arg))
    except ValueError as exc:
        raise ParamOutOfRange(f"cannot parse pmf spec '{text}': {exc}") from exc
