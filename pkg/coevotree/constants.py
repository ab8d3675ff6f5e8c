"""
Analytic Constants - Limit constants, predicted exponents and level kernels of the model

Everything here is a pure function of the step law: s0, R, q*, kappa0, the branching
random walk rate functions, and the truncated level-transition matrices with their
Perron roots.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import linalg, optimize

from .config import get_settings
from .distribution import StepDistribution, parse_pmf_spec
from .errors import (
    AssumptionViolated,
    NoConvergence,
    NoPositiveMassAtZero,
    ParamOutOfRange,
    PgfInfinite,
    PreconditionViolated,
)

logger = logging.getLogger(__name__)

# Grid used before golden-section refinement
KAPPA_GRID_POINTS = 1024
GRID_CLIP = 1e-9


# ==================== TYPES ====================

class ExtendedReal(BaseModel):
    """Real number or +infinity, with the infinity carried as an explicit flag"""

    value: Optional[float] = None
    infinite: bool = False

    @classmethod
    def of(cls, x: float) -> "ExtendedReal":
        if math.isinf(x) and x > 0:
            return cls(value=None, infinite=True)
        return cls(value=float(x), infinite=False)

    @classmethod
    def inf(cls) -> "ExtendedReal":
        return cls(value=None, infinite=True)

    def as_float(self) -> float:
        return math.inf if self.infinite else float(self.value)

    def __str__(self) -> str:
        return "inf" if self.infinite else f"{self.value:.10g}"


class Regime(str, Enum):
    FRINGE = "Fringe"
    NON_FRINGE = "NonFringe"


class ExponentPrediction(BaseModel):
    """Tail exponent alpha in P(X >= x) ~ x^-alpha: exact value or [lo, hi]"""

    lo: ExtendedReal
    hi: ExtendedReal
    branch: str = ""

    @property
    def exact(self) -> bool:
        return self.lo.as_float() == self.hi.as_float()

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lo.as_float() - slack <= x <= self.hi.as_float() + slack

    def midpoint(self) -> float:
        return 0.5 * (self.lo.as_float() + self.hi.as_float())


class Kappa0Result(BaseModel):
    kappa0: float
    minimizer: float


class AlphaKPoint(BaseModel):
    k: int
    alpha: float
    iterations: int
    residual: float


class ModelConstants(BaseModel):
    """Every limit constant of one step law"""

    pmf: str
    mean_z: float
    p0: float
    s0: ExtendedReal
    R: ExtendedReal
    q_star: float = Field(..., gt=0.0, le=1.0)
    kappa0: float = Field(..., gt=0.0)
    kappa0_minimizer: float
    regime: Regime
    degree_exponent: ExponentPrediction
    damping: Optional[float] = None
    pagerank_exponent: Optional[ExponentPrediction] = None
    alpha_k_trace: List[AlphaKPoint] = []
    closed_form: Optional[Dict[str, ExtendedReal]] = None
    assumption_flags: List[str] = []
    tolerances: Dict[str, float] = {}


@dataclass(frozen=True)
class TruncatedKernel:
    """k x k truncation of the level-transition matrix A or B (levels 1..k)"""

    kind: str
    k: int
    entries: np.ndarray
    pmf: str


@dataclass(frozen=True)
class PerronResult:
    eigenvalue: float
    vector: np.ndarray
    iterations: int
    residual: float
    lower: float
    upper: float


# ==================== ROOTS AND FIXED POINTS ====================

def _h_polynomial(d: StepDistribution, s: float) -> float:
    """s f'(s) - f(s) = sum (k-1) p_k s^k, without inf - inf"""
    if d.kind == "geometric":
        q = d.q
        if q * s >= 1.0:
            return math.inf
        return float(d.param) * (2.0 * q * s - 1.0) / (1.0 - q * s) ** 2
    value = 0.0
    for k in range(len(d.probs) - 1, -1, -1):
        value = value * s + (k - 1) * float(d.probs[k])
    return value


def solve_s0(d: StepDistribution, tol: Optional[float] = None) -> ExtendedReal:
    """
    Unique positive root of s f'(s) = f(s), or the radius of convergence

    Args:
        d: step law with p_0 > 0
        tol: bracket width at termination

    Returns:
        s0 as an extended real
    """
    tol = get_settings().root_tol if tol is None else tol
    if d.p0 <= 0.0:
        raise NoPositiveMassAtZero(f"{d.spec}: s0 needs p0 > 0")

    # h = -p0 identically when there is no mass beyond 1
    if not d.is_infinite_support and not np.any(d.probs[2:] > 0):
        return ExtendedReal.inf()

    r = d.radius
    if math.isinf(r):
        upper = 1.0
        while _h_polynomial(d, upper) <= 0.0:
            upper *= 2.0
    else:
        upper = None
        for j in range(1, 64):
            candidate = r * (1.0 - 2.0 ** -j)
            if _h_polynomial(d, candidate) > 0.0:
                upper = candidate
                break
        if upper is None:
            return ExtendedReal.of(r)

    root = optimize.bisect(lambda s: _h_polynomial(d, s), 0.0, upper, xtol=tol, maxiter=500)
    return ExtendedReal.of(root)


def compute_R(d: StepDistribution, s0: ExtendedReal) -> ExtendedReal:
    """R = lim_{s -> s0} s / f(s)"""
    if s0.infinite:
        # Only support {0,1} reaches here: s/f(s) -> 1/p1
        p1 = d.prob(1)
        return ExtendedReal.of(1.0 / p1) if p1 > 0 else ExtendedReal.inf()
    s = s0.as_float()
    f = d.pgf(s)
    if math.isinf(f):
        return ExtendedReal.of(0.0)
    return ExtendedReal.of(s / f)


def solve_qstar(d: StepDistribution, tol: Optional[float] = None, max_iters: int = 10_000_000) -> float:
    """Smallest root of f(q) = q in (0,1] by monotone iteration from 0"""
    tol = get_settings().root_tol if tol is None else tol
    if d.p0 <= 0.0:
        raise NoPositiveMassAtZero(f"{d.spec}: q* needs p0 > 0")
    # Subcritical and critical walks: extinction is certain, and the iteration is sublinear at 1
    if d.mean() <= 1.0:
        return 1.0

    q = 0.0
    for iteration in range(max_iters):
        nxt = d.pgf(q)
        if nxt - q <= tol * 1e-3:
            q = nxt
            break
        q = nxt
    else:
        raise NoConvergence(f"{d.spec}: q* iteration did not settle", iterations=max_iters)

    # Polish between the iterate (below q*) and a point inside (q*, 1)
    gap = lambda x: d.pgf(x) - x
    if gap(q) > 0.0:
        upper = 0.5 * (q + 1.0)
        if gap(upper) < 0.0:
            q = optimize.bisect(gap, q, upper, xtol=tol * 1e-2, maxiter=500)
    return float(q)


# ==================== MINIMIZATIONS ====================

def _grid_then_golden(objective, vector_objective, tol: float) -> Tuple[float, float]:
    """Coarse grid on (0,1), then golden section around the grid argmin"""
    grid = np.linspace(GRID_CLIP, 1.0 - GRID_CLIP, KAPPA_GRID_POINTS)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        values = vector_objective(grid)
    values = np.where(np.isfinite(values), values, np.inf)
    i = int(np.argmin(values))
    best_x, best_f = float(grid[i]), float(values[i])

    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    try:
        if not 0 < i < len(grid) - 1:
            raise ValueError("argmin on the grid boundary")
        result = optimize.minimize_scalar(
            objective, bracket=(grid[i - 1], grid[i], grid[i + 1]),
            method="golden", options={"xtol": tol},
        )
    except ValueError:
        # Flat neighbourhood or boundary argmin: no strict bracket
        result = optimize.minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                                          options={"xatol": tol})
    if np.isfinite(result.fun) and result.fun <= best_f and 0.0 < result.x < 1.0:
        best_x, best_f = float(result.x), float(result.fun)
    return best_x, best_f


def compute_kappa0(d: StepDistribution, tol: Optional[float] = None) -> Kappa0Result:
    """
    kappa0 = inf_{s in (0,1)} f(s) / (s log(1/s))

    Returns:
        Kappa0Result with the minimum and the minimizer s'
    """
    tol = get_settings().min_tol if tol is None else tol
    if not 0.0 < d.p0 <= 1.0:
        raise NoPositiveMassAtZero(f"{d.spec}: kappa0 needs p0 in (0,1]")

    def g(s: float) -> float:
        if not 0.0 < s < 1.0:
            return math.inf
        return d.pgf(s) / (s * math.log(1.0 / s))

    def g_many(s: np.ndarray) -> np.ndarray:
        return d.pgf_many(s) / (s * np.log(1.0 / s))

    s_min, value = _grid_then_golden(g, g_many, tol)
    return Kappa0Result(kappa0=value, minimizer=s_min)


def brw_rate(d: StepDistribution, theta: float) -> float:
    """alpha(theta) = f(e^theta) / e^theta"""
    s = math.exp(theta)
    return d.pgf(s) / s


def alpha_star(d: StepDistribution, x: float, tol: Optional[float] = None) -> float:
    """alpha*(x) = inf_{s in (0,1)} { x log s + f(s)/s }"""
    tol = get_settings().min_tol if tol is None else tol

    def phi(s: float) -> float:
        if not 0.0 < s < 1.0:
            return math.inf
        return x * math.log(s) + d.pgf(s) / s

    def phi_many(s: np.ndarray) -> np.ndarray:
        return x * np.log(s) + d.pgf_many(s) / s

    _, value = _grid_then_golden(phi, phi_many, tol)
    return value


# ==================== CLOSED FORMS ====================

def closed_form_constants(d: StepDistribution) -> Optional[Dict[str, ExtendedReal]]:
    """Known (s0, R, q*) for the named families; None for explicit laws"""
    if d.kind == "geometric" and 0.0 < d.param < 1.0:
        p, q = float(d.param), d.q
        return {
            "s0": ExtendedReal.of(1.0 / (2.0 * q)),
            "R": ExtendedReal.of(1.0 / (4.0 * p * q)),
            "q_star": ExtendedReal.of(min(p / q, 1.0)),
        }
    if d.kind == "srw" and 0.0 < d.param < 1.0:
        p = float(d.param)
        q = 1.0 - p
        return {
            "s0": ExtendedReal.of(math.sqrt(p / q)),
            "R": ExtendedReal.of(1.0 / (2.0 * math.sqrt(p * q))),
            "q_star": ExtendedReal.of(min(p / q, 1.0)),
        }
    if d.kind == "affine" and 0.0 < d.param < 1.0:
        return {
            "s0": ExtendedReal.inf(),
            "R": ExtendedReal.of(1.0 / float(d.param)),
            "q_star": ExtendedReal.of(1.0),
        }
    if d.kind == "deterministic" and d.param == 0:
        return {"s0": ExtendedReal.inf(), "R": ExtendedReal.inf(), "q_star": ExtendedReal.of(1.0)}
    return None


def geometric_kappa0_closed_form(p: float) -> float:
    """
    kappa0 for geometric(p) through the one-dimensional equation
    (1-p) s = (1 + log s) / (1 + 2 log s) and kappa0 = p e^{1/u} u (2 - u), s = e^{-1/u}
    """
    q = 1.0 - p
    if q == 0.0:
        return math.e
    gap = lambda s: q * s * (1.0 + 2.0 * math.log(s)) - (1.0 + math.log(s))
    s = optimize.bisect(gap, 1e-300, math.exp(-1.0), xtol=1e-15, maxiter=2000)
    u = -1.0 / math.log(s)
    return p * math.exp(1.0 / u) * u * (2.0 - u)


def small_fringe_masses(d: StepDistribution) -> Dict[str, float]:
    """
    Exact masses of the fringe limit on the four trees with at most three vertices,
    keyed by canonical code
    """
    p0, p1, p2 = d.prob(0), d.prob(1), d.prob(2)
    first = p0 / (1.0 + p0)
    rate_two = 2.0 * p0 + p1
    return {
        "()": 1.0 / (1.0 + p0),
        "(())": first / (1.0 + rate_two),
        "(()())": first * (p0 + p1) / (1.0 + rate_two) / (1.0 + 3.0 * p0 + 2.0 * p1),
        "((()))": first * p0 / (1.0 + rate_two) / (1.0 + 3.0 * p0 + 2.0 * p1 + p2),
    }


# ==================== PREDICTIONS ====================

def _nonfringe_interval(c: ModelConstants, branch: str) -> ExponentPrediction:
    R = c.R.as_float()
    s0 = c.s0.as_float()
    lower = R
    if 0.0 < s0 < 1.0 and 0.0 < c.q_star < 1.0:
        lower = min(R, math.log(c.q_star) / math.log(s0))
    return ExponentPrediction(lo=ExtendedReal.of(lower), hi=c.R, branch=branch)


def predicted_degree_exponent(c: ModelConstants) -> ExponentPrediction:
    """Tail exponent of the limiting degree law: exact R (fringe) or the non-fringe bounds"""
    for flag in c.assumption_flags:
        warnings.warn(AssumptionViolated(f"{c.pmf}: {flag}"), stacklevel=2)
    if c.regime == Regime.FRINGE:
        return ExponentPrediction(lo=c.R, hi=c.R, branch="fringe: R")
    return _nonfringe_interval(c, "non-fringe: [min(R, log q*/log s0), R]")


def predicted_pagerank_exponent(c: ModelConstants, damping: float,
                                d: Optional[StepDistribution] = None) -> ExponentPrediction:
    """Tail exponent of the limiting PageRank law at damping c"""
    if not 0.0 < damping < 1.0:
        raise ParamOutOfRange(f"damping must lie in (0,1), got {damping}")
    if c.regime == Regime.NON_FRINGE:
        return _nonfringe_interval(c, "non-fringe: [min(R, log q*/log s0), R]")

    s0 = c.s0.as_float()
    if damping <= 1.0 / s0:
        return ExponentPrediction(lo=c.R, hi=c.R, branch="fringe, c <= 1/s0: R")
    d = d or parse_pmf_spec(c.pmf)
    value = 1.0 / (damping * d.pgf(1.0 / damping))
    exponent = ExtendedReal.of(value)
    return ExponentPrediction(lo=exponent, hi=exponent, branch="fringe, c > 1/s0: 1/(c f(1/c))")


# ==================== LEVEL KERNELS ====================

def truncated_kernel(d: StepDistribution, kind: str, k: int) -> TruncatedKernel:
    """
    Dense k x k truncation: A_ij = p_{j+1-i} for j >= i-1; B equals A except row 1 = (c_1..c_k)
    """
    kind = kind.upper()
    if kind not in ("A", "B"):
        raise ParamOutOfRange(f"kernel kind must be A or B, got {kind}")
    if k < 1:
        raise ParamOutOfRange(f"kernel dimension must be >= 1, got {k}")
    p = d.pmf_array(k)
    i0, j0 = np.indices((k, k))
    offset = j0 + 1 - i0
    entries = np.where(offset >= 0, p[np.clip(offset, 0, k)], 0.0)
    if kind == "B":
        entries[0, :] = [d.tail(j) for j in range(1, k + 1)]
    entries.setflags(write=False)
    return TruncatedKernel(kind=kind, k=k, entries=entries, pmf=d.spec)


def level_generator(d: StepDistribution, kind: str, K: int) -> np.ndarray:
    """(K+1) x (K+1) mean-profile generator including the root level 0"""
    M = np.zeros((K + 1, K + 1))
    M[1:, 1:] = truncated_kernel(d, kind, K).entries
    M[1, 0] = d.p0 if kind.upper() == "A" else 1.0
    return M


def irreducibility_index(d: StepDistribution) -> int:
    """k0 = min{k >= 1 : p_k > 0}; 0 when no such k"""
    support = np.nonzero(d.probs[1:] > 0)[0]
    return int(support[0]) + 1 if len(support) else 0


def _balancing_ratio(d: StepDistribution, k: int) -> float:
    """Minimiser of f(r)/r, clipped so that r^k stays well inside floating range"""
    try:
        s0 = solve_s0(d)
        r = 1.0 if s0.infinite else s0.as_float()
    except NoPositiveMassAtZero:
        r = 1.0
    limit = 600.0 / max(k, 1)
    return float(np.exp(np.clip(np.log(r), -limit, limit)))


def collatz_wielandt_bounds(M: np.ndarray, x: np.ndarray) -> Tuple[float, float]:
    """min and max of (Mx)_i / x_i; they bracket the Perron root for positive x"""
    ratios = (M @ x) / x
    return float(ratios.min()), float(ratios.max())


def perron_eigen(m: TruncatedKernel, tol: Optional[float] = None, max_iters: int = 200) -> PerronResult:
    """
    Perron root and positive right eigenvector by shifted inverse iteration

    The kernel is first conjugated by diag(r^i), r the minimiser of f(r)/r, which
    flattens the eigenvector of these strongly non-normal matrices. Each step solves
    (sigma I - B) y = x with sigma the current upper Collatz-Wielandt bound, so y stays
    positive and the bracket [lower, upper] around the root shrinks until it is
    narrower than tol.

    Args:
        m: truncated kernel
        tol: width of the final eigenvalue bracket
        max_iters: iteration budget

    Returns:
        PerronResult
    """
    tol = get_settings().rayleigh_tol if tol is None else tol
    M = m.entries
    k = m.k
    d = parse_pmf_spec(m.pmf)
    k0 = irreducibility_index(d)
    if k0 == 0 or k < k0:
        raise PreconditionViolated(f"kernel of size {k} is reducible (k0={k0})")

    powers = _balancing_ratio(d, k) ** np.arange(k)
    B = M * np.outer(1.0 / powers, powers)
    x = np.full(k, 1.0 / k)
    lower, upper = collatz_wielandt_bounds(B, x)
    floor = np.finfo(np.float64).tiny
    iteration = 0
    while upper - lower > max(tol, 64.0 * np.finfo(np.float64).eps * upper):
        if iteration >= max_iters:
            raise NoConvergence(f"inverse iteration on {m.kind}_{k} did not settle "
                                f"(bracket {lower:.12g}..{upper:.12g})", iterations=iteration)
        iteration += 1
        shift = upper + 0.5 * tol
        y = linalg.lu_solve(linalg.lu_factor(shift * np.eye(k) - B, check_finite=False), x)
        y = np.maximum(np.abs(y), floor)
        x = y / y.sum()
        lo, hi = collatz_wielandt_bounds(B, x)
        lower, upper = max(lower, lo), min(upper, hi)

    eigenvalue = 0.5 * (lower + upper)
    vector = powers * x
    vector = vector / vector.sum()
    residual = float(np.max(np.abs(M @ vector - eigenvalue * vector)))
    logger.debug("perron %s_%d: alpha in [%.14f, %.14f] after %d iterations", m.kind, k, lower, upper, iteration)
    return PerronResult(eigenvalue=eigenvalue, vector=vector, iterations=iteration, residual=residual,
                        lower=lower, upper=upper)


def alpha_k_trace(d: StepDistribution, ks: Sequence[int], tol: Optional[float] = None) -> List[AlphaKPoint]:
    """Perron roots alpha_k of A_k for each k at or above the irreducibility index"""
    k0 = irreducibility_index(d)
    trace = []
    for k in ks:
        if k0 == 0 or k < k0:
            continue
        result = perron_eigen(truncated_kernel(d, "A", k), tol=tol)
        trace.append(AlphaKPoint(k=k, alpha=result.eigenvalue,
                                 iterations=result.iterations, residual=result.residual))
    return trace


def verify_subinvariant(m: TruncatedKernel, s: float) -> float:
    """
    max over columns j <= k-1 of sum_i s^-i M_ij - (f(s)/s) s^-j

    The row vector (s^-i) is sub-invariant exactly when this is <= 0 up to rounding.
    """
    d = parse_pmf_spec(m.pmf)
    if m.kind == "B" and s < 1.0:
        raise PreconditionViolated(f"kernel B needs s >= 1, got {s}")
    f = d.pgf(s)
    if math.isinf(f):
        raise PgfInfinite(f"f({s}) diverges for {d.spec}")
    if m.k < 2:
        return -math.inf
    weights = float(s) ** -np.arange(m.k, dtype=np.float64)
    defect = weights @ m.entries - (f / s) * weights
    return float(np.max(defect[: m.k - 1]))


def right_eigen_residual(m: TruncatedKernel, u: np.ndarray, eigenvalue: float = 1.0) -> np.ndarray:
    """|M u - eigenvalue u| coordinatewise"""
    u = np.asarray(u, dtype=np.float64)
    return np.abs(m.entries @ u - eigenvalue * u)


# ==================== BUNDLE ====================

def compute_constants(d: StepDistribution, damping: Optional[float] = None, k_max: int = 200,
                      k_step: int = 5) -> ModelConstants:
    """All constants of one step law, with the alpha_k trace on k = k_step, 2 k_step, ..., k_max"""
    settings = get_settings()
    flags = d.assumption_flags()
    s0 = solve_s0(d, settings.root_tol)
    R = compute_R(d, s0)
    q_star = solve_qstar(d, settings.root_tol)
    kappa = compute_kappa0(d, settings.min_tol)
    regime = Regime.NON_FRINGE if d.mean() > 1.0 else Regime.FRINGE

    ks = list(range(k_step, k_max + 1, k_step)) if k_max >= k_step else [k_max]
    trace = alpha_k_trace(d, ks, settings.rayleigh_tol) if k_max > 0 else []

    constants = ModelConstants(
        pmf=d.spec,
        mean_z=d.mean(),
        p0=d.p0,
        s0=s0,
        R=R,
        q_star=q_star,
        kappa0=kappa.kappa0,
        kappa0_minimizer=kappa.minimizer,
        regime=regime,
        degree_exponent=ExponentPrediction(lo=R, hi=R),
        damping=damping,
        alpha_k_trace=trace,
        closed_form=closed_form_constants(d),
        assumption_flags=flags,
        tolerances={
            "root": settings.root_tol,
            "minimization": settings.min_tol,
            "rayleigh": settings.rayleigh_tol,
        },
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AssumptionViolated)
        constants.degree_exponent = predicted_degree_exponent(constants)
        if damping is not None:
            constants.pagerank_exponent = predicted_pagerank_exponent(constants, damping, d)
    logger.info("constants %s: s0=%s R=%s q*=%.10g kappa0=%.10g (%s)",
                d.spec, s0, R, q_star, kappa.kappa0, regime.value)
    return constants
