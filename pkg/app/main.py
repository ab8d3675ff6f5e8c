"""
Coevotree FastAPI Application
Exploration-attachment tree constants, simulations and experiments over HTTP
"""
import math
import sys
from contextlib import asynccontextmanager
from functools import lru_cache
from pathlib import Path
from typing import List, Optional

from fastapi import FastAPI, HTTPException

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from coevotree.config import get_settings
from coevotree.constants import ModelConstants, compute_constants
from coevotree.distribution import parse_pmf_spec
from coevotree.errors import CoevoError
from coevotree.harness import ExperimentReport, ExperimentSpec, preset_specs, run_experiment
from coevotree.observables import degree_histogram, depth_profile, height, martingale_w, root_degree
from coevotree.random_walk import expected_profile, expected_profile_ode, hitting_time_table
from coevotree.simulator import GrowthConfig, grow
from coevotree.streams import seeded_rng
from app.schemas import HealthResponse, HittingResponse, PresetInfo, ProfileResponse, TreeSummary

VERSION = "1.0.0"

# Request-size guards for the synchronous endpoints
MAX_API_VERTICES = 10**6
MAX_API_STEPS = 5000
MAX_API_REPLICAS = 10**4
PRESET_IDS = [f"A{i}" for i in range(1, 15)]

# Step laws warmed into the constants cache at startup
WARM_PMFS = ["geometric:0.3", "geometric:0.5", "geometric:0.9", "affine:0.5", "srw:0.4", "det:0"]


@lru_cache(maxsize=256)
def cached_constants(pmf: str, damping: Optional[float], k_max: int) -> ModelConstants:
    return compute_constants(parse_pmf_spec(pmf), damping=damping, k_max=k_max)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Warm the constants cache on startup"""
    print("🚀 Starting Coevotree API...")

    for pmf in WARM_PMFS:
        cached_constants(pmf, None, 0)

    print(f"✅ Coevotree API ready! ({len(WARM_PMFS)} step laws cached)")

    yield

    print("👋 Shutting down Coevotree API...")


app = FastAPI(
    title="Coevotree API",
    description="Random trees grown by exploration attachment: limit constants, simulations, experiments",
    version=VERSION,
    lifespan=lifespan
)


def _bad_request(exc: Exception) -> HTTPException:
    return HTTPException(status_code=400, detail=f"{type(exc).__name__}: {exc}")


# ==================== API ENDPOINTS ====================

@app.get("/api/health", response_model=HealthResponse)
async def health():
    """Liveness and runtime settings"""
    settings = get_settings()
    return HealthResponse(version=VERSION, threads=settings.threads,
                          memory_cap_vertices=settings.memory_cap_vertices)


@app.get("/api/presets", response_model=List[PresetInfo])
async def get_presets():
    """List acceptance presets with their experiments"""
    presets = []
    for preset in PRESET_IDS:
        specs = preset_specs(preset)
        presets.append(PresetInfo(
            id=preset,
            experiments=len(specs),
            kinds=sorted({spec.kind.value for spec in specs}),
            pmfs=[spec.pmf for spec in specs],
        ))
    return presets


@app.get("/api/constants", response_model=ModelConstants)
def get_constants(pmf: str, damping: Optional[float] = None, k: int = 0):
    """All limit constants of a step law; k > 0 adds the alpha_k trace up to k"""
    if not 0 <= k <= 400:
        raise HTTPException(status_code=400, detail="k must lie in [0, 400]")
    try:
        return cached_constants(pmf, damping, k)
    except CoevoError as exc:
        raise _bad_request(exc)


@app.get("/api/hitting", response_model=HittingResponse)
def get_hitting(pmf: str, k: int = 5, steps: int = 200):
    """Hitting-time probabilities P(T_j = i) for j <= k, i <= steps"""
    if not 1 <= k <= 100 or not 1 <= steps <= MAX_API_STEPS:
        raise HTTPException(status_code=400, detail=f"need 1 <= k <= 100 and 1 <= steps <= {MAX_API_STEPS}")
    try:
        table = hitting_time_table(parse_pmf_spec(pmf), k, steps)
    except CoevoError as exc:
        raise _bad_request(exc)
    return HittingResponse(pmf=table.pmf, K=table.K, N=table.N, trunc_error=table.trunc_error,
                           q=table.q[1:].tolist())


@app.get("/api/profile", response_model=ProfileResponse)
def get_profile(pmf: str, t: float, k: int = 1, steps: Optional[int] = None):
    """Expected number of depth-k vertices of the killed tree at time t"""
    if t < 0 or k < 1:
        raise HTTPException(status_code=400, detail="need t >= 0 and k >= 1")
    steps = steps or int(math.ceil(t + 12.0 * math.sqrt(t) + 40.0))
    if steps > MAX_API_STEPS:
        raise HTTPException(status_code=400, detail=f"steps above {MAX_API_STEPS}")
    try:
        d = parse_pmf_spec(pmf)
        estimate = expected_profile(hitting_time_table(d, k, steps), k, t)
        ode = float(expected_profile_ode(d, "A", k + 60, t)[k])
    except CoevoError as exc:
        raise _bad_request(exc)
    return ProfileResponse(pmf=d.spec, k=k, t=t, value=estimate.value, error_bound=estimate.error_bound,
                           ode_value=ode)


@app.post("/api/grow", response_model=TreeSummary)
def post_grow(config: GrowthConfig):
    """Grow one tree and summarize it"""
    if config.n is not None and config.n > MAX_API_VERTICES:
        raise HTTPException(status_code=400, detail=f"n above {MAX_API_VERTICES}")
    if config.horizon is not None and config.horizon > math.log(MAX_API_VERTICES):
        raise HTTPException(status_code=400, detail=f"horizon above log({MAX_API_VERTICES})")
    try:
        tree = grow(config, seeded_rng(config.seed))
    except CoevoError as exc:
        raise _bad_request(exc)
    return TreeSummary(
        n=tree.n,
        height=height(tree),
        root_degree=root_degree(tree),
        variant=tree.variant,
        pmf=tree.pmf,
        seed=tree.seed,
        depth_profile=depth_profile(tree).counts.tolist(),
        degree_histogram=degree_histogram(tree).tolist(),
        martingale_w=martingale_w(tree) if tree.birth_time is not None else None,
        truncated=tree.truncated,
    )


@app.post("/api/experiment", response_model=ExperimentReport)
def post_experiment(spec: ExperimentSpec):
    """Run one experiment synchronously"""
    if spec.replicas > MAX_API_REPLICAS or any(n > MAX_API_VERTICES for n in spec.sizes):
        raise HTTPException(status_code=400, detail="experiment too large for a synchronous request")
    try:
        return run_experiment(spec)
    except CoevoError as exc:
        raise _bad_request(exc)


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
