"""
Pydantic schemas for API request/response models
"""
from pydantic import BaseModel, Field
from typing import List, Optional


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str
    threads: int
    memory_cap_vertices: int


class PresetInfo(BaseModel):
    id: str
    experiments: int
    kinds: List[str]
    pmfs: List[str]


class HittingResponse(BaseModel):
    pmf: str
    K: int
    N: int
    trunc_error: float
    q: List[List[float]] = Field(..., description="q[k-1][i] = P(T_k = i)")


class ProfileResponse(BaseModel):
    pmf: str
    k: int
    t: float
    value: float
    error_bound: float
    ode_value: Optional[float] = Field(default=None, description="Matrix-exponential cross-check")


class TreeSummary(BaseModel):
    n: int
    height: int
    root_degree: int
    variant: str
    pmf: str
    seed: Optional[int] = None
    depth_profile: List[int]
    degree_histogram: List[int]
    martingale_w: Optional[float] = None
    truncated: bool = False

    model_config = {
        "json_schema_extra": {
            "examples": [
                {
                    "n": 5,
                    "height": 2,
                    "root_degree": 2,
                    "variant": "discrete",
                    "pmf": "geometric:0.3",
                    "seed": 7,
                    "depth_profile": [1, 2, 2],
                    "degree_histogram": [0, 3, 1, 1],
                }
            ]
        }
    }
