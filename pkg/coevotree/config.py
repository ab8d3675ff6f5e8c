"""
Config - Runtime settings read from the environment
"""
import os
from functools import lru_cache

from pydantic import BaseModel, Field


class Settings(BaseModel):
    """Library-wide tunables"""

    threads: int = Field(default=1, ge=1, description="Replica parallelism cap (COEVO_THREADS)")
    memory_cap_vertices: int = Field(default=2**25, ge=1, description="Largest tree a simulator may build")
    root_tol: float = 1e-10
    min_tol: float = 1e-8
    rayleigh_tol: float = 1e-10
    support_eps: float = 1e-12
    pagerank_rebuild_every: int = 2**16


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Build settings once from COEVO_* environment variables"""
    return Settings(
        threads=_env_int("COEVO_THREADS", os.cpu_count() or 1),
        memory_cap_vertices=_env_int("COEVO_MAX_VERTICES", 2**25),
    )
