# FastAPI Application
from .main import app

__all__ = ["app"]
