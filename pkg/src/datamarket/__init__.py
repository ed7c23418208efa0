"""Agent-based simulation of a data marketplace with market-structure metrics."""

from .config import SimConfig, load_config
from .engine import RunResult, Simulation, simulate
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "RunResult", "SimConfig", "Simulation", "load_config", "simulate", "__version__"]
