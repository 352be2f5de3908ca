"""Delay estimation for small-noise stochastic differential equations."""
from .errors import ConfigError, DelayEstError
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "ConfigError", "DelayEstError", "__version__"]
