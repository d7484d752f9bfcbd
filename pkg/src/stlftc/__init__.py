"""Fault-tolerant monitoring and control synthesis for nested STL specifications."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
