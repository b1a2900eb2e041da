"""Multiscale flatness analysis for point sets.

Net/cube hierarchies, Jones-style beta and theta numbers, coarse tangent
plane fields, stopping-time decompositions of curve-adjacent cubes, and the
diamond blow-up construction, with a CLI harness (``betafield --help``).
"""

from .kernels import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
