"""Quasi-one-dimensional Poisson-Nernst-Planck model of ion transport in
charged nanopores, with area-averaged and 2D axisymmetric reference solvers."""

__version__ = "0.1.0"

from .errors import NanoPNPError, NoConvergence  # noqa: E402
from .model import PoreScenario  # noqa: E402

__all__ = ["__version__", "NanoPNPError", "NoConvergence", "PoreScenario"]
