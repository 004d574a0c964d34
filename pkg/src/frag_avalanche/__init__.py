"""Avalanche fragmentation-branching model: exact semigroups and Monte Carlo.

Sizes live on the lattice ``beta**i * (1 - beta)**j * root`` and are tracked
as exact coordinates.  The deterministic side (``semigroup``) computes
transition functions, resolvents and the branching cumulant on finite
reachable supports; the stochastic side (``montecarlo``) simulates the same
processes, and ``verify`` checks one against the other.
"""
from .errors import AvalancheError
from .kernels import ClipPolicy, offspring_distribution, sample_offspring, step_distribution
from .model import (
    Configuration,
    FractalCoord,
    ModelParams,
    band_of,
    coord_value,
    fractal_points,
    make_params,
)
from .semigroup import (
    CumulantOptions,
    StateSpace,
    branching_expectation,
    cumulant_solve,
    reachable_support,
    transition_at,
)

__version__ = "0.1.0"

__all__ = [
    "AvalancheError",
    "ClipPolicy",
    "Configuration",
    "CumulantOptions",
    "FractalCoord",
    "ModelParams",
    "StateSpace",
    "band_of",
    "branching_expectation",
    "coord_value",
    "cumulant_solve",
    "fractal_points",
    "make_params",
    "offspring_distribution",
    "reachable_support",
    "sample_offspring",
    "step_distribution",
    "transition_at",
]
