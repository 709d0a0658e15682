"""Weighted inertia-energy-dissipation approximation of nonlinear wave equations.

Minimize exponentially weighted space-time functionals F_eps on a 1D grid
and follow the minimizers as eps -> 0.
"""
from .config import ConfigError, RunConfig, format_config, load_config, parse_config
from .continuation import (
    BaseProblem,
    ContinuationError,
    ContinuationResult,
    EpsilonSchedule,
    run_continuation,
)
from .energy import (
    DissipationModel,
    EnergyModel,
    EnergyTerm,
    ModelError,
    conjecture_model,
    eval_energy,
    eval_gradient,
    eval_hvp,
    make_model,
    sine_gordon_model,
    telegraph_model,
)
from .functional import ForcingSpec, WideProblem, eval_F, grad_F, hvp_F, make_problem
from .grid import SpatialGrid, TimeGrid, build_spatial_grid, build_time_grid
from .minimize import MinimizerOptions, MinimizerResult, NumericalBreakdown, minimize
from .reference import exact_linear_wave, leapfrog_solve, ode_reduction_solve
from .runner import ScenarioReport, emit_outputs, run_scenario

__version__ = "0.1.0"

__all__ = [
    "BaseProblem",
    "ConfigError",
    "ContinuationError",
    "ContinuationResult",
    "DissipationModel",
    "EnergyModel",
    "EnergyTerm",
    "EpsilonSchedule",
    "ForcingSpec",
    "MinimizerOptions",
    "MinimizerResult",
    "ModelError",
    "NumericalBreakdown",
    "RunConfig",
    "ScenarioReport",
    "SpatialGrid",
    "TimeGrid",
    "WideProblem",
    "build_spatial_grid",
    "build_time_grid",
    "conjecture_model",
    "emit_outputs",
    "eval_F",
    "eval_energy",
    "eval_gradient",
    "eval_hvp",
    "exact_linear_wave",
    "format_config",
    "grad_F",
    "hvp_F",
    "leapfrog_solve",
    "load_config",
    "make_model",
    "make_problem",
    "minimize",
    "ode_reduction_solve",
    "parse_config",
    "run_continuation",
    "run_scenario",
    "sine_gordon_model",
    "telegraph_model",
]
