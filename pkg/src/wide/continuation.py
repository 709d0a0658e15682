"""Drive eps -> 0 along a schedule with warm starts and track Cauchy differences."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .energy import DissipationModel, EnergyModel
from .functional import ForcingSpec, WideProblem, make_problem
from .grid import SpatialGrid, build_time_grid, spacetime_norm
from .minimize import MinimizerOptions, MinimizerResult, minimize

__all__ = [
    "ContinuationError",
    "EpsilonSchedule",
    "BaseProblem",
    "EpsilonRun",
    "ContinuationResult",
    "run_continuation",
    "solve_single",
]

log = logging.getLogger(__name__)


class ContinuationError(RuntimeError):
    def __init__(self, epsilon: float, result: MinimizerResult):
        self.epsilon = epsilon
        self.result = result
        super().__init__(
            f"minimizer did not converge at eps={epsilon:g} "
            f"(residual {result.final_grad_norm:.3e} > {result.tolerance:.3e} "
            f"after {result.outer_iters} iterations)"
        )


@dataclass(frozen=True)
class EpsilonSchedule:
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("empty epsilon schedule")
        if any(not 0 < v < 1 for v in vals):
            raise ValueError(f"schedule values must lie in (0, 1): {vals}")
        if any(b >= a for a, b in zip(vals, vals[1:])):
            raise ValueError(f"schedule must be strictly decreasing: {vals}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def geometric(cls, eps0: float = 0.2, count: int = 4, ratio: float = 0.5) -> "EpsilonSchedule":
        return cls(tuple(eps0 * ratio**i for i in range(count)))

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class BaseProblem:
    """Everything that defines a problem except eps (and hence the time horizon)."""

    space: SpatialGrid
    model: EnergyModel
    w0: np.ndarray
    w1: np.ndarray
    dt: float
    t_obs: float
    kappa: float = 40.0
    dissipation: DissipationModel = DissipationModel(0.0)
    forcing: ForcingSpec = ForcingSpec()
    scaling: str = "abstract_eq6"

    def at(self, epsilon: float) -> WideProblem:
        time = build_time_grid(epsilon, self.t_obs, self.dt, self.kappa)
        return make_problem(epsilon, self.space, time, self.model, self.w0, self.w1,
                            self.dissipation, self.forcing, self.scaling)

    @property
    def n_obs(self) -> int:
        return int(math.floor(self.t_obs / self.dt + 1e-9)) + 1


@dataclass
class EpsilonRun:
    epsilon: float
    problem: WideProblem
    result: MinimizerResult

    @property
    def field(self) -> np.ndarray:
        """Full minimizer on [0, t_max]."""
        return self.result.u_star

    def observed(self, n_obs: int) -> np.ndarray:
        return self.result.u_star[:n_obs]


@dataclass
class ContinuationResult:
    base: BaseProblem
    runs: list[EpsilonRun]
    cauchy_diffs: list[float] = field(default_factory=list)
    cauchy_decreasing: bool = True

    @property
    def epsilons(self) -> list[float]:
        return [r.epsilon for r in self.runs]

    @property
    def minimizers(self) -> list[tuple[float, np.ndarray]]:
        n = self.base.n_obs
        return [(r.epsilon, r.observed(n)) for r in self.runs]

    @property
    def limit_candidate(self) -> np.ndarray:
        return self.runs[-1].observed(self.base.n_obs)

    @property
    def observation_times(self) -> np.ndarray:
        return self.base.dt * np.arange(self.base.n_obs)


def _warm_start(prev: np.ndarray, n_rows: int) -> np.ndarray:
    """Previous minimizer cut to ``n_rows``, or extended by its last row."""
    if len(prev) >= n_rows:
        return prev[:n_rows].copy()
    pad = np.repeat(prev[-1:], n_rows - len(prev), axis=0)
    return np.concatenate([prev, pad], axis=0)


def solve_single(base: BaseProblem, epsilon: float, opts: MinimizerOptions | None = None,
                 u_init: np.ndarray | None = None) -> EpsilonRun:
    problem = base.at(epsilon)
    if u_init is not None:
        u_init = _warm_start(u_init, problem.time.n_steps + 1)
    result = minimize(problem, u_init, opts)
    return EpsilonRun(epsilon, problem, result)


def run_continuation(base: BaseProblem, schedule: EpsilonSchedule,
                     opts: MinimizerOptions | None = None, warm_start: bool = True) -> ContinuationResult:
    """Minimize F_eps for each eps in turn, warm-starting from the previous minimizer.

    Aborts with :class:`ContinuationError` on the first non-converged solve.
    A non-decreasing Cauchy sequence is logged as a warning, never raised.
    """
    eps_min = min(schedule.values)
    if base.dt > eps_min / 4:
        warnings.warn(
            f"dt={base.dt:.4g} exceeds eps_min/4={eps_min / 4:.4g}; the eps-scale boundary "
            "layers are under-resolved and the time weight is poorly sampled",
            stacklevel=2,
        )
    runs: list[EpsilonRun] = []
    prev = None
    for eps in schedule:
        run = solve_single(base, eps, opts, prev if warm_start else None)
        if not run.result.converged:
            raise ContinuationError(eps, run.result)
        log.info("eps=%g: %d Newton steps, residual %.2e", eps, run.result.outer_iters,
                 run.result.final_grad_norm)
        runs.append(run)
        prev = run.field

    n = base.n_obs
    diffs = [
        spacetime_norm(b.observed(n) - a.observed(n), base.dt, base.space)
        for a, b in zip(runs, runs[1:])
    ]
    decreasing = all(y < x for x, y in zip(diffs, diffs[1:]))
    if not decreasing:
        log.warning("Cauchy differences do not decrease along the schedule: %s", diffs)
    return ContinuationResult(base, runs, diffs, decreasing)


def with_scaling(base: BaseProblem, scaling: str) -> BaseProblem:
    return replace(base, scaling=scaling)
