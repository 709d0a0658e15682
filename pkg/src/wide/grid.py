"""Spatial and temporal grids, quadrature, and the exponential time weight.

Spatial fields are plain 1-D numpy arrays of length ``grid.n_points``;
space-time fields are 2-D arrays of shape ``(n_times, n_points)`` with time
along the first axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "InvalidDomainError",
    "ResolutionError",
    "GridMismatchError",
    "SpatialGrid",
    "TimeGrid",
    "build_spatial_grid",
    "build_time_grid",
    "cell_weight",
    "inner_product",
    "norm",
    "spacetime_norm",
]


class InvalidDomainError(ValueError):
    pass


class ResolutionError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform 1-D grid, either a periodic torus or a homogeneous Dirichlet interval.

    Dirichlet grids store only the ``n_points`` interior nodes; the two boundary
    values are identically zero.
    """

    kind: str
    length: float
    n_points: int

    @property
    def h(self) -> float:
        if self.kind == "periodic":
            return self.length / self.n_points
        return self.length / (self.n_points + 1)

    @property
    def x(self) -> np.ndarray:
        i = np.arange(self.n_points)
        if self.kind == "periodic":
            return i * self.h
        return (i + 1) * self.h

    @property
    def periodic(self) -> bool:
        return self.kind == "periodic"

    def check(self, *fields: np.ndarray) -> None:
        for f in fields:
            if np.shape(f)[-1] != self.n_points:
                raise GridMismatchError(
                    f"field has {np.shape(f)[-1]} points, grid has {self.n_points}"
                )


def build_spatial_grid(kind: str, length: float, n_points: int) -> SpatialGrid:
    if kind not in ("periodic", "dirichlet"):
        raise InvalidDomainError(f"unknown grid kind {kind!r}")
    if not length > 0 or not math.isfinite(length):
        raise InvalidDomainError(f"domain length must be positive, got {length}")
    if int(n_points) != n_points or n_points < 4:
        raise InvalidDomainError(f"need at least 4 grid points, got {n_points}")
    return SpatialGrid(kind, float(length), int(n_points))


def inner_product(a: np.ndarray, b: np.ndarray, grid: SpatialGrid) -> float:
    """h-weighted L2 pairing of two spatial fields."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise GridMismatchError(f"shape mismatch {a.shape} vs {b.shape}")
    grid.check(a)
    return float(grid.h * np.dot(a, b))


def norm(a: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Discrete L2 norm over the last axis (works on stacks of fields)."""
    return np.sqrt(grid.h * np.sum(np.square(a), axis=-1))


def spacetime_norm(values: np.ndarray, dt: float, grid: SpatialGrid) -> float:
    """Discrete L2((0,T) x domain) norm, trapezoid in time."""
    sq = grid.h * np.sum(np.square(values), axis=-1)
    if len(sq) < 2:
        return 0.0
    return float(math.sqrt(dt * (np.sum(sq) - 0.5 * (sq[0] + sq[-1]))))


def cell_weight(lo, hi, epsilon: float):
    """Closed-form integral of exp(-t/epsilon) over [lo, hi]."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return epsilon * np.exp(-lo / epsilon) * -np.expm1(-(hi - lo) / epsilon)


def _log_cell_weight(lo: np.ndarray, hi: np.ndarray, epsilon: float) -> np.ndarray:
    return math.log(epsilon) - lo / epsilon + np.log(-np.expm1(-(hi - lo) / epsilon))


@dataclass(frozen=True)
class TimeGrid:
    """Nodes t_j = j*dt, j = 0..M, with cell-integrated exponential weights.

    Cell j is centred on t_j (half cells at both ends).  ``log_weights`` is
    the authoritative representation; ``cell_weights`` may underflow to zero
    far beyond the scale epsilon.
    """

    epsilon: float
    dt: float
    t_obs: float
    t_max: float
    n_steps: int
    log_weights: np.ndarray = field(repr=False)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    @property
    def cell_weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def n_obs(self) -> int:
        """Number of nodes with t_j <= t_obs."""
        return int(math.floor(self.t_obs / self.dt + 1e-9)) + 1


def build_time_grid(epsilon: float, t_obs: float, dt: float, kappa: float = 40.0) -> TimeGrid:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if kappa < 10:
        raise ValueError(f"tail factor kappa must be >= 10, got {kappa}")
    if dt >= t_obs:
        raise ResolutionError(f"dt={dt} does not resolve the observation horizon t_obs={t_obs}")
    n_steps = math.ceil(round((t_obs + kappa * epsilon) / dt, 9))
    t_max = n_steps * dt
    t = dt * np.arange(n_steps + 1)
    lo = np.maximum(t - 0.5 * dt, 0.0)
    hi = np.minimum(t + 0.5 * dt, t_max)
    return TimeGrid(
        epsilon=float(epsilon),
        dt=float(dt),
        t_obs=float(t_obs),
        t_max=float(t_max),
        n_steps=n_steps,
        log_weights=_log_cell_weight(lo, hi, epsilon),
    )
