"""Independent reference solutions of w'' = -grad W(w) - gamma w' + f."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .energy import DissipationModel, EnergyModel, eval_gradient
from .functional import ForcingSpec
from .grid import SpatialGrid

__all__ = [
    "InstabilityError",
    "Trajectory",
    "leapfrog_solve",
    "leapfrog_reverse",
    "exact_linear_wave",
    "ode_reduction_solve",
]


class InstabilityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    velocities: np.ndarray


def leapfrog_solve(
    model: EnergyModel,
    dissipation: DissipationModel | None,
    forcing: ForcingSpec | None,
    w0: np.ndarray,
    w1: np.ndarray,
    dt: float,
    t_obs: float,
    grid: SpatialGrid,
    n_steps: int | None = None,
) -> Trajectory:
    """Velocity-Verlet (Stormer-Verlet) integration.

    With damping, the closing half kick is implicit in the velocity, which is
    linear and solved in closed form.  For dirichlet-type models the step must
    respect the CFL limit; dt <= h/2 is safe.
    """
    gamma = dissipation.gamma if dissipation is not None else 0.0
    forcing = forcing or ForcingSpec()
    if n_steps is None:
        n_steps = int(math.floor(t_obs / dt + 1e-9))
    times = dt * np.arange(n_steps + 1)
    f = forcing.sample(times, grid)

    x = np.empty((n_steps + 1, grid.n_points))
    v = np.empty_like(x)
    x[0] = w0
    v[0] = w1
    size0 = max(np.max(np.abs(w0)), np.max(np.abs(w1)), 1e-300)
    force = -eval_gradient(model, x[0], grid) + f[0]
    for n in range(n_steps):
        v_half = v[n] + 0.5 * dt * (force - gamma * v[n])
        x[n + 1] = x[n] + dt * v_half
        force = -eval_gradient(model, x[n + 1], grid) + f[n + 1]
        v[n + 1] = (v_half + 0.5 * dt * force) / (1.0 + 0.5 * dt * gamma)
        if not np.all(np.isfinite(x[n + 1])) or np.max(np.abs(x[n + 1])) > 1e6 * size0:
            raise InstabilityError(
                f"leapfrog blew up at t={times[n + 1]:.4g}; dt={dt:.4g} vs h={grid.h:.4g} "
                "(reduce dt, e.g. dt <= h/2 for gradient terms, less for biharmonic)"
            )
    return Trajectory(times, x, v)


def leapfrog_reverse(model, trajectory: Trajectory, grid: SpatialGrid) -> Trajectory:
    """Integrate back from the final state with negated velocity (f = 0, gamma = 0)."""
    dt = trajectory.times[1] - trajectory.times[0]
    n = len(trajectory.times) - 1
    return leapfrog_solve(model, None, None, trajectory.states[-1], -trajectory.velocities[-1],
                          dt, n * dt, grid, n_steps=n)


def exact_linear_wave(w0, w1, t: float, grid: SpatialGrid, speed2: float = 1.0) -> np.ndarray:
    """Fourier solution of w'' = speed2 * w_xx on the torus."""
    if not grid.periodic:
        raise ValueError("exact_linear_wave needs a periodic grid; use leapfrog_solve")
    k = 2 * np.pi * np.fft.fftfreq(grid.n_points, d=grid.h)
    om = math.sqrt(speed2) * np.abs(k)
    a = np.fft.fft(w0)
    b = np.fft.fft(w1)
    safe = np.where(om > 0, om, 1.0)
    sin_term = np.where(om > 0, np.sin(om * t) / safe, t)
    return np.fft.ifft(a * np.cos(om * t) + b * sin_term).real


def _constant_acceleration(model: EnergyModel) -> Callable[[float], float]:
    """-W'(c) for a spatially constant field; gradient terms vanish on constants."""
    pots = [(t.lam, t.p) for t in model.terms if t.kind == "p_potential"]
    coss = [t.lam for t in model.terms if t.kind == "cosine"]

    def acc(w: float) -> float:
        out = 0.0
        for lam, p in pots:
            out -= lam * math.copysign(abs(w) ** (p - 1), w)
        for lam in coss:
            out -= lam * math.sin(w)
        return out

    return acc


def ode_reduction_solve(
    model: EnergyModel,
    forcing: Callable[[float], float] | None,
    w0: float,
    w1: float,
    t_obs: float,
    gamma: float = 0.0,
    times: np.ndarray | None = None,
    rtol: float = 1e-10,
) -> Trajectory:
    """Adaptive Runge-Kutta 4(5) solution of the spatially constant reduction.

    Returns scalar states/velocities sampled at ``times`` (default 201 nodes).
    Models with only gradient terms reduce to free motion.
    """
    acc = _constant_acceleration(model)
    f = forcing or (lambda t: 0.0)

    def rhs(t, y):
        return [y[1], acc(y[0]) - gamma * y[1] + f(t)]

    if times is None:
        times = np.linspace(0.0, t_obs, 201)
    sol = solve_ivp(rhs, (0.0, float(times[-1])), [w0, w1], method="RK45",
                    t_eval=times, rtol=rtol, atol=rtol * 1e-2)
    if not sol.success:
        raise InstabilityError(f"ODE reduction failed: {sol.message}")
    return Trajectory(np.asarray(times), sol.y[0], sol.y[1])
