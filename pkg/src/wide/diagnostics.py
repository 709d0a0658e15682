"""Energy series, energy inequalities, and equation residuals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .energy import EnergyModel, eval_energy, eval_gradient
from .functional import WideProblem
from .grid import SpatialGrid, TimeGrid

__all__ = [
    "EnergySeries",
    "Verdict",
    "ResidualSeries",
    "DiagnosticsReport",
    "initial_energy",
    "time_derivative",
    "mechanical_energy",
    "mechanical_energy_thm1",
    "kernel_tail",
    "approximate_energy",
    "check_energy_inequality",
    "check_nonincreasing",
    "gronwall_bound",
    "el_residual",
    "default_test_functions",
    "weak_residual",
]

TAIL_FACTOR = 40.0


@dataclass
class EnergySeries:
    times: np.ndarray
    values: np.ndarray
    kind: str
    flags: dict = field(default_factory=dict)


@dataclass
class Verdict:
    name: str
    max_violation: float
    tolerance: float
    passed: bool
    worst_time: float | None = None

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "max_violation": self.max_violation,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "worst_time": self.worst_time,
        }


@dataclass
class ResidualSeries:
    times: np.ndarray
    values: np.ndarray
    name: str


@dataclass
class DiagnosticsReport:
    epsilon: float | None
    energy_series: list[EnergySeries] = field(default_factory=list)
    verdicts: list[Verdict] = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def series(self, kind: str) -> EnergySeries:
        for s in self.energy_series:
            if s.kind == kind:
                return s
        raise KeyError(kind)


def initial_energy(w0: np.ndarray, w1: np.ndarray, model: EnergyModel, grid: SpatialGrid) -> float:
    """E(0) = 1/2 ||w1||^2 + W(w0), from the prescribed data."""
    return 0.5 * grid.h * float(np.dot(w1, w1)) + eval_energy(model, w0, grid)


def time_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    """Central differences inside, second-order one-sided at both ends."""
    return np.gradient(values, dt, axis=0, edge_order=2)


def mechanical_energy(values: np.ndarray, dt: float, model: EnergyModel, grid: SpatialGrid,
                      velocities: np.ndarray | None = None, n_obs: int | None = None) -> EnergySeries:
    """E(t) = 1/2 ||w'(t)||^2 + W(w(t)).

    When ``n_obs`` is given, derivatives use the whole field and the series is
    cut to the first ``n_obs`` nodes, so only t = 0 sees a one-sided stencil.
    """
    v = time_derivative(values, dt) if velocities is None else velocities
    kinetic = 0.5 * grid.h * np.sum(v * v, axis=1)
    e = kinetic + eval_energy(model, values, grid)
    if n_obs is not None:
        e = e[:n_obs]
    return EnergySeries(dt * np.arange(len(e)), e, "mechanical")


def mechanical_energy_thm1(values, dt, model, grid, velocities=None, n_obs=None) -> EnergySeries:
    """int |w'|^2 + |grad w|^2 + |w|^p, i.e. twice the mechanical energy under ``conjecture_model``."""
    s = mechanical_energy(values, dt, model, grid, velocities, n_obs)
    return EnergySeries(s.times, 2.0 * s.values, "mechanical_thm1")


def _phi(r, epsilon):
    """Tail mass of the kernel eps^-2 r exp(-r/eps) beyond r."""
    return (1.0 + r / epsilon) * np.exp(-r / epsilon)


def kernel_tail(potential: np.ndarray, dt: float, epsilon: float, n_out: int) -> np.ndarray:
    """int_t^{t_max} eps^-2 (s-t) exp(-(s-t)/eps) P(s) ds at the first ``n_out`` nodes.

    ``potential`` holds P at every node up to t_max; P is taken constant on
    node-centred cells and the kernel is integrated exactly on each cell.
    """
    potential = np.asarray(potential, dtype=float)
    m_last = len(potential) - 1
    n_terms = min(int(math.ceil(60.0 * epsilon / dt)) + 2, m_last + 1)
    r_lo = np.maximum((np.arange(n_terms) - 0.5) * dt, 0.0)
    r_hi = (np.arange(n_terms) + 0.5) * dt
    beta = _phi(r_lo, epsilon) - _phi(r_hi, epsilon)
    out = np.zeros(n_out)
    j = np.arange(n_out)
    for m in range(n_terms):
        k = j + m
        ok = k <= m_last
        out[ok] += beta[m] * potential[k[ok]]
    # the cell of the last node is only a half cell
    m_end = m_last - j
    near = m_end < n_terms
    if np.any(near):
        me = m_end[near]
        lo = np.maximum((me - 0.5) * dt, 0.0)
        terminal = _phi(lo, epsilon) - _phi(me * dt, epsilon)
        out[near] += (terminal - beta[me]) * potential[m_last]
    return out


def approximate_energy(values: np.ndarray, time: TimeGrid, model: EnergyModel,
                       grid: SpatialGrid, n_obs: int | None = None) -> EnergySeries:
    """E_eps(t) = 1/2 ||w'(t)||^2 + int_t^inf eps^-2 exp(-(s-t)/eps) (s-t) W(w(s)) ds.

    ``values`` is the full minimizer on [0, t_max].  Nodes with less than
    40 eps of horizon ahead are flagged as truncated.
    """
    n_obs = time.n_obs if n_obs is None else n_obs
    eps, dt = time.epsilon, time.dt
    v = time_derivative(values, dt)[:n_obs]
    kinetic = 0.5 * grid.h * np.sum(v * v, axis=1)
    potential = eval_energy(model, values, grid)
    tail = kernel_tail(potential, dt, eps, n_obs)
    times = dt * np.arange(n_obs)
    truncated = bool(np.any(time.t_max - times < TAIL_FACTOR * eps - 1e-12))
    return EnergySeries(times, kinetic + tail, "approximate", {"truncated": truncated})


def _interior(n: int, exclude_edges: bool) -> np.ndarray:
    idx = np.arange(n)
    if exclude_edges and n > 4:
        idx = idx[2:-2]
    return idx


def check_energy_inequality(series: EnergySeries, bound, tol: float, name: str = "energy_inequality",
                            exclude_edges: bool = True) -> Verdict:
    """Pass iff max_t (E(t) - bound(t)) <= tol * (1 + bound(t)).

    ``bound`` is E(0) (a scalar) or a per-node bound such as the Gronwall
    bound.  Nodes 0, 1 and the last two are excluded by default, where
    one-sided differences degrade w'.
    """
    values = np.asarray(series.values, dtype=float)
    bound = np.broadcast_to(np.asarray(bound, dtype=float), values.shape)
    idx = _interior(len(values), exclude_edges)
    excess = values[idx] - bound[idx]
    allowed = tol * (1.0 + bound[idx])
    slack = excess - allowed
    worst = int(np.argmax(slack))
    return Verdict(
        name=name,
        max_violation=float(max(excess.max(), 0.0)),
        tolerance=float(allowed[worst]),
        passed=bool(np.all(slack <= 0.0)),
        worst_time=float(series.times[idx][worst]),
    )


def check_nonincreasing(series: EnergySeries, slack: float, name: str = "dissipation_monotone",
                        exclude_edges: bool = True) -> Verdict:
    """Pass iff E never rises above its running minimum by more than ``slack``."""
    values = np.asarray(series.values, dtype=float)
    idx = _interior(len(values), exclude_edges)
    v = values[idx]
    rise = v - np.minimum.accumulate(v)
    worst = int(np.argmax(rise))
    return Verdict(name, float(rise[worst]), float(slack), bool(rise[worst] <= slack),
                   float(series.times[idx][worst]))


def gronwall_bound(e0: float, f: np.ndarray, times: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """(sqrt(E0) + sqrt(t/2 int_0^t ||f||^2))^2 with cumulative trapezoid in time.

    Expanded as E0 + 2 sqrt(E0 J) + J so that f = 0 returns E0 exactly.
    """
    if e0 < 0:
        raise ValueError("initial energy must be non-negative")
    times = np.asarray(times, dtype=float)
    f = np.asarray(f, dtype=float)
    if len(times) < 2:
        return np.full(len(times), float(e0))
    power = grid.h * np.sum(f * f, axis=-1)
    j = 0.5 * times * cumulative_trapezoid(power, times, initial=0.0)
    return e0 + 2.0 * np.sqrt(e0 * j) + j


def el_residual(values: np.ndarray, problem: WideProblem, epsilon: float | None = None,
                n_obs: int | None = None) -> ResidualSeries:
    """|| eps^2 w'''' - 2 eps w''' + w'' + grad W(w) + gamma w' - f || per node, j = 2..M-2.

    ``epsilon=0`` evaluates the target wave equation instead of the
    Euler-Lagrange equation.  ``f`` is the unmollified forcing.
    """
    eps = problem.epsilon if epsilon is None else epsilon
    dt = problem.time.dt
    u = np.asarray(values, dtype=float)
    if len(u) < 8:
        raise ValueError("el_residual needs at least 8 time nodes")
    c = slice(2, -2)
    d4 = (u[4:] - 4 * u[3:-1] + 6 * u[2:-2] - 4 * u[1:-3] + u[:-4]) / dt**4
    d3 = (u[4:] - 2 * u[3:-1] + 2 * u[1:-3] - u[:-4]) / (2 * dt**3)
    d2 = (u[3:-1] - 2 * u[2:-2] + u[1:-3]) / dt**2
    d1 = (u[3:-1] - u[1:-3]) / (2 * dt)
    r = eps**2 * d4 - 2 * eps * d3 + d2 + eval_gradient(problem.model, u[c], problem.space)
    r = r + problem.dissipation.gamma * d1 - problem.f_raw[: len(u)][c]
    norms = np.sqrt(problem.space.h * np.sum(r * r, axis=1))
    times = dt * np.arange(2, len(u) - 2)
    if n_obs is not None:
        keep = times <= dt * (n_obs - 1) + 1e-12
        times, norms = times[keep], norms[keep]
    name = "el_residual" if eps else "wave_residual"
    return ResidualSeries(times, norms, name)


def default_test_functions(times: np.ndarray, grid: SpatialGrid) -> list[np.ndarray]:
    """Six products of time bumps sin(m pi t/T) sin^2(pi t/T) with two spatial modes."""
    t_end = times[-1]
    bumps = [np.sin(m * np.pi * times / t_end) * np.sin(np.pi * times / t_end) ** 2 for m in (1, 2, 3)]
    if grid.periodic:
        modes = [np.cos(2 * np.pi * grid.x / grid.length), np.sin(2 * np.pi * grid.x / grid.length)]
    else:
        modes = [np.sin(np.pi * grid.x / grid.length), np.sin(2 * np.pi * grid.x / grid.length)]
    return [b[:, None] * m[None, :] for b in bumps for m in modes]


def weak_residual(values: np.ndarray, dt: float, grid: SpatialGrid, model: EnergyModel,
                  f: np.ndarray | None = None, gamma: float = 0.0,
                  tests: list[np.ndarray] | None = None) -> np.ndarray:
    """|int int w' phi' - int int (grad W(w) + gamma w' - f) phi| per test function.

    w' phi' is integrated on the staggered half nodes; the other terms by the
    node rule (test functions vanish at both ends of the window).
    """
    w = np.asarray(values, dtype=float)
    times = dt * np.arange(len(w))
    tests = default_test_functions(times, grid) if tests is None else tests
    rhs_density = eval_gradient(model, w, grid)
    if gamma:
        rhs_density = rhs_density + gamma * time_derivative(w, dt)
    if f is not None:
        rhs_density = rhs_density - f[: len(w)]
    dw = np.diff(w, axis=0) / dt
    out = []
    for phi in tests:
        dphi = np.diff(phi, axis=0) / dt
        lhs = dt * grid.h * np.sum(dw * dphi)
        rhs = dt * grid.h * np.sum(rhs_density * phi)
        out.append(abs(lhs - rhs))
    return np.array(out)
