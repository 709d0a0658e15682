"""The discrete exponentially weighted space-time functional F_eps.

For a space-time field u of shape ``(M+1, N)`` on the nodes t_j = j*dt,

    F(u) = c * sum_{j=1}^{M-1} w_j [ eps^2/2 ||D2 u_j||^2
                                     + eps * G((u_{j+1} - u_{j-1}) / (2 dt))
                                     + W(u_j) - <f_eps(t_j), u_j> ]

with D2 u_j the centred second difference, w_j the cell-integrated weight of
exp(-t/eps), and c = 1 (``abstract_eq6``) or c = 2/eps^2 (``degiorgi_eq1``).
Rows 0 and 1 are pinned by the initial data; the right end is free.

Gradients are with respect to the h-weighted pairing summed over time rows.
Since the weights span hundreds of orders of magnitude, the solver works with
the *weight-normalized* gradient ``residual(problem, u)`` (row j divided by
c*w_j), which is the discrete Euler-Lagrange residual.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .energy import (
    DissipationModel,
    EnergyModel,
    eval_energy,
    eval_gradient,
    eval_hvp,
    hessian_blocks,
)
from .grid import SpatialGrid, TimeGrid

__all__ = [
    "ConstraintViolation",
    "ForcingSpec",
    "WideProblem",
    "Constraints",
    "SCALINGS",
    "make_problem",
    "mollify_forcing",
    "apply_initial_conditions",
    "linear_extension",
    "eval_F",
    "grad_F",
    "hvp_F",
    "residual",
    "normalized_hessian",
]

SCALINGS = ("abstract_eq6", "degiorgi_eq1")
MOLLIFIERS = ("identity", "exp_forward")


class ConstraintViolation(ValueError):
    pass


@dataclass(frozen=True)
class ForcingSpec:
    """Source term f(t, x).

    ``func(t, x)`` takes a 1-D array of times and the grid points and returns
    an array of shape ``(len(t), len(x))``.  ``None`` means no forcing.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    mollifier: str = "identity"
    label: str = "none"

    def __post_init__(self):
        if self.mollifier not in MOLLIFIERS:
            raise ValueError(f"unknown mollifier {self.mollifier!r}")

    @property
    def kind(self) -> str:
        return "none" if self.func is None else "sampled"

    def sample(self, times: np.ndarray, grid: SpatialGrid) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.func is None:
            return np.zeros((len(times), grid.n_points))
        out = np.asarray(self.func(times, grid.x), dtype=float)
        out = np.broadcast_to(out, (len(times), grid.n_points)).copy()
        if not np.all(np.isfinite(out)):
            raise ValueError(f"forcing {self.label} produced non-finite samples")
        return out


def _hat_kernel(a: float, n_terms: int) -> np.ndarray:
    """Weights b_m of the exp(-s/eps)/eps kernel against piecewise-linear hats.

    ``a = dt/eps``; exact for data linear between nodes.
    """
    i0 = -math.expm1(-a)
    i1 = (1.0 - math.exp(-a) * (1.0 + a)) / a if a > 1e-6 else a / 2.0 - a * a / 3.0
    m = np.arange(n_terms)
    b = (i0 - i1) * np.exp(-m * a)
    b[1:] += i1 * np.exp(-(m[1:] - 1) * a)
    return b


def mollify_forcing(f: np.ndarray, dt: float, epsilon: float, mode: str = "identity") -> np.ndarray:
    """f_eps(t) = (1/eps) int_0^inf exp(-s/eps) f(t+s) ds on the sample nodes.

    ``f`` has time along axis 0 and is extended constantly past its last row.
    """
    f = np.asarray(f, dtype=float)
    if mode == "identity":
        return f.copy()
    if mode != "exp_forward":
        raise ValueError(f"unknown mollifier {mode!r}")
    a = dt / epsilon
    n_terms = int(math.ceil(42.0 / a)) + 2
    b = _hat_kernel(a, n_terms)
    pad = np.concatenate([f, np.repeat(f[-1:], n_terms, axis=0)], axis=0)
    out = np.zeros_like(f)
    n = len(f)
    for m in range(n_terms):
        out += b[m] * pad[m:m + n]
    return out


@dataclass(frozen=True)
class WideProblem:
    epsilon: float
    space: SpatialGrid
    time: TimeGrid
    model: EnergyModel
    dissipation: DissipationModel
    w0: np.ndarray
    w1: np.ndarray
    forcing: ForcingSpec = ForcingSpec()
    scaling: str = "abstract_eq6"
    f_raw: np.ndarray = field(default=None, repr=False)
    f_eps: np.ndarray = field(default=None, repr=False)

    @property
    def scale_factor(self) -> float:
        return 1.0 if self.scaling == "abstract_eq6" else 2.0 / self.epsilon**2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.time.n_steps + 1, self.space.n_points)


def make_problem(
    epsilon: float,
    space: SpatialGrid,
    time: TimeGrid,
    model: EnergyModel,
    w0,
    w1,
    dissipation: DissipationModel | None = None,
    forcing: ForcingSpec | None = None,
    scaling: str = "abstract_eq6",
) -> WideProblem:
    if scaling not in SCALINGS:
        raise ValueError(f"unknown scaling {scaling!r}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if abs(time.epsilon - epsilon) > 1e-14 * epsilon:
        raise ValueError("time grid was built for a different epsilon")
    if time.n_steps < 4:
        raise ValueError("need at least 4 time steps")
    w0 = np.asarray(w0, dtype=float)
    w1 = np.asarray(w1, dtype=float)
    space.check(w0, w1)
    forcing = forcing or ForcingSpec()
    f_raw = forcing.sample(time.times, space)
    f_eps = mollify_forcing(f_raw, time.dt, epsilon, forcing.mollifier)
    return WideProblem(
        epsilon=float(epsilon),
        space=space,
        time=time,
        model=model,
        dissipation=dissipation or DissipationModel(0.0),
        w0=w0,
        w1=w1,
        forcing=forcing,
        scaling=scaling,
        f_raw=f_raw,
        f_eps=f_eps,
    )


@dataclass(frozen=True)
class Constraints:
    """Rows 0 and 1 are pinned; rows 2..M are free."""

    rows: tuple[int, int]
    values: np.ndarray

    @property
    def n_pinned(self) -> int:
        return len(self.rows)


def apply_initial_conditions(problem: WideProblem) -> Constraints:
    u1 = problem.w0 + problem.time.dt * problem.w1
    return Constraints(rows=(0, 1), values=np.stack([problem.w0, u1]))


def linear_extension(problem: WideProblem) -> np.ndarray:
    """u_j = w0 + t_j w1, the default cold start (exact when W = 0)."""
    t = problem.time.times[:, None]
    return problem.w0[None, :] + t * problem.w1[None, :]


def _check(problem: WideProblem, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != problem.shape:
        raise ValueError(f"field shape {u.shape} does not match problem {problem.shape}")
    pinned = apply_initial_conditions(problem).values
    scale = 1.0 + np.max(np.abs(pinned))
    if np.max(np.abs(u[:2] - pinned)) > 1e-12 * scale:
        raise ConstraintViolation("rows 0 and 1 do not match the initial data")
    return u


def _d2(u: np.ndarray, dt: float) -> np.ndarray:
    return (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dt**2


def _velocity(u: np.ndarray, dt: float) -> np.ndarray:
    return (u[2:] - u[:-2]) / (2.0 * dt)


def eval_F(problem: WideProblem, u: np.ndarray) -> float:
    u = _check(problem, u)
    eps, dt, h = problem.epsilon, problem.time.dt, problem.space.h
    w = problem.time.cell_weights[1:-1]
    inner = u[1:-1]
    bracket = 0.5 * eps**2 * h * np.sum(_d2(u, dt) ** 2, axis=1)
    gamma = problem.dissipation.gamma
    if gamma:
        bracket += eps * 0.5 * gamma * h * np.sum(_velocity(u, dt) ** 2, axis=1)
    bracket += eval_energy(problem.model, inner, problem.space)
    bracket -= h * np.sum(problem.f_eps[1:-1] * inner, axis=1)
    return float(problem.scale_factor * np.dot(w, bracket))


def _scatter(problem: WideProblem, u: np.ndarray, ref_log: np.ndarray, linear: np.ndarray | None):
    """Gradient (or Hessian action when ``linear`` is given) with row j scaled by exp(-ref_log[j]).

    Row j collects contributions from the terms at k = j-1, j, j+1, each
    carrying w_k; the factor exp(log w_k - ref_log[j]) is formed in log space.
    """
    eps, dt = problem.epsilon, problem.time.dt
    logw = problem.time.log_weights
    m = problem.time.n_steps
    gamma = problem.dissipation.gamma
    x = u if linear is None else linear
    a = eps**2 * _d2(x, dt) / dt**2                      # k = 1..M-1
    b = eps * gamma * _velocity(x, dt) / (2 * dt) if gamma else None
    inner = u[1:-1]
    if linear is None:
        c = eval_gradient(problem.model, inner, problem.space) - problem.f_eps[1:-1]
    else:
        c = eval_hvp(problem.model, inner, linear[1:-1], problem.space)
    out = np.zeros_like(u)
    k = np.arange(1, m)
    for shift, coef in ((-1, 1.0), (0, -2.0), (1, 1.0)):
        rows = k + shift
        ratio = np.exp(logw[k] - ref_log[rows])[:, None]
        out[rows] += coef * ratio * a
        if b is not None and shift != 0:
            out[rows] += shift * ratio * b
    out[k] += np.exp(logw[k] - ref_log[k])[:, None] * c
    out[:2] = 0.0
    return out


def grad_F(problem: WideProblem, u: np.ndarray) -> np.ndarray:
    u = _check(problem, u)
    zero = np.zeros(problem.time.n_steps + 1)
    return problem.scale_factor * _scatter(problem, u, zero, None)


def hvp_F(problem: WideProblem, u: np.ndarray, d: np.ndarray) -> np.ndarray:
    u = _check(problem, u)
    d = np.array(d, dtype=float)
    d[:2] = 0.0
    zero = np.zeros(problem.time.n_steps + 1)
    return problem.scale_factor * _scatter(problem, u, zero, d)


def residual(problem: WideProblem, u: np.ndarray, d: np.ndarray | None = None) -> np.ndarray:
    """Weight-normalized gradient (or Hessian action): row j divided by c*w_j.

    Independent of the scaling convention; approximates the Euler-Lagrange
    residual eps^2 w'''' - 2 eps w''' + w'' + grad W(w) - f at t_j.
    """
    u = np.asarray(u, dtype=float)
    if d is not None:
        d = np.array(d, dtype=float)
        d[:2] = 0.0
    return _scatter(problem, u, problem.time.log_weights, d)


def normalized_hessian(problem: WideProblem, u: np.ndarray) -> sp.csr_matrix:
    """Sparse matrix of ``residual(problem, u, d)`` acting on the free rows 2..M."""
    eps, dt = problem.epsilon, problem.time.dt
    logw = problem.time.log_weights
    m = problem.time.n_steps
    n = problem.space.n_points
    gamma = problem.dissipation.gamma
    rows, cols, vals = [], [], []
    s2 = np.array([1.0, -2.0, 1.0])
    s1 = np.array([-1.0, 0.0, 1.0])
    k = np.arange(1, m)
    for a in range(3):
        ra = k - 1 + a
        ratio = np.exp(logw[k] - logw[ra])
        for b in range(3):
            cb = k - 1 + b
            val = eps**2 / dt**4 * s2[a] * s2[b] + eps * gamma / (4 * dt**2) * s1[a] * s1[b]
            rows.append(ra)
            cols.append(cb)
            vals.append(ratio * val)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    keep = (rows >= 2) & (cols >= 2)
    time_op = sp.coo_matrix(
        (vals[keep], (rows[keep] - 2, cols[keep] - 2)), shape=(m - 1, m - 1)
    ).tocsr()
    hess = sp.kron(time_op, sp.identity(n), format="csr")
    # W'' blocks on rows 2..M-1; row M has no potential term
    blocks = hessian_blocks(problem.model, u[2:m], problem.space)
    pad = sp.csr_matrix((n, n))
    hess = hess + sp.block_diag([blocks, pad], format="csr")
    return hess.tocsr()
