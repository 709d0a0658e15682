"""Newton-Krylov minimization of F_eps.

Each outer step solves the weight-normalized Newton system
``residual'(u) delta = -residual(u)`` on the free rows.  The sparse Hessian
is assembled and LU-factored; GMRES on the matrix-free Hessian action,
preconditioned by that factorization, then polishes the step.  Working in
normalized rows is what keeps the system solvable: the raw weights decay
like exp(-t/eps) and span far more than the double-precision range of a
single linear system.

Termination is on the normalized residual, at ``grad_tol * (1 + |F|/(c sum w))``
or at the rounding floor of the residual evaluation, whichever is larger.

Step acceptance uses Armijo on F.  Far past the scale eps the rows barely
move F at all, so a step whose F-change is within round-off is accepted
when it reduces the residual instead.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .functional import (
    WideProblem,
    apply_initial_conditions,
    eval_F,
    grad_F,
    linear_extension,
    normalized_hessian,
    residual,
)

__all__ = [
    "NumericalBreakdown",
    "MinimizerOptions",
    "MinimizerResult",
    "minimize",
    "residual_norm",
    "roundoff_floor",
]

log = logging.getLogger(__name__)


class NumericalBreakdown(ArithmeticError):
    pass


@dataclass(frozen=True)
class MinimizerOptions:
    grad_tol: float = 1e-8
    max_outer: int = 60
    max_inner: int = 20
    line_search: str = "armijo"
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 40

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_outer < 0 or self.max_inner < 0:
            raise ValueError("iteration limits must be non-negative")
        if self.line_search != "armijo":
            raise ValueError(f"unknown line search {self.line_search!r}")
        if not 0 < self.armijo_c < 0.5:
            raise ValueError("armijo_c must lie in (0, 1/2)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")


@dataclass
class MinimizerResult:
    u_star: np.ndarray
    final_grad_norm: float
    f_value: float
    outer_iters: int
    converged: bool
    tolerance: float
    convexity_certificate: bool
    history: list = field(default_factory=list)


def residual_norm(problem: WideProblem, u: np.ndarray) -> float:
    """Max over free rows of the spatial L2 norm of the normalized gradient."""
    r = residual(problem, u)[2:]
    return float(np.max(np.sqrt(problem.space.h * np.sum(r * r, axis=1))))


def _scale(problem: WideProblem, f_value: float) -> float:
    w = problem.time.cell_weights[1:-1].sum()
    return 1.0 + abs(f_value) / (problem.scale_factor * w)


def roundoff_floor(problem: WideProblem, u: np.ndarray) -> float:
    """Size of the rounding error in evaluating the residual itself.

    The inertia stencil amplifies rounding by 16 eps^2/dt^4; asking for a
    residual below this is asking for noise.
    """
    eps, dt = problem.epsilon, problem.time.dt
    amp = 16 * eps**2 / dt**4 + 2 * eps * problem.dissipation.gamma / dt**2
    return float(np.finfo(float).eps * amp * np.max(np.abs(u)))


def _tolerance(problem, u, f, opts) -> float:
    return max(opts.grad_tol * _scale(problem, f), roundoff_floor(problem, u))


def _newton_direction(problem, u, r_free, opts):
    n_free = r_free.size
    hess = normalized_hessian(problem, u).tocsc()
    try:
        lu = spla.splu(hess)
    except RuntimeError:
        return None
    delta = lu.solve(-r_free)
    if not np.all(np.isfinite(delta)):
        return None
    if opts.max_inner:
        shape = (len(r_free) // problem.space.n_points, problem.space.n_points)

        def matvec(x):
            d = np.zeros_like(u)
            d[2:] = x.reshape(shape)
            return residual(problem, u, d)[2:].ravel()

        op = spla.LinearOperator((n_free, n_free), matvec=matvec)
        prec = spla.LinearOperator((n_free, n_free), matvec=lu.solve)
        polished, info = spla.gmres(
            op, -r_free, x0=delta, M=prec, rtol=1e-10, atol=0.0,
            restart=opts.max_inner, maxiter=1,
        )
        if np.all(np.isfinite(polished)):
            delta = polished
    return delta


def minimize(problem: WideProblem, u_init: np.ndarray | None = None,
             opts: MinimizerOptions | None = None) -> MinimizerResult:
    opts = opts or MinimizerOptions()
    u = linear_extension(problem) if u_init is None else np.array(u_init, dtype=float)
    pinned = apply_initial_conditions(problem).values
    u[:2] = pinned

    f = eval_F(problem, u)
    res = residual_norm(problem, u)
    if not (np.isfinite(f) and np.isfinite(res)):
        raise NumericalBreakdown("non-finite objective at the initial guess (iteration 0)")
    history = [(0, f, res, 1.0)]
    shape = u[2:].shape
    roundoff = 64 * np.finfo(float).eps

    it = 0
    while True:
        if res <= _tolerance(problem, u, f, opts):
            converged = True
            break
        if it >= opts.max_outer:
            converged = False
            break
        it += 1
        r_free = residual(problem, u)[2:].ravel()
        g = grad_F(problem, u)
        delta = _newton_direction(problem, u, r_free, opts)
        slope = None
        if delta is not None:
            slope = problem.space.h * float(np.dot(g[2:].ravel(), delta))
            # an ascent direction in a non-convex region falls back below
            if slope > roundoff * abs(f):
                delta = None
        if delta is None:
            log.debug("iteration %d: Newton step rejected, using steepest descent", it)
            delta = -r_free
            slope = problem.space.h * float(np.dot(g[2:].ravel(), delta))

        alpha = 1.0
        accepted = False
        for _ in range(opts.max_backtracks):
            trial = u.copy()
            trial[2:] += alpha * delta.reshape(shape)
            f_new = eval_F(problem, trial)
            if np.isfinite(f_new):
                if f_new <= f + opts.armijo_c * alpha * slope and f_new < f:
                    accepted = True
                elif abs(f_new - f) <= roundoff * max(abs(f), 1e-300) + 1e-300:
                    res_new = residual_norm(problem, trial)
                    accepted = np.isfinite(res_new) and res_new < (1 - opts.armijo_c * alpha) * res
                if accepted:
                    break
            alpha *= opts.backtrack_factor
        if not accepted:
            log.warning("line search failed at iteration %d (residual %.3e)", it, res)
            converged = False
            break
        u = trial
        f = f_new
        res = residual_norm(problem, u)
        if not (np.isfinite(f) and np.isfinite(res)):
            raise NumericalBreakdown(f"non-finite objective at iteration {it}")
        history.append((it, f, res, alpha))
        log.debug("iteration %d: F=%.12e residual=%.3e alpha=%g", it, f, res, alpha)

    return MinimizerResult(
        u_star=u,
        final_grad_norm=res,
        f_value=f,
        outer_iters=it,
        converged=converged,
        tolerance=_tolerance(problem, u, f, opts),
        convexity_certificate=problem.model.convex,
        history=history,
    )
