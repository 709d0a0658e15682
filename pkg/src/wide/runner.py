"""Run a configured scenario end to end and write its result files."""
from __future__ import annotations

import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, config_dict, format_config
from .continuation import ContinuationError, ContinuationResult, run_continuation
from .diagnostics import (
    DiagnosticsReport,
    approximate_energy,
    check_energy_inequality,
    check_nonincreasing,
    el_residual,
    gronwall_bound,
    initial_energy,
    mechanical_energy,
    weak_residual,
)
from .grid import spacetime_norm
from .minimize import NumericalBreakdown
from .reference import InstabilityError, exact_linear_wave, leapfrog_solve, ode_reduction_solve

__all__ = ["SCHEMA_VERSION", "ScenarioError", "ScenarioReport", "run_scenario", "emit_outputs",
           "eps_tag"]

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
ENERGY_HEADER = "t,mechanical,approximate,gronwall_bound"
SOLUTION_HEADER = "t,x,u"
RESIDUAL_HEADER = "t,el_residual,wave_residual"
CAUCHY_HEADER = "eps_coarse,eps_fine,l2_diff"


class ScenarioError(RuntimeError):
    """A numerical failure inside a scenario, tagged with its name."""

    def __init__(self, scenario: str, cause: Exception):
        self.scenario = scenario
        self.cause = cause
        super().__init__(f"scenario {scenario!r}: {cause}")


@dataclass
class ScenarioReport:
    config: RunConfig
    continuation: ContinuationResult
    diagnostics: list[DiagnosticsReport]
    comparisons: dict
    timings: dict
    tables: dict = field(default_factory=dict)

    @property
    def limit(self) -> DiagnosticsReport:
        return self.diagnostics[-1]

    @property
    def passed(self) -> bool:
        return self.limit.passed

    def summary(self) -> dict:
        cont = self.continuation
        runs = []
        for r in cont.runs:
            res = r.result
            runs.append({
                "epsilon": r.epsilon,
                "converged": res.converged,
                "outer_iters": res.outer_iters,
                "final_grad_norm": res.final_grad_norm,
                "tolerance": res.tolerance,
                "f_value": res.f_value,
                "t_max": r.problem.time.t_max,
                "n_steps": r.problem.time.n_steps,
                "convexity_certificate": res.convexity_certificate,
            })
        per_eps = []
        for d in self.diagnostics:
            per_eps.append({"epsilon": d.epsilon, **d.metadata,
                            "verdicts": [v.as_dict() for v in d.verdicts], "passed": d.passed})
        out = {
            "scenario": self.config.name,
            "schema_version": SCHEMA_VERSION,
            "config_echo": {"text": format_config(self.config), "values": config_dict(self.config)},
            "continuation": {
                "epsilons": cont.epsilons,
                "cauchy_diffs": cont.cauchy_diffs,
                "cauchy_decreasing": cont.cauchy_decreasing,
                "runs": runs,
            },
            "diagnostics": {
                "per_epsilon": per_eps,
                "limit": {
                    "epsilon": self.limit.epsilon,
                    "verdicts": [v.as_dict() for v in self.limit.verdicts],
                    "passed": self.passed,
                },
                "random_seed": None,
            },
            "comparisons": self.comparisons,
            "timings": self.timings,
        }
        return _clean(out)


def _clean(obj):
    """Plain JSON types; non-finite numbers are an error."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        val = float(obj)
        if not math.isfinite(val):
            raise ValueError(f"non-finite number in report: {val}")
        return val
    return obj


def _is_pure_dirichlet(cfg: RunConfig) -> bool:
    return len(cfg.terms) == 1 and cfg.terms[0].kind == "dirichlet"


def _reference_dt(cfg: RunConfig, dt: float, h: float) -> tuple[float, int]:
    """A stable leapfrog step dividing dt."""
    limit = h / 2
    for t in cfg.terms:
        if t.kind == "biharmonic":
            limit = min(limit, h * h / (4 * math.sqrt(max(t.lam, 1e-300))))
        elif t.kind in ("dirichlet", "p_laplacian", "fractional"):
            limit = min(limit, h / (2 * math.sqrt(max(t.lam, 1.0))))
    refine = max(1, math.ceil(dt / limit - 1e-12))
    return dt / refine, refine


def _comparisons(cfg: RunConfig, cont: ContinuationResult) -> dict:
    base = cont.base
    grid, dt, n_obs = base.space, base.dt, base.n_obs
    times = cont.observation_times
    out: dict = {}

    dt_ref, refine = _reference_dt(cfg, dt, grid.h)
    try:
        traj = leapfrog_solve(base.model, base.dissipation, base.forcing, base.w0, base.w1,
                              dt_ref, times[-1], grid, n_steps=refine * (n_obs - 1))
        ref = traj.states[::refine]
        ref_norm = spacetime_norm(ref, dt, grid)
        rows = []
        for eps, u in cont.minimizers:
            diff = spacetime_norm(u - ref, dt, grid)
            rows.append({"epsilon": eps, "l2_diff": diff,
                         "rel_l2_diff": diff / ref_norm if ref_norm > 0 else diff})
        out["leapfrog"] = {"dt": dt_ref, "per_epsilon": rows}
    except InstabilityError as exc:
        out["leapfrog"] = {"dt": dt_ref, "error": str(exc)}

    if _is_pure_dirichlet(cfg) and grid.periodic and cfg.forcing.name == "none" and cfg.gamma == 0:
        exact = np.stack([exact_linear_wave(base.w0, base.w1, t, grid, cfg.terms[0].lam) for t in times])
        ref_norm = spacetime_norm(exact, dt, grid)
        rows = []
        for eps, u in cont.minimizers:
            diff = spacetime_norm(u - exact, dt, grid)
            rows.append({"epsilon": eps, "l2_diff": diff,
                         "rel_l2_diff": diff / ref_norm if ref_norm > 0 else diff})
        out["exact_linear_wave"] = {"per_epsilon": rows}

    if cfg.constant_data and cfg.forcing.name == "none":
        try:
            sol = ode_reduction_solve(base.model, None, float(base.w0[0]), float(base.w1[0]),
                                      times[-1], cfg.gamma, times=times)
            rows = []
            for eps, u in cont.minimizers:
                rows.append({"epsilon": eps, "max_diff": float(np.max(np.abs(u - sol.states[:, None])))})
            out["ode_reduction"] = {"per_epsilon": rows}
        except InstabilityError as exc:
            out["ode_reduction"] = {"error": str(exc)}
    return out


def _diagnose(cfg: RunConfig, run, n_obs: int) -> tuple[DiagnosticsReport, dict]:
    problem = run.problem
    grid, model, dt = problem.space, problem.model, problem.time.dt
    u = run.field
    times = dt * np.arange(n_obs)
    e0 = initial_energy(problem.w0, problem.w1, model, grid)

    mech = mechanical_energy(u, dt, model, grid, n_obs=n_obs)
    approx = approximate_energy(u, problem.time, model, grid, n_obs)
    bound = gronwall_bound(e0, problem.f_raw[:n_obs], times, grid)

    verdicts = [check_energy_inequality(mech, bound, cfg.energy_tol)]
    if cfg.gamma > 0 and cfg.forcing.name == "none":
        verdicts.append(check_nonincreasing(mech, cfg.dissipation_slack * e0))

    el = el_residual(u, problem, n_obs=n_obs)
    wave = el_residual(u, problem, epsilon=0.0, n_obs=n_obs)
    weak = weak_residual(u[:n_obs], dt, grid, model, problem.f_raw[:n_obs], cfg.gamma)

    def l2(series):
        return float(np.sqrt(dt * np.sum(series.values**2)))

    meta = {
        "initial_energy": e0,
        "max_energy_ratio": float(np.max(mech.values[2:-2]) / e0) if e0 > 0 else 0.0,
        "approx_minus_mech_max": float(np.max(np.abs(approx.values - mech.values))),
        "approx_truncated": approx.flags["truncated"],
        "el_residual_l2": l2(el),
        "wave_residual_l2": l2(wave),
        "weak_residual_max": float(np.max(weak)),
    }
    report = DiagnosticsReport(run.epsilon, [mech, approx], verdicts,
                               {"el_residual": el, "wave_residual": wave}, meta)
    tables = {
        "energy": np.column_stack([times, mech.values, approx.values, bound]),
        "residuals": _residual_table(times, el, wave),
        "solution": _solution_table(times, grid.x, u[:n_obs]),
    }
    return report, tables


def _residual_table(times, el, wave) -> np.ndarray:
    # both residuals live on the same interior nodes; t is theirs, not the window's
    return np.column_stack([el.times, el.values, wave.values])


def _solution_table(times, x, u) -> np.ndarray:
    tt, xx = np.meshgrid(times, x, indexing="ij")
    return np.column_stack([tt.ravel(), xx.ravel(), u.ravel()])


def run_scenario(cfg: RunConfig) -> ScenarioReport:
    """Continuation, reference comparisons and diagnostics for one config.

    Numerical failures are re-raised as :class:`ScenarioError`.
    """
    t_start = time.perf_counter()
    base = cfg.base_problem()
    timings: dict = {}
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            t0 = time.perf_counter()
            cont = run_continuation(base, cfg.schedule(), cfg.minimizer_options())
            timings["continuation"] = time.perf_counter() - t0
        for w in caught:
            log.warning("%s: %s", cfg.name, w.message)

        t0 = time.perf_counter()
        comparisons = _comparisons(cfg, cont)
        timings["references"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        diags, tables = [], {}
        for run in cont.runs:
            d, tab = _diagnose(cfg, run, base.n_obs)
            diags.append(d)
            tables[run.epsilon] = tab
        timings["diagnostics"] = time.perf_counter() - t0
    except (ContinuationError, NumericalBreakdown, FloatingPointError) as exc:
        raise ScenarioError(cfg.name, exc) from exc
    timings["total"] = time.perf_counter() - t_start
    return ScenarioReport(cfg, cont, diags, comparisons, timings, tables)


def eps_tag(eps: float) -> str:
    return f"{eps:.6g}"


def _write_csv(path: Path, header: str, rows: np.ndarray) -> None:
    lines = [header]
    lines += [",".join(format(float(v), ".17g") for v in row) for row in rows]
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_outputs(report: ScenarioReport, out_dir: str | Path, figures: bool | None = None) -> list[Path]:
    """Write report.json, per-eps CSVs, cauchy.csv and (optionally) figures."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    for eps, tab in report.tables.items():
        tag = eps_tag(eps)
        for stem, header in (("energy", ENERGY_HEADER), ("solution", SOLUTION_HEADER),
                             ("residuals", RESIDUAL_HEADER)):
            path = out / f"{stem}_{tag}.csv"
            _write_csv(path, header, tab[stem])
            written.append(path)

    cont = report.continuation
    eps = cont.epsilons
    rows = np.array([[a, b, d] for a, b, d in zip(eps, eps[1:], cont.cauchy_diffs)]).reshape(-1, 3)
    path = out / "cauchy.csv"
    _write_csv(path, CAUCHY_HEADER, rows)
    written.append(path)

    path = out / "report.json"
    try:
        path.write_text(json.dumps(report.summary(), indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    written.append(path)

    if report.config.figures if figures is None else figures:
        from .plotting import render_figures

        written += render_figures(report, out)
    return written
