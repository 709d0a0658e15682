import math

import numpy as np
import pytest

from wide.continuation import BaseProblem, EpsilonSchedule, run_continuation
from wide.diagnostics import (
    EnergySeries,
    approximate_energy,
    check_energy_inequality,
    check_nonincreasing,
    el_residual,
    gronwall_bound,
    initial_energy,
    kernel_tail,
    mechanical_energy,
    mechanical_energy_thm1,
    weak_residual,
)
from wide.energy import EnergyTerm, conjecture_model, make_model
from wide.functional import make_problem
from wide.grid import build_spatial_grid, build_time_grid
from wide.reference import leapfrog_solve

LINEAR = make_model([EnergyTerm("dirichlet")])


def standing_wave(grid, dt, t_end):
    t = dt * np.arange(int(round(t_end / dt)) + 1)
    return t, np.cos(t)[:, None] * np.cos(grid.x)[None, :]


def series(values, dt=0.1):
    values = np.asarray(values, dtype=float)
    return EnergySeries(dt * np.arange(len(values)), values, "mechanical")


def test_mechanical_zero(periodic16):
    e = mechanical_energy(np.zeros((10, 16)), 0.1, conjecture_model(4), periodic16)
    np.testing.assert_array_equal(e.values, 0.0)


def test_standing_wave_energy(periodic64):
    g = periodic64
    dt = g.h / 4
    _, w = standing_wave(g, dt, 3.0)
    e = mechanical_energy(w, dt, LINEAR, g)
    assert np.max(np.abs(e.values - np.pi / 2)) < 5e-3


def test_thm1_energy_at_start(periodic64):
    g = periodic64
    dt = g.h / 4
    _, w = standing_wave(g, dt, 1.0)
    e = mechanical_energy_thm1(w, dt, conjecture_model(4), g)
    assert e.values[0] == pytest.approx(7 * np.pi / 4, abs=5e-3)
    assert e.kind == "mechanical_thm1"


def test_initial_energy_from_data(periodic64):
    g = periodic64
    e0 = initial_energy(np.cos(g.x), np.sin(g.x), LINEAR, g)
    assert e0 == pytest.approx(np.pi / 2 + np.pi / 2, abs=2e-3)


def test_kernel_tail_constant():
    eps, dt = 0.05, 0.01
    m = int(round((1.0 + 40 * eps) / dt))
    tail = kernel_tail(np.full(m + 1, 3.0), dt, eps, m + 1)
    ok = (m - np.arange(m + 1)) * dt >= 40 * eps - 1e-12
    np.testing.assert_allclose(tail[ok], 3.0, rtol=1e-8)


def test_kernel_quadrature_converges():
    eps = 0.1
    errs = []
    for dt in (0.02, 0.01, 0.005):
        s = dt * np.arange(int(round(6.0 / dt)) + 1)
        n_out = int(round(1.0 / dt)) + 1
        tail = kernel_tail(np.cos(s), dt, eps, n_out)
        exact = (np.exp(1j * s[:n_out]) / (1 - 1j * eps) ** 2).real
        errs.append(np.max(np.abs(tail - exact)))
    assert errs[0] / errs[1] >= 3 and errs[1] / errs[2] >= 3


def test_free_motion_approximate_energy(periodic16):
    g = periodic16
    eps, dt = 0.1, 0.02
    tg = build_time_grid(eps, 1.0, dt)
    w1 = np.sin(g.x) + 0.3
    w = np.ones(16)[None, :] + tg.times[:, None] * w1[None, :]
    model = make_model([EnergyTerm("dirichlet", 0.0)])
    e = approximate_energy(w, tg, model, g)
    np.testing.assert_allclose(e.values, 0.5 * g.h * np.sum(w1**2), rtol=1e-10)
    assert not e.flags["truncated"]


def test_truncation_flag(periodic16):
    tg = build_time_grid(0.1, 1.0, 0.02, kappa=10)
    e = approximate_energy(np.zeros((tg.n_steps + 1, 16)), tg, LINEAR, periodic16)
    assert e.flags["truncated"]


def test_inequality_examples():
    v = check_energy_inequality(series(np.full(30, 2.0)), 2.0, 1e-3)
    assert v.passed and v.max_violation == 0.0
    assert check_energy_inequality(series(np.linspace(2.0, 1.0, 30)), 2.0, 1e-3).passed
    bump = np.full(30, 2.0)
    tol = 1e-3
    bump[17] += 2 * tol * 3.0
    v = check_energy_inequality(series(bump), 2.0, tol)
    assert not v.passed
    assert v.worst_time == pytest.approx(1.7)
    assert v.as_dict()["pass"] is False


def test_inequality_ignores_edge_nodes():
    vals = np.full(30, 1.0)
    vals[0] = vals[1] = vals[-1] = vals[-2] = 5.0
    assert check_energy_inequality(series(vals), 1.0, 1e-6).passed
    assert not check_energy_inequality(series(vals), 1.0, 1e-6, exclude_edges=False).passed


def test_nonincreasing():
    assert check_nonincreasing(series(np.linspace(3, 1, 20)), 0.0).passed
    vals = np.linspace(3, 1, 20)
    vals[10] += 0.5
    v = check_nonincreasing(series(vals), 0.1)
    assert not v.passed and v.worst_time == pytest.approx(1.0)


def test_gronwall_examples(periodic16):
    g = periodic16
    t = np.linspace(0, 2, 201)
    np.testing.assert_array_equal(gronwall_bound(1.3, np.zeros((201, 16)), t, g), 1.3)
    c = math.sqrt(0.5 / (2 * np.pi))  # ||f||^2 = 1/2, so the double integral over [0, 2] is 1
    f = np.full((201, 16), c)
    b = gronwall_bound(1.0, f, t, g)
    assert b[-1] == pytest.approx(4.0, rel=1e-12)
    b0 = gronwall_bound(0.0, f, t, g)
    np.testing.assert_allclose(b0, 0.5 * t * 0.5 * t, rtol=1e-12, atol=1e-15)
    with pytest.raises(ValueError):
        gronwall_bound(-1.0, f, t, g)


def test_zero_forcing_reduction_bitwise(periodic16):
    t = np.linspace(0, 2, 41)
    s = EnergySeries(t, 2.0 + 0.01 * np.sin(7 * t), "mechanical")
    e0 = 2.0
    a = check_energy_inequality(s, gronwall_bound(e0, np.zeros((41, 16)), t, periodic16), 2e-2)
    b = check_energy_inequality(s, e0, 2e-2)
    assert a.as_dict() == b.as_dict()


def _problem(grid, eps, dt, t_obs, model, w0):
    tg = build_time_grid(eps, t_obs, dt, kappa=10)
    return make_problem(eps, grid, tg, model, w0, np.zeros(grid.n_points))


def test_el_residual_zero(periodic16):
    p = _problem(periodic16, 0.1, 0.02, 1.0, conjecture_model(4), np.zeros(16))
    r = el_residual(np.zeros(p.shape), p)
    np.testing.assert_array_equal(r.values, 0.0)


@pytest.mark.parametrize("dt", [0.02, 0.01])
def test_el_residual_closed_form(dt, periodic16):
    eps = 0.1
    model = make_model([EnergyTerm("p_potential", 1.0, p=2.0)])
    p = _problem(periodic16, eps, dt, 1.0, model, np.ones(16))
    t = p.time.times
    w = np.cos(t)[:, None] * np.ones(16)[None, :]
    r = el_residual(w, p)
    tt = r.times
    exact = np.abs(eps**2 * np.cos(tt) - 2 * eps * np.sin(tt)) * math.sqrt(2 * np.pi)
    assert np.max(np.abs(r.values - exact)) < 2 * dt**2
    wave = el_residual(w, p, epsilon=0.0)
    assert wave.name == "wave_residual" and np.max(wave.values) < dt**2


def test_el_residual_needs_nodes(periodic16):
    p = _problem(periodic16, 0.1, 0.02, 1.0, conjecture_model(4), np.zeros(16))
    with pytest.raises(ValueError):
        el_residual(np.zeros((6, 16)), p)


def test_weak_residual_zero(periodic16):
    np.testing.assert_array_equal(weak_residual(np.zeros((30, 16)), 0.05, periodic16, conjecture_model(4)), 0.0)


def test_weak_residual_self_convergence():
    res = []
    for n in (32, 64):
        g = build_spatial_grid("periodic", 2 * np.pi, n)
        dt = g.h / 4
        _, w = standing_wave(g, dt, 2.0)
        r = weak_residual(w, dt, g, LINEAR)
        assert len(r) == 6
        res.append(np.max(r))
    assert res[0] / res[1] > 3.5


def test_weak_residual_leapfrog(periodic64):
    g = periodic64
    dt = g.h / 4
    model = conjecture_model(4)
    tr = leapfrog_solve(model, None, None, np.cos(g.x), np.zeros(64), dt, 2.0, g)
    scale = math.sqrt(2 * np.pi) * np.max(np.abs(tr.states))
    assert np.max(weak_residual(tr.states, dt, g, model)) <= 10 * (dt**2 + g.h**2) * scale


def test_approximate_energy_gap_shrinks():
    g = build_spatial_grid("periodic", 2 * np.pi, 32)
    base = BaseProblem(g, LINEAR, np.cos(g.x), np.zeros(32), dt=0.0125, t_obs=1.0)
    res = run_continuation(base, EpsilonSchedule((0.2, 0.1, 0.05)))
    gaps = []
    for run in res.runs:
        mech = mechanical_energy(run.field, base.dt, LINEAR, g, n_obs=base.n_obs)
        approx = approximate_energy(run.field, run.problem.time, LINEAR, g, base.n_obs)
        assert np.all(mech.values >= 0) and np.all(approx.values >= 0)
        gaps.append(np.max(np.abs(approx.values - mech.values)))
    assert gaps[0] > gaps[1] > gaps[2]
