import math

import numpy as np
import pytest

from wide.diagnostics import initial_energy, mechanical_energy
from wide.energy import (
    DissipationModel,
    EnergyTerm,
    conjecture_model,
    make_model,
    sine_gordon_model,
    telegraph_model,
)
from wide.grid import build_spatial_grid
from wide.reference import (
    InstabilityError,
    exact_linear_wave,
    leapfrog_reverse,
    leapfrog_solve,
    ode_reduction_solve,
)

LINEAR = make_model([EnergyTerm("dirichlet")])
HARMONIC = make_model([EnergyTerm("p_potential", 1.0, p=2.0)])


def test_leapfrog_harmonic_period():
    g = build_spatial_grid("periodic", 1.0, 4)
    tr = leapfrog_solve(HARMONIC, None, None, np.ones(4), np.zeros(4), 0.01, 2 * np.pi, g,
                        n_steps=int(round(2 * np.pi / 0.01)))
    t_end = tr.times[-1]
    # compare against cos at the final node (within one step of 2 pi)
    assert abs(tr.states[-1, 0] - math.cos(t_end)) < 1.5e-3
    assert abs(tr.states[-1, 0] - 1.0) < 1.5e-3


def test_leapfrog_zero(periodic16):
    tr = leapfrog_solve(conjecture_model(4), None, None, np.zeros(16), np.zeros(16), 0.05, 1.0, periodic16)
    np.testing.assert_array_equal(tr.states, 0.0)
    assert len(tr.times) == len(tr.states) == len(tr.velocities) == 21


def test_leapfrog_matches_exact_wave(periodic64):
    g = periodic64
    dt = g.h / 4
    tr = leapfrog_solve(LINEAR, None, None, np.cos(g.x), np.zeros(64), dt, 1.0, g)
    exact = exact_linear_wave(np.cos(g.x), np.zeros(64), tr.times[-1], g)
    assert np.max(np.abs(tr.states[-1] - exact)) < 5e-3


def test_exact_wave_examples(periodic64):
    g = periodic64
    for t in (0.3, 1.7):
        np.testing.assert_allclose(exact_linear_wave(np.cos(g.x), np.zeros(64), t, g),
                                   math.cos(t) * np.cos(g.x), atol=1e-13)
        np.testing.assert_allclose(exact_linear_wave(np.cos(g.x), np.sin(g.x), t, g),
                                   np.cos(g.x - t), atol=1e-13)
    np.testing.assert_array_equal(exact_linear_wave(np.zeros(64), np.zeros(64), 1.0, g), 0.0)
    # mean mode drifts linearly
    np.testing.assert_allclose(exact_linear_wave(np.ones(64), np.full(64, 0.5), 2.0, g), 2.0, atol=1e-13)


def test_exact_wave_rejects_dirichlet():
    g = build_spatial_grid("dirichlet", 1.0, 16)
    with pytest.raises(ValueError):
        exact_linear_wave(np.zeros(16), np.zeros(16), 1.0, g)


def test_ode_cosine():
    tr = ode_reduction_solve(HARMONIC, None, 1.0, 0.0, 5.0)
    np.testing.assert_allclose(tr.states, np.cos(tr.times), atol=1e-9)


def test_ode_quartic_energy():
    tr = ode_reduction_solve(conjecture_model(4), None, 1.0, 0.0, 5.0)
    e = 0.5 * tr.velocities**2 + 0.5 * tr.states**4
    np.testing.assert_allclose(e, 0.5, atol=1e-8)


def test_ode_sine_gordon_equilibrium():
    tr = ode_reduction_solve(sine_gordon_model(), None, math.pi, 0.0, 3.0)
    np.testing.assert_allclose(tr.states, math.pi, atol=1e-12)


def test_ode_gradient_only_model_is_free_motion():
    tr = ode_reduction_solve(LINEAR, None, 1.0, 0.5, 2.0)
    np.testing.assert_allclose(tr.states, 1.0 + 0.5 * tr.times, atol=1e-12)


def test_ode_forcing_and_damping():
    # w'' = -w - w' + cos t has the periodic solution sin t (after transients) ; start on it
    tr = ode_reduction_solve(HARMONIC, math.cos, 0.0, 1.0, 4.0, gamma=1.0)
    np.testing.assert_allclose(tr.states, np.sin(tr.times), atol=1e-8)


def test_reversibility(periodic64):
    g = periodic64
    dt = g.h / 4
    fwd = leapfrog_solve(LINEAR, None, None, np.cos(g.x), np.zeros(64), dt, 3.0, g)
    back = leapfrog_reverse(LINEAR, fwd, g)
    np.testing.assert_allclose(back.states[-1], np.cos(g.x), atol=1e-10)
    np.testing.assert_allclose(-back.velocities[-1], 0.0, atol=1e-10)


@pytest.mark.parametrize("model", [LINEAR, conjecture_model(4)])
def test_energy_oscillation_bound(model, periodic64):
    g = periodic64
    dt = g.h / 4
    w0 = np.cos(g.x)
    tr = leapfrog_solve(model, None, None, w0, np.zeros(64), dt, 3.0, g)
    e = mechanical_energy(tr.states, dt, model, g, velocities=tr.velocities).values
    e0 = initial_energy(w0, np.zeros(64), model, g)
    assert np.max(np.abs(e - e0)) <= 10 * dt**2 * e0


def test_dissipative_monotone(periodic64):
    g = periodic64
    model, diss = telegraph_model(4)
    dt = g.h / 4
    tr = leapfrog_solve(model, diss, None, np.cos(g.x), 0.5 * np.sin(g.x), dt, 3.0, g)
    e = mechanical_energy(tr.states, dt, model, g, velocities=tr.velocities).values
    assert np.all(np.diff(e) <= 1e-10)


@pytest.mark.parametrize("p", [2, 4])
def test_leapfrog_agrees_with_ode(p):
    g = build_spatial_grid("periodic", 2 * np.pi, 8)
    dt = 0.01
    model = conjecture_model(p)
    tr = leapfrog_solve(model, None, None, np.ones(8), np.zeros(8), dt, 2.0, g)
    ode = ode_reduction_solve(model, None, 1.0, 0.0, 2.0, times=tr.times)
    assert np.max(np.abs(tr.states[:, 0] - ode.states)) <= 5 * dt**2


def test_instability_detected(periodic64):
    with pytest.raises(InstabilityError, match="dt"):
        leapfrog_solve(LINEAR, None, None, np.cos(periodic64.x), np.zeros(64), 1.0, 200.0, periodic64)


def test_damping_in_leapfrog(periodic16):
    model = make_model([EnergyTerm("p_potential", 1.0, p=2.0)])
    tr = leapfrog_solve(model, DissipationModel(0.5), None, np.ones(16), np.zeros(16), 0.001, 3.0, periodic16)
    ode = ode_reduction_solve(model, None, 1.0, 0.0, 3.0, gamma=0.5, times=tr.times)
    assert np.max(np.abs(tr.states[:, 0] - ode.states)) < 1e-5
