import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wide.grid import (
    GridMismatchError,
    InvalidDomainError,
    ResolutionError,
    build_spatial_grid,
    build_time_grid,
    cell_weight,
    inner_product,
    spacetime_norm,
)


def test_periodic_spacing():
    g = build_spatial_grid("periodic", 2 * np.pi, 8)
    assert g.h == pytest.approx(np.pi / 4, rel=1e-15)
    assert g.x[0] == 0.0 and len(g.x) == 8


def test_dirichlet_spacing_stores_interior_only():
    g = build_spatial_grid("dirichlet", 1.0, 9)
    assert g.h == pytest.approx(0.1, rel=1e-15)
    assert g.x[0] == pytest.approx(0.1) and g.x[-1] == pytest.approx(0.9)


@pytest.mark.parametrize("kind,length,n", [("periodic", 0.0, 8), ("periodic", -1.0, 8),
                                            ("periodic", 1.0, 3), ("torus", 1.0, 8),
                                            ("dirichlet", float("inf"), 8)])
def test_invalid_domains(kind, length, n):
    with pytest.raises(InvalidDomainError):
        build_spatial_grid(kind, length, n)


def test_time_grid_horizon():
    tg = build_time_grid(0.1, 1.0, 0.05, 40)
    assert tg.t_max == pytest.approx(5.0, rel=1e-14)
    assert tg.n_steps == 100
    assert tg.n_obs == 21


def test_time_grid_rounds_horizon_up():
    tg = build_time_grid(0.1, 1.0, 0.3, 40)
    assert tg.t_max >= 5.0 and tg.t_max - 0.3 < 5.0


def test_cell_weight_closed_form():
    eps = 0.1
    assert cell_weight(0.0, eps, eps) == pytest.approx(eps * (1 - math.exp(-1)), rel=1e-15)


def test_weight_sum_is_epsilon():
    eps = 0.05
    tg = build_time_grid(eps, 40 * eps - 0.01, 0.01, 40)
    assert tg.t_max >= 40 * eps
    assert tg.cell_weights.sum() == pytest.approx(eps * (1 - math.exp(-tg.t_max / eps)), rel=1e-12)
    assert tg.cell_weights.sum() == pytest.approx(eps, rel=1e-12)


def test_weights_positive_and_decreasing_past_first_cell():
    tg = build_time_grid(0.1, 1.0, 0.02)
    w = tg.cell_weights
    assert np.all(w > 0)
    assert np.all(np.diff(w[1:]) < 0)


def test_weight_sum_increases_to_epsilon():
    eps = 0.1
    sums = [build_time_grid(eps, 0.5, 0.01, k).cell_weights.sum() for k in (10, 15, 20, 40)]
    assert all(s <= eps * (1 + 1e-14) for s in sums)
    assert all(b >= a for a, b in zip(sums, sums[1:]))
    assert sums[-1] == pytest.approx(eps, rel=1e-12)


def test_tiny_epsilon_large_step_stays_finite():
    tg = build_time_grid(1e-4, 5.0, 1.0)
    assert np.all(np.isfinite(tg.log_weights))
    assert np.all(tg.cell_weights >= 0)
    assert tg.cell_weights[0] > 0


def test_resolution_error():
    with pytest.raises(ResolutionError):
        build_time_grid(0.1, 1.0, 1.0)


def test_kappa_floor():
    with pytest.raises(ValueError):
        build_time_grid(0.1, 1.0, 0.1, kappa=5)


def test_inner_product_examples(periodic64):
    one = np.ones(64)
    assert inner_product(one, one, periodic64) == pytest.approx(2 * np.pi, rel=1e-14)
    assert inner_product(np.zeros(64), one, periodic64) == 0.0
    c = np.cos(periodic64.x)
    assert inner_product(c, c, periodic64) == pytest.approx(np.pi, rel=1e-12)


def test_inner_product_mismatch(periodic64):
    with pytest.raises(GridMismatchError):
        inner_product(np.ones(64), np.ones(32), periodic64)
    with pytest.raises(GridMismatchError):
        inner_product(np.ones(32), np.ones(32), periodic64)


@settings(max_examples=40, deadline=None)
@given(k=st.integers(0, 15), m=st.integers(0, 15), phase=st.floats(0, 6.28))
def test_trig_quadrature_exact(k, m, phase):
    g = build_spatial_grid("periodic", 2 * np.pi, 32)
    a = np.cos(k * g.x + phase)
    b = np.cos(m * g.x)
    if k != m:
        exact = 0.0
    elif k == 0:
        exact = 2 * np.pi * math.cos(phase)
    else:
        exact = np.pi * math.cos(phase)
    assert inner_product(a, b, g) == pytest.approx(exact, rel=1e-12, abs=1e-12)


def test_spacetime_norm_constant(periodic16):
    vals = np.ones((11, 16))
    assert spacetime_norm(vals, 0.1, periodic16) == pytest.approx(math.sqrt(2 * np.pi * 1.0), rel=1e-14)
