from pathlib import Path

import numpy as np
import pytest

from wide.energy import EnergyTerm, make_model
from wide.grid import build_spatial_grid

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"

# (criterion id, status, detail) filled in by test_acceptance
ACCEPTANCE_LINES: list[tuple[str, str, str]] = []


def model_zoo():
    """One model per term kind plus some mixtures; periodic grids only."""
    return {
        "dirichlet": make_model([EnergyTerm("dirichlet", 1.3)]),
        "p_potential2": make_model([EnergyTerm("p_potential", 0.7, p=2.0)]),
        "p_potential4": make_model([EnergyTerm("p_potential", 1.1, p=4.0)]),
        "p_potential3.5": make_model([EnergyTerm("p_potential", 1.0, p=3.5)]),
        "p_laplacian3": make_model([EnergyTerm("p_laplacian", 0.8, p=3.0)]),
        "p_laplacian1.5": make_model([EnergyTerm("p_laplacian", 0.8, p=1.5)]),
        "biharmonic": make_model([EnergyTerm("biharmonic", 0.9)]),
        "cosine": make_model([EnergyTerm("cosine", 1.2)]),
        "fractional": make_model([EnergyTerm("fractional", 1.0, s=0.4, c_ns=1.5)]),
        "conjecture4": make_model([EnergyTerm("dirichlet", 1.0), EnergyTerm("p_potential", 2.0, p=4.0)]),
        "beam": make_model([EnergyTerm("biharmonic", 1.0), EnergyTerm("p_laplacian", 1.0, p=4.0),
                            EnergyTerm("p_potential", 1.0, p=3.0)]),
    }


@pytest.fixture
def zoo():
    return model_zoo()


@pytest.fixture
def periodic16():
    return build_spatial_grid("periodic", 2 * np.pi, 16)


@pytest.fixture
def periodic64():
    return build_spatial_grid("periodic", 2 * np.pi, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for cid, status, detail in sorted(ACCEPTANCE_LINES, key=lambda x: (int(x[0].rstrip("abcdef")), x[0])):
        terminalreporter.write_line(f"criterion {cid:<4} {status:<5} {detail}")
