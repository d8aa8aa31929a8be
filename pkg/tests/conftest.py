import math

import numpy as np
import pytest

from qcurv.radial import RadialField, TailModel, make_grid


def spherical_values(r, lam=1.0):
    """log(2 lam / (1 + lam^2 r^2)), the exact profile for K = 6."""
    return np.log(2.0 * lam) - np.log1p((lam * r) ** 2)


def spherical_field(grid, lam=1.0, shift=0.0):
    vals = spherical_values(grid.nodes, lam) + shift
    tail = TailModel(-2.0, math.log(2.0 / lam) + shift)
    tol = 2.0 / (lam * grid.r_max) ** 2 + 1e-9
    return RadialField(grid, vals, tail=tail, match_tol=tol)


@pytest.fixture(scope="session")
def grid():
    """Medium grid for unit tests (acceptance uses the full default)."""
    return make_grid(r_max=1e3, n_nodes=400, r_min=1e-5)


@pytest.fixture(scope="session")
def fine_grid():
    return make_grid(r_max=1e3, n_nodes=1200, r_min=1e-5)
