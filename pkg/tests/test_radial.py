import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcurv.radial import (DivergentTailError, InvalidGridError, RadialField,
                          RadialGrid, TailModel, constant_field, make_grid,
                          radial_laplacian, reconstruct_from_laplacian,
                          scale_field)
from conftest import spherical_field, spherical_values


# ---------------------------------------------------------------------------
# grid and quadrature
# ---------------------------------------------------------------------------

def test_grid_invariants(grid):
    assert grid.nodes[0] == 0.0
    assert grid.nodes[-1] == grid.r_max
    assert np.all(np.diff(grid.nodes) > 0)


def test_grid_rejects_bad_nodes():
    with pytest.raises(InvalidGridError):
        RadialGrid(np.array([0.0, 1.0, 1.0, 2.0]))
    with pytest.raises(InvalidGridError):
        RadialGrid(np.array([0.5, 1.0, 2.0, 3.0]))
    with pytest.raises(InvalidGridError):
        # a single interior node between 1e-3 and 1e3 is too coarse
        RadialGrid(np.array([0.0, 1.0, 1e3]))


def test_quadrature_s3_exact(grid):
    r = grid.nodes
    val = grid.rule.integrate(r ** 3)
    exact = grid.r_max ** 4 / 4.0
    assert abs(val - exact) / exact < 1e-10


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_quadrature_polynomial_exactness(grid, k):
    val = grid.rule.integrate(grid.nodes ** k)
    exact = grid.r_max ** (k + 1) / (k + 1)
    assert abs(val - exact) / exact < 1e-10


@given(coeffs=st.lists(st.floats(-5, 5), min_size=4, max_size=4))
@settings(max_examples=25, deadline=None)
def test_quadrature_exact_on_random_cubics(coeffs):
    g = make_grid(r_max=10.0, n_nodes=60, r_min=1e-6)
    poly = np.polynomial.Polynomial(coeffs)
    val = g.rule.integrate(poly(g.nodes))
    exact = poly.integ()(g.r_max) - poly.integ()(0.0)
    assert abs(val - exact) <= 1e-10 * (1.0 + abs(exact))


def test_cumulative_matches_total(grid):
    f = np.exp(-grid.nodes)
    cum = grid.rule.cumulative(f)
    assert cum[0] == 0.0
    assert np.isclose(cum[-1], grid.rule.integrate(f), rtol=1e-13)


# ---------------------------------------------------------------------------
# laplacian
# ---------------------------------------------------------------------------

def test_laplacian_of_constant(grid):
    lap = radial_laplacian(constant_field(grid, 3.0))
    assert np.max(np.abs(lap.values)) < 1e-8


def test_laplacian_of_r_squared(grid):
    f = RadialField(grid, grid.nodes ** 2)
    lap = radial_laplacian(f)
    # Delta r^2 = 2*4 in R^4
    assert np.max(np.abs(lap.values - 8.0)) < 1e-5


def test_laplacian_spherical_profile(grid):
    u = spherical_field(grid)
    lap = radial_laplacian(u)
    r = grid.nodes
    exact = (-8.0 - 4.0 * r ** 2) / (1.0 + r ** 2) ** 2
    assert abs(lap.values[0] - (-8.0)) < 1e-6
    # interior accuracy, away from the origin patch
    sel = (r > 1e-3) & (r < 100.0)
    assert np.max(np.abs(lap.values[sel] - exact[sel])) < 5e-3


def test_laplacian_needs_four_nodes():
    g = RadialGrid.__new__(RadialGrid)  # bypass ctor to build a tiny grid
    with pytest.raises(InvalidGridError):
        RadialGrid(np.array([0.0, 1.0, 2.0]))


# ---------------------------------------------------------------------------
# reconstruction
# ---------------------------------------------------------------------------

def test_reconstruct_zero_laplacian(grid):
    f = reconstruct_from_laplacian(constant_field(grid, 0.0), 3.0)
    assert np.max(np.abs(f.values - 3.0)) < 1e-12


def test_reconstruct_constant_laplacian(grid):
    f = reconstruct_from_laplacian(constant_field(grid, 8.0), 0.0)
    assert np.max(np.abs(f.values - grid.nodes ** 2)) < 1e-8 * grid.r_max ** 2


def test_roundtrip_spherical(grid, fine_grid):
    errs = []
    for g in (grid, fine_grid):
        u = spherical_field(g)
        w = radial_laplacian(u)
        back = reconstruct_from_laplacian(w, u.values[0])
        sel = g.nodes < 50.0
        errs.append(np.max(np.abs(back.values[sel] - u.values[sel])))
    assert errs[1] < 1e-3
    # second-order: tripling the nodes-per-decade shrinks the error ~9x
    assert errs[0] / errs[1] > 4.0


def test_roundtrip_polynomial(grid):
    f = RadialField(grid, 1.0 + 0.5 * grid.nodes ** 2)
    back = reconstruct_from_laplacian(radial_laplacian(f), f.values[0])
    assert np.max(np.abs(back.values - f.values) /
                  (1.0 + np.abs(f.values))) < 1e-6


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------

def test_scale_identity(grid):
    u = spherical_field(grid)
    v = scale_field(u, 1.0)
    assert np.max(np.abs(v.values - u.values)) < 1e-12


def test_scale_spherical_map(fine_grid):
    # u(2x) + log 2 is the lam = 2 spherical profile
    u = spherical_field(fine_grid, lam=1.0)
    v = scale_field(u, 2.0)
    expected = spherical_values(fine_grid.nodes, lam=2.0)
    err = np.abs(v.values - expected)
    inner = fine_grid.nodes <= fine_grid.r_max / 2.0
    assert np.max(err[inner]) < 1e-9
    # beyond r_max/rho the log-tail model itself is off by ~1/(lam r)^2
    assert np.max(err) < 3e-6


def test_scale_rejects_nonpositive(grid):
    u = spherical_field(grid)
    with pytest.raises(ValueError):
        scale_field(u, 0.0)


@given(r1=st.floats(0.5, 2.0), r2=st.floats(0.5, 2.0))
@settings(max_examples=20, deadline=None)
def test_scale_group_law(r1, r2):
    g = make_grid(r_max=1e3, n_nodes=300, r_min=1e-5)
    u = spherical_field(g)
    a = scale_field(scale_field(u, r1), r2)
    b = scale_field(u, r1 * r2)
    diff = np.abs(a.values - b.values)
    # 1e-12 plus resampling error of the two-step path
    inner = g.nodes <= g.r_max / 8.0
    assert np.max(diff[inner]) < 5e-7
    assert np.max(diff) < 2e-5


# ---------------------------------------------------------------------------
# tail model
# ---------------------------------------------------------------------------

def test_tail_moment_closed_vs_quad():
    t_power = TailModel(-1.8, 0.3)
    t_loglog = TailModel(-1.8, 0.3, loglog=-0.5)
    closed = t_power.source_moment(-4.2, 50.0)
    # the generic quadrature path must agree with the closed form
    brute = t_loglog.source_moment(-4.2, 50.0)

    def integrand(s):
        return s ** -4.2 * math.log(s) ** (4 * -0.5)

    from scipy.integrate import quad
    ref, _ = quad(integrand, 50.0, np.inf)
    assert abs(brute - ref) < 1e-12 + 1e-8 * abs(ref)
    assert abs(closed - (50.0 ** -3.2 / 3.2)) < 1e-15


def test_tail_moment_log_weighted():
    t = TailModel(-2.0, 0.0)
    r0 = 30.0
    got = t.source_moment(-5.0, r0, extra_log=1)
    from scipy.integrate import quad
    ref, _ = quad(lambda s: s ** -5.0 * math.log(s), r0, np.inf)
    assert abs(got - ref) < 1e-12


def test_tail_divergence_raises():
    t = TailModel(-1.0, 0.0)  # 4*slope + 3 + 1 = 0: divergent
    with pytest.raises(DivergentTailError):
        t.source_moment(-1.0 + 0.5, 10.0)
    # at the borderline exponent the loglog^-2 factor rescues convergence
    tt = TailModel(-1.25, 0.0, loglog=-0.5)
    val = tt.source_moment(-1.0, 10.0)
    assert np.isfinite(val) and val > 0.0
    assert abs(val - 1.0 / math.log(10.0)) < 1e-10


def test_gaussian_tail_vanishes():
    t = TailModel(-1.8, 0.0)
    assert t.source_moment(2.0, 1000.0, gauss_eps=1.0) == 0.0


# ---------------------------------------------------------------------------
# field construction and serialization
# ---------------------------------------------------------------------------

def test_field_tail_mismatch_rejected(grid):
    vals = spherical_values(grid.nodes)
    with pytest.raises(ValueError):
        RadialField(grid, vals, tail=TailModel(-2.0, 5.0))


def test_field_requires_finite(grid):
    vals = np.zeros(grid.n)
    vals[3] = np.inf
    with pytest.raises(ValueError):
        RadialField(grid, vals)


def test_csv_roundtrip_bit_exact(grid, tmp_path):
    u = spherical_field(grid)
    path = tmp_path / "field.csv"
    u.to_csv(path)
    back = RadialField.from_csv(path, tail=u.tail)
    assert np.array_equal(back.values, u.values)
    assert np.array_equal(back.grid.nodes, grid.nodes)


def test_json_roundtrip_bit_exact(grid, tmp_path):
    u = spherical_field(grid)
    path = tmp_path / "field.json"
    u.to_json(path)
    back = RadialField.from_json(path)
    assert np.array_equal(back.values, u.values)
    assert back.tail == u.tail


def test_interp_uses_tail(grid):
    u = spherical_field(grid)
    r = 2.0 * grid.r_max
    expected = -2.0 * math.log(r) + math.log(2.0)
    assert abs(u.interp(r) - expected) < 1e-12
    bare = RadialField(grid, u.values)
    with pytest.raises(Exception):
        bare.interp(r)
