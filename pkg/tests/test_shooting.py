import math

import numpy as np
import pytest

from qcurv.curvature import K_constant, K_one_minus, K_one_plus
from qcurv.radial import make_grid
from qcurv.shooting import finite_total_curvature_probe, shoot
from qcurv.solver import SolveSpec, solve


def test_spherical_trajectory_matches_closed_form():
    st = shoot(math.log(2.0), -8.0, K_constant(6.0), r_end=1e3)
    assert st.terminal_class == "normal_decay"
    rr = np.linspace(0.01, 10.0, 400)
    exact = np.log(2.0 / (1.0 + rr ** 2))
    assert np.max(np.abs(st.sample(rr) - exact)) < 1e-6


def test_strongly_negative_laplacian_collapses():
    st = shoot(0.0, -20.0, K_one_minus(2.0), r_end=1e3)
    assert st.terminal_class == "quadratic_collapse"
    assert st.w[-1] < -1e-2


def test_positive_laplacian_blows_up():
    st = shoot(0.0, 5.0, K_constant(6.0), r_end=1e3)
    assert st.terminal_class == "blow_up"
    assert st.r_exit < 10.0


def test_flat_start_is_benign():
    st = shoot(-50.0, 0.0, K_one_minus(2.0), r_end=1e3)
    assert st.terminal_class in ("normal_decay", "inconclusive")
    cls, radii, partial, ok = finite_total_curvature_probe(
        -50.0, 0.0, K_one_minus(2.0))
    assert partial[-1] < 1e-60


def test_convergence_order_in_tolerance():
    rr = np.linspace(0.1, 10.0, 200)
    exact = np.log(2.0 / (1.0 + rr ** 2))
    errs = []
    for rtol in (1e-7, 1e-9, 1e-11):
        st = shoot(math.log(2.0), -8.0, K_constant(6.0), r_end=20.0,
                   rtol=rtol, atol=rtol * 1e-2)
        errs.append(np.max(np.abs(st.sample(rr) - exact)))
    assert errs[2] < errs[0]
    assert errs[2] < 1e-8


def test_classification_stable_under_tighter_tolerance():
    cases = [(math.log(2.0), -8.0, K_constant(6.0)),
             (0.0, -20.0, K_one_minus(2.0)),
             (0.0, 5.0, K_constant(6.0))]
    for a, b, prof in cases:
        c1 = shoot(a, b, prof, rtol=1e-9, atol=1e-11).terminal_class
        c2 = shoot(a, b, prof, rtol=1e-10, atol=1e-12).terminal_class
        assert c1 == c2


def test_random_starts_have_finite_partial_curvature():
    rng = np.random.default_rng(3)
    prof = K_one_minus(2.0)
    n_blow = 0
    for _ in range(20):
        a = float(rng.uniform(-3.0, 3.0))
        b = float(rng.uniform(-30.0, 5.0))
        cls, radii, partial, ok = finite_total_curvature_probe(a, b, prof)
        if cls == "blow_up":
            n_blow += 1
            continue
        assert ok, (a, b, cls)
    assert n_blow < 20  # the sweep must actually exercise the claim


def test_spherical_partial_curvature_consistent_with_volumes():
    from qcurv.curvature import split_volumes
    from conftest import spherical_field
    grid = make_grid(1e3, 900, 1e-5)
    u = spherical_field(grid)
    v0, vp = split_volumes(u, 2.0)
    cls, radii, partial, ok = finite_total_curvature_probe(
        math.log(2.0), -8.0, K_constant(6.0))
    assert cls == "normal_decay"
    assert abs(partial[-1] - (v0 + vp)) / (v0 + vp) < 5e-3


def test_crosscheck_against_integral_solution():
    grid = make_grid(1e3, 1200, 1e-5)
    rec = solve(SolveSpec(K_one_minus(2.0), "lambda", 140.0), grid=grid)
    assert rec.converged
    st = shoot(float(rec.u.values[0]), rec.delta_u0_fd, rec.spec.profile,
               r_end=20.0)
    rr = np.linspace(0.01, 5.0, 300)
    dev = np.max(np.abs(st.sample(rr) - rec.u.interp(rr)))
    assert dev < 1e-3
    long = shoot(float(rec.u.values[0]), rec.delta_u0_fd, rec.spec.profile,
                 r_end=1e3)
    assert long.terminal_class == "normal_decay"
