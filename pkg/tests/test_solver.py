import math
from dataclasses import replace

import numpy as np
import pytest

from qcurv.curvature import (LAMBDA_SPHERE, K_constant, K_one_minus,
                             K_one_plus, K_regularized, thresholds_for,
                             total_curvature)
from qcurv.kernel import assemble_operator
from qcurv.radial import RadialField, TailModel, make_grid, radial_laplacian
from qcurv.solver import (SolutionRecord, SolveSpec, _System, check_window,
                          continuation_path, epsilon_schedule,
                          gaussian_lambda_schedule, initial_guess_values,
                          lambda_schedule, laplacian_at_origin, residual,
                          rescale_to_unit_coefficient,
                          rescaled_blowup_profile, solve)
from conftest import spherical_field

PI2 = math.pi ** 2


@pytest.fixture(scope="module")
def grid1200():
    return make_grid(1e3, 1200, 1e-5)


@pytest.fixture(scope="module")
def rec140(grid1200):
    rec = solve(SolveSpec(K_one_minus(2.0), "lambda", 140.0), grid=grid1200)
    assert rec.converged
    return rec


# ---------------------------------------------------------------------------
# residual operator
# ---------------------------------------------------------------------------

def test_residual_on_spherical(grid1200):
    u = spherical_field(grid1200)
    spec = SolveSpec(K_constant(6.0), "lambda", LAMBDA_SPHERE)
    # recover the additive constant from the origin row, then check that
    # the whole profile satisfies the integral equation
    f0 = residual(u, 0.0, spec)
    c = f0.values[0]
    f = residual(u, c, spec)
    sel = grid1200.nodes <= 10.0
    assert np.max(np.abs(f.values[sel])) < 1e-4


def test_picard_step_linearity(grid1200):
    a = assemble_operator(grid1200)
    k = K_one_minus(2.0)(grid1200.nodes)
    c = -0.3
    lhs = a @ (k * math.exp(4.0 * c))
    rhs = math.exp(4.0 * c) * (a @ k)
    assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-13)


def test_jacobian_vs_finite_differences(grid1200):
    rng = np.random.default_rng(7)
    for constraint, gauge in (("lambda", "absolute"), ("rho", "origin")):
        sys_ = _System(grid1200, K_one_minus(2.0), gauge, constraint,
                       140.0 if constraint == "lambda" else 1.0,
                       -2.0, 0.0, True)
        u0 = initial_guess_values(
            grid1200, SolveSpec(K_one_minus(2.0), constraint,
                                140.0 if constraint == "lambda" else 1.0))
        x = np.concatenate([u0, [u0[0]]]) if constraint == "lambda" else u0
        jac = sys_.jacobian(x)
        for _ in range(2):
            d = rng.standard_normal(x.size)
            d /= np.linalg.norm(d)
            h = 1e-6
            fd = (sys_.residual(x + h * d) - sys_.residual(x - h * d)) / (2 * h)
            an = jac @ d
            assert np.linalg.norm(fd - an) / np.linalg.norm(an) < 1e-6


def test_single_node_perturbation_matches_diagonal(grid1200):
    sys_ = _System(grid1200, K_one_minus(2.0), "absolute", "rho", 0.0,
                   -2.0, 0.0, True)
    u = initial_guess_values(grid1200,
                             SolveSpec(K_one_minus(2.0), "lambda", 140.0))
    k = 200
    delta = 1e-7
    f0 = sys_.residual(u)
    up = u.copy()
    up[k] += delta
    f1 = sys_.residual(up)
    e4u = math.exp(4.0 * u[k])
    kk = K_one_minus(2.0)(grid1200.nodes[k])
    a_kk = sys_.A[k, k]
    predicted = delta * (1.0 - a_kk * 4.0 * kk * e4u)
    assert abs((f1[k] - f0[k]) - predicted) < 1e-9 * max(1.0, abs(predicted))


# ---------------------------------------------------------------------------
# solve: negative case
# ---------------------------------------------------------------------------

def test_solve_inside_window(rec140):
    assert rec140.window_check == "inside"
    assert rec140.residual_norm <= rec140.spec.newton_tol
    assert abs(rec140.lam - 140.0) < 1e-8
    assert rec140.monotone_u
    assert rec140.monotone_lap
    assert rec140.u.tail is not None
    assert abs(rec140.u.tail.slope - (-140.0 / (8 * PI2))) < 1e-12


def test_v1_identity_on_converged_record(rec140):
    # int e^{4u} = Lambda + (4 Lambda / (p Lambda_sph)) (Lambda_sph - Lambda)
    lam = rec140.lam
    predicted = lam + (4 * lam / (2.0 * LAMBDA_SPHERE)) * (LAMBDA_SPHERE - lam)
    assert abs(rec140.v0 - predicted) / predicted < 1e-4
    assert abs(rec140.lam - (rec140.v0 - rec140.vp)) < 1e-6


def test_laplacian_at_origin_routes_agree(rec140):
    val = laplacian_at_origin(rec140)
    assert val < 0.0
    assert abs(val - rec140.delta_u0) < 1e-10 * abs(val)
    assert abs(val - rec140.delta_u0_fd) < 1e-5 * abs(val)


def test_laplacian_at_origin_spherical(grid1200):
    u = spherical_field(grid1200)
    spec = SolveSpec(K_constant(6.0), "lambda", LAMBDA_SPHERE)
    rec = SolutionRecord(
        spec=spec, u=u, c=0.0, lam=LAMBDA_SPHERE, v0=0.0, vp=0.0,
        delta_u0=0.0, delta_u0_fd=0.0, iterations=0, residual_norm=0.0,
        converged=True, window_check="inside", gauge="absolute",
        tail_mode="power")
    assert abs(laplacian_at_origin(rec) - (-8.0)) < 1e-6


def test_initial_guess_lambda_within_20_percent(grid1200):
    for target in (125.0, 140.0, 155.0):
        spec = SolveSpec(K_one_minus(2.0), "lambda", target)
        vals = initial_guess_values(grid1200, spec)
        u = RadialField(grid1200, vals,
                        tail=TailModel(-target / (8 * PI2),
                                       vals[-1] + target / (8 * PI2)
                                       * math.log(grid1200.r_max)),
                        match_tol=np.inf)
        lam = total_curvature(u, K_one_minus(2.0))
        assert abs(lam - target) / target < 0.20


def test_threshold_solve_loglog_mode(grid1200):
    t = thresholds_for(2.0)
    rec = solve(SolveSpec(K_one_minus(2.0), "lambda", t.lambda_star),
                grid=grid1200)
    assert rec.converged
    assert rec.tail_mode == "loglog"
    assert rec.gauge == "origin"
    assert rec.u.tail.loglog == -0.5


def test_expect_failure_low_target_truncated(grid1200):
    spec = SolveSpec(K_one_minus(2.0), "lambda", 100.0, expect_failure=True)
    rec = solve(spec, grid=grid1200)
    assert rec.window_check == "outside-low"
    assert rec.tail_mode == "truncated"


def test_window_verdicts():
    t = thresholds_for(2.0)
    prof = K_one_minus(2.0)
    assert check_window(prof, "lambda", 140.0) == "inside"
    assert check_window(prof, "lambda", 100.0) == "outside-low"
    assert check_window(prof, "lambda", 160.0) == "outside-high"
    assert check_window(K_one_minus(5.0), "lambda", 150.0) \
        == "outside-nonexistence-p"
    plus = K_one_plus(2.0)
    assert check_window(plus, "lambda", 200.0) == "inside"
    assert check_window(plus, "lambda", 150.0) == "outside-low"
    assert check_window(plus, "lambda", 240.0) == "outside-high"
    assert check_window(plus, "rho", -3.0) == "inside"
    p6 = K_one_plus(6.0)
    # necessary window is open below the sufficient one for p > 4
    assert check_window(p6, "lambda", 0.5 * (thresholds_for(6.0).lambda_star
                                             + thresholds_for(6.0).quarter_p_sphere)) == "open-gap"


# ---------------------------------------------------------------------------
# solve: positive case and gauge consistency
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def rec_rho0(grid1200):
    rec = solve(SolveSpec(K_one_plus(2.0), "rho", 0.0), grid=grid1200)
    assert rec.converged
    return rec


def test_positive_case_window(rec_rho0):
    t = thresholds_for(2.0)
    assert abs(rec_rho0.u.values[0]) < 1e-9
    assert t.lambda_sphere < rec_rho0.lam < t.two_lambda_star


def test_gauge_consistency(rec140, grid1200):
    """Absolute gauge + constant unknown vs origin gauge + prescribed u(0)."""
    rho = float(rec140.u.values[0])
    spec = SolveSpec(K_one_minus(2.0), "rho", rho)
    rec2 = solve(spec, grid=grid1200, initial=rec140.u)
    assert rec2.converged
    assert np.max(np.abs(rec2.u.values - rec140.u.values)) < 1e-6
    assert abs(rec2.lam - rec140.lam) < 1e-4


# ---------------------------------------------------------------------------
# continuation
# ---------------------------------------------------------------------------

def test_lambda_ramp_origin_value_increases(grid1200):
    specs, params = lambda_schedule(K_one_minus(2.0), [120.0, 140.0, 155.0])
    steps = continuation_path(specs, params, grid=grid1200)
    u0s = [s.record.u.values[0] for s in steps if s.record.converged]
    assert len(u0s) == 3
    assert u0s[0] < u0s[1] < u0s[2]


def test_regularized_lambda_path(grid1200):
    """The Gaussian-regularized family at fixed total curvature: every step
    converges and the concentration radius shrinks with the coefficient."""
    lams = [1.0, 0.3, 0.1, 0.03]
    specs, params = gaussian_lambda_schedule(2.0, lams, 140.0)
    steps = continuation_path(specs, params, grid=grid1200)
    r_stars = []
    for st in steps:
        assert st.record.converged
        r_star, eta = rescaled_blowup_profile(st.record)
        r_stars.append(r_star)
        assert abs(eta.values[0]) < 1e-10  # eta(0) = 0 by construction
    assert all(b < a for a, b in zip(r_stars, r_stars[1:]))


def test_epsilon_path_bounded_by_double_threshold(grid1200):
    t = thresholds_for(2.0)
    specs, params = epsilon_schedule(2.0, [1.0, 0.1, 0.01, 0.0], 0.0)
    steps = continuation_path(specs, params, grid=grid1200)
    for st in steps:
        assert st.record.converged
        assert st.record.lam < t.two_lambda_star


def test_scaling_covariance_exponent(rec140, grid1200):
    """u(rho x) + log rho solves the equation with the r^p coefficient
    scaled by rho^p: validates the mu^(-1/p) rescaling exponent."""
    from qcurv.radial import scale_field
    rho = 2.0
    v = scale_field(rec140.u, rho)
    prof_scaled = K_one_minus(2.0, mu=rho ** 2)
    w = radial_laplacian(v)
    lap2 = radial_laplacian(w).values
    r = grid1200.nodes
    sel = (r > 0.05) & (r < 3.0)
    source = prof_scaled(r) * np.exp(4.0 * v.values)
    scale = np.max(np.abs(source[sel]))
    assert np.max(np.abs(lap2[sel] - source[sel])) / scale < 5e-3
    # and the inverse map brings it back to the unit-coefficient equation
    back = rescale_to_unit_coefficient(v, rho ** 2, 2.0)
    assert np.max(np.abs(back.values[r < 100.0]
                         - rec140.u.values[r < 100.0])) < 1e-6


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

def test_record_roundtrip(rec140, tmp_path):
    path = tmp_path / "rec.json"
    rec140.save(path)
    back = SolutionRecord.load(path)
    assert np.array_equal(back.u.values, rec140.u.values)
    assert back.lam == rec140.lam
    assert back.u.tail == rec140.u.tail
    assert (tmp_path / "rec.csv").exists()


def test_record_json_carries_thresholds(rec140):
    d = rec140.to_json_dict()
    assert "thresholds" in d
    assert abs(d["thresholds"]["lambda_star"] - 12 * PI2) < 1e-9
    assert d["V0"] == rec140.v0 and d["Vp"] == rec140.vp
