"""Curvature profiles K(|x|), threshold constants, and volume functionals.

The profile families are K = 1 - mu r^p, K = 1 + r^p, K = const, and the
Gaussian-regularized (lambda - r^p) e^{-eps r^2}.  The total curvature

    Lambda = omega3 int_0^inf K(s) e^{4u(s)} s^3 ds

is the bifurcation parameter of the whole problem; the grid part is handled
by quadrature and the part beyond r_max analytically from the tail model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .radial import (OMEGA_3, DivergentTailError, RadialField, TailModel)

LAMBDA_SPHERE = 16.0 * math.pi ** 2  # total curvature of the round 4-sphere

KINDS = ("one_minus_rp", "one_plus_rp", "constant", "regularized_lambda")


@dataclass(frozen=True)
class CurvatureProfile:
    """One member of the curvature families, K(r) evaluated radially.

    kind            one of KINDS
    p               power exponent (> 0 where the r^p term is present)
    k0              value for the constant kind
    lam             scale parameter of the regularized kind
    eps             Gaussian regularizer exponent, factor e^{-eps r^2}
    mu              coefficient of the r^p term for one_minus_rp (1 - mu r^p)
    """

    kind: str
    p: float = 2.0
    k0: float = 6.0
    lam: float = 1.0
    eps: float = 0.0
    mu: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind != "constant" and self.p <= 0.0:
            raise ValueError("p must be positive")
        if self.eps < 0.0:
            raise ValueError("eps must be nonnegative")
        if self.kind == "regularized_lambda" and self.lam <= 0.0:
            raise ValueError("lam must be positive")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "one_minus_rp":
            k = 1.0 - self.mu * r ** self.p
        elif self.kind == "one_plus_rp":
            k = 1.0 + r ** self.p
        elif self.kind == "constant":
            k = np.full_like(r, self.k0)
        else:
            k = self.lam - r ** self.p
        if self.eps > 0.0:
            k = k * np.exp(-self.eps * r ** 2)
        return k if k.ndim else float(k)

    def components(self):
        """K as a list of (coefficient, power) monomials, Gaussian aside."""
        if self.kind == "one_minus_rp":
            return [(1.0, 0.0), (-self.mu, self.p)]
        if self.kind == "one_plus_rp":
            return [(1.0, 0.0), (1.0, self.p)]
        if self.kind == "constant":
            return [(self.k0, 0.0)]
        return [(self.lam, 0.0), (-1.0, self.p)]

    @property
    def sign(self) -> int:
        """Sign of the r^p term in the Pohozaev identity (+1, -1, or 0)."""
        if self.kind == "one_minus_rp" or self.kind == "regularized_lambda":
            return -1
        if self.kind == "one_plus_rp":
            return +1
        return 0


def K_one_minus(p: float, mu: float = 1.0, eps: float = 0.0) -> CurvatureProfile:
    return CurvatureProfile("one_minus_rp", p=p, mu=mu, eps=eps)


def K_one_plus(p: float, eps: float = 0.0) -> CurvatureProfile:
    return CurvatureProfile("one_plus_rp", p=p, eps=eps)


def K_constant(k0: float) -> CurvatureProfile:
    return CurvatureProfile("constant", k0=k0)


def K_regularized(lam: float, p: float, eps: float = 1.0) -> CurvatureProfile:
    return CurvatureProfile("regularized_lambda", lam=lam, p=p, eps=eps)


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Thresholds:
    """The curvature thresholds attached to a power p."""

    p: float
    lambda_sphere: float
    lambda_star: float        # (4+p) * 2 pi^2, integrability threshold
    two_lambda_star: float
    quarter_p_sphere: float   # (p/4) * lambda_sphere


def lambda_star(p: float) -> float:
    return (4.0 + p) * 2.0 * math.pi ** 2


def thresholds_for(p: float) -> Thresholds:
    if p <= 0.0:
        raise ValueError("p must be positive")
    ls = lambda_star(p)
    return Thresholds(p=p, lambda_sphere=LAMBDA_SPHERE, lambda_star=ls,
                      two_lambda_star=2.0 * ls,
                      quarter_p_sphere=0.25 * p * LAMBDA_SPHERE)


# ---------------------------------------------------------------------------
# tail integrals of the source K e^{4u}
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SourceTail:
    """Integrals of K(s) e^{4u(s)} over (r_max, inf), per unit e^{4C}.

    mass      int K e4u s^3 ds          (omega3 * mass -> Lambda tail)
    log_mass  int K e4u s^3 log s ds    (absolute-gauge potential constant)
    inv2_mass int K e4u s ds            (r^2 potential term, Delta u(0))
    v0, vp    split volume tails, int e4u s^3 ds and int s^p e4u s^3 ds
    """

    mass: float
    log_mass: float
    inv2_mass: float
    v0: float
    vp: float


def tail_source_integrals(profile: CurvatureProfile, tail: TailModel,
                          r0: float, need_log: bool = False,
                          log_amp: float = 0.0) -> SourceTail:
    """Closed-form / quadrature moments of the source tail model, times
    e^{log_amp}.

    Raises DivergentTailError when the slope is not integrable against the
    profile's strongest power (4|slope| <= 4 + p without a loglog or
    Gaussian rescue).
    """
    eps = profile.eps
    mass = 0.0
    log_mass = 0.0
    inv2 = 0.0
    for coeff, power in profile.components():
        q = 4.0 * tail.slope + 3.0 + power
        mass += coeff * tail.source_moment(q, r0, gauss_eps=eps,
                                           log_amp=log_amp)
        if need_log:
            log_mass += coeff * tail.source_moment(q, r0, extra_log=1,
                                                   gauss_eps=eps,
                                                   log_amp=log_amp)
        inv2 += coeff * tail.source_moment(q - 2.0, r0, gauss_eps=eps,
                                           log_amp=log_amp)
    v0 = tail.source_moment(4.0 * tail.slope + 3.0, r0, gauss_eps=eps,
                            log_amp=log_amp)
    vp = tail.source_moment(4.0 * tail.slope + 3.0 + profile.p, r0,
                            gauss_eps=eps, log_amp=log_amp) \
        if profile.kind != "constant" else 0.0
    return SourceTail(mass=mass, log_mass=log_mass, inv2_mass=inv2,
                      v0=v0, vp=vp)


# ---------------------------------------------------------------------------
# volume functionals
# ---------------------------------------------------------------------------

def _grid_moment(u: RadialField, weight_values: np.ndarray) -> float:
    """omega3 * int weight(s) e^{4u(s)} s^3 ds over the grid."""
    grid = u.grid
    e4u = np.exp(4.0 * u.values)
    return OMEGA_3 * grid.rule.integrate(weight_values * e4u * grid.nodes ** 3)


def total_curvature(u: RadialField, profile: CurvatureProfile) -> float:
    """Lambda = omega3 int K e^{4u} s^3 ds, tail handled analytically.

    A field without a tail integrates over [0, r_max] only; with a tail the
    slope must be integrable against the profile or DivergentTailError is
    raised.
    """
    val = _grid_moment(u, profile(u.grid.nodes))
    if u.tail is not None:
        st = tail_source_integrals(profile, u.tail, u.grid.r_max,
                                   log_amp=u.tail.log_amplitude())
        val += OMEGA_3 * st.mass
    return val


def split_volumes(u: RadialField, p: float) -> tuple[float, float]:
    """(V0, Vp) = (int e^{4u} dx, int |x|^p e^{4u} dx) over R^4."""
    nodes = u.grid.nodes
    v0 = _grid_moment(u, np.ones_like(nodes))
    vp = _grid_moment(u, nodes ** p)
    if u.tail is not None:
        la = u.tail.log_amplitude()
        q0 = 4.0 * u.tail.slope + 3.0
        v0 += OMEGA_3 * u.tail.source_moment(q0, u.grid.r_max, log_amp=la)
        vp += OMEGA_3 * u.tail.source_moment(q0 + p, u.grid.r_max, log_amp=la)
    return v0, vp


def mass_within(u: RadialField, profile: CurvatureProfile,
                radius: float) -> float:
    """int_{B_radius} K e^{4u} dx by cumulative quadrature on the grid."""
    grid = u.grid
    if radius > grid.r_max:
        raise ValueError("radius beyond the grid")
    nodes = grid.nodes
    dens = profile(nodes) * np.exp(4.0 * u.values) * nodes ** 3
    cum = grid.rule.cumulative(dens)
    val = float(np.interp(radius, nodes, cum))
    return OMEGA_3 * val
