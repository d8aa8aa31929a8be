"""Independent verification path: integrate the radial ODE outward.

Writing w = Delta u, the fourth-order equation Delta^2 u = K(r) e^{4u}
becomes the first-order system

    u' = p,   p' = w - 3 p / r,   w' = q,   q' = K e^{4u} - 3 q / r,

started near the origin from the even series
    u ~ a + (b/8) r^2,   w ~ b + (K(0) e^{4a} / 8) r^2,
and integrated adaptively.  Terminal behavior is classified into the
dichotomy the asymptotic theory allows: w -> 0^- with r^2 w bounded
(normal decay), w -> c0 < 0 (quadratic collapse, u ~ -|c0| r^2 / 4),
or e^{4u} overflow at finite radius (blow-up).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .curvature import CurvatureProfile
from .radial import OMEGA_3

TERMINAL_CLASSES = ("normal_decay", "quadratic_collapse", "blow_up",
                    "inconclusive")

# classification thresholds, validated on the closed-form and collapse cases
_COLLAPSE_W = -1e-2
_DECAY_R2W_BOUND = 1e3


@dataclass
class ShootState:
    """Trajectory of one outward integration and its terminal class."""

    a: float                       # u(0)
    b: float                       # Delta u(0)
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    terminal_class: str
    r_exit: float
    diagnostics: dict = field(default_factory=dict)

    def sample(self, radii):
        """Dense-output samples of u at the given radii (within r_exit)."""
        return self._dense(radii)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("r,u,du,w,dw\n")
            for row in zip(self.r, self.u, self.du, self.w, self.dw):
                fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _series_start(a: float, b: float, k0: float, r1: float):
    e4a = math.exp(min(4.0 * a, 700.0))
    c = k0 * e4a
    u = a + b * r1 ** 2 / 8.0 + c * r1 ** 4 / 192.0
    du = b * r1 / 4.0 + c * r1 ** 3 / 48.0
    w = b + c * r1 ** 2 / 8.0
    dw = c * r1 / 4.0
    return np.array([u, du, w, dw])


def shoot(a: float, b: float, profile: CurvatureProfile,
          r_end: float = 1e3, rtol: float = 1e-11,
          atol: float = 1e-12) -> ShootState:
    """Integrate outward from (u(0), Delta u(0)) = (a, b) and classify."""
    k0 = float(profile(0.0))
    # start radius: 1e-4 of the curvature length scale set by (a, b)
    scale = 1.0
    if b != 0.0:
        scale = min(scale, math.sqrt(8.0 / abs(b)))
    src = abs(k0) * math.exp(min(4.0 * a, 700.0))
    if src > 0.0:
        scale = min(scale, (192.0 / src) ** 0.25)
    r1 = max(1e-4 * scale, 1e-12)

    def rhs(r, y):
        u, du, w, dw = y
        e4u = math.exp(min(4.0 * u, 700.0))
        return (du, w - 3.0 * du / r, dw, float(profile(r)) * e4u
                - 3.0 * dw / r)

    # fire well before e^{4u} gets stiff enough to stall the integrator
    u_cap = max(a, 0.0) + 50.0

    def overflow(r, y):
        return y[0] - u_cap
    overflow.terminal = True
    overflow.direction = 1.0

    y0 = _series_start(a, b, k0, r1)
    sol = solve_ivp(rhs, (r1, r_end), y0, method="DOP853", rtol=rtol,
                    atol=atol, events=overflow, dense_output=True)
    r = np.concatenate(([0.0], sol.t))
    traj_u = np.concatenate(([a], sol.y[0]))
    traj_du = np.concatenate(([0.0], sol.y[1]))
    traj_w = np.concatenate(([b], sol.y[2]))
    traj_dw = np.concatenate(([0.0], sol.y[3]))
    r_exit = float(sol.t[-1])

    diagnostics = {"n_steps": sol.t.size, "status": int(sol.status)}
    rising_wall = (traj_u[-1] > a + 10.0 and traj_du[-1] > 0.0
                   and traj_w[-1] > 0.0)
    if sol.status == 1 or (sol.status < 0 and rising_wall):
        # the event fired, or step-size underflow on a steeply rising
        # trajectory: e^{4u} has left the representable range
        cls = "blow_up"
    elif sol.status < 0 or r_exit < 0.9 * r_end:
        cls = "inconclusive"
        diagnostics["message"] = sol.message
    else:
        last = sol.t >= r_exit / 10.0
        w_last = sol.y[2][last]
        r_last = sol.t[last]
        r2w = r_last ** 2 * w_last
        diagnostics["w_end"] = float(w_last[-1])
        diagnostics["max_r2w"] = float(np.max(np.abs(r2w)))
        if np.all(w_last < _COLLAPSE_W):
            cls = "quadratic_collapse"
        elif (np.max(np.abs(r2w)) < _DECAY_R2W_BOUND
              and w_last[-1] > _COLLAPSE_W
              and w_last[-1] >= w_last[0] - 1e-9):
            cls = "normal_decay"
        else:
            cls = "inconclusive"

    state = ShootState(a=a, b=b, r=r, u=traj_u, du=traj_du, w=traj_w,
                       dw=traj_dw, terminal_class=cls, r_exit=r_exit,
                       diagnostics=diagnostics)

    def dense(radii):
        radii = np.asarray(radii, dtype=float)
        out = np.empty(radii.shape)
        inside = radii <= r_exit
        small = radii < r1
        mid = inside & ~small
        if np.any(small):
            rr = radii[small]
            e4a = math.exp(min(4.0 * a, 700.0))
            out[small] = a + b * rr ** 2 / 8.0 + k0 * e4a * rr ** 4 / 192.0
        if np.any(mid):
            out[mid] = sol.sol(radii[mid])[0]
        out[~inside] = np.nan
        return out

    state._dense = dense
    return state


def finite_total_curvature_probe(a: float, b: float,
                                 profile: CurvatureProfile,
                                 r_end: float = 1e3,
                                 n_samples: int = 200) -> tuple[str, np.ndarray, np.ndarray, bool]:
    """Partial integrals Lambda_part(r) = int_{B_r} (1 + s^p) e^{4u} dx
    along a trajectory; they must look convergent (Cauchy) for every start
    that does not blow up in finite radius.

    Returns (terminal_class, radii, partial integrals, cauchy_ok).
    """
    state = shoot(a, b, profile, r_end=r_end)
    r_hi = min(state.r_exit, r_end)
    radii = np.geomspace(max(1e-3, state.r[1] if state.r.size > 1 else 1e-3),
                         r_hi, n_samples)
    u_vals = state.sample(radii)
    dens = (1.0 + radii ** profile.p) * np.exp(
        np.minimum(4.0 * u_vals, 700.0)) * radii ** 3
    partial = OMEGA_3 * np.concatenate(
        ([0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(radii))))
    cauchy_ok = False
    if state.terminal_class != "blow_up" and radii.size > 10:
        # increments over the last decade must sit below tolerance
        decade = radii >= r_hi / 10.0
        inc = partial[-1] - partial[np.argmax(decade)]
        cauchy_ok = bool(inc < 1e-6 * max(1.0, partial[-1]) + 1e-6)
    return state.terminal_class, radii, partial, cauchy_ok
