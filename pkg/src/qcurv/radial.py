"""Radial grids on [0, r_max], quadrature, fields with logarithmic tails,
and the elementary radial-calculus operations in four dimensions.

Radial functions f(|x|) on R^4 are represented by their values on a graded
grid plus an optional analytic tail f(r) = sigma*log(r) + C (+ beta*loglog r)
valid for r > r_max.  Integrals over R^4 reduce to
``omega3 * int f(s) s^3 ds`` with omega3 = |S^3| = 2 pi^2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

OMEGA_3 = 2.0 * math.pi ** 2  # surface measure of the unit 3-sphere


class InvalidGridError(ValueError):
    """Grid does not satisfy the constructor invariants or is too small."""


class DivergentTailError(ValueError):
    """A requested tail integral does not converge for the given slope."""


class TailRequiredError(ValueError):
    """Operation needs values beyond r_max but the field declares no tail."""


# ---------------------------------------------------------------------------
# tail model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailModel:
    """Analytic continuation of a radial field beyond the grid.

    u(r) = slope*log(r) + offset + loglog*log(log(r)) for r > r_max.
    The loglog coefficient is zero except for borderline-integrability
    solves, where it takes the value -1/2.
    """

    slope: float
    offset: float
    loglog: float = 0.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = self.slope * np.log(r) + self.offset
        if self.loglog != 0.0:
            out = out + self.loglog * np.log(np.log(r))
        return out

    def log_amplitude(self) -> float:
        """log of e^{4C} in the source model e^{4u} = e^{4C} r^{4 slope}
        (log r)^{4 loglog}."""
        return 4.0 * self.offset

    def source_moment(self, q: float, r0: float, extra_log: int = 0,
                      gauss_eps: float = 0.0, log_amp: float = 0.0) -> float:
        """e^{log_amp} * int_{r0}^inf s^q (log s)^{4*loglog + extra_log}
        e^{-eps s^2} ds.

        Closed form for the plain power tail; adaptive quadrature (in
        t = log s) when a loglog factor or Gaussian cutoff is present.  The
        amplitude is folded in logarithmically so extreme slopes never
        overflow on the way to a finite (often negligible) product.
        """
        if r0 <= 1.0:
            raise ValueError("tail moments require r0 > 1")
        if gauss_eps < 0.0:
            raise ValueError("gauss_eps must be >= 0")
        if gauss_eps > 0.0 and gauss_eps * r0 * r0 > 745.0:
            return 0.0
        lpow = 4.0 * self.loglog + extra_log
        if gauss_eps == 0.0:
            if q >= -1.0 - 1e-12:
                near_line = abs(q + 1.0) <= 1e-12
                if not (near_line and lpow < -1.0 - 1e-9):
                    raise DivergentTailError(
                        f"tail integral s^{q} (log s)^{lpow} diverges")
            if self.loglog == 0.0 and extra_log in (0, 1):
                qq = q + 1.0
                lead = log_amp + qq * math.log(r0)
                if lead < -700.0:
                    return 0.0
                if lead > 700.0:
                    return math.inf
                if extra_log == 0:
                    return -math.exp(lead) / qq
                return math.exp(lead) * (1.0 / qq ** 2 - math.log(r0) / qq)
        t0 = math.log(r0)

        def integrand(t):
            val = log_amp + (q + 1.0) * t + lpow * math.log(t)
            if gauss_eps > 0.0:
                val -= gauss_eps * math.exp(2.0 * t)
            return math.exp(val) if -745.0 < val < 700.0 else (
                0.0 if val <= -745.0 else math.inf)

        val, err = quad(integrand, t0, np.inf, epsabs=1e-14, epsrel=1e-12,
                        limit=200)
        return val


# ---------------------------------------------------------------------------
# grid and quadrature
# ---------------------------------------------------------------------------

def _interval_rule(nodes: np.ndarray, npts: int = 6):
    """Per-interval interpolatory weights on a nonuniform grid.

    For each interval [x_j, x_{j+1}] an npts-node stencil centered on the
    interval (clipped at the ends) is used; the integral of the degree
    npts-1 interpolant over the interval is a linear functional of the
    stencil values.  Exact for polynomials of degree <= npts - 1.
    """
    n = nodes.size
    npts = min(npts, n)
    m = n - 1
    half = (npts - 2) // 2
    idx = np.empty((m, npts), dtype=np.intp)
    for j in range(m):
        lo = min(max(j - half, 0), n - npts)
        idx[j] = np.arange(lo, lo + npts)
    xs = nodes[idx]                                   # (m, npts)
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    scale = 0.5 * (xs[:, -1] - xs[:, 0])
    xi = (xs - mid[:, None]) / scale[:, None]         # (m, npts)
    powers = np.arange(npts)
    vand = xi[:, None, :] ** powers[None, :, None]    # (m, npts, npts)
    a = (nodes[:-1] - mid) / scale
    b = (nodes[1:] - mid) / scale
    qp = powers + 1
    mom = scale[:, None] * (b[:, None] ** qp - a[:, None] ** qp) / qp
    wts = np.linalg.solve(vand, mom[:, :, None])[:, :, 0]
    return idx, wts


@dataclass(frozen=True)
class QuadratureRule:
    """Node weights for integrals int_0^{r_max} f(s) ds on a radial grid.

    ``weights`` are plain ds-weights; volume factors s^3 and omega3 are
    applied by the caller.  Exact for polynomials of degree <= order.
    """

    weights: np.ndarray
    interval_idx: np.ndarray
    interval_wts: np.ndarray
    sphere_area: float = OMEGA_3
    order: int = 5

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))

    def cumulative(self, values: np.ndarray) -> np.ndarray:
        """Cumulative integral at the nodes, starting from 0 at node 0."""
        values = np.asarray(values, dtype=float)
        per = np.einsum("jk,jk->j", self.interval_wts, values[self.interval_idx])
        out = np.empty(values.size)
        out[0] = 0.0
        np.cumsum(per, out=out[1:])
        return out


class RadialGrid:
    """Graded radial mesh: origin node, then geometric spacing to r_max.

    The single interval [0, r_min] is the linear origin patch; beyond it the
    nodes are uniform in log r, which matches solutions that vary on a
    logarithmic scale in the far field.
    """

    def __init__(self, nodes: np.ndarray, panel_kind: str = "graded-log"):
        nodes = np.ascontiguousarray(np.asarray(nodes, dtype=float))
        if nodes.size < 4:
            raise InvalidGridError("need at least 4 nodes")
        if nodes[0] != 0.0:
            raise InvalidGridError("first node must be r = 0")
        if not np.all(np.diff(nodes) > 0.0):
            raise InvalidGridError("nodes must be strictly increasing")
        r_max = float(nodes[-1])
        inner = r_max * 1e-6
        pos = nodes[nodes > 0.0]
        lo = math.floor(math.log10(inner))
        hi = math.ceil(math.log10(r_max))
        for d in range(lo, hi):
            count = np.count_nonzero((pos >= 10.0 ** d) & (pos <= 10.0 ** (d + 1)))
            if count < 2:
                raise InvalidGridError(
                    "fewer than 2 nodes per decade between r_max*1e-6 and r_max")
        nodes.flags.writeable = False
        self.nodes = nodes
        self.r_max = r_max
        self.panel_kind = panel_kind
        self._rule: QuadratureRule | None = None

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def rule(self) -> QuadratureRule:
        if self._rule is None:
            idx, wts = _interval_rule(self.nodes)
            w = np.zeros(self.n)
            np.add.at(w, idx, wts)
            w.flags.writeable = False
            idx.flags.writeable = False
            wts.flags.writeable = False
            self._rule = QuadratureRule(weights=w, interval_idx=idx,
                                        interval_wts=wts)
        return self._rule

    def fingerprint(self) -> tuple:
        return (self.n, float(self.nodes[1]), self.r_max,
                hash(self.nodes.tobytes()))

    def __repr__(self):
        return (f"RadialGrid(n={self.n}, r_min={self.nodes[1]:.3g}, "
                f"r_max={self.r_max:.3g}, kind={self.panel_kind!r})")


def make_grid(r_max: float = 1e3, n_nodes: int = 1200,
              r_min: float = 1e-5) -> RadialGrid:
    """Default grid: origin + geometric nodes from r_min to r_max."""
    if not (0.0 < r_min < r_max):
        raise InvalidGridError("need 0 < r_min < r_max")
    geo = np.geomspace(r_min, r_max, n_nodes - 1)
    geo[-1] = r_max
    return RadialGrid(np.concatenate(([0.0], geo)))


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

class RadialField:
    """Values of a radial function on a grid plus an optional analytic tail."""

    def __init__(self, grid: RadialGrid, values: np.ndarray,
                 tail: TailModel | None = None, match_tol: float = 1e-6):
        values = np.ascontiguousarray(np.asarray(values, dtype=float))
        if values.shape != (grid.n,):
            raise ValueError("values must match the grid size")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if tail is not None:
            gap = abs(values[-1] - float(tail(grid.r_max)))
            if gap > match_tol:
                raise ValueError(
                    f"tail does not match field at r_max (gap {gap:.3e} "
                    f"> {match_tol:.1e})")
        values.flags.writeable = False
        self.grid = grid
        self.values = values
        self.tail = tail
        self._spline: CubicSpline | None = None
        self._origin_coef: np.ndarray | None = None

    # -- evaluation ---------------------------------------------------------

    def _build_interp(self):
        r = self.grid.nodes
        self._spline = CubicSpline(np.log(r[1:]), self.values[1:])
        # even quartic u0 + b r^2 + c r^4 through the first two positive nodes
        r1, r2 = r[1], r[2]
        a = np.array([[r1 ** 2, r1 ** 4], [r2 ** 2, r2 ** 4]])
        rhs = self.values[1:3] - self.values[0]
        self._origin_coef = np.linalg.solve(a, rhs)

    def interp(self, r):
        """Evaluate the field at arbitrary radii (tail used beyond r_max)."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        if np.any(r < 0.0):
            raise ValueError("radii must be nonnegative")
        if self._spline is None:
            self._build_interp()
        out = np.empty(r.shape)
        r1 = self.grid.nodes[1]
        near = r < r1
        far = r > self.grid.r_max
        mid = ~near & ~far
        if np.any(near):
            b, c = self._origin_coef
            rn = r[near]
            out[near] = self.values[0] + b * rn ** 2 + c * rn ** 4
        if np.any(mid):
            out[mid] = self._spline(np.log(r[mid]))
        if np.any(far):
            if self.tail is None:
                raise TailRequiredError(
                    "field has no tail but values beyond r_max were requested")
            out[far] = self.tail(r[far])
        return float(out[0]) if scalar else out

    # -- serialization ------------------------------------------------------

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("r,value\n")
            for r, v in zip(self.grid.nodes, self.values):
                fh.write(f"{float(r)!r},{float(v)!r}\n")

    @classmethod
    def from_csv(cls, path, tail: TailModel | None = None):
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        return cls(RadialGrid(data[:, 0]), data[:, 1], tail=tail)

    def to_json_dict(self) -> dict:
        d = {"r": [repr(float(x)) for x in self.grid.nodes],
             "value": [repr(float(x)) for x in self.values]}
        if self.tail is not None:
            d["tail"] = {"slope": repr(float(self.tail.slope)),
                         "offset": repr(float(self.tail.offset)),
                         "loglog": repr(float(self.tail.loglog))}
        return d

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, d: dict):
        nodes = np.array([float(x) for x in d["r"]])
        vals = np.array([float(x) for x in d["value"]])
        tail = None
        if "tail" in d:
            t = d["tail"]
            tail = TailModel(float(t["slope"]), float(t["offset"]),
                             float(t.get("loglog", 0.0)))
        return cls(RadialGrid(nodes), vals, tail=tail)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def constant_field(grid: RadialGrid, value: float) -> RadialField:
    return RadialField(grid, np.full(grid.n, float(value)))


# ---------------------------------------------------------------------------
# radial calculus
# ---------------------------------------------------------------------------

def _laplacian_at_origin_fit(grid: RadialGrid, values: np.ndarray,
                             window: float = 0.005) -> float:
    """Delta f(0) = 8b from an even fit f = f0 + b r^2 + ... + e r^8.

    The fit window adapts to the field's own variation so that the
    differenced values sit well above roundoff while the even Taylor
    series still truncates cleanly.
    """
    r = grid.nodes
    dv = values - values[0]
    big = np.nonzero(np.abs(dv[1:]) > window)[0]
    hi = (big[0] + 1) if big.size else grid.n - 1
    hi = max(hi, 9)  # at least 8 positive nodes
    hi = min(hi, grid.n - 1)
    x = (r[1:hi + 1] / r[hi]) ** 2
    a = np.column_stack([x, x ** 2, x ** 3, x ** 4])
    coef, *_ = np.linalg.lstsq(a, dv[1:hi + 1], rcond=None)
    return 8.0 * coef[0] / r[hi] ** 2


def radial_laplacian(f: RadialField) -> RadialField:
    """Laplacian of a radial function on R^4: w'' + (3/r) w'.

    Centered 3-point finite differences on the nonuniform grid, one-sided
    closure at r_max, and the even-symmetry condition f'(0) = 0 at the
    origin (Delta f(0) = 4 f''(0), extracted from an even polynomial fit).
    """
    grid = f.grid
    if grid.n < 4:
        raise InvalidGridError("laplacian needs at least 4 nodes")
    r = grid.nodes
    v = f.values
    out = np.empty(grid.n)

    h1 = r[1:-1] - r[:-2]
    h2 = r[2:] - r[1:-1]
    dplus = v[2:] - v[1:-1]
    dminus = v[1:-1] - v[:-2]
    denom = h1 * h2 * (h1 + h2)
    d2 = 2.0 * (h1 * dplus - h2 * dminus) / denom
    d1 = (h1 ** 2 * dplus + h2 ** 2 * dminus) / denom
    out[1:-1] = d2 + 3.0 * d1 / r[1:-1]

    out[0] = _laplacian_at_origin_fit(grid, v)

    # one-sided second-order closure at r_max
    g1, g2 = r[-2] - r[-3], r[-1] - r[-2]
    e1, e2 = v[-2] - v[-3], v[-1] - v[-2]
    d2e = 2.0 * (g1 * e2 - g2 * e1) / (g1 * g2 * (g1 + g2))
    d1e = e2 / g2 + 0.5 * d2e * g2
    out[-1] = d2e + 3.0 * d1e / r[-1]
    return RadialField(grid, out)


def reconstruct_from_laplacian(w: RadialField, f0: float) -> RadialField:
    """Invert the radial Laplacian given the origin value.

    f(R) - f(r) = int_r^R (1/(omega3 t^3)) int_{B_t} w dx dt, with
    int_{B_t} w dx = omega3 int_0^t w(s) s^3 ds.
    """
    grid = w.grid
    rule = grid.rule
    r = grid.nodes
    inner = rule.cumulative(w.values * r ** 3)        # int_0^t w s^3 ds
    integrand = np.zeros(grid.n)
    integrand[1:] = inner[1:] / r[1:] ** 3
    vals = f0 + rule.cumulative(integrand)
    return RadialField(grid, vals)


def scale_field(u: RadialField, rho: float) -> RadialField:
    """Conformal rescaling u_rho(x) = u(rho x) + log rho on the same grid.

    If u solves Delta^2 u = K(x) e^{4u}, the output solves the equation with
    curvature K(rho x).  Radii beyond r_max are evaluated from the tail.
    """
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    grid = u.grid
    vals = u.interp(rho * grid.nodes) + math.log(rho)
    tail = None
    if u.tail is not None:
        t = u.tail
        offset = t.offset + (t.slope + 1.0) * math.log(rho)
        if t.loglog != 0.0:
            # match the (non-covariant) loglog term at r_max
            offset += t.loglog * (math.log(math.log(rho * grid.r_max))
                                  - math.log(math.log(grid.r_max)))
        tail = TailModel(t.slope, offset, t.loglog)
        gap = abs(vals[-1] - tail(grid.r_max))
        tol = max(1e-6, 10.0 * gap)
    else:
        tol = 1e-6
    return RadialField(grid, vals, tail=tail, match_tol=tol)
