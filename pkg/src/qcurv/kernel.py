"""Angular average of the 4D bilaplacian log kernel and its dense operator.

For |x| = r the average of log(1/|x-y|) over the sphere |y| = s is

    Ghat(r, s) = -log(max(r, s)) - (1/4) (min(r, s) / max(r, s))^2,

derived by expanding -log(1 - 2tc + t^2)/2 in Chebyshev polynomials and
averaging against the S^3 measure (2/pi) sin^2(theta) dtheta, which kills
every harmonic except n = 0 and n = 2.  The closed form is gated behind the
brute-force angular-quadrature oracle below.

Two gauges are used:
  absolute          Ghat(r, s)            (free additive constant)
  origin            Ghat(r, s) + log s    (vanishes identically at r = 0)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .radial import RadialGrid, QuadratureRule

GAUGES = ("absolute", "origin")


class OracleError(RuntimeError):
    """Angular quadrature failed to reach the requested accuracy."""


def _check_gauge(gauge: str):
    if gauge not in GAUGES:
        raise ValueError(f"gauge must be one of {GAUGES}, got {gauge!r}")


def kernel_closed_form(r, s, gauge: str = "absolute"):
    """Averaged kernel Ghat (or Ghat + log s for the origin gauge).

    Vectorized in (r, s); requires r >= 0 and s > 0.
    """
    _check_gauge(gauge)
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(r < 0.0):
        raise ValueError("r must be nonnegative")
    if np.any(s <= 0.0):
        raise ValueError("s must be positive (the s=0 sphere is degenerate)")
    hi = np.maximum(r, s)
    lo = np.minimum(r, s)
    g = -np.log(hi) - 0.25 * (lo / hi) ** 2
    if gauge == "origin":
        g = g + np.log(s)
    return g if g.ndim else float(g)


def kernel_oracle(r: float, s: float, gauge: str = "absolute",
                  tol: float = 1e-10) -> float:
    """Brute-force angular average by adaptive quadrature in theta.

    (2/pi) int_0^pi sin^2(theta) log(1/sqrt(r^2+s^2-2rs cos theta)) dtheta.
    The integrable log singularity at theta=0 when r=s is handled by the
    adaptive subdivision (Gauss-Kronrod nodes never touch the endpoint).
    """
    _check_gauge(gauge)
    if r < 0.0 or s <= 0.0:
        raise ValueError("need r >= 0 and s > 0")

    def integrand(theta):
        d2 = r * r + s * s - 2.0 * r * s * np.cos(theta)
        return -(1.0 / np.pi) * np.sin(theta) ** 2 * np.log(d2)

    val, err = quad(integrand, 0.0, np.pi, epsabs=1e-13, epsrel=1e-13,
                    limit=200)
    if err > tol:
        raise OracleError(f"angular quadrature error estimate {err:.2e} "
                          f"exceeds {tol:.1e} at (r={r}, s={s})")
    if gauge == "origin":
        val += np.log(s)
    return float(val)


@dataclass(frozen=True)
class RadialKernel:
    """Averaged kernel in a fixed gauge; callable on radius pairs."""

    gauge: str = "absolute"

    def __call__(self, r, s):
        return kernel_closed_form(r, s, self.gauge)

    def oracle(self, r, s, tol=1e-10):
        return kernel_oracle(r, s, self.gauge, tol)


def assemble_operator(grid: RadialGrid, rule: QuadratureRule | None = None,
                      gauge: str = "absolute") -> np.ndarray:
    """Dense matrix A with (A g)_i ~ (1/8pi^2) int log-kernel * g over R^4.

    A[i, j] = (1/4) Ghat(r_i, s_j) s_j^3 w_j, so that A @ g approximates the
    grid part of the potential of the radial source g(s).  The s = 0 column
    carries zero measure and is zeroed explicitly.  The kernel is C^2 across
    the diagonal kink r = s (the second radial derivatives match), so the
    panel rule needs no special treatment beyond node alignment.
    """
    _check_gauge(gauge)
    rule = rule if rule is not None else grid.rule
    r = grid.nodes
    s = r[1:]
    ghat = kernel_closed_form(r[:, None], s[None, :], gauge="absolute")
    if gauge == "origin":
        ghat = ghat + np.log(s)[None, :]
    a = np.zeros((grid.n, grid.n))
    a[:, 1:] = 0.25 * ghat * (s ** 3 * rule.weights[1:])[None, :]
    if gauge == "origin":
        a[0, :] = 0.0
    return a


# ---------------------------------------------------------------------------
# binary dump of an assembled operator (debugging aid)
# ---------------------------------------------------------------------------

_MAGIC = b"QCK1"


def dump_operator(matrix: np.ndarray, gauge: str, path):
    """Row-major float64 dump with a small header (magic, N, gauge)."""
    _check_gauge(gauge)
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise ValueError("operator matrix must be square")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", n, GAUGES.index(gauge)))
        fh.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def load_operator(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError("not an operator dump")
        n, gauge_idx = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        raise ValueError("truncated operator dump")
    return data.reshape(n, n).copy(), GAUGES[gauge_idx]
