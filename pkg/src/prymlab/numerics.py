"""Numeric kernels shared by every other module.

Contents: adaptive Gauss-Kronrod quadrature on [0, 1], Fincke-Pohst style
enumeration of lattice points in an ellipsoid, nearest-integer reduction
modulo a complex lattice, and the 5-point Wirtinger Laplacian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditioned, NonConvergence

# Kronrod 15 / Gauss 7 nodes and weights on [-1, 1].
_XK = np.array([
    -0.991455371120812639206854697526329,
    -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926,
    -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013,
    -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144845693013,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_WG = np.zeros(15)
_WG[1::2] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
]


@dataclass(frozen=True)
class Tolerances:
    """Configurable accuracy targets.

    ``fd_step`` is the finite-difference step in the z-plane; its square must
    stay well above machine epsilon so second differences keep ~6 digits.
    """

    quad_tol: float = 1e-12
    theta_tol: float = 1e-12
    lattice_tol: float = 1e-6
    fd_step: float = 1e-3

    def __post_init__(self):
        for name in ("quad_tol", "theta_tol", "lattice_tol", "fd_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.fd_step ** 2 < 10 * np.finfo(float).eps:
            raise ValueError("fd_step too small for second differences")


@dataclass
class LatticeBasis:
    """A full-rank lattice in C^n given by 2n complex generators (columns)."""

    generators: np.ndarray
    max_condition: float = 1e10
    real_matrix: np.ndarray = field(init=False, repr=False)
    condition: float = field(init=False)

    def __post_init__(self):
        gens = np.asarray(self.generators, dtype=complex)
        n = gens.shape[0]
        if gens.shape != (n, 2 * n):
            raise ValueError("expected an n x 2n generator matrix")
        self.generators = gens
        self.real_matrix = np.vstack([gens.real, gens.imag])
        self.condition = float(np.linalg.cond(self.real_matrix))
        if not np.isfinite(self.condition) or self.condition > self.max_condition:
            raise IllConditioned(f"lattice condition number {self.condition:.3e}")

    @classmethod
    def from_periods(cls, period_matrix):
        """Lattice Z(2*pi*i*E, B) for a square matrix B."""
        period_matrix = np.atleast_2d(np.asarray(period_matrix, dtype=complex))
        n = period_matrix.shape[0]
        return cls(np.hstack([2j * np.pi * np.eye(n), period_matrix]))

    @property
    def dimension(self):
        return self.generators.shape[0]

    def coordinates(self, v):
        """Real coordinates of ``v`` in the generator basis."""
        v = np.asarray(v, dtype=complex)
        rhs = np.concatenate([v.real, v.imag], axis=0)
        return np.linalg.solve(self.real_matrix, rhs)


def integrate_segment(f, tol=1e-12, a=0.0, b=1.0, max_intervals=4000):
    """Adaptive Gauss-Kronrod (7/15) integral of ``f`` over [a, b].

    ``f`` takes a 1-d array of parameters and returns an array whose last
    axis matches it (scalar or vector integrands).  Intervals are bisected
    worst-first; ties resolve by position so reruns are bit-identical.
    """
    def rule(lo, hi):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        vals = np.asarray(f(mid + half * _XK), dtype=complex)
        k = half * (vals @ _WK)
        g = half * (vals @ _WG)
        err = float(np.max(np.abs(k - g)))
        if not np.isfinite(err):
            raise NonConvergence(f"non-finite integrand on [{lo}, {hi}]")
        return k, err

    k0, e0 = rule(a, b)
    intervals = [(a, b, k0, e0)]
    total_err = e0
    while total_err > tol:
        if len(intervals) >= max_intervals:
            raise NonConvergence(
                f"quadrature did not reach tol={tol:g} (error estimate {total_err:.3e})"
            )
        worst = max(range(len(intervals)), key=lambda i: (intervals[i][3], -i))
        lo, hi, _, _ = intervals.pop(worst)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            raise NonConvergence("interval underflow; integrand likely singular")
        left = (lo, mid, *rule(lo, mid))
        right = (mid, hi, *rule(mid, hi))
        intervals[worst:worst] = [left, right]
        total_err = math.fsum(iv[3] for iv in intervals)
    parts = np.array([iv[2] for iv in intervals])
    return _fsum_complex(parts)


def _fsum_complex(parts):
    parts = np.asarray(parts)
    if parts.ndim == 1:
        return complex(math.fsum(parts.real), math.fsum(parts.imag))
    out = np.empty(parts.shape[1:], dtype=complex)
    for idx in np.ndindex(*parts.shape[1:]):
        col = parts[(slice(None),) + idx]
        out[idx] = complex(math.fsum(col.real), math.fsum(col.imag))
    return out


def lattice_points_in_ellipsoid(Q, center, R):
    """All integer N with (N - center)^T Q (N - center) <= R^2.

    Recursive enumeration over the Cholesky factor, last coordinate
    outermost; output sorted lexicographically.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    center = np.atleast_1d(np.asarray(center, dtype=float))
    n = Q.shape[0]
    # Q = L L^T; with y = L^T (N - c), y_k depends on N_k..N_{n-1}.
    L = np.linalg.cholesky(Q)
    U = L.T
    r2 = float(R) ** 2
    slack = 1e-12 * max(1.0, r2)
    out = []
    N = np.zeros(n, dtype=np.int64)

    def recurse(k, remaining):
        # tail = sum_{j>k} U[k, j] (N_j - c_j)
        tail = float(U[k, k + 1:] @ (N[k + 1:] - center[k + 1:])) if k + 1 < n else 0.0
        ukk = U[k, k]
        mid = center[k] - tail / ukk
        width = math.sqrt(max(remaining, 0.0)) / ukk
        lo = math.ceil(mid - width - 1e-12)
        hi = math.floor(mid + width + 1e-12)
        for v in range(lo, hi + 1):
            N[k] = v
            y = ukk * (v - center[k]) + tail
            rem = remaining - y * y
            if rem < -slack:
                continue
            if k == 0:
                out.append(N.copy())
            else:
                recurse(k - 1, rem)

    recurse(n - 1, r2)
    if not out:
        return np.zeros((0, n), dtype=np.int64)
    pts = np.array(out, dtype=np.int64)
    d = pts - center
    keep = np.einsum("ij,jk,ik->i", d, Q, d) <= r2 + slack
    pts = pts[keep]
    order = np.lexsort(pts.T[::-1])
    return pts[order]


def reduce_mod_lattice(v, L: LatticeBasis):
    """Split ``v`` into a residual and integer coefficients on ``L``.

    Coefficients are the nearest-integer rounding of the real coordinates,
    so the residual lies in the centred fundamental parallelotope.
    """
    v = np.asarray(v, dtype=complex)
    coords = L.coordinates(v)
    coeffs = np.rint(coords).astype(np.int64)
    residual = v - L.generators @ coeffs
    return residual, coeffs


def lattice_distance(v, L: LatticeBasis):
    """Norm of the residual of ``v`` modulo ``L``."""
    residual, _ = reduce_mod_lattice(v, L)
    return float(np.linalg.norm(residual))


def wirtinger_laplacian(samples, step):
    """Second-order approximation of d^2 f / dz dzbar at the stencil centre.

    ``samples[a, b] = f(z0 + (a - 1) * step + 1j * (b - 1) * step)``; the
    corners are unused.  Leading axes beyond the first two are broadcast.
    """
    s = np.asarray(samples)
    lap = s[2, 1] + s[0, 1] + s[1, 2] + s[1, 0] - 4.0 * s[1, 1]
    return lap / (4.0 * step * step)


def stencil_offsets(step):
    """Complex offsets matching the ``samples`` layout of :func:`wirtinger_laplacian`."""
    a = np.arange(3) - 1
    return (a[:, None] + 1j * a[None, :]) * step
