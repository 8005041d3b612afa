"""Prym theta function, half-integer characteristics and log-derivatives.

Convention: theta(z) = sum_N exp(0.5 N^T Pi N + N^T z) with Re Pi negative
definite, so theta(z + 2 pi i M) = theta(z) and
theta(z + Pi M) = exp(-0.5 M^T Pi M - M^T z) theta(z).

The characteristic shift is theta_hat_m(z) = theta(z + 2 pi i beta) with
beta = (0, .., 0, 1/2, .., 1/2) (m halves).  Under this convention a shift by
Pi M multiplies theta_hat_m by the extra factor exp(-2 pi i M^T beta).  The
literal shift theta(z + beta) is available via ``char_mode="raw"``.
"""
from __future__ import annotations

import math

import numpy as np

from ._kernels import theta_sums
from .errors import NearThetaDivisor, TruncationOverflow
from .numerics import lattice_points_in_ellipsoid, stencil_offsets, wirtinger_laplacian


def characteristic(h, m):
    beta = np.zeros(h)
    if m:
        beta[h - m:] = 0.5
    return beta


class ThetaContext:
    """Truncated theta evaluation for a fixed Riemann matrix ``Pi``."""

    def __init__(self, Pi, tol=1e-12, radius_cap=40.0, char_mode="2pi_i", use_numba=None):
        Pi = np.atleast_2d(np.asarray(Pi, dtype=complex))
        self.Pi = Pi
        self.h = Pi.shape[0]
        self.tol = tol
        self.char_mode = char_mode
        self.use_numba = use_numba
        Q = -0.5 * (Pi.real + Pi.real.T)
        evals = np.linalg.eigvalsh(Q)
        if evals.min() <= 0:
            raise ValueError("Re Pi must be negative definite")
        self.Q = Q
        self._Qinv = np.linalg.inv(Q)
        corners = np.array(np.meshgrid(*[[-0.5, 0.5]] * self.h)).reshape(self.h, -1).T
        r_half = float(np.sqrt(max(c @ Q @ c for c in corners)))
        # tail relative to the dominant term: exp(-R^2/2) times a shell count
        R = math.sqrt(2 * math.log(1.0 / tol) + r_half ** 2) + 2.0 + 0.5 * self.h
        if R > radius_cap:
            raise TruncationOverflow(f"truncation radius {R:.1f} exceeds cap {radius_cap}")
        self.radius = R
        self.points = lattice_points_in_ellipsoid(Q, np.zeros(self.h), R + r_half)

    def with_radius(self, factor):
        """Copy with truncation radius scaled by ``factor`` (convergence checks)."""
        other = ThetaContext.__new__(ThetaContext)
        other.__dict__.update(self.__dict__)
        corners = np.array(np.meshgrid(*[[-0.5, 0.5]] * self.h)).reshape(self.h, -1).T
        r_half = float(np.sqrt(max(c @ self.Q @ c for c in corners)))
        other.radius = self.radius * factor
        other.points = lattice_points_in_ellipsoid(self.Q, np.zeros(self.h), other.radius + r_half)
        return other

    def shift(self, m):
        beta = characteristic(self.h, m)
        return 2j * np.pi * beta if self.char_mode == "2pi_i" else beta.astype(complex)

    def _sums(self, z, order):
        z = np.asarray(z, dtype=complex)
        single = z.ndim == 1
        Z = np.atleast_2d(z).reshape(-1, self.h)
        # saddle of the real part: Q c = Re z
        centre = Z.real @ self._Qinv.T
        C0 = np.rint(centre)
        out = theta_sums(self.Pi, self.points, Z, C0, order, self.use_numba)
        return single, z.shape[:-1], out

    def log_theta(self, z, m=0):
        """Complex log of theta_hat_m(z) (principal branch of the scaled sum)."""
        z = np.asarray(z, dtype=complex) + self.shift(m)
        single, shape, (logmax, s0, _, _) = self._sums(z, 0)
        val = logmax + np.log(s0)
        return complex(val[0]) if single else val.reshape(shape)

    def relative_size(self, z, m=0):
        """|theta| relative to its largest series term (small => near the divisor)."""
        z = np.asarray(z, dtype=complex) + self.shift(m)
        single, shape, (_, s0, _, _) = self._sums(z, 0)
        val = np.abs(s0)
        return float(val[0]) if single else val.reshape(shape)

    def theta(self, z, m=0):
        z = np.asarray(z, dtype=complex) + self.shift(m)
        single, shape, (logmax, s0, _, _) = self._sums(z, 0)
        val = np.exp(logmax) * s0
        return complex(val[0]) if single else val.reshape(shape)

    def log_derivatives(self, z, m=0):
        """(log theta, grad log theta, Hessian of log theta) at each argument."""
        z = np.asarray(z, dtype=complex) + self.shift(m)
        single, shape, (logmax, s0, s1, s2) = self._sums(z, 2)
        g = s1 / s0[:, None]
        H = s2 / s0[:, None, None] - g[:, :, None] * g[:, None, :]
        lt = logmax + np.log(s0)
        if single:
            return complex(lt[0]), g[0], H[0]
        return lt.reshape(shape), g.reshape(shape + (self.h,)), H.reshape(shape + (self.h, self.h))


def theta(z, ctx: ThetaContext):
    return ctx.theta(z)


def theta_hat(m, z, ctx: ThetaContext, k=None):
    if m < 0 or (k is not None and m > k):
        raise ValueError(f"characteristic index m={m} outside 0..k")
    if m > ctx.h:
        raise ValueError("m exceeds the theta dimension")
    return ctx.theta(z, m)


def unwrap_to(values, reference):
    """Shift imaginary parts of ``values`` by multiples of 2 pi towards ``reference``."""
    d = np.imag(values - reference)
    return values - 2j * np.pi * np.round(d / (2 * np.pi))


def log_theta_dd(z_grid, U1, U2, Z, ctx: ThetaContext, step, m=0, min_abs=1e-10):
    """d^2/dz dzbar of log theta_hat_m(U1 z + U2 zbar + Z) on a grid of z.

    Uses the 5-point Wirtinger Laplacian of the branch-consistent logarithm.
    """
    z_grid = np.asarray(z_grid, dtype=complex)
    offs = stencil_offsets(step)
    zz = z_grid[..., None, None] + offs  # grid x 3 x 3
    W = (np.multiply.outer(zz, U1) + np.multiply.outer(np.conj(zz), U2) + Z)
    flat = W.reshape(-1, ctx.h)
    if np.min(ctx.relative_size(flat, m)) < min_abs:
        raise NearThetaDivisor("theta nearly vanishes on the grid")
    L = ctx.log_theta(flat, m).reshape(zz.shape)
    centre = L[..., 1:2, 1:2]
    L = unwrap_to(L, centre)
    if np.max(np.abs(np.imag(L - centre))) > np.pi / 2:
        raise NearThetaDivisor("phase of theta varies too fast for the stencil")
    L = np.moveaxis(L, (-2, -1), (0, 1))
    return wirtinger_laplacian(L, step)
