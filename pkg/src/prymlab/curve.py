"""Hyperelliptic double covers with two commuting involutions.

Two families are supported:

* ``A``: y^2 = (x^2 - a1)(x^2 - a2)(x^2 - a3), genus 2, sigma(x, y) = (-x, -y)
  fixing only the two points at infinity (k = 0), tau(x, y) = (-x, y).
* ``B``: y^2 = prod_m (x^2 - c_m^2), m = 1..4, genus 3, sigma(x, y) = (-x, y)
  fixing (0, +-y0) and both points at infinity (k = 1), tau(x, y) = (-x, -y).

Points live in one of two charts: ``"x"`` with coordinates (x, y), or the
chart at infinity ``"t"`` with t = 1/x and s = y t^(g+1), so s(0) = +1 at
infinity-plus and -1 at infinity-minus.  Paths are polylines of straight legs;
along a straight leg the square root is continued exactly by a product of
principal square roots of ratios (x - r)/(x0 - r), each of which has
argument in (-pi, pi) because a segment subtends less than a half turn.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateCurve, FitIllConditioned, SheetAmbiguity, SingularSystem
from .numerics import integrate_segment

FAMILIES = {
    # family: (g, g_sigma, h, k, sigma y-sign, tau y-sign)
    "A": (2, 1, 1, 0, -1, +1),
    "B": (3, 1, 2, 1, +1, -1),
}


@dataclass(frozen=True)
class CurveSpec:
    family: str
    branch_params: tuple

    def __post_init__(self):
        fam = str(self.family).upper()
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise DegenerateCurve(f"unknown family {self.family!r}")
        params = tuple(complex(p) for p in self.branch_params)
        object.__setattr__(self, "branch_params", params)
        need = 3 if fam == "A" else 4
        if len(params) != need:
            raise DegenerateCurve(f"family {fam} needs {need} branch parameters")
        squares = np.array(params) if fam == "A" else np.array(params) ** 2
        if np.min(np.abs(squares)) < 1e-10:
            raise DegenerateCurve("branch parameters must be nonzero")
        for i in range(len(squares)):
            for j in range(i):
                if abs(squares[i] - squares[j]) < 1e-10:
                    raise DegenerateCurve(
                        f"branch parameters {params[j]} and {params[i]} collide"
                    )

    @property
    def g(self):
        return FAMILIES[self.family][0]

    @property
    def g_sigma(self):
        return FAMILIES[self.family][1]

    @property
    def h(self):
        return FAMILIES[self.family][2]

    @property
    def k(self):
        return FAMILIES[self.family][3]

    @property
    def squares(self):
        """The values s_i with f(x) = prod (x^2 - s_i)."""
        p = np.array(self.branch_params)
        return p if self.family == "A" else p ** 2


@dataclass(frozen=True)
class SurfacePoint:
    """A point of the curve in chart ``"x"`` (v=x, w=y) or ``"t"`` (v=1/x, w=s)."""

    chart: str
    v: complex
    w: complex

    @property
    def is_infinity(self):
        return self.chart == "t" and self.v == 0

    @property
    def x(self):
        return self.v if self.chart == "x" else (np.inf if self.v == 0 else 1.0 / self.v)

    def __str__(self):
        if self.is_infinity:
            return "inf+" if self.w.real > 0 else "inf-"
        return f"({self.v:.6g}, {self.w:.6g})[{self.chart}]"


@dataclass(frozen=True)
class Leg:
    chart: str
    v0: complex
    v1: complex


@dataclass
class SurfacePath:
    """Polyline of straight legs starting at ``start``; consecutive legs in
    different charts meet at a point where x = 1/t."""

    start: SurfacePoint
    legs: list = field(default_factory=list)

    def reversed(self, curve):
        end = curve.continue_y(self)
        legs = [Leg(l.chart, l.v1, l.v0) for l in reversed(self.legs)]
        return SurfacePath(end, legs)

    def __add__(self, other):
        return SurfacePath(self.start, list(self.legs) + list(other.legs))


@dataclass(frozen=True)
class DifferentialForm:
    """(p(x)/y + q(x)) dx with p of degree <= g+1 (no x^g term) and constant q."""

    p: tuple
    q: complex = 0.0
    kind: str = "holomorphic"

    def raw_coefficients(self, g):
        """Coefficients on the raw integral basis of :meth:`Curve.raw_integrals`."""
        p = np.zeros(g + 2, dtype=complex)
        p[: len(self.p)] = self.p
        if abs(p[g]) > 0:
            raise ValueError("x^g dx/y terms are not supported")
        out = np.zeros(g + 2, dtype=complex)
        out[:g] = p[:g]
        out[g] = p[g + 1]
        out[g + 1] = self.q
        return out

    @classmethod
    def from_raw(cls, coeffs, g, kind):
        coeffs = np.asarray(coeffs, dtype=complex)
        p = np.zeros(g + 2, dtype=complex)
        p[:g] = coeffs[:g]
        p[g + 1] = coeffs[g]
        return cls(tuple(p), complex(coeffs[g + 1]), kind)


def _sqrt_ratio_product(v, v0, roots):
    """prod_r sqrt((v - r) / (v0 - r)) with principal roots."""
    out = np.ones(np.shape(v), dtype=complex)
    for r in roots:
        out = out * np.sqrt((v - r) / (v0 - r))
    return out


def _seg_distance(p, a, b):
    d = b - a
    if d == 0:
        return abs(p - a)
    s = ((p - a) * np.conj(d)).real / abs(d) ** 2
    s = min(1.0, max(0.0, s))
    return abs(p - (a + s * d))


class Curve:
    """A built curve: branch data, involutions, charts, paths and integrals."""

    x_switch_min = 5.0

    def __init__(self, spec: CurveSpec):
        self.spec = spec
        self.g, self.g_sigma, self.h, self.k, self._sig_y, self._tau_y = FAMILIES[spec.family]
        sq = spec.squares
        roots = np.concatenate([np.sqrt(sq), -np.sqrt(sq)])
        order = np.lexsort((roots.imag, roots.real))
        self.branch_points = roots[order]
        # s^2 = prod (1 - s_i t^2); coefficients in t^2, constant term first
        poly = np.array([1.0 + 0j])
        for s in sq:
            poly = np.convolve(poly, [1.0, -s])
        self._s2_coeffs = poly
        rmax = float(np.max(np.abs(self.branch_points)))
        self.x_switch = max(self.x_switch_min, 1.25 * rmax)
        self.t_radius = 1.0 / self.x_switch
        self.x_base = max(10.0, 2.5 * rmax)
        seps = [abs(a - b) for i, a in enumerate(self.branch_points) for b in self.branch_points[:i]]
        self.min_separation = float(min(seps))
        self.clearance = 0.05 * self.min_separation
        self.quad_tol = 1e-12
        if self.t_radius >= float(np.min(1.0 / np.abs(self.branch_points))):
            raise DegenerateCurve("chart at infinity overlaps branch points")

    # ------------------------------------------------------------------ basics
    def f(self, x):
        x = np.asarray(x, dtype=complex)
        out = np.ones_like(x)
        for s in self.spec.squares:
            out = out * (x * x - s)
        return out

    def s_squared(self, t):
        t2 = np.asarray(t, dtype=complex) ** 2
        return np.polyval(self._s2_coeffs[::-1], t2)

    def _one_minus_s2_over_t2(self, t):
        t2 = np.asarray(t, dtype=complex) ** 2
        c = self._s2_coeffs
        return -np.polyval(c[:0:-1], t2)

    def inf_plus(self):
        return SurfacePoint("t", 0j, 1 + 0j)

    def inf_minus(self):
        return SurfacePoint("t", 0j, -1 + 0j)

    def point(self, x, y=None, sheet=+1):
        """Curve point over ``x``; ``y`` picks the sheet (else principal root times ``sheet``)."""
        x = complex(x)
        if y is None:
            y = sheet * np.sqrt(self.f(x))
        y = complex(y)
        fx = complex(self.f(x))
        if abs(y * y - fx) > 1e-10 * (1 + abs(fx)):
            raise ValueError(f"({x}, {y}) is not on the curve")
        if abs(x) > self.x_switch:
            t = 1.0 / x
            return SurfacePoint("t", t, y * t ** (self.g + 1))
        return SurfacePoint("x", x, y)

    def to_chart(self, P: SurfacePoint, chart):
        if P.chart == chart:
            return P
        if chart == "t":
            t = 1.0 / P.v
            return SurfacePoint("t", t, P.w * t ** (self.g + 1))
        if P.v == 0:
            raise ValueError("point at infinity has no x-chart representation")
        x = 1.0 / P.v
        return SurfacePoint("x", x, P.w * x ** (self.g + 1))

    def xy(self, P: SurfacePoint):
        P = self.to_chart(P, "x")
        return P.v, P.w

    def same_point(self, P, Q, tol=1e-8):
        if P.chart != Q.chart:
            if P.is_infinity or Q.is_infinity:
                return False
            Q = self.to_chart(Q, P.chart)
        scale = 1 + abs(P.w)
        return abs(P.v - Q.v) <= tol * (1 + abs(P.v)) and abs(P.w - Q.w) <= tol * scale

    # ------------------------------------------------------------- involutions
    def _flip(self, P, ysign):
        if P.chart == "x":
            return SurfacePoint("x", -P.v, ysign * P.w)
        par = -1 if (self.g + 1) % 2 else 1
        return SurfacePoint("t", -P.v if P.v != 0 else 0j, ysign * par * P.w)

    def sigma(self, P):
        return self._flip(P, self._sig_y)

    def tau(self, P):
        return self._flip(P, self._tau_y)

    def iota(self, P):
        return SurfacePoint(P.chart, P.v, -P.w)

    def sigma_fixed_points(self):
        pts = [self.inf_plus(), self.inf_minus()]
        if self.spec.family == "B":
            y0 = complex(np.prod(self.spec.branch_params))
            pts = [SurfacePoint("x", 0j, y0), SurfacePoint("x", 0j, -y0)] + pts
        return pts

    def ramification_pairs(self):
        """Pairs (Q'_j, Q''_j), j = 0..k, with tau Q'_j = Q''_j; Q'_0 = inf+."""
        pairs = [(self.inf_plus(), self.inf_minus())]
        if self.spec.family == "B":
            y0 = complex(np.prod(self.spec.branch_params))
            pairs.append((SurfacePoint("x", 0j, y0), SurfacePoint("x", 0j, -y0)))
        return pairs

    def sigma_parity(self, n):
        """Sign of sigma^*(x^n dx/y) relative to x^n dx/y."""
        return (-1) ** (n + 1) * self._sig_y

    def tau_parity(self, n):
        return (-1) ** (n + 1) * self._tau_y

    def holomorphic_basis(self):
        return [
            DifferentialForm(tuple([0] * m + [1]), 0.0, "holomorphic")
            for m in range(self.g)
        ]

    def prym_indices(self):
        """Exponents n with x^n dx/y Prym-odd (sigma^* = -1)."""
        return [n for n in range(self.g) if self.sigma_parity(n) == -1]

    def prym_basis(self):
        basis = self.holomorphic_basis()
        return [basis[n] for n in self.prym_indices()]

    # ------------------------------------------------------------ continuation
    def _check_leg(self, chart, v0, v1):
        if chart == "x":
            d = min(_seg_distance(r, v0, v1) for r in self.branch_points)
            if d < 1e-9 * (1 + self.min_separation):
                raise SheetAmbiguity(f"leg {v0}->{v1} passes through a branch point")
        else:
            if max(abs(v0), abs(v1)) > self.t_radius * (1 + 1e-12):
                raise SheetAmbiguity("t-chart leg leaves the chart disk")

    def _leg_values(self, chart, v0, v1, w0, tau):
        """Branch value (y or s) along the leg at parameters ``tau``."""
        v = v0 + (v1 - v0) * tau
        if chart == "x":
            return v, w0 * _sqrt_ratio_product(v, v0, self.branch_points)
        inv = 1.0 / self.branch_points
        return v, w0 * _sqrt_ratio_product(v, v0, inv)

    def _enter(self, P, chart):
        if P.chart == chart:
            return P
        return self.to_chart(P, chart)

    def continue_y(self, path: SurfacePath) -> SurfacePoint:
        """Endpoint of ``path`` with the branch value continued along it."""
        P = path.start
        for leg in path.legs:
            P = self._enter(P, leg.chart)
            if abs(P.v - leg.v0) > 1e-9 * (1 + abs(leg.v0)):
                raise SheetAmbiguity("path legs are not contiguous")
            self._check_leg(leg.chart, leg.v0, leg.v1)
            _, w = self._leg_values(leg.chart, leg.v0, leg.v1, P.w, np.array([1.0]))
            P = SurfacePoint(leg.chart, complex(leg.v1), complex(w[0]))
        return P

    def s_at_origin(self, t0, s0):
        """Continue s from (t0, s0) radially to t = 0 (+-1 identifies the sheet)."""
        _, s = self._leg_values("t", t0, 0j, s0, np.array([1.0]))
        return complex(s[0])

    # ----------------------------------------------------------------- integrals
    def raw_integrals(self, path: SurfacePath, tol=None):
        """Integrals along ``path`` of the raw forms.

        Components: x^n dx/y for n < g, then x^(g+1) dx/y, then dx.  Terms with
        a pole at infinity are regularised so that the value at an endpoint at
        infinity drops the 1/t part (the constant term of the Laurent series).
        """
        tol = self.quad_tol if tol is None else tol
        g = self.g
        total = np.zeros(g + 2, dtype=complex)
        P = path.start
        for leg in path.legs:
            P = self._enter(P, leg.chart)
            self._check_leg(leg.chart, leg.v0, leg.v1)
            total += self._leg_integrals(leg, P.w, tol)
            _, w = self._leg_values(leg.chart, leg.v0, leg.v1, P.w, np.array([1.0]))
            P = SurfacePoint(leg.chart, complex(leg.v1), complex(w[0]))
        return total

    def _leg_integrals(self, leg, w0, tol):
        g = self.g
        v0, v1 = complex(leg.v0), complex(leg.v1)
        out = np.zeros(g + 2, dtype=complex)
        if v0 == v1:
            return out
        dv = v1 - v0
        if leg.chart == "x":
            def integrand(tau):
                x, y = self._leg_values("x", v0, v1, w0, tau)
                rows = [x ** n / y for n in range(g)] + [x ** (g + 1) / y]
                return np.array(rows) * dv

            out[: g + 1] = integrate_segment(integrand, tol)
            out[g + 1] = dv
            return out
        eps = self.s_at_origin(v0, w0)

        def integrand(tau):
            t, s = self._leg_values("t", v0, v1, w0, tau)
            rows = [-(t ** (g - 1 - n)) / s for n in range(g)]
            # -(1/s - eps)/t^2, written without cancellation
            reg = eps * self._one_minus_s2_over_t2(t) / ((eps + s) * s)
            rows.append(-reg)
            return np.array(rows) * dv

        out[: g + 1] = integrate_segment(integrand, tol)
        # singular parts -eps/t^2 and -1/t^2 integrate to eps/t and 1/t;
        # endpoints at t = 0 contribute nothing (regularisation)
        inv = lambda t: 0j if t == 0 else 1.0 / t
        out[g] += eps * (inv(v1) - inv(v0))
        out[g + 1] += inv(v1) - inv(v0)
        return out

    def integrate_form(self, form: DifferentialForm, path: SurfacePath, tol=None):
        return complex(form.raw_coefficients(self.g) @ self.raw_integrals(path, tol))

    def form_values(self, P: SurfacePoint, coeffs):
        """Value of forms (raw coefficient rows) as a density in the chart variable."""
        coeffs = np.atleast_2d(coeffs)
        g = self.g
        if P.chart == "x":
            x, y = P.v, P.w
            raw = np.array([x ** n / y for n in range(g)] + [x ** (g + 1) / y, 1.0])
        else:
            t, s = P.v, P.w
            if t == 0:
                raise ValueError("form density at infinity is not finite in general")
            raw = np.array([-(t ** (g - 1 - n)) / s for n in range(g)]
                           + [-1.0 / (t * t * s), -1.0 / (t * t)])
        return coeffs @ raw

    # ------------------------------------------------------------------ routing
    def _detour_legs(self):
        """Legs from x_base around the rightmost branch point and back (flips sheet)."""
        r = self.branch_points[-1]
        others = [abs(r - b) for b in self.branch_points[:-1]]
        rho = min(0.4 * min(others), 0.5 * abs(self.x_base - r))
        n = 16
        start = r + rho
        ring = [r + rho * np.exp(2j * np.pi * m / n) for m in range(n + 1)]
        ring[-1] = start
        legs = [Leg("x", self.x_base, start)]
        legs += [Leg("x", ring[m], ring[m + 1]) for m in range(n)]
        legs.append(Leg("x", start, self.x_base))
        return legs

    def _height(self):
        return float(np.max(np.abs(self.branch_points.imag))) + 2.0

    def _approach_legs(self, x_target):
        """x-chart legs from x_base to ``x_target`` passing above or below the cuts."""
        xb = complex(self.x_base)
        if abs(x_target - xb) < 1e-15:
            return []
        H = self._height() * (1 if x_target.imag >= 0 else -1)
        pts = [xb, xb + 1j * H, x_target.real + 1j * H, x_target]
        legs = []
        for a, b in zip(pts[:-1], pts[1:]):
            if abs(a - b) > 0:
                legs.append(Leg("x", a, b))
        return legs

    def base_prefix(self):
        """Path from inf+ to the finite base junction x_base (t-chart leg)."""
        return SurfacePath(self.inf_plus(), [Leg("t", 0j, 1.0 / self.x_base)])

    def route(self, P: SurfacePoint, loops: Sequence[SurfacePath] = ()):
        """Deterministic path from inf+ to ``P``.

        ``loops`` are closed x-chart paths based at x_base on the inf+ sheet;
        they are inserted at the junction (used to change the homotopy class).
        """
        if P.is_infinity and P.w.real > 0 and not loops:
            return SurfacePath(self.inf_plus(), [])
        prefix = self.base_prefix()
        legs = list(prefix.legs)
        for loop in loops:
            legs += list(loop.legs)

        def tail(flip):
            out = self._detour_legs() if flip else []
            if P.chart == "x":
                out += self._approach_legs(complex(P.v))
            else:
                out += [Leg("x", self.x_base, self.x_base), Leg("t", 1.0 / self.x_base, P.v)]
            return out

        for flip in (False, True):
            path = SurfacePath(self.inf_plus(), legs + tail(flip))
            path.legs = [l for l in path.legs if not (l.chart == "x" and l.v0 == l.v1)]
            end = self.continue_y(path)
            if P.is_infinity:
                ok = abs(end.w - P.w) < 0.5
            else:
                ok = abs(end.w - P.w) <= abs(end.w + P.w)
            if ok:
                return path
        raise SheetAmbiguity(f"could not route to {P}")  # pragma: no cover

    def abel_raw(self, P: SurfacePoint, loops=()):
        return self.raw_integrals(self.route(P, loops))

    # ---------------------------------------------------------- local expansion
    def local_point(self, which, w):
        """Point with local parameter value ``w`` near Q'_0 (which=1) or Q''_0 (which=2)."""
        if which == 1:
            t, sign = complex(w), +1
        else:
            t, sign = -complex(w), -1
        s = sign * np.sqrt(self.s_squared(t))
        return SurfacePoint("t", t, complex(s))


def local_expansion(phi, order, r=1e-2, n=16, tol=1e-8):
    """Taylor coefficients of ``phi(w)`` from samples on |w| = r.

    ``phi`` maps an array of local-parameter values to function values.  The
    fit is a least-squares Vandermonde solve; a residual above ``tol``
    (relative) raises :class:`FitIllConditioned`.
    """
    w = r * np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.asarray(phi(w), dtype=complex)
    V = w[:, None] ** np.arange(order + 1)[None, :]
    coeffs, *_ = np.linalg.lstsq(V, vals, rcond=None)
    resid = np.max(np.abs(V @ coeffs - vals)) / max(1.0, np.max(np.abs(vals)))
    if resid > tol:
        raise FitIllConditioned(f"local expansion fit residual {resid:.3e}")
    return coeffs


def build_curve(spec: CurveSpec):
    """Build the curve; returns (curve, holomorphic basis, Prym-odd sub-basis)."""
    curve = Curve(spec)
    return curve, curve.holomorphic_basis(), curve.prym_basis()


def build_second_kind(curve: Curve, which, a_periods_raw):
    """Second-kind form with principal part d(1/w) at Q'_0 (which=1) or Q''_0 (which=2).

    ``a_periods_raw`` is the (g x (g+2)) matrix of raw integrals over the a-cycles.
    The ansatz (x^(g+1)/y +- 1) dx / 2 is corrected by holomorphic forms so
    that all a-periods vanish.
    """
    g = curve.g
    raw = np.zeros(g + 2, dtype=complex)
    raw[g] = 0.5
    raw[g + 1] = 0.5 if which == 1 else -0.5
    a = np.asarray(a_periods_raw, dtype=complex)
    M = a[:, :g]
    if np.linalg.cond(M) > 1e12:
        raise SingularSystem("a-period matrix of holomorphic forms is singular")
    corr = np.linalg.solve(M, -(a @ raw))
    raw[:g] = corr
    return DifferentialForm.from_raw(raw, g, "second-kind")
