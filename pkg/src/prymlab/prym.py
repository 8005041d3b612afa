"""Divisors, Abel and Abel-Prym maps, zeros of theta pullbacks, VN checks.

The Abel-type maps integrate from inf+ along :meth:`Curve.route`.  Since
inf+ is fixed by sigma, the Abel-Prym map is skew: A(sigma P) = -A(P).
Values are only meaningful modulo the Jacobian lattice Z(2 pi i E, B) or the
Prym lattice Z(2 pi i E, Pi); helpers below reduce with
:func:`reduce_mod_lattice`.

Zero finding works on "states": a surface point together with a vector
congruent to its Abel(-Prym) image.  States move along straight legs, so a
Newton iteration only ever integrates short segments.  The second sheet is
covered through the hyperelliptic involution: every holomorphic form is odd
under iota, hence Ab(iota P) = Ab(inf-) - Ab(P) modulo periods.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curve import Curve, Leg, SurfacePath, SurfacePoint
from .errors import (
    NearThetaDivisor,
    NotSingleValued,
    RankDeficient,
    SheetAmbiguity,
    ZeroCountMismatch,
)
from .numerics import LatticeBasis, Tolerances, lattice_distance, reduce_mod_lattice
from .periods import PeriodData
from .theta import ThetaContext


# ---------------------------------------------------------------- divisors
@dataclass(frozen=True)
class Divisor:
    """Finite formal sum of surface points with integer multiplicities."""

    points: tuple = ()
    mults: tuple = ()

    def __post_init__(self):
        if len(self.points) != len(self.mults):
            raise ValueError("points and multiplicities differ in length")

    @classmethod
    def from_points(cls, points):
        points = tuple(points)
        return cls(points, tuple([1] * len(points)))

    @property
    def degree(self):
        return int(sum(self.mults))

    def __add__(self, other):
        return Divisor(self.points + other.points, self.mults + other.mults)

    def __neg__(self):
        return Divisor(self.points, tuple(-m for m in self.mults))

    def __sub__(self, other):
        return self + (-other)

    def __len__(self):
        return len(self.points)

    def scaled(self, n):
        return Divisor(self.points, tuple(n * m for m in self.mults))

    def mapped(self, fn):
        return Divisor(tuple(fn(P) for P in self.points), self.mults)

    def expanded(self):
        """Points repeated according to (positive) multiplicity."""
        out = []
        for P, m in zip(self.points, self.mults):
            if m < 0:
                raise ValueError("expanded() needs an effective divisor")
            out += [P] * m
        return out


@dataclass
class AbelState:
    """A surface point with a raw-integral vector accumulated along some path."""

    point: SurfacePoint
    raw: np.ndarray


# ------------------------------------------------------------------ geometry
class PrymGeometry:
    """Curve, periods, theta contexts and lattices bundled for the Abel maps."""

    def __init__(self, curve: Curve, periods: PeriodData, tol: Tolerances | None = None,
                 use_numba=None):
        self.curve = curve
        self.periods = periods
        self.tol = tol or Tolerances()
        curve.quad_tol = self.tol.quad_tol
        self.theta = ThetaContext(periods.Pi, self.tol.theta_tol, use_numba=use_numba)
        self.prym_lattice = LatticeBasis.from_periods(periods.Pi)
        self.jac_lattice = LatticeBasis.from_periods(periods.B)
        self._jac_theta = None
        self._use_numba = use_numba
        self._raw_cache = {}
        self._grid = None

    @property
    def jac_theta(self):
        if self._jac_theta is None:
            self._jac_theta = ThetaContext(self.periods.B, self.tol.theta_tol,
                                           use_numba=self._use_numba)
        return self._jac_theta

    # raw integrals along the canonical route, cached per point
    def raw(self, P: SurfacePoint, loops=()):
        # keyed on loop contents: ids of temporary paths get reused
        key = (P.chart, complex(P.v), complex(P.w), tuple((l.start, tuple(l.legs)) for l in loops))
        hit = self._raw_cache.get(key)
        if hit is None:
            hit = self.curve.raw_integrals(self.curve.route(P, loops))
            self._raw_cache[key] = hit
        return hit

    def state(self, P: SurfacePoint):
        return AbelState(P, self.raw(P).copy())

    def abel_point(self, P, loops=()):
        return self.periods.jac_coeffs @ self.raw(P, loops)

    def abel_prym_point(self, P, loops=()):
        return self.periods.prym_coeffs @ self.raw(P, loops)

    def omega_point(self, P, loops=()):
        """(int^P Omega_1, int^P Omega_2) along the same route."""
        return self.periods.omega_coeffs @ self.raw(P, loops)

    # ---------------------------------------------------------------- states
    def advance(self, st: AbelState, v1) -> AbelState:
        """Move a state along a straight leg in its own chart to ``v1``."""
        P = st.point
        leg = Leg(P.chart, complex(P.v), complex(v1))
        self.curve._check_leg(leg.chart, leg.v0, leg.v1)
        inc = self.curve._leg_integrals(leg, P.w, self.curve.quad_tol)
        _, w = self.curve._leg_values(leg.chart, leg.v0, leg.v1, P.w, np.array([1.0]))
        return AbelState(SurfacePoint(leg.chart, complex(v1), complex(w[0])), st.raw + inc)

    def recharted(self, st: AbelState, chart) -> AbelState:
        return AbelState(self.curve.to_chart(st.point, chart), st.raw)

    def iota_state(self, st: AbelState) -> AbelState:
        """State at iota P: holomorphic parts become raw(inf-) - raw(P)."""
        g = self.curve.g
        raw = np.zeros_like(st.raw)
        raw[:g] = self.raw(self.curve.inf_minus())[:g] - st.raw[:g]
        return AbelState(self.curve.iota(st.point), raw)

    def holo_density(self, P: SurfacePoint):
        """Densities of x^n dx/y (n < g) in the chart variable at ``P``."""
        g = self.curve.g
        if P.chart == "x":
            return np.array([P.v ** n / P.w for n in range(g)])
        return np.array([-(P.v ** (g - 1 - n)) / P.w for n in range(g)])

    # ----------------------------------------------------------- divisor maps
    def abel(self, D: Divisor):
        out = np.zeros(self.curve.g, dtype=complex)
        for P, m in zip(D.points, D.mults):
            out += m * self.abel_point(P)
        return out

    def abel_prym(self, D: Divisor):
        out = np.zeros(self.curve.h, dtype=complex)
        for P, m in zip(D.points, D.mults):
            out += m * self.abel_prym_point(P)
        return out

    def sigma_divisor(self, D: Divisor):
        return D.mapped(self.curve.sigma)

    def tau_divisor(self, D: Divisor):
        return D.mapped(self.curve.tau)


def abel(geom: PrymGeometry, D: Divisor):
    return geom.abel(D)


def abel_prym(geom: PrymGeometry, D: Divisor):
    return geom.abel_prym(D)


# ------------------------------------------------------------- phi and eps
def phi(e, g_sigma, h):
    """(e_alpha, e_j) -> (e_alpha, 2 e_j, e_alpha) in C^g."""
    e = np.asarray(e, dtype=complex)
    return np.concatenate([e[:g_sigma], 2 * e[g_sigma:h], e[:g_sigma]])


def eps(e, g_sigma, h):
    """(e_alpha, e_j) -> (e_alpha, 2 e_j)."""
    e = np.asarray(e, dtype=complex)
    return np.concatenate([e[:g_sigma], 2 * e[g_sigma:h]])


def phi_lattice_residuals(geom: PrymGeometry):
    """Distance of phi(generator) to the Jacobian lattice, per Prym generator."""
    p = geom.periods
    gens = geom.prym_lattice.generators
    return np.array([lattice_distance(phi(gens[:, i], p.g_sigma, p.h), geom.jac_lattice)
                     for i in range(gens.shape[1])])


# -------------------------------------------------------------------- Delta
@dataclass
class VNDelta:
    """Delta = K + sum_j (Q'_j + Q''_j) with K = div(dx/y) = (g-1)(inf+ + inf-)."""

    divisor: Divisor
    ab: np.ndarray

    @property
    def degree(self):
        return self.divisor.degree


def vn_delta(geom: PrymGeometry):
    c = geom.curve
    K = Divisor((c.inf_plus(), c.inf_minus()), (c.g - 1, c.g - 1))
    D = K
    for Qp, Qpp in c.ramification_pairs():
        D = D + Divisor.from_points([Qp, Qpp])
    return VNDelta(D, geom.abel(D))


# ------------------------------------------------------------- zero finding
@dataclass
class ZeroSearch:
    """Settings for :func:`theta_zeros`."""

    grid: int = 40
    newton_tol: float = 1e-12
    newton_iter: int = 60
    dedup: float = 1e-6
    circle_radius: float = 1e-3
    circle_points: int = 48
    max_seeds: int = 400


class _SeedGrid:
    """Abel states on an x-plane grid and a polar grid in the t-disk (one sheet each)."""

    def __init__(self, geom: PrymGeometry, n):
        c = geom.curve
        self.states = []
        X = c.x_switch
        # irrational offsets keep grid lines away from the (real) branch points
        xs = np.linspace(-X, X, n) + 0.0137 * X / n
        ys = np.linspace(-X, X, n) + 0.0291 * X / n
        self.spacing = xs[1] - xs[0]
        j0 = int(np.argmin(np.abs(ys - c._height())))
        root = complex(xs[-1], ys[j0])
        st0 = geom.state(SurfacePoint("x", root, complex(np.sqrt(c.f(root)))))
        col = {}
        st = st0
        col[j0] = st0
        for j in range(j0 + 1, n):
            st = geom.advance(st, complex(xs[-1], ys[j]))
            col[j] = st
        st = st0
        for j in range(j0 - 1, -1, -1):
            st = geom.advance(st, complex(xs[-1], ys[j]))
            col[j] = st
        for j in range(n):
            st = col[j]
            self.states.append(st)
            for i in range(n - 2, -1, -1):
                try:
                    st = geom.advance(st, complex(xs[i], ys[j]))
                except SheetAmbiguity:
                    break
                self.states.append(st)
        # t-disk: rays from inf+
        nr = max(4, n // 8)
        na = max(8, n // 2)
        R = c.t_radius
        origin = AbelState(c.inf_plus(), np.zeros(c.g + 2, dtype=complex))
        for a in range(na):
            ang = 2 * np.pi * (a + 0.5) / na
            st = origin
            for r in range(1, nr + 1):
                st = geom.advance(st, R * (r / (nr + 0.5)) * np.exp(1j * ang))
                self.states.append(st)
        self.states.append(origin)


def _grid(geom: PrymGeometry, n):
    if geom._grid is None or geom._grid[0] != n:
        geom._grid = (n, _SeedGrid(geom, n))
    return geom._grid[1]


@dataclass
class ThetaPullback:
    """P -> theta(coeffs . raw(P) - e) for a fixed theta context."""

    coeffs: np.ndarray
    ctx: ThetaContext
    e: np.ndarray

    def arg(self, st: AbelState):
        return self.coeffs @ st.raw - self.e

    def log_value(self, st):
        return self.ctx.log_theta(self.arg(st))

    def log_derivative(self, geom: PrymGeometry, st: AbelState):
        """d log F / dv in the chart variable of the state."""
        _, grad, _ = self.ctx.log_derivatives(self.arg(st))
        dens = self.coeffs[:, : geom.curve.g] @ geom.holo_density(st.point)
        return complex(grad @ dens)


def _normalise_chart(geom, st):
    c = geom.curve
    P = st.point
    if P.chart == "x" and abs(P.v) > c.x_switch:
        return geom.recharted(st, "t")
    if P.chart == "t" and abs(P.v) > c.t_radius:
        return geom.recharted(st, "x")
    return st


class _LocalCoord:
    """Local parameter at a state: x, t, or u = sqrt(x - r) near a branch point r."""

    substeps = 8

    def __init__(self, geom, st):
        c = geom.curve
        P = st.point
        self.chart = P.chart
        self.r = None
        if P.chart == "x":
            d = np.abs(c.branch_points - P.v)
            i = int(np.argmin(d))
            if d[i] < 0.3 * c.min_separation:
                self.r = complex(c.branch_points[i])
        self.value = np.sqrt(P.v - self.r) if self.r is not None else P.v

    def chart_of(self, q):
        """Chart variable for local parameter ``q``."""
        return self.r + q * q if self.r is not None else q

    def dv_dq(self, q):
        return 2 * q if self.r is not None else 1.0

    def move(self, geom, st, q1):
        """Advance along the image of the straight segment value -> q1."""
        if self.r is None:
            return geom.advance(st, q1)
        q0 = self.value
        for s in np.arange(1, self.substeps + 1) / self.substeps:
            st = geom.advance(st, self.chart_of(q0 + s * (q1 - q0)))
        return st


def _newton(geom, F: ThetaPullback, st, opts: ZeroSearch, max_step):
    for _ in range(opts.newton_iter):
        lc = _LocalCoord(geom, st)
        d = F.log_derivative(geom, st) * lc.dv_dq(lc.value)
        if not np.isfinite(d) or d == 0:
            return None
        step = -1.0 / d
        cap = max_step if lc.r is None else np.sqrt(max_step)
        if abs(step) > cap:
            step *= cap / abs(step)
        try:
            st = _normalise_chart(geom, lc.move(geom, st, lc.value + step))
        except SheetAmbiguity:
            return None
        if abs(step) < opts.newton_tol * (1 + abs(lc.value)):
            return st
    return None


def _winding(geom, F: ThetaPullback, st, opts: ZeroSearch):
    """Winding number of F around a small circle in the local parameter."""
    lc = _LocalCoord(geom, st)
    q0 = lc.value
    rho = opts.circle_radius
    if lc.r is not None and abs(q0) > 0:
        rho = min(rho, 0.5 * abs(q0)) if abs(q0) > 2 * rho else rho
    n = opts.circle_points
    ring = q0 + rho * np.exp(2j * np.pi * np.arange(n + 1) / n)
    cur = lc.move(geom, st, ring[0])
    phases = [F.log_value(cur).imag]
    prev = ring[0]
    for q in ring[1:]:
        step = _LocalCoord.__new__(_LocalCoord)
        step.chart, step.r, step.value = lc.chart, lc.r, prev
        cur = step.move(geom, cur, q)
        phases.append(F.log_value(cur).imag)
        prev = q
    d = np.diff(np.array(phases))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return int(round(d.sum() / (2 * np.pi)))


def _same(geom, P, Q, tol):
    c = geom.curve
    if P.is_infinity or Q.is_infinity:
        return P.is_infinity and Q.is_infinity and np.sign(P.w.real) == np.sign(Q.w.real)
    if P.chart != Q.chart:
        Q = c.to_chart(Q, P.chart)
    return abs(P.v - Q.v) <= tol * (1 + abs(P.v)) and abs(P.w - Q.w) <= 1e-4 * (1 + abs(P.w))


def theta_zeros(geom: PrymGeometry, coeffs, ctx: ThetaContext, e, expected,
                opts: ZeroSearch | None = None):
    """Zero divisor of P -> theta(coeffs . raw(P) - e); returns (Divisor, states)."""
    opts = opts or ZeroSearch()
    e = np.asarray(e, dtype=complex)
    F = ThetaPullback(np.asarray(coeffs), ctx, e)
    grid = _grid(geom, opts.grid)
    states = list(grid.states) + [geom.iota_state(s) for s in grid.states]
    args = np.array([F.arg(s) for s in states])
    rel = ctx.relative_size(args)
    if np.max(rel) < 1e-12:
        raise ZeroCountMismatch("theta pullback vanishes identically on the seed grid")
    order = np.argsort(rel, kind="stable")
    found, mults = [], []
    max_step = 2 * grid.spacing
    for idx in order[:opts.max_seeds]:
        if sum(mults) >= expected:
            break
        st = states[idx]
        if any(_same(geom, st.point, z.point, 0.25 * grid.spacing) for z in found):
            continue
        res = _newton(geom, F, st, opts, max_step)
        if res is None:
            continue
        if ctx.relative_size(F.arg(res)) > 1e-6:
            continue
        if any(_same(geom, res.point, z.point, opts.dedup) for z in found):
            continue
        found.append(res)
        mults.append(_winding(geom, F, res, opts))
    pts = [(s, m) for s, m in zip(found, mults) if m != 0]
    total = sum(m for _, m in pts)
    if total != expected:
        raise ZeroCountMismatch(f"found {total} zeros (with multiplicity), expected {expected}")
    # deterministic ordering: by chart, then real and imaginary parts of x
    def key(item):
        P = item[0].point
        x = P.x if not P.is_infinity else np.inf * np.sign(P.w.real)
        xr = np.real(x) if np.isfinite(x) else (1e300 if P.w.real > 0 else -1e300)
        xi = np.imag(x) if np.isfinite(x) else 0.0
        return (round(xr, 9), round(xi, 9), P.w.real)
    pts.sort(key=key)
    D = Divisor(tuple(s.point for s, _ in pts), tuple(m for _, m in pts))
    return D, [s for s, _ in pts]


def zeros_of_F_e(geom: PrymGeometry, e, opts: ZeroSearch | None = None):
    """Zero divisor of F_e(P) = theta(A(P) - e); its degree must be 2h."""
    D, _ = theta_zeros(geom, geom.periods.prym_coeffs, geom.theta, e, 2 * geom.curve.h, opts)
    return D


def riemann_constant(geom: PrymGeometry, e_probe=None, opts=None):
    """Vector kappa with div theta_J(Ab(P) - E) = D  <=>  Ab(D) = E - kappa."""
    g = geom.curve.g
    if e_probe is None:
        e_probe = 0.3 + 0.2j + 0.17 * np.arange(g) - 0.11j * np.arange(g) ** 2
    D, _ = theta_zeros(geom, geom.periods.jac_coeffs, geom.jac_theta, e_probe, g, opts)
    kappa = np.asarray(e_probe) - geom.abel(D)
    return reduce_mod_lattice(kappa, geom.jac_lattice)[0]


# ---------------------------------------------------------- verifications
def _reduced_norm(v, L):
    return float(np.linalg.norm(reduce_mod_lattice(v, L)[0]))


@dataclass
class VN1Result:
    holds: bool
    residual: float  # vs Ab(Delta) (degree-consistent reading)
    residual_2delta: float  # vs 2 Ab(Delta), verbatim
    degree_zeta_sum: int
    degree_delta: int
    witness: np.ndarray = field(repr=False, default=None)


def check_vn1(geom: PrymGeometry, zeta: Divisor, delta: VNDelta | None = None):
    """Test zeta + sigma zeta ~ Delta through Ab, reporting the 2 Delta reading too."""
    delta = delta or vn_delta(geom)
    s = geom.abel(zeta) + geom.abel(geom.sigma_divisor(zeta))
    r1 = _reduced_norm(s - delta.ab, geom.jac_lattice)
    r2 = _reduced_norm(s - 2 * delta.ab, geom.jac_lattice)
    holds = r1 < geom.tol.lattice_tol and 2 * zeta.degree == delta.degree
    return VN1Result(holds, r1, r2, 2 * zeta.degree, delta.degree, s)


def alt_map(geom: PrymGeometry, zeta: Divisor):
    v = geom.abel(zeta) - geom.abel(geom.sigma_divisor(zeta))
    return reduce_mod_lattice(v, geom.jac_lattice)[0]


def verify_cor2(geom: PrymGeometry, e, zeta: Divisor | None = None):
    """Residual of A(zeta) = eps(e) modulo the Prym lattice, zeta = div F_e."""
    zeta = zeta if zeta is not None else zeros_of_F_e(geom, e)
    p = geom.periods
    v = geom.abel_prym(zeta) - eps(e, p.g_sigma, p.h)
    return _reduced_norm(v, geom.prym_lattice)


def fay_offset(geom: PrymGeometry, e, zeta: Divisor | None = None):
    """Ab(zeta) - phi(e), reduced; constant in e by the Fay theorem."""
    zeta = zeta if zeta is not None else zeros_of_F_e(geom, e)
    p = geom.periods
    return reduce_mod_lattice(geom.abel(zeta) - phi(e, p.g_sigma, p.h), geom.jac_lattice)[0]


# ----------------------------------------------------------------------- VN2
@dataclass
class VN2Result:
    holds: bool
    values: list  # (f(Q'_j), f(Q''_j)) per j >= 1
    defect: complex
    single_valued_residual: float


def _vn2_log_f(geom, P, e, e0, loops=()):
    A = geom.abel_prym_point(P, loops)
    t = geom.theta
    return (t.log_theta(A - e) + t.log_theta(A + e) - t.log_theta(A - e0) - t.log_theta(A + e0))


def vn2_defect(geom: PrymGeometry, e, e0):
    """f(Q'_1)/f(Q''_1) - 1 for f = theta(A-e)theta(A+e) / theta(A-e0)theta(A+e0)."""
    pairs = geom.curve.ramification_pairs()[1:]
    if not pairs:
        return 0j
    Qp, Qpp = pairs[0]
    return complex(np.expm1(_vn2_log_f(geom, Qp, e, e0) - _vn2_log_f(geom, Qpp, e, e0)))


def check_vn2(geom: PrymGeometry, zeta: Divisor, e, e0=None, rtol=1e-6):
    """VN2 through the theta quotient with reference point ``e0``.

    Single-valuedness is checked by appending each b-cycle to the path of a
    probe point; a failure raises :class:`NotSingleValued`.
    """
    c = geom.curve
    pairs = c.ramification_pairs()[1:]
    e = np.asarray(e, dtype=complex)
    e0 = np.zeros(c.h, dtype=complex) + 0.21 - 0.13j if e0 is None else np.asarray(e0)
    probe = c.point(0.61 + 0.37j, sheet=1)
    base = _vn2_log_f(geom, probe, e, e0)
    worst = 0.0
    cyc = geom.periods.cycles
    for i in range(1, c.g + 1):
        loop = cyc.cycle_path("b", i)
        val = _vn2_log_f(geom, probe, e, e0, loops=(loop,))
        d = val - base
        d = d - 2j * np.pi * np.round(d.imag / (2 * np.pi))
        worst = max(worst, abs(d))
    if worst > 1e-6:
        raise NotSingleValued(f"theta quotient changes by {worst:.3e} along a b-cycle")
    if zeta.degree != 2 * c.h:
        raise ValueError("VN2 check expects a degree-2h divisor")
    values = []
    for Qp, Qpp in pairs:
        fp = np.exp(_vn2_log_f(geom, Qp, e, e0))
        fpp = np.exp(_vn2_log_f(geom, Qpp, e, e0))
        values.append((complex(fp), complex(fpp)))
    if not values:
        return VN2Result(True, [], 0j, worst)
    fp, fpp = values[0]
    defect = (fp - fpp) / max(abs(fp), abs(fpp))
    return VN2Result(bool(abs(defect) < rtol), values, complex(defect), worst)


def bisect_vn_point(geom: PrymGeometry, e_a, e_b, e0, tol=1e-10, max_iter=200):
    """Bisect Re(defect) along e_a -> e_b; returns (e, |defect|) or None if no sign change."""
    e_a = np.asarray(e_a, dtype=complex)
    e_b = np.asarray(e_b, dtype=complex)
    fa = vn2_defect(geom, e_a, e0).real
    fb = vn2_defect(geom, e_b, e0).real
    if fa == 0:
        return e_a, abs(vn2_defect(geom, e_a, e0))
    if np.sign(fa) == np.sign(fb):
        return None
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = vn2_defect(geom, e_a + mid * (e_b - e_a), e0).real
        if np.sign(fm) == np.sign(fa):
            lo, fa = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    e = e_a + 0.5 * (lo + hi) * (e_b - e_a)
    return e, abs(vn2_defect(geom, e, e0))


def vn_rank_check(geom: PrymGeometry, e0_point, e_ref, step=1e-4, rel_tol=1e-6):
    """Numerical rank of the Jacobian of e -> VN2 defects at ``e0_point``.

    The defect is holomorphic in e, so the real 2k x 2h central-difference
    Jacobian has even rank; singular values above ``rel_tol`` are counted and
    the result is returned in complex units.  Raises :class:`RankDeficient`
    if the rank is below k.
    """
    c = geom.curve
    k = c.k
    if k == 0:
        return 0
    e0_point = np.asarray(e0_point, dtype=complex)
    cols = []
    for i in range(c.h):
        for unit in (1.0, 1j):
            d = np.zeros(c.h, dtype=complex)
            d[i] = unit * step
            der = (vn2_defect(geom, e0_point + d, e_ref) - vn2_defect(geom, e0_point - d, e_ref)) / (2 * step)
            cols.append([der.real, der.imag])
    sv = np.linalg.svd(np.array(cols).T, compute_uv=False)
    rank = (int(np.sum(sv > rel_tol)) + 1) // 2
    if rank < k:
        raise RankDeficient(f"VN2 defect map has rank {rank} < k = {k}", rank, sv)
    return rank
