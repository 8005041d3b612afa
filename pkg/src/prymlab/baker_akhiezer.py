"""Normalized Baker-Akhiezer function: theta representations, potentials, residuals.

All representations at a point P are evaluated from one raw-integral vector
r(P) along :meth:`Curve.route`, so A(P), Ab(P) and the exponents
int^P Omega_1, int^P Omega_2 always share a path.  Values are assembled in
logarithmic form and exponentiated once, which keeps the exponential factor
and the theta quotients from overflowing separately.

Representations
---------------
``assembled``
    sum_j c_j psi_j with c_j from :func:`solve_c` (the degree-g building
    blocks psi_j; see :class:`BAConfig` for the two readings).
``hat``
    psi_hat_rep: theta-hat_m in the two z-dependent factors, e_j = A(zeta_j).
``two_involution``
    theta-hat_m(A(P) + W - e) theta(e) / (theta(A(P) - e) theta-hat_m(W - e))
    times the exponential, with W = U1 z + U2 zbar.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curve import SurfacePoint, local_expansion
from .errors import (
    CancellationUnsolvable,
    ExpansionFailed,
    FitIllConditioned,
    NearThetaDivisor,
    SingularAtZ,
)
from .numerics import stencil_offsets, wirtinger_laplacian
from .prym import AbelState, Divisor, PrymGeometry, riemann_constant, zeros_of_F_e
from .theta import ThetaContext, characteristic

NEAR_DIVISOR = 1e-10
MAX_COND = 1e12


# ------------------------------------------------------------ U1, U2 and V1, V2
def _cancellation(cycles_raw, shift_coeffs, lattice, omega_coeffs, int_tol=1e-6, tol=1e-8):
    """Solve M^T U = oint Omega over every cycle.

    ``cycles_raw`` holds raw integrals over the cycles; the shift of the map
    ``shift_coeffs . raw`` over a cycle has lattice coordinates whose period
    part M must be integral.  Returns (U1, U2, relative residual).
    """
    n = shift_coeffs.shape[0]
    rows, rhs = [], []
    for r in cycles_raw:
        coords = lattice.coordinates(shift_coeffs @ r)
        M = coords[n:]
        if np.max(np.abs(coords - np.round(coords))) > int_tol:
            raise CancellationUnsolvable("cycle shift is not a lattice vector")
        rows.append(np.round(M))
        rhs.append(omega_coeffs @ r)
    Mx = np.array(rows, dtype=float)
    T = np.array(rhs)
    U, *_ = np.linalg.lstsq(Mx.astype(complex), T, rcond=None)
    scale = max(1.0, float(np.max(np.abs(T))))
    resid = float(np.max(np.abs(Mx @ U - T))) / scale
    if resid > tol:
        raise CancellationUnsolvable(f"cancellation system inconsistent, residual {resid:.3e}")
    return U[:, 0], U[:, 1], resid


def derive_U(geom: PrymGeometry):
    """Prym vectors (U1, U2) cancelling the exponential's b-period factors."""
    p = geom.periods
    cyc = np.vstack([p.cycles.a_raw, p.cycles.b_raw])
    return _cancellation(cyc, p.prym_coeffs, geom.prym_lattice, p.omega_coeffs)


def derive_V(geom: PrymGeometry):
    """Jacobian analogue of :func:`derive_U` (b-periods of Omega_1, Omega_2)."""
    p = geom.periods
    cyc = np.vstack([p.cycles.a_raw, p.cycles.b_raw])
    return _cancellation(cyc, p.jac_coeffs, geom.jac_lattice, p.omega_coeffs)


# --------------------------------------------------------------------- config
def partial_divisors(zeta: Divisor, g, k):
    """zeta_j = P_1 + ... + P_{g-1} + P_{g+j}, j = 0..k."""
    pts = zeta.expanded()
    if len(pts) < g + k:
        raise ValueError(f"divisor of degree {len(pts)} is too small for g + k = {g + k}")
    head = list(pts[: g - 1])
    return [Divisor.from_points(head + [pts[g - 1 + j]]) for j in range(k + 1)]


@dataclass
class BAConfig:
    """Everything the representations need, fixed once per divisor.

    ``mode`` selects the reading of the degree-g blocks psi_j:
    ``"jacobian"`` uses the Jacobian theta with E_j = Ab(zeta_j) + kappa and
    V = b-periods of Omega (a genuine function with poles zeta_j);
    ``"literal"`` uses the Prym theta with e_j = A(zeta_j) and U.
    """

    geom: PrymGeometry
    zeta: Divisor
    e: np.ndarray | None
    U1: np.ndarray
    U2: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    parts: list
    e_parts: list
    E_parts: list
    kappa: np.ndarray | None
    mode: str = "jacobian"
    u_residual: float = 0.0

    @property
    def k(self):
        return self.geom.curve.k

    @property
    def h(self):
        return self.geom.curve.h

    @property
    def g(self):
        return self.geom.curve.g

    @property
    def theta(self) -> ThetaContext:
        return self.geom.theta


def build_config(geom: PrymGeometry, e=None, zeta: Divisor | None = None, mode="jacobian",
                 kappa=None):
    """Config for zeta = div F_e (``e`` given) or for an explicit divisor ``zeta``."""
    if mode not in ("jacobian", "literal"):
        raise ValueError(f"unknown mode {mode!r}")
    c = geom.curve
    if zeta is None:
        if e is None:
            raise ValueError("need e or zeta")
        e = np.asarray(e, dtype=complex)
        zeta = zeros_of_F_e(geom, e)
    if zeta.degree != 2 * c.h:
        raise ValueError(f"divisor degree {zeta.degree} != 2h = {2 * c.h}")
    U1, U2, res = derive_U(geom)
    V1, V2, _ = derive_V(geom)
    parts = partial_divisors(zeta, c.g, c.k)
    e_parts = [geom.abel_prym(D) for D in parts]
    E_parts = []
    if mode == "jacobian":
        if kappa is None:
            kappa = riemann_constant(geom)
        E_parts = [geom.abel(D) + kappa for D in parts]
    return BAConfig(geom, zeta, e, U1, U2, V1, V2, parts, e_parts, E_parts, kappa, mode, res)


# ---------------------------------------------------------------- point data
@dataclass(frozen=True)
class PointData:
    """A(P), Ab(P) and (int^P Omega_1, int^P Omega_2) along one path."""

    A: np.ndarray
    Ab: np.ndarray
    om: np.ndarray

    @classmethod
    def from_raw(cls, geom: PrymGeometry, raw):
        p = geom.periods
        return cls(p.prym_coeffs @ raw, p.jac_coeffs @ raw, p.omega_coeffs @ raw)


def point_data(cfg_or_geom, P: SurfacePoint, loops=()):
    geom = cfg_or_geom.geom if isinstance(cfg_or_geom, BAConfig) else cfg_or_geom
    return PointData.from_raw(geom, geom.raw(P, loops))


def _data(cfg, P, loops):
    return P if isinstance(P, PointData) else point_data(cfg, P, loops)


def _guard(ctx, args, m, what):
    if np.min(np.atleast_1d(ctx.relative_size(args, m))) < NEAR_DIVISOR:
        raise NearThetaDivisor(f"theta nearly vanishes at {what}")


def _log_quotient(ctx, X, W, e, m=0, check=True):
    """log of theta_m(X + W - e) theta(e) / (theta(X - e) theta_m(W - e))."""
    e = np.asarray(e, dtype=complex)
    W = np.asarray(W, dtype=complex)
    if check:
        _guard(ctx, X - e, 0, "the pole factor")
        _guard(ctx, W - e, m, "the z-dependent denominator")
    return (ctx.log_theta(X + W - e, m) + ctx.log_theta(e) - ctx.log_theta(X - e)
            - ctx.log_theta(W - e, m))


def _w(U1, U2, z):
    z = np.asarray(z, dtype=complex)
    return np.multiply.outer(z, U1) + np.multiply.outer(np.conj(z), U2)


def _expo(d: PointData, z):
    z = np.asarray(z, dtype=complex)
    return z * d.om[0] + np.conj(z) * d.om[1]


# ---------------------------------------------------------- representations
def log_psi_j(P, z, j, cfg: BAConfig, loops=(), check=True):
    d = _data(cfg, P, loops)
    if cfg.mode == "jacobian":
        ctx = cfg.geom.jac_theta
        q = _log_quotient(ctx, d.Ab, _w(cfg.V1, cfg.V2, z), cfg.E_parts[j], 0, check)
    else:
        q = _log_quotient(cfg.theta, d.A, _w(cfg.U1, cfg.U2, z), cfg.e_parts[j], 0, check)
    return q + _expo(d, z)


def psi_j(P, z, j, cfg: BAConfig, loops=()):
    """Degree-g building block psi_j (pole divisor zeta_j in jacobian mode)."""
    return np.exp(log_psi_j(P, z, j, cfg, loops))


def _c_system(z, cfg: BAConfig, data_pairs):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    k = cfg.k
    M = np.zeros(z.shape + (k + 1, k + 1), dtype=complex)
    M[..., 0, :] = 1.0
    for s, (dp, dpp) in enumerate(data_pairs, start=1):
        for j in range(k + 1):
            M[..., s, j] = (np.exp(log_psi_j(dp, z, j, cfg))
                            - np.exp(log_psi_j(dpp, z, j, cfg)))
    return M


def _pair_data(cfg: BAConfig):
    pairs = cfg.geom.curve.ramification_pairs()[1:]
    return [(point_data(cfg, a), point_data(cfg, b)) for a, b in pairs]


def solve_c(z, cfg: BAConfig, data_pairs=None, exclude=False):
    """c_j from sum c_j = 1 and the k matching conditions at (Q'_s, Q''_s).

    ``z`` may be an array; with ``exclude=True`` degenerate points get NaN
    coefficients instead of raising :class:`SingularAtZ`.
    """
    scalar = np.ndim(z) == 0
    if cfg.k == 0:
        out = np.ones(np.shape(z) + (1,), dtype=complex)
        return out
    data_pairs = data_pairs if data_pairs is not None else _pair_data(cfg)
    M = _c_system(z, cfg, data_pairs)
    rhs = np.zeros(M.shape[:-1], dtype=complex)
    rhs[..., 0] = 1.0
    cond = np.linalg.cond(M)
    bad = ~np.isfinite(cond) | (cond > MAX_COND)
    if np.any(bad) and not exclude:
        raise SingularAtZ(f"c-system condition number {np.max(cond):.3e}")
    Msafe = np.where(bad[..., None, None], np.eye(cfg.k + 1), M)
    c = np.linalg.solve(Msafe, rhs[..., None])[..., 0]
    c[bad] = np.nan
    return c[0] if scalar else c.reshape(np.shape(z) + (cfg.k + 1,))


def psi_assembled(P, z, cfg: BAConfig, loops=(), c=None):
    """sum_j c_j psi_j."""
    d = _data(cfg, P, loops)
    c = solve_c(z, cfg) if c is None else c
    vals = np.stack([np.exp(log_psi_j(d, z, j, cfg)) for j in range(cfg.k + 1)], axis=-1)
    return np.sum(c * vals, axis=-1)


def psi_hat_rep(P, z, m, j, cfg: BAConfig, loops=()):
    """theta-hat_m form of psi_j with e_j = A(zeta_j); requires 1 <= m, j <= k."""
    k = cfg.k
    if not 1 <= m <= k:
        raise ValueError(f"characteristic index m={m} outside 1..k={k}")
    if not 1 <= j <= k:
        raise ValueError(f"block index j={j} outside 1..k={k}")
    d = _data(cfg, P, loops)
    q = _log_quotient(cfg.theta, d.A, _w(cfg.U1, cfg.U2, z), cfg.e_parts[j], m)
    return np.exp(q + _expo(d, z))


def log_psi_two_involution(P, z, m, cfg: BAConfig, loops=(), e=None, check=True):
    if not 0 <= m <= cfg.k:
        raise ValueError(f"characteristic index m={m} outside 0..k={cfg.k}")
    e = cfg.e if e is None else np.asarray(e, dtype=complex)
    if e is None:
        raise ValueError("the two-involution form needs the theta parameter e")
    d = _data(cfg, P, loops)
    return _log_quotient(cfg.theta, d.A, _w(cfg.U1, cfg.U2, z), e, m, check) + _expo(d, z)


def psi_two_involution(P, z, m, cfg: BAConfig, loops=(), e=None):
    """theta-hat_m(A(P) + W - e) theta(e) / (theta(A(P) - e) theta-hat_m(W - e)) exp(...)."""
    return np.exp(log_psi_two_involution(P, z, m, cfg, loops, e))


def representation(cfg: BAConfig, name, m=0, j=1):
    """Callable (P, z, loops) -> psi for a named representation."""
    if name == "assembled":
        return lambda P, z, loops=(): psi_assembled(P, z, cfg, loops)
    if name == "hat":
        return lambda P, z, loops=(): psi_hat_rep(P, z, m, j, cfg, loops)
    if name == "two_involution":
        return lambda P, z, loops=(): psi_two_involution(P, z, m, cfg, loops)
    if name == "block":
        return lambda P, z, loops=(): psi_j(P, z, j, cfg, loops)
    raise ValueError(f"unknown representation {name!r}")


def condition4_residuals(cfg: BAConfig, psi, zs):
    """max_z |psi(Q'_s) - psi(Q''_s)| / max(|psi|) for s = 1..k."""
    out = []
    for a, b in cfg.geom.curve.ramification_pairs()[1:]:
        worst = 0.0
        for z in np.atleast_1d(zs):
            pa, pb = psi(a, z), psi(b, z)
            worst = max(worst, float(abs(pa - pb) / max(abs(pa), abs(pb), 1e-300)))
        out.append(worst)
    return out


def path_independence(cfg: BAConfig, psi, P, z, kind="b"):
    """Largest relative change of psi(P, z) when a cycle of ``kind`` is appended."""
    cyc = cfg.geom.periods.cycles
    ref = psi(P, z)
    worst = 0.0
    for i in range(1, cfg.g + 1):
        loop = cyc.cycle_path(kind, i)
        val = psi(P, z, (loop,))
        worst = max(worst, float(abs(val - ref) / abs(ref)))
    return worst


# ------------------------------------------------------------ local expansions
class LocalSamples:
    """Point data on the circle |w| = r around Q'_0 (which=1) or Q''_0 (which=2)."""

    def __init__(self, cfg: BAConfig, which=1, r=1e-2, n=16):
        geom = cfg.geom
        c = geom.curve
        self.which, self.r, self.n = which, r, n
        self.w = r * np.exp(2j * np.pi * np.arange(n) / n)
        if which == 1:
            origin = AbelState(c.inf_plus(), np.zeros(c.g + 2, dtype=complex))
        else:
            origin = AbelState(c.inf_minus(), geom.raw(c.inf_minus()).copy())
        self.data = []
        for w in self.w:
            st = geom.advance(origin, c.local_point(which, w).v)
            self.data.append(PointData.from_raw(geom, st.raw))


def expansion_coefficients(log_psi, samples: LocalSamples, z, order=6, tol=1e-8):
    """Taylor coefficients of psi exp(-z/w_1) (or exp(-zbar/w_2) at Q''_0) in w.

    ``log_psi(data, z)`` returns log psi for an array of z.  Returns an
    array of shape z.shape + (order + 1,).
    """
    z = np.asarray(z, dtype=complex)
    lam = z if samples.which == 1 else np.conj(z)
    vals = np.stack([np.exp(log_psi(d, z) - lam / w) for d, w in zip(samples.data, samples.w)],
                    axis=-1)
    flat = vals.reshape(-1, samples.n)
    try:
        coeffs = local_expansion(lambda _w: flat.T, order, samples.r, samples.n, tol)
    except FitIllConditioned as exc:
        raise ExpansionFailed(str(exc)) from exc
    return coeffs.T.reshape(z.shape + (order + 1,))


def log_psi_callable(cfg: BAConfig, name, m=0, j=1):
    """log psi(data, z) for array z; 'assembled' solves c_j per z."""
    if name == "two_involution":
        return lambda d, z: log_psi_two_involution(d, z, m, cfg, check=False)
    if name == "block":
        return lambda d, z: log_psi_j(d, z, j, cfg, check=False)
    if name == "assembled":
        pairs = _pair_data(cfg) if cfg.k else []
        cache = {}

        def f(d, z):
            key = np.asarray(z).tobytes()
            if key not in cache:
                cache[key] = solve_c(z, cfg, pairs, exclude=True)
            c = cache[key]
            vals = np.stack([np.exp(log_psi_j(d, z, jj, cfg, check=False))
                             for jj in range(cfg.k + 1)], axis=-1)
            return np.log(np.sum(c * vals, axis=-1))

        return f
    if name == "hat":
        def g(d, z):
            return np.log(psi_hat_rep(d, z, m, j, cfg))
        return g
    raise ValueError(f"unknown representation {name!r}")


# ------------------------------------------------------------------ grids
@dataclass(frozen=True)
class ZGrid:
    """n x n grid of z values centred at ``center`` with half-width ``extent``."""

    center: complex = 0.1 + 0.05j
    extent: float = 0.25
    n: int = 21

    def __post_init__(self):
        if self.n < 3 or self.n % 2 == 0:
            raise ValueError("grid size must be odd and at least 3")

    @property
    def values(self):
        a = np.linspace(-self.extent, self.extent, self.n)
        return self.center + a[:, None] + 1j * a[None, :]

    @property
    def centre_index(self):
        return (self.n // 2, self.n // 2)


def _stencil(zs, step):
    """z-grid with a trailing 3 x 3 stencil."""
    return np.asarray(zs)[..., None, None] + stencil_offsets(step)


def _laplacian(vals, step):
    return wirtinger_laplacian(np.moveaxis(vals, (-2, -1), (0, 1)), step)


def _dbar(vals, step):
    v = np.moveaxis(vals, (-2, -1), (0, 1))
    return 0.25 * ((v[2, 1] - v[0, 1]) + 1j * (v[1, 2] - v[1, 0])) / step


# ---------------------------------------------------------------- potentials
def potential_theta(zs, Z, cfg: BAConfig, step, C=0.0):
    """u = 2 d dbar log theta(U1 z + U2 zbar + Z) + C on the z-array ``zs``."""
    from .theta import log_theta_dd

    dd = log_theta_dd(np.asarray(zs), cfg.U1, cfg.U2, np.asarray(Z), cfg.theta, step)
    return 2 * dd + C


def z_candidates(cfg: BAConfig, e=None):
    """The two shifts -e and -e + 2 pi i beta (beta with one half)."""
    e = cfg.e if e is None else np.asarray(e, dtype=complex)
    beta = characteristic(cfg.h, 1)
    return {"-e": -e, "-e+2pi*i*beta": -e + 2j * np.pi * beta}


def xi1_grid(cfg: BAConfig, log_psi, zs, samples: LocalSamples | None = None):
    samples = samples or LocalSamples(cfg, 1)
    return expansion_coefficients(log_psi, samples, zs, order=6)[..., 1]


def potential_xi(zs, cfg: BAConfig, log_psi, step, samples: LocalSamples | None = None):
    """Both variants -dbar xi_1 and -dbar log xi_1 on the z-array ``zs``."""
    xi = xi1_grid(cfg, log_psi, _stencil(zs, step), samples)
    if np.any(np.abs(xi[..., 1, 1]) < 1e-300):
        raise ExpansionFailed("xi_1 vanishes")
    return {"-dbar xi1": -_dbar(xi, step), "-dbar log xi1": -_dbar(np.log(xi), step)}, xi[..., 1, 1]


# ------------------------------------------------------------- Schrodinger
@dataclass
class ResidualReport:
    relative: float
    per_probe: list
    excluded: int
    total: int
    residual_grid: np.ndarray = field(repr=False)
    psi_grid: np.ndarray = field(repr=False)

    @property
    def excluded_fraction(self):
        return self.excluded / self.total


def _psi_stencils(log_psi, data, zs, step):
    S = _stencil(zs, step)
    with np.errstate(all="ignore"):
        return np.exp(log_psi(data, S))


def schrodinger_residual(log_psi, u, zs, step, probes, max_excluded=0.05):
    """r = d dbar psi + u psi on the grid, per probe point.

    ``probes`` is a list of :class:`PointData`.  Grid points where psi or u
    is not finite are excluded; more than ``max_excluded`` of them raises
    :class:`SingularAtZ`.  ``relative`` is max over probes of
    max|r| / max|psi|.
    """
    zs = np.asarray(zs)
    u = np.asarray(u)
    per, grids, psis = [], [], []
    bad = ~np.isfinite(u)
    for d in probes:
        vals = _psi_stencils(log_psi, d, zs, step)
        lap = _laplacian(vals, step)
        psi = vals[..., 1, 1]
        r = lap + u * psi
        bad = bad | ~np.isfinite(r)
        grids.append(r)
        psis.append(psi)
    excluded = int(np.sum(bad))
    if excluded > max_excluded * bad.size:
        raise SingularAtZ(f"{excluded} of {bad.size} grid points excluded")
    for r, psi in zip(grids, psis):
        per.append(float(np.max(np.abs(r[~bad])) / np.max(np.abs(psi[~bad]))))
    return ResidualReport(max(per), per, excluded, int(bad.size), grids[0], psis[0])


def fit_C(log_psi, u0, z0, step, probe):
    """Scalar C with d dbar psi + (u0 + C) psi = 0 at z0 for the first probe."""
    vals = _psi_stencils(log_psi, probe, np.array([z0]), step)[0]
    return complex(-_laplacian(vals, step) / vals[1, 1] - u0)


def default_probes(cfg: BAConfig):
    c = cfg.geom.curve
    pts = [c.point(0.7 + 0.4j, sheet=1), c.point(-1.3 + 0.8j, sheet=-1), c.point(2.2 - 0.5j, sheet=1)]
    return pts


@dataclass
class BASolution:
    """Grids and summary numbers for one Schrodinger run."""

    z: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    residual: ResidualReport = field(repr=False)
    C: complex = 0j
    Z_choice: str = ""
    xi1: np.ndarray | None = field(default=None, repr=False)
    u_xi: dict | None = field(default=None, repr=False)
    order: float | None = None
    summary: dict = field(default_factory=dict)

    def csv_rows(self):
        """(z_re, z_im, psi_re, psi_im, u_re, u_im, |r|) per grid point, row-major."""
        r = np.abs(self.residual.residual_grid)
        for z, p, u, rr in zip(self.z.ravel(), self.psi.ravel(), self.u.ravel(), r.ravel()):
            yield (z.real, z.imag, p.real, p.imag, u.real, u.imag, rr)


def _theta_potential_run(cfg, log_psi, zs, step, probes, Z_options):
    """Try each Z, fit C at the centre, keep the smallest residual."""
    z0 = zs[zs.shape[0] // 2, zs.shape[1] // 2]
    best = None
    tried = {}
    for name, Z in Z_options.items():
        try:
            u0 = potential_theta(zs, Z, cfg, step)
            u0c = potential_theta(np.array([z0]), Z, cfg, step)[0]
            C = fit_C(log_psi, u0c, z0, step, probes[0])
            rep = schrodinger_residual(log_psi, u0 + C, zs, step, probes)
        except (NearThetaDivisor, SingularAtZ) as exc:
            tried[name] = str(exc)
            continue
        tried[name] = rep.relative
        if best is None or rep.relative < best[3].relative:
            best = (name, C, u0 + C, rep)
    if best is None:
        raise NearThetaDivisor(f"no Z candidate usable: {tried}")
    return best, tried


def solve_schrodinger(cfg: BAConfig, rep="two_involution", m=0, grid: ZGrid | None = None,
                      step=1e-3, probes=None, u_source="theta", with_xi=True, order_check=True,
                      max_excluded=0.05):
    """Full run: psi on the grid, u, residual, optional xi_1 potentials and order.

    ``u_source`` is ``"theta"`` (potential_theta with Z searched and C fitted)
    or one of the xi_1 variants ``"-dbar xi1"`` / ``"-dbar log xi1"``.
    """
    grid = grid or ZGrid()
    zs = grid.values
    log_psi = log_psi_callable(cfg, rep, m)
    probes = [point_data(cfg, P) for P in (probes or default_probes(cfg))]

    def run(step_):
        u_xi = xi = None
        if with_xi or u_source != "theta":
            u_xi, xi = potential_xi(zs, cfg, log_psi, step_)
        if u_source == "theta":
            (zname, C, u, res), tried = _theta_potential_run(cfg, log_psi, zs, step_, probes,
                                                             z_candidates(cfg))
        else:
            u = u_xi[u_source]
            res = schrodinger_residual(log_psi, u, zs, step_, probes, max_excluded)
            zname, C, tried = "", 0j, {}
        return res, u, C, zname, tried, u_xi, xi

    res, u, C, zname, tried, u_xi, xi = run(step)
    order = extrapolated = None
    if order_check:
        res2 = run(step / 2)[0]
        if res2.relative > 0:
            order = float(np.log2(res.relative / res2.relative))
        # Richardson combination of the two second-order residual grids
        rich = (4 * res2.residual_grid - res.residual_grid) / 3
        ok = np.isfinite(rich)
        extrapolated = float(np.max(np.abs(rich[ok])) / np.max(np.abs(res.psi_grid[ok])))
    c = solve_c(zs, cfg, exclude=True) if rep == "assembled" else np.ones(zs.shape + (1,))
    summary = {
        "representation": rep,
        "m": m,
        "mode": cfg.mode,
        "u_source": u_source,
        "relative_residual": res.relative,
        "per_probe": res.per_probe,
        "excluded_points": res.excluded,
        "C": C,
        "Z_choice": zname,
        "Z_candidates": tried,
        "order": order,
        "extrapolated_residual": extrapolated,
        "fd_step": step,
    }
    if u_xi is not None and u_source == "theta":
        summary["xi_agreement"] = xi_agreement(u, u_xi)
    return BASolution(zs, c, res.psi_grid, u, res, C, zname, xi, u_xi, order, summary)


def xi_agreement(u_theta, u_xi: dict):
    """Max deviation of each xi variant from u_theta after removing the mean offset."""
    out = {}
    for name, u in u_xi.items():
        d = u - u_theta
        ok = np.isfinite(d)
        d = d[ok] - np.mean(d[ok])
        out[name] = float(np.max(np.abs(d)))
    best = min(out, key=out.get)
    return {"deviation": out, "matching_variant": best}


# ------------------------------------------------------------- conjecture
def conjecture_check(ctx: ThetaContext, A, U1, U2, p1, p2, Z, zs, step, C=None, m=1,
                     u_Z=None):
    """Residual of (d dbar + u) psi = 0 for the conjectured theta-hat_m ansatz.

    psi = theta-hat_m(A + W + Z) / theta-hat_m(W + Z) exp(p1 z + p2 zbar),
    u = 2 d dbar log theta(W + u_Z) + C with u_Z = Z unless given.  C is
    fitted at the grid centre when None.  Returns a dict report.
    """
    A = np.asarray(A, dtype=complex)
    Z = np.asarray(Z, dtype=complex)
    u_Z = Z if u_Z is None else np.asarray(u_Z, dtype=complex)
    zs = np.asarray(zs)

    def log_psi(_d, z):
        W = _w(U1, U2, z)
        return ctx.log_theta(A + W + Z, m) - ctx.log_theta(W + Z, m) + p1 * z + p2 * np.conj(z)

    from .theta import log_theta_dd

    u0 = 2 * log_theta_dd(zs, U1, U2, u_Z, ctx, step)
    z0 = zs[zs.shape[0] // 2, zs.shape[1] // 2]
    if C is None:
        u0c = 2 * log_theta_dd(np.array([z0]), U1, U2, u_Z, ctx, step)[0]
        C = fit_C(log_psi, u0c, z0, step, None)
    res = schrodinger_residual(log_psi, u0 + C, zs, step, [None])
    return {"relative_residual": res.relative, "C": complex(C), "excluded_points": res.excluded}


def conjecture_from_geometry(cfg: BAConfig, P, zs, step, m=1, Z=None, u_Z=None):
    """Geometric parameters A = A(P), p = int^P Omega, Z = -e."""
    d = point_data(cfg, P)
    Z = -cfg.e if Z is None else Z
    return conjecture_check(cfg.theta, d.A, cfg.U1, cfg.U2, d.om[0], d.om[1], Z, zs, step,
                            m=m, u_Z=u_Z)


# ------------------------------------------------------------ random divisors
def random_divisor(geom: PrymGeometry, degree, rng):
    """``degree`` random finite points (both sheets) in a disc of radius 2."""
    c = geom.curve
    pts = []
    while len(pts) < degree:
        x = complex(rng.uniform(-2, 2), rng.uniform(-1.5, 1.5))
        if np.min(np.abs(c.branch_points - x)) < 0.2:
            continue
        pts.append(c.point(x, sheet=1 if rng.random() < 0.5 else -1))
    return Divisor.from_points(pts)
