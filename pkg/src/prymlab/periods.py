"""sigma-adapted homology bases, normalized differentials, B and the Prym matrix.

Cycles are built from rectangles ``L_i`` around consecutive branch points
e_i, e_{i+1} (ordered by real part), each attached to the base junction
x_base by an approach path running above the cuts.  A template per family
picks signed combinations of the ``L_i``; the signs are searched until the
basis is symplectic (symmetric B with negative definite real part) and the
sigma relations

    a_alpha + sigma(a_{alpha+h}) = 0,   a_j + sigma(a_j) = 0   (same for b)

hold at the level of periods.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .curve import Curve, DifferentialForm, Leg, SurfacePath, build_second_kind
from .errors import BasisSearchFailed, SingularSystem


@dataclass
class CycleBasis:
    """Cycles a_1..a_g, b_1..b_g as integer combinations of elementary loops.

    Labels follow the sigma-adapted convention: indices 1..g_sigma are the
    alpha block, g_sigma+1..h the j block, h+1..g the partners a_{alpha+h}.
    """

    loops: list
    loop_periods: np.ndarray  # (2g+1) x (g+2) raw integrals over the loops
    a_combo: np.ndarray  # g x (2g+1) integers
    b_combo: np.ndarray
    sigma_residual: float = 0.0

    @property
    def a_raw(self):
        return self.a_combo @ self.loop_periods

    @property
    def b_raw(self):
        return self.b_combo @ self.loop_periods

    def cycle_path(self, kind, index):
        """Closed path (based at x_base, inf+ sheet) for a_index / b_index (1-based)."""
        combo = (self.a_combo if kind == "a" else self.b_combo)[index - 1]
        legs = []
        for m, c in enumerate(combo):
            loop = self.loops[m]
            for _ in range(abs(int(c))):
                legs += loop.legs if c > 0 else _reverse_closed(loop).legs
        return SurfacePath(self.loops[0].start, legs)


def _reverse_closed(loop: SurfacePath):
    return SurfacePath(loop.start, [Leg(l.chart, l.v1, l.v0) for l in reversed(loop.legs)])


def elementary_loops(curve: Curve):
    """Rectangles around [e_i, e_{i+1}], i = 1..2g+1, traversed counterclockwise."""
    e = curve.branch_points
    n = len(e)
    H = curve._height()
    xb = complex(curve.x_base)
    start = curve.to_chart(curve.continue_y(curve.base_prefix()), "x")
    loops = []
    for i in range(n - 1):
        lo, hi = e[i], e[i + 1]
        gaps = [abs(hi - lo)]
        if i > 0:
            gaps.append(abs(lo - e[i - 1]))
        if i + 2 < n:
            gaps.append(abs(e[i + 2] - hi))
        m = 0.4 * min(gaps)
        left = min(lo.real, hi.real) - m
        right = max(lo.real, hi.real) + m
        bottom = min(lo.imag, hi.imag) - m
        top = max(lo.imag, hi.imag) + m
        for j, r in enumerate(e):
            if j in (i, i + 1):
                continue
            if left - 0.5 * m < r.real < right + 0.5 * m and bottom - 0.5 * m < r.imag < top + 0.5 * m:
                raise BasisSearchFailed("cycle template rectangle contains another branch point")
        mid = 0.5 * (left + right)
        tm = complex(mid, top)
        corners = [tm, complex(left, top), complex(left, bottom),
                   complex(right, bottom), complex(right, top), tm]
        approach = [xb, xb + 1j * H, mid + 1j * H, tm]
        legs = [Leg("x", a, b) for a, b in zip(approach[:-1], approach[1:])]
        legs += [Leg("x", a, b) for a, b in zip(corners[:-1], corners[1:])]
        legs += [Leg("x", b, a) for a, b in reversed(list(zip(approach[:-1], approach[1:])))]
        loops.append(SurfacePath(start, legs))
    return loops


def _templates(family, g):
    """Yield (a_combo, b_combo) candidates for the family's sigma-adapted basis."""
    n = 2 * g + 1
    unit = np.eye(n, dtype=int)
    L = lambda i: unit[i - 1]
    if family == "A":
        for e2, e4, e5 in itertools.product((1, -1), repeat=3):
            a = np.array([L(1), e5 * L(5)])
            b = np.array([e2 * L(2), e4 * L(4)])
            yield a, b
    else:
        # The j-pair is oriented so that the loop around the middle cut pair
        # (L4) is the b-cycle: then the tau-translation P -> tau P shifts the
        # Abel-Prym map by a vector of Z(2 pi i E, Pi) rather than by half
        # an a_j period.
        for e2, e1, e3, e4, e6, e7 in itertools.product((1, -1), repeat=6):
            a = np.array([L(1), e1 * L(1) + e3 * L(3), e7 * L(7)])
            b = np.array([e2 * L(2), e4 * L(4), e6 * L(6)])
            yield a, b


def sigma_relation_residual(curve: Curve, a_raw, b_raw):
    """Max violation of the sigma relations on the holomorphic periods."""
    g, h, gs = curve.g, curve.h, curve.g_sigma
    D = np.array([curve.sigma_parity(n) for n in range(g)])
    worst = 0.0
    for P in (a_raw[:, :g], b_raw[:, :g]):
        scale = np.max(np.abs(P))
        for al in range(gs):
            worst = max(worst, np.max(np.abs(P[al] + D * P[al + h])) / scale)
        for j in range(gs, h):
            worst = max(worst, np.max(np.abs(P[j] + D * P[j])) / scale)
    return float(worst)


def _jacobian_normalization(a_raw, b_raw, g):
    A = a_raw[:, :g]
    if np.linalg.cond(A) > 1e12:
        raise SingularSystem("a-period matrix is singular")
    C = 2j * np.pi * np.linalg.inv(A.T)
    B = C @ b_raw[:, :g].T
    return C, B


def build_cycles(curve: Curve, tol=1e-8):
    """Search the family template for a sigma-adapted symplectic cycle basis."""
    loops = elementary_loops(curve)
    loop_periods = np.array([curve.raw_integrals(l) for l in loops])
    best = None
    for a_combo, b_combo in _templates(curve.spec.family, curve.g):
        a_raw, b_raw = a_combo @ loop_periods, b_combo @ loop_periods
        try:
            _, B = _jacobian_normalization(a_raw, b_raw, curve.g)
        except SingularSystem:
            continue
        sym = np.max(np.abs(B - B.T)) / max(1.0, np.max(np.abs(B)))
        if sym > tol:
            continue
        if np.max(np.linalg.eigvalsh(0.5 * (B.real + B.real.T))) >= 0:
            continue
        res = sigma_relation_residual(curve, a_raw, b_raw)
        if best is None or res < best[0]:
            best = (res, a_combo, b_combo)
    if best is None or best[0] > tol:
        raise BasisSearchFailed("no template sign choice gives a sigma-adapted symplectic basis")
    return CycleBasis(loops, loop_periods, best[1], best[2], best[0])


@dataclass
class PeriodData:
    B: np.ndarray
    Pi: np.ndarray
    jac_coeffs: np.ndarray  # g x (g+2) raw coefficients of normalized forms
    prym_coeffs: np.ndarray  # h x (g+2)
    omega1: DifferentialForm
    omega2: DifferentialForm
    cycles: CycleBasis = field(repr=False)
    g: int = 0
    g_sigma: int = 0
    h: int = 0

    @property
    def omega_coeffs(self):
        return np.array([self.omega1.raw_coefficients(self.g), self.omega2.raw_coefficients(self.g)])

    def a_periods(self, coeffs):
        return np.asarray(coeffs) @ self.cycles.a_raw.T

    def b_periods(self, coeffs):
        return np.asarray(coeffs) @ self.cycles.b_raw.T

    def to_dict(self):
        def cm(M):
            M = np.atleast_2d(M)
            return [[[float(f"{z.real:.17g}"), float(f"{z.imag:.17g}")] for z in row] for row in M]

        return {
            "g": self.g,
            "g_sigma": self.g_sigma,
            "h": self.h,
            "B": cm(self.B),
            "Pi": cm(self.Pi),
            "jacobian_coeffs": cm(self.jac_coeffs),
            "prym_coeffs": cm(self.prym_coeffs),
            "a_combo": self.cycles.a_combo.tolist(),
            "b_combo": self.cycles.b_combo.tolist(),
            "sigma_residual": self.cycles.sigma_residual,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def normalize_differentials(curve: Curve, cycles: CycleBasis):
    """Normalized Jacobian and Prym bases, B, Pi and the second-kind forms."""
    g, h, gs = curve.g, curve.h, curve.g_sigma
    a_raw, b_raw = cycles.a_raw, cycles.b_raw
    C, B = _jacobian_normalization(a_raw, b_raw, g)
    jac = np.zeros((g, g + 2), dtype=complex)
    jac[:, :g] = C

    idx = curve.prym_indices()
    AP = a_raw[:h][:, idx]
    if np.linalg.cond(AP) > 1e12:
        raise SingularSystem("Prym a-period matrix is singular")
    CP = 2j * np.pi * np.linalg.inv(AP.T)
    prym = np.zeros((h, g + 2), dtype=complex)
    prym[:, idx] = CP
    bp = prym @ b_raw[:h].T  # bp[i, c] = oint_{b_c} omega_i
    Pi = bp.copy()
    Pi[:, gs:h] *= 0.5

    om1 = build_second_kind(curve, 1, a_raw)
    om2 = build_second_kind(curve, 2, a_raw)
    return PeriodData(B, Pi, jac, prym, om1, om2, cycles, g, gs, h)


def compute_periods(curve: Curve):
    return normalize_differentials(curve, build_cycles(curve))
