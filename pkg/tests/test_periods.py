import json

import numpy as np
import pytest

from prymlab import Curve, CurveSpec, compute_periods
from prymlab.periods import build_cycles, sigma_relation_residual


def test_normalizations(geom):
    p = geom.periods
    assert np.allclose(p.a_periods(p.jac_coeffs), 2j * np.pi * np.eye(p.g), atol=1e-8)
    prym_a = p.a_periods(p.prym_coeffs)[:, : p.h]
    assert np.allclose(prym_a, 2j * np.pi * np.eye(p.h), atol=1e-8)


def test_riemann_matrices(geom):
    p = geom.periods
    for M in (p.B, p.Pi):
        assert np.max(np.abs(M - M.T)) < 1e-8
        assert np.max(np.linalg.eigvalsh(M.real)) < 0


def test_sigma_relations(geom):
    cyc = geom.periods.cycles
    assert sigma_relation_residual(geom.curve, cyc.a_raw, cyc.b_raw) < 1e-6


def test_prym_forms_odd_over_partner_cycles(geom):
    # a_alpha = -sigma(a_{alpha+h}) and sigma^* omega = -omega give equal periods
    p = geom.periods
    gs, h = p.g_sigma, p.h
    a = p.a_periods(p.prym_coeffs)
    b = p.b_periods(p.prym_coeffs)
    for al in range(gs):
        assert np.allclose(a[:, al + h], a[:, al], atol=1e-8)
        assert np.allclose(b[:, al + h], b[:, al], atol=1e-8)


def test_prym_matrix_block_structure(geom):
    # phi maps the Prym lattice into the Jacobian lattice
    from prymlab.prym import phi_lattice_residuals

    assert np.max(phi_lattice_residuals(geom)) < 1e-8


def test_tau_invariance_of_prym_periods(geom_b):
    # tau^* acts on Prym-odd forms by a sign; periods are unchanged up to that sign
    c = geom_b.curve
    for n in c.prym_indices():
        assert c.tau_parity(n) in (1, -1)
    P = c.point(0.61 + 0.37j)
    A = geom_b.abel_prym_point(P)
    At = geom_b.abel_prym_point(c.tau(P))
    from prymlab.numerics import lattice_distance

    assert lattice_distance(A - At, geom_b.prym_lattice) < 1e-8


def test_second_kind_a_periods_vanish(geom):
    p = geom.periods
    assert np.max(np.abs(p.a_periods(p.omega_coeffs))) < 1e-9


def test_period_report_roundtrip(geom):
    d = json.loads(geom.periods.to_json())
    assert d["g"] == geom.curve.g and len(d["Pi"]) == geom.curve.h


def test_complex_branch_parameters():
    c = Curve(CurveSpec("A", (1 + 0.2j, 2 - 0.1j, 3.5)))
    p = compute_periods(c)
    assert np.max(np.abs(p.B - p.B.T)) < 1e-8
    assert np.max(np.linalg.eigvalsh(p.Pi.real)) < 0


def test_cycles_deterministic():
    c = Curve(CurveSpec("B", (1, 2, 3, 4)))
    a, b = build_cycles(c), build_cycles(c)
    assert np.array_equal(a.a_combo, b.a_combo) and np.array_equal(a.loop_periods, b.loop_periods)
