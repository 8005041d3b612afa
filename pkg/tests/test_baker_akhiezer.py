import numpy as np
import pytest

from prymlab.baker_akhiezer import (
    LocalSamples,
    ZGrid,
    build_config,
    condition4_residuals,
    conjecture_check,
    derive_U,
    expansion_coefficients,
    log_psi_callable,
    partial_divisors,
    path_independence,
    point_data,
    potential_theta,
    psi_assembled,
    psi_hat_rep,
    psi_two_involution,
    random_divisor,
    representation,
    solve_c,
    solve_schrodinger,
    z_candidates,
)
from prymlab.errors import SingularAtZ
from prymlab.prym import Divisor

# b-period cancellation vectors for the default test curves (regression values)
U_REF = {"A": [-1.19814023], "B": [-1.88763307, -1.49746255]}


@pytest.fixture(scope="module")
def cfg_a(geom_a):
    return build_config(geom_a, np.array([0.3 - 0.2j]))


@pytest.fixture(scope="module")
def cfg_b(geom_b):
    return build_config(geom_b, np.full(2, 0.3 - 0.2j))


def _points(c, rng, n):
    out = []
    while len(out) < n:
        x = complex(*rng.uniform(-2.5, 2.5, 2))
        if np.min(np.abs(c.branch_points - x)) > 0.3:
            out.append((c.point(x, sheet=rng.choice([1, -1])), complex(*rng.uniform(-0.5, 0.5, 2))))
    return out


def test_U_vectors(geom):
    U1, U2, res = derive_U(geom)
    assert res < 1e-10
    # Omega_1 - Omega_2 = dx is exact, so both vectors coincide
    assert np.allclose(U1, U2, atol=1e-10)
    ref = U_REF[geom.curve.spec.family]
    assert np.allclose(U1.real, ref, atol=1e-7) and np.max(np.abs(U1.imag)) < 1e-10


def test_partial_divisors(cfg_b):
    parts = partial_divisors(cfg_b.zeta, 3, 1)
    assert [D.degree for D in parts] == [3, 3]
    with pytest.raises(ValueError):
        partial_divisors(Divisor.from_points(cfg_b.zeta.points[:1]), 3, 1)


def test_build_config_validation(geom_a):
    with pytest.raises(ValueError):
        build_config(geom_a)
    with pytest.raises(ValueError):
        build_config(geom_a, np.array([0.1j]), mode="other")
    c = geom_a.curve
    with pytest.raises(ValueError):
        build_config(geom_a, zeta=Divisor.from_points([c.point(0.5)]))


def test_normalization_at_infinity(cfg_a, cfg_b):
    z = np.array([0.1 + 0.05j, -0.2 + 0.1j])
    for cfg, name, m, sign in ((cfg_a, "two_involution", 0, 1), (cfg_b, "assembled", 0, 1),
                               (cfg_b, "two_involution", 0, 1), (cfg_b, "two_involution", 1, -1)):
        lp = log_psi_callable(cfg, name, m)
        c1 = expansion_coefficients(lp, LocalSamples(cfg, 1), z)
        c2 = expansion_coefficients(lp, LocalSamples(cfg, 2), z)
        assert np.allclose(c1[:, 0], 1, atol=1e-9)
        assert np.allclose(c2[:, 0], sign, atol=1e-9)


def test_solve_c_sums_to_one(cfg_b):
    c = solve_c(np.array([0.1, 0.2 + 0.1j]), cfg_b)
    assert np.allclose(c.sum(axis=-1), 1)


def test_literal_mode_is_singular(geom_b):
    cfg = build_config(geom_b, np.full(2, 0.3 - 0.2j), mode="literal")
    with pytest.raises(SingularAtZ):
        solve_c(0.1 + 0.05j, cfg)


def test_assembled_equals_theta_form(cfg_a, cfg_b, rng):
    for cfg in (cfg_a, cfg_b):
        for P, z in _points(cfg.geom.curve, rng, 5):
            a = psi_assembled(P, z, cfg)
            b = psi_two_involution(P, z, 0, cfg)
            assert abs(a - b) < 1e-9 * abs(a)


def test_condition4_and_sign(cfg_b):
    zs = [0.1, -0.3 + 0.2j]
    assert max(condition4_residuals(cfg_b, representation(cfg_b, "assembled"), zs)) < 1e-8
    assert max(condition4_residuals(cfg_b, representation(cfg_b, "two_involution", 0), zs)) < 1e-8
    Qp, Qpp = cfg_b.geom.curve.ramification_pairs()[1]
    for z in zs:
        r = psi_two_involution(Qpp, z, 1, cfg_b) / psi_two_involution(Qp, z, 1, cfg_b)
        assert abs(r + 1) < 1e-9


def test_path_independence(cfg_b, rng):
    P, z = _points(cfg_b.geom.curve, rng, 1)[0]
    for name, m in (("assembled", 0), ("two_involution", 0), ("two_involution", 1)):
        assert path_independence(cfg_b, representation(cfg_b, name, m), P, z) < 1e-8
        assert path_independence(cfg_b, representation(cfg_b, name, m), P, z, "a") < 1e-8


def test_index_rejection(cfg_a, cfg_b):
    P = cfg_b.geom.curve.point(0.5 + 0.5j)
    with pytest.raises(ValueError):
        psi_two_involution(P, 0.1, 2, cfg_b)
    with pytest.raises(ValueError):
        psi_two_involution(P, 0.1, 1, cfg_a)
    with pytest.raises(ValueError):
        psi_hat_rep(P, 0.1, 0, 1, cfg_b)
    with pytest.raises(ValueError):
        representation(cfg_b, "nope")


def test_z_candidates(cfg_b):
    zc = z_candidates(cfg_b)
    assert np.allclose(zc["-e+2pi*i*beta"] - zc["-e"], [0, 1j * np.pi])


def test_schrodinger_family_a_small_grid(cfg_a):
    sol = solve_schrodinger(cfg_a, "two_involution", 0, ZGrid(n=7, extent=0.1), order_check=False)
    assert sol.residual.relative < 1e-5
    assert sol.summary["xi_agreement"]["matching_variant"] == "-dbar xi1"
    rows = list(sol.csv_rows())
    assert len(rows) == 49 and len(rows[0]) == 7


def test_potential_depends_on_re_z_only(cfg_b):
    zs = np.array([[0.1 + 0.0j, 0.1 + 0.2j, 0.1 - 0.3j]])
    u = potential_theta(zs, -cfg_b.e, cfg_b, 1e-3)
    assert np.allclose(u, u[0, 0], atol=1e-6)


def test_conjecture_plain_theta(cfg_a):
    # m = 0 ansatz with geometric parameters solves the equation
    P = cfg_a.geom.curve.point(0.7 + 0.4j)
    d = point_data(cfg_a, P)
    zs = ZGrid(n=5, extent=0.05).values
    rep = conjecture_check(cfg_a.theta, d.A, cfg_a.U1, cfg_a.U2, d.om[0], d.om[1], -cfg_a.e,
                           zs, 1e-3, m=0)
    assert rep["relative_residual"] < 1e-5


def test_negative_control_fails(geom_a, cfg_a):
    rng = np.random.default_rng(7)
    bad = build_config(geom_a, zeta=random_divisor(geom_a, 2, rng), kappa=cfg_a.kappa)
    sol = solve_schrodinger(bad, "assembled", 0, ZGrid(n=7, extent=0.1), u_source="-dbar xi1",
                            order_check=False)
    assert sol.residual.relative > 1e-2
