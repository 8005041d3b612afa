import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from prymlab import ThetaContext
from prymlab.errors import NearThetaDivisor, TruncationOverflow
from prymlab.theta import characteristic, log_theta_dd, theta_hat

PI2 = np.array([[-7.7219 + 0.3j, 3.0459 - 0.1j], [3.0459 - 0.1j, -4.8868 + 0.2j]])
# brute-force sum over |N_i| <= 25 at 30 digits (mpmath)
ORACLE = [
    (np.array([0.3 - 0.2j, -0.7 + 1.1j]), 1.2077904101558044 - 0.12164329625346355j),
    (np.array([2.5 + 0.4j, -1.0 - 0.3j]), 1.6476681372910271 + 0.2658146486754312j),
    (np.array([-4.0 + 3.0j, 1.5 + 0.0j]), -0.16122118123629442 - 0.4303234146533784j),
]

cplx = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


@pytest.fixture(scope="module", params=[True, False], ids=["numba", "numpy"])
def ctx(request):
    return ThetaContext(PI2, use_numba=request.param)


def test_oracle_values(ctx):
    for z, ref in ORACLE:
        assert abs(ctx.theta(z) - ref) / abs(ref) < 1e-12


def test_genus_one_direct_sum():
    ctx = ThetaContext(np.array([[-2 * np.pi + 0j]]))
    direct = math.fsum(math.exp(-math.pi * n * n) for n in range(-30, 31))
    assert abs(ctx.theta(np.zeros(1)) - direct) < 1e-12
    assert abs(direct - math.pi ** 0.25 / math.gamma(0.75)) < 1e-14


@given(z0=cplx, z1=cplx, m0=st.integers(-2, 2), m1=st.integers(-2, 2))
def test_quasiperiodicity(ctx, z0, z1, m0, m1):
    z = np.array([z0, z1])
    M = np.array([m0, m1])
    base = ctx.log_theta(z)
    assert abs(np.exp(ctx.log_theta(z + 2j * np.pi * M) - base) - 1) < 1e-8
    factor = -0.5 * M @ PI2 @ M - M @ z
    assert abs(np.exp(ctx.log_theta(z + PI2 @ M) - base - factor) - 1) < 1e-8


@given(z0=cplx, z1=cplx, m0=st.integers(-2, 2), m1=st.integers(-2, 2), m=st.integers(0, 2))
def test_characteristic_factor(ctx, z0, z1, m0, m1, m):
    z = np.array([z0, z1])
    M = np.array([m0, m1])
    beta = characteristic(2, m)
    extra = np.exp(-2j * np.pi * M @ beta)
    # +-1, and +1 exactly when the M entries in the characteristic block are even
    even = all(M[2 - m:] % 2 == 0) if m else True
    assert abs(extra - (1 if even else -1 if (M[2 - m:].sum() % 2) else 1)) < 1e-12
    lhs = ctx.theta(z + PI2 @ M, m)
    rhs = extra * np.exp(-0.5 * M @ PI2 @ M - M @ z) * ctx.theta(z, m)
    assert abs(lhs - rhs) <= 1e-8 * max(abs(lhs), abs(rhs), 1e-300)


@given(z0=cplx, z1=cplx)
def test_even(ctx, z0, z1):
    z = np.array([z0, z1])
    assert abs(ctx.theta(-z) - ctx.theta(z)) <= 1e-10 * abs(ctx.theta(z))


def test_paths_agree():
    rng = np.random.default_rng(1)
    z = rng.normal(size=(50, 2)) + 1j * rng.normal(size=(50, 2))
    a = ThetaContext(PI2, use_numba=True).log_derivatives(z)
    b = ThetaContext(PI2, use_numba=False).log_derivatives(z)
    for x, y in zip(a, b):
        assert np.allclose(x, y, atol=1e-12, rtol=1e-12)


def test_log_derivatives_match_finite_differences(ctx):
    z = np.array([0.4 - 0.3j, -0.2 + 0.5j])
    _, g, H = ctx.log_derivatives(z)
    h = 1e-5
    for i in range(2):
        d = np.zeros(2, complex)
        d[i] = h
        fd = (ctx.log_theta(z + d) - ctx.log_theta(z - d)) / (2 * h)
        assert abs(fd - g[i]) < 1e-7
        gp = ctx.log_derivatives(z + d)[1]
        gm = ctx.log_derivatives(z - d)[1]
        assert np.allclose((gp - gm) / (2 * h), H[:, i], atol=1e-6)


def test_truncation_converged(ctx):
    z = ORACLE[2][0]
    assert abs(ctx.with_radius(1.5).theta(z) - ctx.theta(z)) < 1e-13 * abs(ctx.theta(z))


def test_truncation_overflow():
    with pytest.raises(TruncationOverflow):
        ThetaContext(PI2, radius_cap=5.0)


def test_theta_hat_rejects_m():
    ctx = ThetaContext(PI2)
    with pytest.raises(ValueError):
        theta_hat(2, np.zeros(2), ctx, k=1)
    with pytest.raises(ValueError):
        theta_hat(-1, np.zeros(2), ctx)


def test_log_theta_dd_linear_argument():
    # log theta(U z + U zbar + Z): the dd-bar derivative equals U^T H U
    ctx = ThetaContext(PI2)
    U = np.array([-1.2, 0.4 + 0j])
    Z = np.array([0.3 + 0.1j, -0.2j])
    z = np.array([0.05 + 0.02j])
    dd = log_theta_dd(z, U, U, Z, ctx, 1e-3)[0]
    W = U * (z[0] + np.conj(z[0])) + Z
    H = ctx.log_derivatives(W)[2]
    assert abs(dd - U @ H @ U) < 1e-5


def test_near_divisor_detected():
    ctx = ThetaContext(np.array([[-2 * np.pi + 0j]]))
    # theta(z) with Pi = -2 pi vanishes at z = i pi - pi
    Z = np.array([1j * np.pi - np.pi])
    with pytest.raises(NearThetaDivisor):
        log_theta_dd(np.array([0j]), np.array([1.0 + 0j]), np.array([0j]), Z, ctx, 1e-3)


def test_disable_numba_env(tmp_path):
    import os
    import subprocess
    import sys

    code = ("import numpy as np; from prymlab import _accel, ThetaContext; "
            "print(_accel.USE_NUMBA, repr(ThetaContext(np.array([[-2*np.pi+0j]])).theta(np.zeros(1))))")
    env = dict(os.environ, PRYMLAB_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.split()
    assert out[0] == "False"
    assert abs(complex(out[1].strip("()")) - math.pi ** 0.25 / math.gamma(0.75)) < 1e-14
