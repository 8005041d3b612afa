import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from prymlab import Curve, CurveSpec, PrymGeometry, compute_periods

settings.register_profile(
    "prymlab",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("prymlab")

PARAMS = {"A": (1, 2, 3), "B": (1, 2, 3, 4)}


def _geometry(family):
    curve = Curve(CurveSpec(family, PARAMS[family]))
    return PrymGeometry(curve, compute_periods(curve))


@pytest.fixture(scope="session")
def geom_a():
    return _geometry("A")


@pytest.fixture(scope="session")
def geom_b():
    return _geometry("B")


@pytest.fixture(scope="session", params=["A", "B"])
def geom(request, geom_a, geom_b):
    return geom_a if request.param == "A" else geom_b


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_e(rng, h, scale=0.5):
    return scale * (rng.normal(size=h) + 1j * rng.normal(size=h))


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}")
