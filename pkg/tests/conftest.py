import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from anisolap.gallery import make_instance
from anisolap.problem import ExponentMap, ProblemInstance, StateVector

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def poly_family(T, coeffs):
    """f_k(t) = sum_i a_i t^i with closed-form F and f' (same on every node)."""
    a = [float(c) for c in coeffs]
    return make_instance("polynomial", T, coefficients=a).nonlinearity


def random_instance(rng, T=None, p_range=(1.5, 4.0), lam=None):
    T = int(rng.integers(2, 21)) if T is None else T
    p = rng.uniform(*p_range, size=T + 2)
    coeffs = rng.normal(size=3)
    nl = poly_family(T, coeffs)
    lam = float(rng.uniform(0.1, 3.0)) if lam is None else lam
    return ProblemInstance(T, ExponentMap(tuple(p)), nl, lam)


def random_state(rng, T, scale=1.0, min_gap=0.0):
    """Interior values with every |Δu| >= min_gap (so p < 2 edges stay smooth)."""
    while True:
        x = rng.normal(scale=scale, size=T)
        u = StateVector.from_interior(x)
        if min_gap == 0 or np.min(np.abs(np.diff(u.values))) >= min_gap:
            return u


@st.composite
def instances(draw, T_max=12, p_min=1.5, p_max=4.0):
    T = draw(st.integers(2, T_max))
    p = draw(st.lists(st.floats(p_min, p_max), min_size=T + 2, max_size=T + 2))
    coeffs = draw(st.lists(st.floats(-2, 2), min_size=1, max_size=4))
    lam = draw(st.floats(0.05, 5.0))
    return ProblemInstance(T, ExponentMap(tuple(p)), poly_family(T, coeffs), lam)


@st.composite
def instance_and_state(draw, T_max=12, p_min=1.5, p_max=4.0, bound=3.0):
    inst = draw(instances(T_max, p_min, p_max))
    x = draw(st.lists(st.floats(-bound, bound), min_size=inst.T, max_size=inst.T))
    return inst, StateVector.from_interior(np.array(x))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def esempio_T2():
    return make_instance("example_esempio", 2, lam=1.0, gamma=3)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
