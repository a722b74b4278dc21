import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from anisolap.energy import (
    SingularHessian,
    hessian,
    j_lambda,
    phi_psi,
    strong_residual,
    verify_coercivity,
    weak_gradient,
)
from anisolap.gallery import make_instance
from anisolap.problem import ExponentMap, StateVector

from .conftest import instance_and_state, random_instance, random_state


def _fd_gradient(inst, u, h=1e-6):
    x = u.interior
    out = np.empty(inst.T)
    for k in range(inst.T):
        e = np.zeros(inst.T)
        e[k] = h
        jp = j_lambda(inst, StateVector.from_interior(x + e))
        jm = j_lambda(inst, StateVector.from_interior(x - e))
        out[k] = (jp - jm) / (2 * h)
    return out


def _fd_jacobian(inst, u, h=1e-6):
    x = u.interior
    cols = []
    for k in range(inst.T):
        e = np.zeros(inst.T)
        e[k] = h
        gp = weak_gradient(inst, StateVector.from_interior(x + e))
        gm = weak_gradient(inst, StateVector.from_interior(x - e))
        cols.append((gp - gm) / (2 * h))
    return np.array(cols).T


def test_zero_state_energies():
    e = phi_psi(make_instance("linear", 3), StateVector.zeros(3))
    assert (e.phi, e.psi, e.j_lambda) == (0, 0, 0)


def test_phi_p2_hand_value():
    inst = make_instance("linear", 2, p=2.0)
    assert phi_psi(inst, StateVector(np.array([0.0, 1, 1, 0]))).phi == pytest.approx(1.0)


def test_phi_variable_exponent_hand_value():
    inst = make_instance("linear", 2, exponents=ExponentMap((3, 2, 3, 2)))
    assert phi_psi(inst, StateVector(np.array([0.0, 1, 1, 0]))).phi == pytest.approx(2 / 3)


def test_gradient_zero_at_zero_when_f_vanishes():
    inst = make_instance("power", 4, q=3.0)
    assert np.all(weak_gradient(inst, StateVector.zeros(4)) == 0)


def test_gradient_p2_is_second_difference(rng):
    inst = make_instance("polynomial", 6, lam=0.7, coefficients=(0.3, -1.0, 0.5))
    u = random_state(rng, 6)
    v = u.values
    f = 0.3 - v[1:-1] + 0.5 * v[1:-1] ** 2
    expected = -v[:-2] + 2 * v[1:-1] - v[2:] - 0.7 * f
    assert np.allclose(weak_gradient(inst, u), expected, atol=1e-13)


def test_residual_vanishes_at_parabola():
    T = 9
    inst = make_instance("linear", T)
    k = np.arange(T + 2)
    u = StateVector(k * (T + 1 - k) / 2.0)
    assert np.max(np.abs(strong_residual(inst, u))) <= 1e-12


def test_residual_at_zero():
    inst = make_instance("linear", 4, lam=2.5, value=1.5)
    assert np.allclose(strong_residual(inst, StateVector.zeros(4)), -3.75)


def test_hessian_discrete_laplacian():
    inst = make_instance("linear", 4, value=0.0)
    H = hessian(inst, StateVector.zeros(4))
    L = 2 * np.eye(4) - np.eye(4, k=1) - np.eye(4, k=-1)
    assert np.array_equal(H, L)


def test_hessian_p4_hand_value():
    inst = make_instance("linear", 2, lam=1e-300, value=0.0, p=4.0)
    H = hessian(inst, StateVector(np.array([0.0, 1, 1, 0])))
    assert H.tolist() == [[3.0, 0.0], [0.0, 3.0]]


def test_hessian_singular_for_flat_p_below_2():
    inst = make_instance("linear", 3, p=1.5)
    with pytest.raises(SingularHessian):
        hessian(inst, StateVector.zeros(3))
    H = hessian(inst, StateVector.zeros(3), regularize=True)
    assert np.all(np.isfinite(H))


def test_gradient_matches_fd(rng):
    for _ in range(20):
        inst = random_instance(rng)
        u = random_state(rng, inst.T, min_gap=1e-2)
        g = weak_gradient(inst, u)
        fd = _fd_gradient(inst, u)
        assert np.max(np.abs(g - fd)) <= 1e-6 * max(1.0, np.max(np.abs(g)))


def test_hessian_matches_fd_jacobian_p2(rng):
    inst = make_instance("polynomial", 5, coefficients=(1.0, 0.5, -0.2, 0.1))
    u = random_state(rng, 5)
    assert np.allclose(hessian(inst, u), _fd_jacobian(inst, u), atol=1e-6)


def test_mpf_path_agrees_with_float(rng):
    inst = random_instance(rng, T=5)
    u = random_state(rng, 5, min_gap=1e-2)
    um = StateVector.from_interior(np.array([mpmath.mpf(x) for x in u.interior], dtype=object))
    with mpmath.workprec(100):
        gm = weak_gradient(inst, um)
    assert np.allclose(np.array([float(x) for x in gm]), weak_gradient(inst, u), rtol=1e-10, atol=1e-12)


def test_tiny_states_stay_representable():
    inst = make_instance("example_esempio", 2)
    x = mpmath.mpf(2) ** -5000
    e = phi_psi(inst, StateVector.from_interior(np.array([x, x], dtype=object)))
    assert e.phi > 0 and e.psi > 0


def test_coercivity_confirmed():
    rep = verify_coercivity(make_instance("polynomial", 4, coefficients=(1.0, -1.0), p=2.5))
    assert rep.growth_confirmed and rep.monotone_failures == 0


def test_single_difference_growth_rate():
    # u = t e_1 on T=1 has Δu = (t, -t), so Phi = 2 t^p / p
    inst = make_instance("linear", 1, value=0.0, p=3.0)
    for t in (0.5, 2.0, 7.0):
        assert phi_psi(inst, StateVector(np.array([0.0, t, 0.0]))).phi == pytest.approx(2 * t**3 / 3)


@given(instance_and_state())
def test_summation_by_parts(pair):
    inst, u = pair
    g = weak_gradient(inst, u)
    r = strong_residual(inst, u)
    scale = max(1.0, float(np.max(np.abs(g))))
    assert np.max(np.abs(g - r)) <= 1e-12 * scale


@given(instance_and_state(p_min=2.0), st.floats(0.5, 2.0))
def test_phi_nonnegative_and_even(pair, t):
    inst, u = pair
    phi = phi_psi(inst, u).phi
    neg = phi_psi(inst, StateVector(-u.values)).phi
    assert phi >= 0 and phi == pytest.approx(neg, rel=1e-12, abs=1e-300)


@given(instance_and_state(p_min=2.0, bound=2.0))
def test_hessian_symmetric_tridiagonal(pair):
    inst, u = pair
    H = hessian(inst, u)
    assert np.array_equal(H, H.T)
    assume(inst.T > 2)
    assert np.all(np.triu(H, 2) == 0)
