import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from anisolap.gallery import make_instance
from anisolap.problem import ExponentMap, NonlinearityFamily
from anisolap.theory import (
    INF,
    CNotSmallEnough,
    K1Violated,
    NotEven,
    check_sublevel_inclusion,
    embedding_bound_cit,
    embedding_bound_jz,
    envelope_max,
    estimate_A0,
    estimate_B0,
    h0_holds,
    interval_const_p,
    interval_even_T,
    interval_technical,
    interval_thm_main,
    kappa,
    phi_r_upper_bound,
    sublevel_radius,
    theta,
    theta_min,
)


def test_kappa_values():
    assert kappa(ExponentMap((3, 2, 3, 2)), 2) == pytest.approx(8 / 27)
    assert kappa(ExponentMap.constant(2, 2), 2) == pytest.approx(2 / 3)


@pytest.mark.parametrize("p,T", [(1.5, 3), (2.0, 5), (3.3, 8)])
def test_kappa_constant_exponent_reduces(p, T):
    assert kappa(ExponentMap.constant(p, T), T) == pytest.approx(2 ** (p - 1) / (T + 1) ** (p - 1))


def test_embedding_values():
    assert embedding_bound_jz(2, 2) == pytest.approx(math.sqrt(3) / 2)
    assert embedding_bound_jz(1, 2) == pytest.approx(math.sqrt(2) / 2)
    assert embedding_bound_jz(7, 1 + 1e-12) == pytest.approx(0.5)
    assert embedding_bound_cit(2, 2) == pytest.approx(math.sqrt(2 / 3))
    assert embedding_bound_cit(3, 2) == pytest.approx(1.0) == embedding_bound_jz(3, 2)


@given(st.integers(1, 15), st.floats(1.05, 6))
def test_cit_strictly_sharper_for_even_T(half, p):
    T = 2 * half
    assert embedding_bound_cit(T, p) < embedding_bound_jz(T, p)


@given(st.integers(0, 15), st.floats(1.05, 6))
def test_cit_equal_for_odd_T(half, p):
    T = 2 * half + 1
    assert embedding_bound_cit(T, p) == pytest.approx(embedding_bound_jz(T, p), rel=1e-14)


def test_theta_hand_value():
    assert theta(2, 3, 2) == pytest.approx(1.0) == theta_min(3, 2)


@given(st.integers(2, 12), st.floats(1.2, 4), st.floats(0.01, 0.99))
def test_theta_bounded_below(T, p, frac):
    s = frac * (T + 1)
    assert theta(s, T, p) >= theta_min(T, p) * (1 - 1e-12)


def test_envelope_examples():
    assert envelope_max(lambda x: x * x / 2, 1.0) == pytest.approx(0.5)
    assert envelope_max(lambda x: -x * x, 1.0) == pytest.approx(0.0, abs=1e-12)
    F = lambda x: x**3 / 3 + x  # noqa: E731  nondecreasing
    assert envelope_max(F, 0.7, nondecreasing=True) == F(0.7)
    assert envelope_max(F, 0.7) == pytest.approx(F(0.7), rel=1e-12)


def test_A0_B0_zero_nonlinearity():
    inst = make_instance("linear", 3, value=0.0)
    assert estimate_A0(inst).value == 0
    assert estimate_B0(inst).value == 0


def test_A0_B0_identity_nonlinearity():
    T = 4
    inst = make_instance("polynomial", T, coefficients=(0.0, 1.0), p=2.0)
    a, b = estimate_A0(inst), estimate_B0(inst)
    assert np.allclose(a.quotients, T / 2, rtol=1e-9)
    assert np.allclose(b.quotients, T / 2, rtol=1e-12)
    assert a.value == pytest.approx(T / 2) and b.value == pytest.approx(T / 2)


def test_power_family_A0_vanishes():
    inst = make_instance("power", 3, q=4.0, p=2.0)
    assert estimate_A0(inst).value == 0.0


def test_estimates_keep_their_tables():
    est = estimate_B0(make_instance("power", 2, q=3.0))
    assert len(est.quotients) == len(est.ts) == 40
    assert est.tail_length == 20 and est.trend == "decreasing"
    assert est.as_dict()["table"][0]["t_log2"] == 0.0


def test_example_estimates():
    inst = make_instance("example_esempio", 2)
    ex = inst.meta["example"]
    ms = range(4, 8)
    a = estimate_A0(inst, ex.a0_probes(ms))
    b = estimate_B0(inst, ex.b0_probes(ms))
    assert a.trend == "decreasing" and a.value == 0.0
    assert b.infinite and b.value == INF


def test_interval_A0_zero_B0_inf():
    iv = interval_thm_main(0.0, INF, ExponentMap((3, 2, 3, 2)), 2)
    assert iv.lower == 0.0 and iv.upper == INF and iv.notes["h0"]


def test_interval_empty_case():
    iv = interval_thm_main(1.0, 1.0, ExponentMap.constant(2, 2), 2)
    assert iv.lower == pytest.approx(1.0) and iv.upper == pytest.approx(2 / 3)
    assert not iv.nonempty and not iv.notes["h0"]


def test_interval_nonempty_case():
    iv = interval_thm_main(0.1, 1.0, ExponentMap.constant(2, 2), 2)
    assert (iv.lower, iv.upper) == pytest.approx((1.0, 20 / 3))
    assert iv.nonempty and iv.notes["h0"]


def test_const_p_interval():
    iv = interval_const_p(1.0, 100.0, 2.0, 9)
    assert (iv.lower, iv.upper) == pytest.approx((0.01, 0.2))
    assert interval_const_p(0.0, 1.0, 2.0, 9).upper == INF


def test_even_T_interval():
    iv = interval_even_T(1.0, 100.0, 2.0, 2)
    assert iv.upper == pytest.approx(0.75)
    assert interval_const_p(1.0, 100.0, 2.0, 2).upper == pytest.approx(2 / 3)
    assert iv.notes["contains_const_p"] and iv.notes["strict"]
    z = interval_even_T(0.0, 100.0, 2.0, 2)
    assert z.upper == INF and not z.notes["strict"]
    with pytest.raises(NotEven):
        interval_even_T(1.0, 1.0, 2.0, 3)


@given(
    st.floats(0, 10),
    st.floats(1e-3, 1e3),
    st.floats(1.1, 4),
    st.floats(1.1, 4),
    st.integers(2, 20),
)
def test_nonempty_iff_h0(A0, B0, p1, p2, T):
    ex = ExponentMap((max(p1, p2), min(p1, p2)) + (min(p1, p2),) * T)
    iv = interval_thm_main(A0, B0, ex, T)
    k = kappa(ex, T)
    # stay clear of the boundary where rounding decides
    if abs(A0 - k * B0) > 1e-9 * max(A0, k * B0, 1e-300):
        assert iv.nonempty == (A0 < k * B0) == h0_holds(A0, B0, k)
        if iv.nonempty:
            assert iv.notes["inclusion_in_0_inv_delta"]


@given(st.floats(1e-6, 10), st.floats(1e-3, 1e3), st.floats(1.1, 4), st.integers(1, 10))
def test_const_p_inside_even_T(A, B, p, half):
    T = 2 * half
    a, b = interval_const_p(A, B, p, T), interval_even_T(A, B, p, T)
    assert b.lower <= a.lower and a.upper < b.upper


def test_sublevel_radius_value():
    inst = make_instance("linear", 2, p=2.0)
    assert sublevel_radius(inst, 0.1) == pytest.approx(1 / 150)
    with pytest.raises(CNotSmallEnough):
        phi_r_upper_bound(inst, 10.0)


def test_phi_r_bound_zero_for_zero_f():
    inst = make_instance("linear", 2, value=0.0)
    assert phi_r_upper_bound(inst, 0.1)[1] == 0


@pytest.mark.parametrize("name,kw", [("linear", {"p": 2.0}), ("example_esempio", {}), ("power", {"p": 3.5})])
def test_sublevel_inclusion_no_witness(name, kw):
    inst = make_instance(name, 5, **kw)
    rep = check_sublevel_inclusion(inst, 0.3, samples=300)
    assert rep.ok and rep.witness is None and rep.max_ratio <= 1


def test_sublevel_inclusion_skips_large_c():
    rep = check_sublevel_inclusion(make_instance("linear", 2), 10.0)
    assert not rep.ok and rep.skipped


def test_technical_zero_a_reduces_to_A0_quotient():
    inst = make_instance("power", 2, q=2.5, exponents=ExponentMap((3, 2, 3, 2)))
    bs = [2.0**-j for j in range(2, 10)]
    res = interval_technical([0.0] * len(bs), bs, inst)
    pp, pm = 3.0, 2.0
    for b, q in zip(bs, res.G0.quotients):
        ref = 2 * b**2.5 / 2.5 / b**pp / (2 ** (pp - 1) * pm)
        assert q == pytest.approx(ref, rel=1e-9)


def test_technical_k1_violation():
    inst = make_instance("power", 2, q=2.5, exponents=ExponentMap((3, 2, 3, 2)))
    bs = [2.0**-j for j in range(2, 8)]
    with pytest.raises(K1Violated):
        interval_technical(bs, bs, inst)


def test_quadrature_and_closed_form_agree():
    nl = NonlinearityFamily(3, lambda t: 3 * t * t)
    inst = make_instance("linear", 3)
    inst = type(inst)(3, ExponentMap.constant(2.5, 3), nl, 1.0)
    est = estimate_B0(inst, [2.0**-j for j in range(8)])
    for t, q in zip(est.ts, est.quotients):
        assert q == pytest.approx(3 * t**3 / t**2.5, rel=1e-9)
