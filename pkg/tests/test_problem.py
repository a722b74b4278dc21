import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from anisolap.gallery import make_instance
from anisolap.problem import (
    ExponentMap,
    NonlinearityFamily,
    ProblemInstance,
    StateVector,
    forward_difference,
    norms,
    validate,
)
from anisolap.theory import embedding_bound_jz

from .conftest import instance_and_state


def test_valid_baseline():
    inst = make_instance("linear", 2, lam=1.0)
    assert validate(inst).valid
    assert str(validate(inst)) == "valid"


def test_exponent_at_one_reported():
    inst = make_instance("linear", 2, lam=1.0, exponents=ExponentMap((2.0, 1.0, 2.0, 2.0)))
    rep = validate(inst)
    assert "exponent not > 1 at k=1" in rep.violations


def test_lambda_zero_reported():
    rep = validate(make_instance("linear", 2, lam=0.0))
    assert "lambda must be positive" in rep.violations


def test_every_violation_collected():
    nl = NonlinearityFamily(2, lambda t: 1.0, lambda t: t + 1.0)
    inst = ProblemInstance(2, ExponentMap((0.5, 2, 2, 1.0)), nl, -1.0)
    rep = validate(inst)
    assert len(rep.violations) == 5  # two exponents, lambda, F_1(0), F_2(0)


def test_T1_is_noted_not_rejected():
    rep = validate(make_instance("linear", 1))
    assert rep.valid and rep.notes


def test_boundary_must_vanish():
    with pytest.raises(ValueError):
        StateVector(np.array([1.0, 2.0, 0.0]))


def test_forward_difference_examples():
    assert forward_difference(StateVector(np.array([0.0, 1, 1, 0]))).tolist() == [1, 0, -1]
    assert forward_difference(StateVector.zeros(3)).tolist() == [0, 0, 0, 0]
    assert forward_difference(StateVector(np.array([0.0, 3, 0]))).tolist() == [3, -3]


def test_norms_examples():
    h, sup = norms(StateVector(np.array([0.0, 1, 1, 0])))
    assert h == pytest.approx(math.sqrt(2)) and sup == 1
    assert norms(StateVector.zeros(4)) == (0.0, 0.0)


def test_alternating_profile():
    p = ExponentMap.alternating(3, 2, 2)
    assert p.values == (3.0, 2.0, 3.0, 2.0)
    assert (p.p_minus, p.p_plus, p.T) == (2.0, 3.0, 2)


def test_quadrature_antiderivative():
    nl = NonlinearityFamily(3, math.cos)
    assert nl.antiderivative_mode == "adaptive_quadrature"
    assert nl.F[1](1.2) == pytest.approx(math.sin(1.2), abs=1e-12)


_moderate = st.floats(-5, 5).filter(lambda v: v == 0 or abs(v) > 1e-100)  # squares must not underflow


@given(st.lists(_moderate, min_size=2, max_size=2))
def test_sup_bounded_by_embedding_T2(x):
    # p = 2, T = 2: the Hölder bound gives sqrt(3)/2
    h, sup = norms(StateVector.from_interior(np.array(x)))
    assert sup <= embedding_bound_jz(2, 2.0) * h * (1 + 1e-12)


@given(instance_and_state())
def test_differences_telescope(pair):
    _, u = pair
    assert abs(np.sum(forward_difference(u))) <= 1e-12 * max(1.0, np.max(np.abs(u.values)))
