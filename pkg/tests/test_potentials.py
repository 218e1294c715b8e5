import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from momentumgl.potentials import (DoubleWell, Wells, multiwell_concave_grad,
                                   profile_constant_c0, wr_concave, wr_concave_prime,
                                   wr_concave_second, wr_eval)

# mpmath at 30 digits
C0_R2 = 0.92155381809212354843
C0_R10 = 1.21898666367450152844
W2_AT_03 = 0.20851122777732207908
W2_PRIME_AT_03 = -0.35668920621492097674

reals = st.floats(-5, 5, allow_nan=False)
radii = st.floats(0.05, 1e4)


def test_wr_at_zero_closed_form():
    assert wr_eval(0.0, 2.0) == pytest.approx(2 - math.sqrt(3), abs=1e-15)


def test_wr_mpmath_oracle():
    assert wr_eval(0.3, 2.0) == pytest.approx(W2_AT_03, rel=1e-14)
    assert DoubleWell(2.0).prime(0.3) == pytest.approx(W2_PRIME_AT_03, rel=1e-13)


def test_wells_are_exact_zeros():
    for R in (0.5, 2.0, 100.0, math.inf):
        assert wr_eval(1.0, R) == 0.0
        assert wr_eval(-1.0, R) == 0.0


def test_second_derivative_at_well():
    assert DoubleWell(2.0).second(1.0) == pytest.approx(4.0 / 3.0, rel=1e-14)


def test_infinite_R_limit():
    u = np.linspace(-2, 2, 41)
    assert np.allclose(wr_eval(u, math.inf), (np.abs(u) - 1) ** 2)
    assert np.max(np.abs(wr_eval(u, 1e8) - wr_eval(u, math.inf))) < 1e-3


def test_rejects_nonpositive_R():
    with pytest.raises(ValueError):
        wr_eval(0.0, 0.0)
    with pytest.raises(ValueError):
        DoubleWell(-1.0)


@given(reals, radii)
def test_nonnegative(u, R):
    assert wr_eval(u, R) >= 0.0


@given(reals, radii)
def test_split_is_square_plus_concave(u, R):
    assert wr_eval(u, R) == pytest.approx(u * u + wr_concave(u, R), abs=1e-9 * (1 + u * u))


@given(reals, radii)
def test_concave_part_is_concave(u, R):
    assert wr_concave_second(u, R) <= 0.0


@given(st.floats(-3, 3), st.floats(0.1, 50))
def test_concave_prime_matches_finite_difference(u, R):
    h = 1e-6
    fd = (wr_concave(u + h, R) - wr_concave(u - h, R)) / (2 * h)
    assert wr_concave_prime(u, R) == pytest.approx(fd, abs=1e-6 * (1 + abs(fd)))


def test_wells_are_critical_points():
    for R in (0.5, 2.0, 30.0):
        W = DoubleWell(R)
        assert abs(W.prime(1.0)) < 1e-14 and abs(W.prime(-1.0)) < 1e-14
        W01 = DoubleWell(R, Wells.ZERO_ONE)
        assert abs(W01.prime(0.0)) < 1e-14 and abs(W01.prime(1.0)) < 1e-14
        assert W01(0.0) == 0.0 and W01(1.0) == 0.0


@given(st.floats(-2, 3))
def test_zero_one_is_quarter_of_mapped(u):
    W = DoubleWell(2.0, Wells.ZERO_ONE)
    assert W(u) == pytest.approx(0.25 * wr_eval(2 * u - 1, 2.0), abs=1e-14)
    # convex part stays u^2
    h = 1e-6
    fd = ((W(u + h) - (u + h) ** 2) - (W(u - h) - (u - h) ** 2)) / (2 * h)
    assert W.concave_prime(u) == pytest.approx(fd, abs=1e-6)


def test_vector_potential_vanishes_on_one_hot():
    W = DoubleWell(2.0, Wells.ZERO_ONE, k=4)
    assert np.all(W(np.eye(4)) == 0.0)
    assert W(np.full(4, 0.25)) > 0


def test_vector_requires_zero_one_wells():
    with pytest.raises(ValueError):
        DoubleWell(2.0, Wells.PLUS_MINUS_ONE, k=3)


def test_multiwell_gradient_vanishes_at_one_hot():
    U = np.eye(3)
    g = 2 * U + multiwell_concave_grad(U, 2.0)
    assert np.max(np.abs(g)) < 1e-14
    with pytest.raises(ValueError):
        multiwell_concave_grad(np.ones((2, 1)), 2.0)


def test_c0_oracles():
    assert profile_constant_c0(DoubleWell(2.0)) == pytest.approx(C0_R2, rel=1e-12)
    assert profile_constant_c0(DoubleWell(10.0)) == pytest.approx(C0_R10, rel=1e-12)
    assert profile_constant_c0(DoubleWell(math.inf)) == pytest.approx(math.sqrt(2), rel=1e-12)
