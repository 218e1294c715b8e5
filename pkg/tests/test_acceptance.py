"""One test per acceptance criterion; each prints its PASS/FAIL line."""
import pytest

from momentumgl import acceptance as A

from conftest import CRITERION_LINES


def _check(number):
    res = A.CRITERIA[number]()
    if number in (3, 5):
        res.seconds = max(res.seconds, A.circle_run().extra["seconds"])
    print(res.line())
    CRITERION_LINES.append(res.line())
    assert res.passed, res.line()


def test_ac1_energy_law():
    _check(1)


def test_ac2_gd_monotone():
    _check(2)


@pytest.mark.slow
def test_ac3_circle_tracking():
    _check(3)


@pytest.mark.slow
def test_ac4_gradient_flow_circle():
    _check(4)


@pytest.mark.slow
def test_ac5_reappearance():
    _check(5)


def test_ac6_scalar_comparison():
    _check(6)


def test_ac7_profile_and_corrector():
    _check(7)


@pytest.mark.slow
def test_ac8_step_count_plateau():
    _check(8)


def test_ac9_blobs():
    _check(9)


@pytest.mark.slow
def test_ac10_mnist():
    _check(10)


@pytest.mark.slow
def test_ac11_finite_speed():
    _check(11)
