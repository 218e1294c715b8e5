import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from momentumgl.potentials import DoubleWell
from momentumgl.schemes import (EnergyTrace, Scheme, ScalarBackend, SchemeParams,
                                SchemeState, cinema_step, energy_plateau, fista_step,
                                gd_step, nesterov_step, run, scalar_scheme_compare,
                                successive_distance, with_tau_zero)


def test_param_defaults():
    p = SchemeParams(tau=0.5, alpha=2.0)
    assert p.eta == 0.25 and p.rho == pytest.approx(0.5)
    g = SchemeParams(tau=0.3, scheme="gd")
    assert g.eta == 0.3 and g.time_step == 0.3
    assert SchemeParams(tau=0.1).time_step == 0.1


@pytest.mark.parametrize("kw", [dict(eta=0.0), dict(rho=1.5), dict(eps=0.0), dict(tau=-1.0),
                                dict(scheme="adam")])
def test_param_validation(kw):
    with pytest.raises(ValueError):
        SchemeParams(**kw)


def test_nesterov_rho_schedule():
    p = SchemeParams(tau=1.0, rho_schedule="nesterov")
    assert p.rho_at(3) == 0.5


def test_cinema_step_hand_computed():
    # quadratic u^2/eps^2 with eps = 1: u_new = (u + tau v)/(1 + 2 eta)
    be = ScalarBackend()
    p = SchemeParams(tau=0.5, alpha=2.0, eps=1.0)
    s = cinema_step(SchemeState(np.array(1.0), np.array(0.2)), p, be)
    x = 1.0 + 0.5 * 0.2
    u = x / 1.5
    g = (x - u) / 0.25
    assert float(s.u) == pytest.approx(u)
    assert float(s.v) == pytest.approx(0.5 * (0.2 - 0.5 * g))
    assert s.step == 1 and s.time == 0.5


def test_fista_and_cinema_differ_only_in_concave_point():
    be = ScalarBackend(DoubleWell(2.0))
    p = SchemeParams(tau=0.7, alpha=0.1)
    s0 = SchemeState(np.array(0.3), np.array(0.0))
    # at rest, x = u so both coincide
    assert float(cinema_step(s0, p, be).u) == float(fista_step(s0, p, be).u)
    s1 = SchemeState(np.array(0.3), np.array(0.4))
    assert float(cinema_step(s1, p, be).u) != float(fista_step(s1, p, be).u)


def test_tau_zero_momentum_reduces_to_gd():
    be = ScalarBackend(DoubleWell(2.0))
    p = with_tau_zero(SchemeParams(tau=0.5, eta=0.2, alpha=1.0))
    s = SchemeState(np.array(0.4), np.array(0.0))
    a = cinema_step(s, p, be)
    b = gd_step(s, SchemeParams(tau=0.2, eta=0.2, scheme="gd"), be)
    assert float(a.u) == pytest.approx(float(b.u), abs=1e-15)


@given(st.floats(1e-3, 1e3), st.floats(0.0, 5.0), st.floats(-1.5, 1.5), st.floats(-1, 1))
def test_cinema_discrete_energy_monotone_scalar(tau, alpha, u0, v0):
    be = ScalarBackend(DoubleWell(2.0))
    p = SchemeParams(tau=tau, alpha=alpha, scheme="cinema")
    e = run(SchemeState(np.array(u0), np.array(v0)), p, be, 40).trace["discrete_energy"]
    assert np.all(np.diff(e) <= 1e-12 * (1 + np.abs(e[:-1])))


@given(st.floats(1e-2, 1e2), st.floats(0.0, 3.0))
def test_cinema_energy_law_at_threshold_eta(tau, alpha):
    # eta = tau^2/2 is the smallest step for which decrease is guaranteed
    be = ScalarBackend(DoubleWell(2.0))
    p = SchemeParams(tau=tau, eta=tau * tau / 2, alpha=alpha)
    e = run(SchemeState(np.array(0.2), np.array(0.0)), p, be, 40).trace["discrete_energy"]
    assert np.all(np.diff(e) <= 1e-12 * (1 + np.abs(e[:-1])))


@given(st.floats(1e-4, 1e6), st.floats(-2, 2))
def test_gd_unconditionally_monotone_scalar(h, u0):
    be = ScalarBackend(DoubleWell(2.0))
    p = SchemeParams(tau=h, eta=h, scheme="gd")
    E = run(SchemeState.at_rest(np.array(u0)), p, be, 30).trace["gl_energy"]
    assert np.all(np.diff(E) <= 1e-14 * (1 + E[:-1]))


def test_nesterov_divergence_is_a_status():
    be = ScalarBackend(DoubleWell(2.0))
    p = SchemeParams(tau=100.0, alpha=0.01, scheme="nesterov")
    res = run(SchemeState(np.array(0.2), np.array(0.0)), p, be, 100)
    assert res.diverged and res.steps < 100


def test_scalar_compare_pattern():
    res = scalar_scheme_compare()
    for tau in (0.5, 1.0, 10.0, 100.0, 1000.0):
        e = res[(Scheme.CINEMA, tau)].trace["discrete_energy"]
        assert np.all(np.diff(e) <= 1e-12 * (1 + np.abs(e[:-1])))
    assert any(np.any(np.diff(res[(Scheme.FISTA, t)].trace["discrete_energy"]) > 1e-12)
               for t in (10.0, 100.0))
    assert all(res[(Scheme.NESTEROV, t)].diverged for t in (10.0, 100.0, 1000.0))


def test_converges_to_well_and_stop_rules():
    be = ScalarBackend(DoubleWell(2.0))
    p = SchemeParams(tau=1.0, alpha=1.0)
    res = run(SchemeState(np.array(0.2), np.array(0.0)), p, be, 10000,
              stop=successive_distance(1e-12, be))
    assert res.status == "converged"
    assert float(res.state.u) == pytest.approx(1.0, abs=1e-9)
    res = run(SchemeState(np.array(0.2), np.array(0.0)), p, be, 10000,
              stop=energy_plateau(be, 1.0, 1e-10, 10))
    assert res.status == "converged" and res.steps < 10000


def test_trace_records_and_columns():
    be = ScalarBackend(DoubleWell(2.0))
    res = run(SchemeState(np.array(0.2), np.array(0.0)), SchemeParams(tau=0.5), be, 10,
              record_every=5)
    assert len(res.trace) == 3
    assert res.trace.columns[:7] == ["step", "time", "gl_energy", "kinetic_energy",
                                     "total_energy", "discrete_energy", "mean_u"]
    tr = res.trace
    assert np.allclose(tr["total_energy"], tr["gl_energy"] + tr["kinetic_energy"])
    assert isinstance(EnergyTrace(tr.records)["step"], np.ndarray)


def test_nesterov_is_fully_explicit():
    be = ScalarBackend()
    p = SchemeParams(tau=0.1, alpha=0.0, scheme="nesterov")
    s = nesterov_step(SchemeState(np.array(1.0), np.array(0.0)), p, be)
    assert float(s.u) == pytest.approx(1.0 - 0.01 * 2.0)
