"""Time steppers for momentum-based minimization with convex-concave splitting.

All schemes share the update

    x_{n+1} = x_n + tau v_n - eta g_n,    v_{n+1} = rho (v_n - tau g_n)

and differ only in where the gradient g_n is evaluated:

    GD        g_n = grad F(x_{n+1}) + grad G(x_n),          no momentum
    CINEMA    g_n = grad F(x_{n+1}) + grad G(x_n)
    FISTA     g_n = grad F(x_{n+1}) + grad G(x_n + tau v_n)
    Nesterov  g_n = (grad F + grad G)(x_n + tau v_n)

F is the convex part (Dirichlet energy plus |u|^2/eps^2) and G the concave
remainder plus boundary forcing. A backend supplies the linear implicit solve
for F, the explicit gradient of G, and the energies; see ``ScalarBackend`` for
the smallest complete example.
"""
import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .potentials import DoubleWell

log = logging.getLogger(__name__)

DIVERGENCE_ENERGY = 1e12


class Scheme(enum.Enum):
    GD = "gd"
    CINEMA = "cinema"
    FISTA = "fista"
    NESTEROV = "nesterov"


@dataclass
class SchemeParams:
    """Step parameters.

    ``eta`` defaults to ``tau**2`` and ``rho`` to ``1/(1 + alpha*tau)``. For GD
    only ``eta`` (the descent step h) and ``eps`` matter; if ``eta`` is not
    given for GD it is taken equal to ``tau``.
    """

    tau: float = 1.0
    eta: float | None = None
    rho: float | None = None
    alpha: float = 0.0
    eps: float = 1.0
    scheme: Scheme = Scheme.CINEMA
    rho_schedule: str = "constant"

    def __post_init__(self):
        if isinstance(self.scheme, str):
            self.scheme = Scheme(self.scheme.lower())
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.eta is None:
            self.eta = self.tau if self.scheme is Scheme.GD else self.tau ** 2
        if self.rho is None:
            self.rho = 1.0 / (1.0 + self.alpha * self.tau)
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.rho_schedule not in ("constant", "nesterov"):
            raise ValueError("rho_schedule is 'constant' or 'nesterov'")

    def rho_at(self, n):
        if self.rho_schedule == "nesterov":
            return n / (n + 3.0) if n > 0 else self.rho
        return self.rho

    @property
    def time_step(self):
        return self.eta if self.scheme is Scheme.GD else self.tau


@dataclass
class SchemeState:
    u: np.ndarray
    v: np.ndarray
    step: int = 0
    time: float = 0.0
    grad: np.ndarray | None = None

    @classmethod
    def at_rest(cls, u):
        u = np.array(u, dtype=float)
        return cls(u=u, v=np.zeros_like(u))


def implicit_update(x, concave, step, eps, backend):
    """Return (u_new, g) with u_new = x - step*g and g = grad F(u_new) + concave.

    Backends offering ``implicit_gradient`` compute g directly; the fallback
    difference quotient (x - u_new)/step loses digits when step is tiny.
    """
    direct = getattr(backend, "implicit_gradient", None)
    if direct is not None:
        return direct(x, concave, step, eps)
    u_new = backend.implicit_solve(x - step * concave, step, eps)
    return u_new, (x - u_new) / step


def gd_step(state, params, backend):
    h = params.eta
    u = state.u
    u_new, g = implicit_update(u, backend.concave_grad(u, params.eps), h, params.eps, backend)
    return SchemeState(u_new, state.v, state.step + 1, state.time + h, g)


def cinema_step(state, params, backend):
    tau, eta = params.tau, params.eta
    x = state.u + tau * state.v
    u_new, g = implicit_update(x, backend.concave_grad(state.u, params.eps), eta, params.eps,
                               backend)
    v_new = params.rho_at(state.step) * (state.v - tau * g)
    return SchemeState(u_new, v_new, state.step + 1, state.time + tau, g)


def fista_step(state, params, backend):
    tau, eta = params.tau, params.eta
    x = state.u + tau * state.v
    u_new, g = implicit_update(x, backend.concave_grad(x, params.eps), eta, params.eps, backend)
    v_new = params.rho_at(state.step) * (state.v - tau * g)
    return SchemeState(u_new, v_new, state.step + 1, state.time + tau, g)


def nesterov_step(state, params, backend):
    tau, eta = params.tau, params.eta
    x = state.u + tau * state.v
    with np.errstate(over="ignore", invalid="ignore"):
        g = backend.full_grad(x, params.eps)
        u_new = x - eta * g
        v_new = params.rho_at(state.step) * (state.v - tau * g)
    return SchemeState(u_new, v_new, state.step + 1, state.time + tau, g)


STEPPERS = {
    Scheme.GD: gd_step,
    Scheme.CINEMA: cinema_step,
    Scheme.FISTA: fista_step,
    Scheme.NESTEROV: nesterov_step,
}


def step(state, params, backend):
    return STEPPERS[params.scheme](state, params, backend)


def energy_record(state, params, backend):
    """One trace row: GL energy, both kinetic conventions, and backend diagnostics."""
    eps = params.eps
    with np.errstate(over="ignore", invalid="ignore"):
        vv = backend.norm2(state.v)
        gl = backend.gl_energy(state.u, eps)
        rho = params.rho_at(state.step)
        rec = {
            "step": state.step,
            "time": state.time,
            "gl_energy": gl,
            "kinetic_energy": 0.5 * eps * vv,
            "total_energy": gl + 0.5 * eps * vv,
            "discrete_energy": backend.energy(state.u, eps) + vv / (2.0 * rho * rho),
            "mean_u": backend.mean(state.u),
        }
    rec.update(backend.diagnostics(state.u))
    return rec


class EnergyTrace:
    """Per-step records; columns are available as arrays via ``trace[name]``."""

    def __init__(self, records=None):
        self.records = list(records or [])

    def append(self, rec):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, name):
        return np.array([r[name] for r in self.records])

    @property
    def columns(self):
        cols = []
        for r in self.records:
            for key in r:
                if key not in cols:
                    cols.append(key)
        return cols


@dataclass
class RunResult:
    state: SchemeState
    trace: EnergyTrace
    status: str = "ok"
    steps: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def diverged(self):
        return self.status == "diverged"


def _finite(state):
    return bool(np.isfinite(state.u).all() and np.isfinite(state.v).all())


def run(state, params, backend, n_steps, record_every=1, stop=None, callback=None):
    """Advance ``n_steps`` steps, recording energies every ``record_every`` steps.

    ``stop(new_state, old_state)`` returning True ends the run with status
    ``"converged"``. Non-finite values or a total energy above 1e12 end it with
    status ``"diverged"``; this is a result, not an exception.
    """
    stepper = STEPPERS[params.scheme]
    trace = EnergyTrace()
    trace.append(energy_record(state, params, backend))
    status = "ok"
    for _ in range(n_steps):
        new = stepper(state, params, backend)
        if not _finite(new):
            status = "diverged"
            state = new
            trace.append(energy_record(state, params, backend))
            break
        done = stop is not None and stop(new, state)
        state = new
        if callback is not None:
            callback(state)
        if done or record_every and state.step % record_every == 0:
            rec = energy_record(state, params, backend)
            trace.append(rec)
            if not rec["total_energy"] <= DIVERGENCE_ENERGY:
                status = "diverged"
                break
        if done:
            status = "converged"
            break
    if status == "diverged":
        log.info("%s run diverged at step %d", params.scheme.value, state.step)
    return RunResult(state, trace, status, state.step)


def successive_distance(delta, backend):
    """Stop when ||u_{n+1} - u_n|| <= delta in the backend norm."""
    return lambda new, old: math.sqrt(backend.norm2(new.u - old.u)) <= delta


def reference_distance(u_ref, delta, backend):
    """Stop when ||u_n - u_ref|| < delta."""
    return lambda new, old: math.sqrt(backend.norm2(new.u - u_ref)) < delta


def energy_plateau(backend, eps, tol=1e-10, window=10):
    """Stop when the GL energy changed by less than ``tol`` (relative) over ``window`` steps."""
    history = []

    def stop(new, old):
        history.append(backend.gl_energy(new.u, eps))
        if len(history) <= window:
            return False
        e0, e1 = history[-window - 1], history[-1]
        return abs(e1 - e0) <= tol * max(abs(e0), 1e-300)

    return stop


class ScalarBackend:
    """Zero-dimensional backend: one degree of freedom, no Laplacian.

    Minimizes W(u)/eps^2 with convex part u^2/eps^2; ``potential=None`` gives
    the pure quadratic u^2/eps^2 (no concave part).
    """

    def __init__(self, potential=None):
        self.potential = potential

    def implicit_solve(self, rhs, step, eps):
        return rhs / (1.0 + 2.0 * step / eps ** 2)

    def concave_grad(self, u, eps):
        if self.potential is None:
            return np.zeros_like(u)
        return self.potential.concave_prime(u) / eps ** 2

    def full_grad(self, u, eps):
        return 2.0 * u / eps ** 2 + self.concave_grad(u, eps)

    def energy(self, u, eps):
        if self.potential is None:
            return float(np.sum(u * u)) / eps ** 2
        return float(np.sum(self.potential(u))) / eps ** 2

    def gl_energy(self, u, eps):
        return eps * self.energy(u, eps)

    def norm2(self, v):
        return float(np.sum(np.square(v)))

    def mean(self, u):
        return float(np.mean(u))

    def diagnostics(self, u):
        return {"u": float(np.ravel(u)[0])}


def scalar_scheme_compare(R=2.0, alpha=0.01, tau_list=(0.5, 1.0, 10.0, 100.0, 1000.0),
                          n_steps=100, u0=0.2, v0=0.0,
                          schemes=(Scheme.NESTEROV, Scheme.FISTA, Scheme.CINEMA)):
    """Run each scheme at each tau on the scalar potential W_R.

    Returns ``{(scheme, tau): RunResult}``; each trace carries the discrete
    total energy W(u_n) + v_n^2/(2 rho^2) in ``discrete_energy``.
    """
    backend = ScalarBackend(DoubleWell(R))
    results = {}
    for scheme in schemes:
        for tau in tau_list:
            params = SchemeParams(tau=tau, alpha=alpha, eps=1.0, scheme=scheme)
            state = SchemeState(np.array(float(u0)), np.array(float(v0)))
            results[(scheme, tau)] = run(state, params, backend, n_steps)
    return results


def with_tau_zero(params):
    """Copy of ``params`` with the momentum step switched off (eta kept)."""
    return replace(params, tau=0.0, rho=1.0)
