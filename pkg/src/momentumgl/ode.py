"""One-dimensional optimal profile, its corrector, and the circle radius ODE.

The profile solves phi' = sqrt(2 W(phi)) with phi(0) = 0. The corrector is
the even bounded solution of psi'' - W''(phi) psi = phi' + 2 x phi'' with
int phi'' psi' = 0. The radius of a circular interface under the damped
hyperbolic flow obeys r'' = (1 - r'^2)(-1/r - alpha r').
"""
import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate, interpolate

from .potentials import DoubleWell

log = logging.getLogger(__name__)

PROFILE_TOL = 1e-10


class ProfileDomainError(ValueError):
    """X_max is too small for the profile to reach the wells."""


class CorrectorWarning(RuntimeWarning):
    pass


@dataclass
class Profile:
    """Tabulated optimal profile on a symmetric grid over [-X_max, X_max]."""

    x: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    d2phi: np.ndarray
    potential: object

    @property
    def X_max(self):
        return float(self.x[-1])

    def __call__(self, x):
        """Cubic interpolation of phi."""
        return interpolate.CubicSpline(self.x, self.phi)(x)

    def energy(self):
        """1D Ginzburg-Landau energy int phi'^2/2 + W(phi) (eps = 1)."""
        dens = 0.5 * self.dphi ** 2 + self.potential(self.phi)
        return float(integrate.simpson(dens, x=self.x))


def _profile_rhs(W):
    def rhs(x, y):
        p = y[0]
        # the sign keeps the wells attracting if a step overshoots them
        return [math.copysign(math.sqrt(max(2.0 * float(W(p)), 0.0)), 1.0 - p * p)]
    return rhs


def solve_profile(W=None, X_max=24.0, n_points=8193, rtol=1e-13, atol=1e-15):
    """Integrate phi' = sqrt(2 W(phi)) from phi(0) = 0 in both directions.

    Args:
        W: scalar potential with wells at -1 and 1; defaults to W_R with R = 2.
        X_max: half-width of the tabulation interval.
        n_points: grid size; odd so that x = 0 is a node.

    Raises:
        ProfileDomainError: if |phi(X_max) - 1| > 1e-10.
    """
    W = W or DoubleWell()
    if n_points % 2 == 0:
        n_points += 1
    x = np.linspace(-X_max, X_max, n_points)
    half = x[n_points // 2:]
    fwd = integrate.solve_ivp(_profile_rhs(W), (0.0, X_max), [0.0], method="DOP853",
                              t_eval=half, rtol=rtol, atol=atol)
    back = integrate.solve_ivp(_profile_rhs(W), (0.0, -X_max), [0.0], method="DOP853",
                               t_eval=-half, rtol=rtol, atol=atol)
    if not (fwd.success and back.success):
        raise RuntimeError("profile integration failed")
    phi = np.concatenate([back.y[0][:0:-1], fwd.y[0]])
    gap = max(abs(phi[-1] - 1.0), abs(phi[0] + 1.0))
    if gap > PROFILE_TOL:
        raise ProfileDomainError(
            f"profile is {gap:.2e} from the wells at X_max={X_max}; increase X_max")
    dphi = np.sqrt(np.maximum(2.0 * W(phi), 0.0))
    d2phi = np.asarray(W.prime(phi)) if hasattr(W, "prime") else np.gradient(dphi, x)
    return Profile(x, phi, dphi, d2phi, W)


@dataclass
class Corrector:
    x: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    c: float
    X_max: float
    profile: Profile

    def forcing(self, x=None):
        """phi' + 2 x phi'' on the corrector grid."""
        p = self.profile
        mask = np.abs(p.x) <= self.X_max + 1e-12
        return p.dphi[mask] + 2.0 * p.x[mask] * p.d2phi[mask]

    def orthogonality(self):
        """(int phi'' psi', ||phi''|| ||psi'||) by the trapezoidal rule."""
        d2 = self.profile.d2phi[np.abs(self.profile.x) <= self.X_max + 1e-12]
        inner = integrate.trapezoid(d2 * self.dpsi, self.x)
        n1 = math.sqrt(integrate.trapezoid(d2 * d2, self.x))
        n2 = math.sqrt(integrate.trapezoid(self.dpsi ** 2, self.x))
        return float(inner), n1 * n2


def _shoot(W, c, X, t_eval, rtol, atol):
    """Integrate [phi, psi, psi', int phi'' psi'] on [0, X] with psi(0) = c, psi'(0) = 0."""
    second = W.second

    def rhs(x, y):
        p, s, ds, _ = y
        dp = math.copysign(math.sqrt(max(2.0 * float(W(p)), 0.0)), 1.0 - p * p)
        d2p = float(W.prime(p))
        return [dp, ds, float(second(p)) * s + dp + 2.0 * x * d2p, d2p * ds]

    sol = integrate.solve_ivp(rhs, (0.0, X), [0.0, c, 0.0, 0.0], method="DOP853",
                              t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"corrector integration failed: {sol.message}")
    return sol


def _blown_up(psi, growth_tol):
    tail = np.abs(psi[int(0.9 * psi.size):])
    return tail.max() > growth_tol * np.abs(psi).max() and tail[-1] >= tail.max()


def solve_corrector(profile, W=None, X_max=None, rtol=1e-13, atol=1e-15,
                    growth_tol=1e-7, shrink=0.8, min_X=4.0):
    """Shooting construction of the even corrector.

    ``c -> int phi'' psi_c'`` is affine, so two trial shots (c = 0, 1) give
    its root exactly; the final shot uses that c and is reflected evenly.
    If the exponentially growing mode is visible at the end of the interval,
    the interval is shrunk by ``shrink`` and a CorrectorWarning is issued.
    """
    W = W or profile.potential
    X = profile.X_max if X_max is None else min(X_max, profile.X_max)
    while True:
        xs = profile.x[(profile.x >= 0) & (profile.x <= X + 1e-12)]
        X = float(xs[-1])
        I0 = 2.0 * _shoot(W, 0.0, X, [X], rtol, atol).y[3, -1]
        I1 = 2.0 * _shoot(W, 1.0, X, [X], rtol, atol).y[3, -1]
        c = -I0 / (I1 - I0)
        sol = _shoot(W, c, X, xs, rtol, atol)
        psi, dpsi = sol.y[1], sol.y[2]
        if not _blown_up(psi, growth_tol):
            break
        if shrink * X < min_X:
            raise RuntimeError("corrector blows up even on the smallest interval")
        warnings.warn(f"corrector growing mode visible at X={X:.3g}; re-shooting on "
                      f"[0, {shrink * X:.3g}]", CorrectorWarning, stacklevel=2)
        X *= shrink
    x = np.concatenate([-xs[:0:-1], xs])
    return Corrector(x, np.concatenate([psi[:0:-1], psi]),
                     np.concatenate([-dpsi[:0:-1], dpsi]), float(c), X, profile)


def corrector_affinity(profile, cs, X=None, rtol=1e-13, atol=1e-15):
    """int phi'' psi_c' for each trial c (used to check the affine dependence)."""
    W = profile.potential
    X = profile.X_max / 2 if X is None else X
    return np.array([2.0 * _shoot(W, float(c), X, [X], rtol, atol).y[3, -1] for c in cs])


class CircleTrajectory(NamedTuple):
    t: np.ndarray
    r: np.ndarray
    rdot: np.ndarray
    alpha: float
    vanished: bool


def circle_rhs(alpha):
    def f(y):
        r, v = y
        return np.array([v, (1.0 - v * v) * (-1.0 / r - alpha * v)])
    return f


AB5 = np.array([1901.0, -2774.0, 2616.0, -1274.0, 251.0]) / 720.0
AM5 = np.array([251.0, 646.0, -264.0, 106.0, -19.0]) / 720.0


def _rk4(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def circle_ode_solve(r0, rdot0=0.0, alpha=0.0, dt=1e-4, t_end=1.0, r_stop=0.01):
    """Fixed-step fifth-order Adams-Bashforth-Moulton (PECE) for the radius ODE.

    The first four steps are taken with classical RK4. The trajectory ends at
    ``t_end`` or at the first step with r <= r_stop (``vanished`` set).
    """
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    if not abs(rdot0) < 1:
        raise ValueError("|rdot0| must be below the unit speed bound")
    if not dt > 0:
        raise ValueError("dt must be positive")
    f = circle_rhs(alpha)
    n_max = int(math.ceil(t_end / dt - 1e-9))
    ys = [np.array([float(r0), float(rdot0)])]
    fs = [f(ys[0])]
    vanished = False
    for n in range(n_max):
        y = ys[-1]
        if n < 4:
            y_new = _rk4(f, y, dt)
        else:
            hist = np.array(fs[-1:-6:-1])  # f_n, f_{n-1}, ..., f_{n-4}
            pred = y + dt * AB5 @ hist
            f_pred = f(pred)
            y_new = y + dt * (AM5[0] * f_pred + AM5[1:] @ hist[:4])
        if not np.all(np.isfinite(y_new)) or y_new[0] <= r_stop:
            if np.all(np.isfinite(y_new)) and y_new[0] > 0:
                ys.append(y_new)
            vanished = True
            break
        ys.append(y_new)
        fs.append(f(y_new))
    Y = np.array(ys)
    t = dt * np.arange(len(Y))
    return CircleTrajectory(t, Y[:, 0], Y[:, 1], float(alpha), vanished)


class ACCircle(NamedTuple):
    radius: np.ndarray
    vanished: np.ndarray


def allen_cahn_circle(r0, t):
    """Radius sqrt(r0^2 - 2t) under curvature flow; 0 with ``vanished`` past r0^2/2."""
    t = np.asarray(t, dtype=float)
    s = r0 * r0 - 2.0 * t
    vanished = s <= 0
    radius = np.sqrt(np.where(vanished, 0.0, s))
    if radius.ndim == 0:
        return ACCircle(float(radius), bool(vanished))
    return ACCircle(radius, vanished)


def vanishing_time(r0):
    return 0.5 * r0 * r0


def velocity_adjusted_perimeter(r, rdot, c0=1.0):
    """Plain c0 2 pi r and velocity-adjusted c0 pi r (s + 1/s), s = sqrt(1 - rdot^2)."""
    rdot = np.asarray(rdot, dtype=float)
    if np.any(np.abs(rdot) >= 1.0):
        raise ValueError("|rdot| must be below 1")
    s = np.sqrt(1.0 - rdot * rdot)
    plain = c0 * 2.0 * math.pi * np.asarray(r, dtype=float)
    adjusted = c0 * math.pi * np.asarray(r, dtype=float) * (s + 1.0 / s)
    if plain.ndim == 0:
        return float(plain), float(adjusted)
    return plain, adjusted
