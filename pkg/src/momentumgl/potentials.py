"""Double-well potentials with an exactly quadratic convex part.

The smoothed family

    W_R(s) = s**2 - 2*sqrt((R+1)/R)*sqrt(s**2 + 1/R) + 1 + 2/R

has wells at s = +-1 and converges to (|s| - 1)**2 as R grows. Its convex part
is s**2, so every implicit solve in the time steppers is linear.

Wells at {0, 1} use the argument map s = 2u - 1 with energy scale 1/4. The
convex part stays u**2; the affine leftover ``-u + 1/4`` is folded into the
concave remainder.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate


class Wells(enum.Enum):
    PLUS_MINUS_ONE = "pm1"
    ZERO_ONE = "01"


def _check_R(R):
    if not R > 0:
        raise ValueError(f"smoothing parameter R must be positive, got {R!r}")


def wr_eval(u, R):
    """Evaluate W_R(u); ``R = inf`` gives the limit (|u| - 1)**2."""
    _check_R(R)
    u = np.asarray(u, dtype=float)
    if math.isinf(R):
        out = (np.abs(u) - 1.0) ** 2
    else:
        # (sqrt(u^2 + 1/R) - sqrt(1 + 1/R))^2, rationalized: exact zeros at +-1
        a = np.sqrt(u * u + 1.0 / R)
        c = math.sqrt(1.0 + 1.0 / R)
        out = ((u * u - 1.0) / (a + c)) ** 2
    return out if out.ndim else float(out)


def wr_concave(u, R):
    """Concave remainder W_R(u) - u**2."""
    _check_R(R)
    u = np.asarray(u, dtype=float)
    if math.isinf(R):
        out = 1.0 - 2.0 * np.abs(u)
    else:
        c = math.sqrt((R + 1.0) / R)
        out = -2.0 * c * np.sqrt(u * u + 1.0 / R) + 1.0 + 2.0 / R
    return out if out.ndim else float(out)


def wr_concave_prime(u, R):
    """Derivative of the concave remainder: -2 sqrt((R+1)/R) u / sqrt(u^2 + 1/R)."""
    _check_R(R)
    u = np.asarray(u, dtype=float)
    if math.isinf(R):
        out = -2.0 * np.sign(u)
    else:
        c = math.sqrt((R + 1.0) / R)
        out = -2.0 * c * u / np.sqrt(u * u + 1.0 / R)
    return out if out.ndim else float(out)


def wr_concave_second(u, R):
    _check_R(R)
    if math.isinf(R):
        raise ValueError("the R -> inf limit has no second derivative at 0")
    u = np.asarray(u, dtype=float)
    c = math.sqrt((R + 1.0) / R)
    out = -2.0 * c * (1.0 / R) / (u * u + 1.0 / R) ** 1.5
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DoubleWell:
    """W_R in either well convention, scalar (k = 1) or simplex-constrained vector.

    For ``k >= 2`` the potential is the sum of the scalar {0, 1} potential over
    the components; the constraint sum(u) = 1 is enforced by the solver's
    projection, not by this object.
    """

    R: float = 2.0
    wells: Wells = Wells.PLUS_MINUS_ONE
    k: int = 1

    def __post_init__(self):
        _check_R(self.R)
        if isinstance(self.wells, str):
            object.__setattr__(self, "wells", Wells(self.wells))
        if self.k < 1:
            raise ValueError("dimension k must be positive")
        if self.k >= 2 and self.wells is not Wells.ZERO_ONE:
            raise ValueError("vector potentials require wells at {0, 1}")

    @property
    def well_values(self):
        return (-1.0, 1.0) if self.wells is Wells.PLUS_MINUS_ONE else (0.0, 1.0)

    def _map(self, u):
        if self.wells is Wells.PLUS_MINUS_ONE:
            return u, 1.0
        return 2.0 * u - 1.0, 0.25

    def pointwise(self, u):
        """Componentwise potential values (not summed over vector components)."""
        s, scale = self._map(np.asarray(u, dtype=float))
        return scale * wr_eval(s, self.R)

    def __call__(self, u):
        vals = self.pointwise(u)
        if self.k >= 2:
            return np.sum(vals, axis=-1)
        return vals

    def convex_prime(self, u):
        return 2.0 * np.asarray(u, dtype=float)

    def concave_prime(self, u):
        """Gradient of W(u) - |u|^2, componentwise."""
        u = np.asarray(u, dtype=float)
        if self.wells is Wells.PLUS_MINUS_ONE:
            return wr_concave_prime(u, self.R)
        # d/du [1/4 W_R(2u-1) - u^2] = 1/2 W_R,conc'(2u-1) - 1
        return 0.5 * wr_concave_prime(2.0 * u - 1.0, self.R) - 1.0

    def prime(self, u):
        return self.convex_prime(u) + self.concave_prime(u)

    def second(self, u):
        u = np.asarray(u, dtype=float)
        if self.wells is Wells.PLUS_MINUS_ONE:
            return 2.0 + wr_concave_second(u, self.R)
        return 2.0 + wr_concave_second(2.0 * u - 1.0, self.R)


def multiwell_concave_grad(u, R):
    """Concave gradient of sum_j W_R(2 u_j - 1)/4 for a vector (or rows of vectors).

    The convex part is |u|^2; wells sit at the one-hot vectors once the
    simplex constraint is imposed.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[-1] < 2:
        raise ValueError("vector potential needs k >= 2 components")
    return DoubleWell(R, Wells.ZERO_ONE, k=u.shape[-1]).concave_prime(u)


def profile_constant_c0(W, a=-1.0, b=1.0, tol=1e-10):
    """c0 = int_a^b sqrt(2 W(z)) dz by adaptive Gauss-Kronrod quadrature.

    ``W`` is any scalar callable vanishing at the endpoints. The interval is
    split at its midpoint so the square-root behaviour at the wells sits on
    subinterval endpoints.
    """
    f = lambda z: math.sqrt(max(2.0 * float(W(z)), 0.0))
    mid = 0.5 * (a + b)
    total = 0.0
    for lo, hi in ((a, mid), (mid, b)):
        val, err, info = integrate.quad(f, lo, hi, epsabs=tol, epsrel=0.0,
                                        limit=200, full_output=True)[:3]
        if err > tol:
            raise RuntimeError(
                f"quadrature for c0 did not converge on [{lo}, {hi}]: "
                f"error estimate {err:.3e} > {tol:.1e}")
        total += val
    return total
