"""Periodic-grid backend on the unit torus with spectral differential operators."""
import math
from typing import NamedTuple

import numpy as np
from scipy import fft as sfft

from .potentials import DoubleWell
from .schemes import SchemeParams, SchemeState, gd_step, step as scheme_step

try:  # FFTW plans roughly halve transform cost; scipy.fft is the fallback
    import pyfftw
    import pyfftw.builders
except ImportError:  # pragma: no cover
    pyfftw = None


class PeriodicGrid:
    """Uniform grid of ``n`` points per axis on [0, 1)^dim.

    The Laplacian symbol of integer mode k is -(2 pi)^2 |k|^2; arrays are kept
    in the real-FFT (half-spectrum) layout.
    """

    def __init__(self, dim, n):
        if dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        if n < 2:
            raise ValueError("need at least two points per axis")
        self.dim = dim
        self.n = n
        self.h = 1.0 / n
        self.shape = (n,) * dim
        axes = [np.fft.fftfreq(n, d=1.0 / n)] * (dim - 1) + [np.fft.rfftfreq(n, d=1.0 / n)]
        mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
        k2 = sum(m.astype(float) ** 2 for m in mesh)
        self.symbol = (2.0 * math.pi) ** 2 * k2  # eigenvalues of -Laplacian
        # Parseval multiplicities for the half spectrum
        w = np.full(axes[-1].shape, 2.0)
        w[0] = 1.0
        if n % 2 == 0:
            w[-1] = 1.0
        self._weights = np.broadcast_to(w, self.symbol.shape)
        self._solve_cache = {}
        self._plans = None

    @property
    def size(self):
        return self.n ** self.dim

    @property
    def cell_volume(self):
        return self.h ** self.dim

    def coords(self):
        x = np.arange(self.n) * self.h
        return np.meshgrid(*([x] * self.dim), indexing="ij")

    def _plan(self):
        if self._plans is None:
            a = pyfftw.empty_aligned(self.shape, dtype="float64")
            fwd = pyfftw.builders.rfftn(a, planner_effort="FFTW_MEASURE")
            bwd = pyfftw.builders.irfftn(fwd.output_array.copy(), s=self.shape,
                                         planner_effort="FFTW_MEASURE")
            self._plans = fwd, bwd
        return self._plans

    def fft(self, u):
        if pyfftw is None:
            return sfft.rfftn(u)
        return self._plan()[0](u).copy()

    def ifft(self, uh):
        if pyfftw is None:
            return sfft.irfftn(uh, s=self.shape)
        return self._plan()[1](uh).copy()

    def laplacian(self, u):
        return self.ifft(-self.symbol * self.fft(u))

    def dirichlet(self, u):
        """int |grad u|^2 dx, spectrally."""
        uh = self.fft(u)
        return float(np.sum(self._weights * self.symbol * np.abs(uh) ** 2)) / self.size ** 2

    def integrate(self, f):
        return float(np.sum(f)) * self.cell_volume

    def _denominator(self, coeff_mass, coeff_lap):
        key = (coeff_mass, coeff_lap)
        den = self._solve_cache.get(key)
        if den is None:
            if len(self._solve_cache) > 16:
                self._solve_cache.clear()
            den = coeff_mass + coeff_lap * self.symbol
            self._solve_cache[key] = den
        return den

    def implicit_solve(self, rhs, coeff_mass, coeff_lap, mean=None):
        """Solve (coeff_mass - coeff_lap * Laplacian) out = rhs exactly.

        With ``mean`` given, the zero mode of the result is set to that value.
        """
        if not coeff_mass > 0 or coeff_lap < 0:
            raise ValueError("need coeff_mass > 0 and coeff_lap >= 0")
        uh = self.fft(rhs)
        uh /= self._denominator(coeff_mass, coeff_lap)
        if mean is not None:
            uh.flat[0] = mean * self.size
        return self.ifft(uh)

    def implicit_gradient(self, x, concave, mass, step, mean=None):
        """g solving u = x - step*g with (mass - Laplacian) u + concave = g.

        Computed per mode as (A x + concave)/(1 + step A), A = mass + symbol, so
        no cancellation occurs when ``step`` is tiny. Returns (u, g). With
        ``mean`` set, the zero mode of u is pinned and g absorbs the difference.
        """
        xh = self.fft(x)
        A = self._denominator(mass, 1.0)
        gh = (A * xh + self.fft(concave)) / self._denominator(1.0 + step * mass, step)
        if mean is not None:
            gh.flat[0] = (xh.flat[0] - mean * self.size) / step
        g = self.ifft(gh)
        return x - step * g, g


def enforce_mean(u, p):
    """Replace the zero Fourier mode of ``u`` by ``p``; all other modes untouched."""
    u = np.asarray(u, dtype=float)
    return u - u.mean() + p


class AreaPerimeter(NamedTuple):
    area: float
    perimeter: float
    clamped: bool


def area_perimeter_estimate(u, grid):
    """Disk area from int (u+1)/2 and the perimeter 2 sqrt(pi A) of a disk of that area.

    Momentum runs can push u below -1 so that the raw area is negative; it is
    then clamped to zero and ``clamped`` is set.
    """
    area = grid.integrate((np.asarray(u) + 1.0) * 0.5)
    clamped = area < 0.0
    if clamped:
        area = 0.0
    return AreaPerimeter(area, 2.0 * math.sqrt(math.pi * area), clamped)


class GridBackend:
    """Scheme backend for fields on a periodic grid.

    ``mean`` fixes the spatial average in every implicit solve (volume
    preservation); ``None`` leaves it free.
    """

    def __init__(self, grid, potential=None, mean=None):
        self.grid = grid
        self.potential = potential or DoubleWell()
        self.mean_target = mean

    def implicit_solve(self, rhs, step, eps):
        return self.grid.implicit_solve(rhs, 1.0 + 2.0 * step / eps ** 2, step,
                                        mean=self.mean_target)

    def implicit_gradient(self, x, concave, step, eps):
        return self.grid.implicit_gradient(x, concave, 2.0 / eps ** 2, step,
                                           mean=self.mean_target)

    def concave_grad(self, u, eps):
        return self.potential.concave_prime(u) / eps ** 2

    def full_grad(self, u, eps):
        return (-self.grid.laplacian(u) + 2.0 * u / eps ** 2
                + self.potential.concave_prime(u) / eps ** 2)

    def energy(self, u, eps):
        """int |grad u|^2/2 + W(u)/eps^2, the functional the steppers descend."""
        return 0.5 * self.grid.dirichlet(u) + self.grid.integrate(self.potential(u)) / eps ** 2

    def gl_energy(self, u, eps):
        return gl_energy(u, eps, self.potential, self.grid)

    def norm2(self, v):
        return self.grid.integrate(np.square(v))

    def mean(self, u):
        return float(np.mean(u))

    def diagnostics(self, u):
        if self.grid.dim != 2:
            return {}
        ap = area_perimeter_estimate(u, self.grid)
        return {"area_est": ap.area, "perimeter_est": ap.perimeter}


def gl_energy(u, eps, W, grid):
    """Ginzburg-Landau energy int eps/2 |grad u|^2 + W(u)/eps on the torus."""
    return 0.5 * eps * grid.dirichlet(u) + grid.integrate(W(u)) / eps


def _periodic_offsets(grid, center):
    return [((x - c + 0.5) % 1.0) - 0.5 for x, c in zip(grid.coords(), center)]


def disk_init(grid, center=(0.5, 0.5), radius=0.45, eps=None, profile=np.tanh):
    """+-1 indicator of a disk (ball for dim 3); +1 inside.

    With ``eps`` set, returns ``profile(signed_distance/eps)`` instead, with
    the signed distance positive inside.
    """
    if not 0 < radius < 0.5:
        raise ValueError("radius must lie in (0, 1/2) on the unit torus")
    if len(center) != grid.dim:
        raise ValueError("center dimension does not match the grid")
    dist = np.sqrt(sum(d * d for d in _periodic_offsets(grid, center)))
    if eps is None:
        return np.where(dist < radius, 1.0, -1.0)
    return profile((radius - dist) / eps)


def cshape_init(grid):
    """+-1 indicator of a C-shaped set opening to the right (dim 2)."""
    if grid.dim != 2:
        raise ValueError("the C-shape is two-dimensional")
    x, y = grid.coords()
    outer = (np.abs(x - 0.5) < 0.3) & (np.abs(y - 0.5) < 0.3)
    gap = (x > 0.4) & (np.abs(y - 0.5) < 0.12)
    return np.where(outer & ~gap, 1.0, -1.0)


def schwarzp_init(grid, radius=0.3):
    """+-1 indicator of three orthogonal cylinders through the cell centre (dim 3)."""
    if grid.dim != 3:
        raise ValueError("the Schwarz P initial condition is three-dimensional")
    x, y, z = (c - 0.5 for c in grid.coords())
    r2 = radius ** 2
    inside = (y * y + z * z < r2) | (x * x + z * z < r2) | (x * x + y * y < r2)
    return np.where(inside, 1.0, -1.0)


def cylinder_union_volume(radius=0.3):
    """Exact volume of three orthogonal unit-length cylinders of radius < 1/2."""
    r = radius
    return 3 * math.pi * r ** 2 - 3 * (16.0 / 3.0) * r ** 3 + 8 * (2 - math.sqrt(2)) * r ** 3


def gyroid_init(grid):
    """+-1 indicator of {cos X sin Y + cos Y sin Z + cos Z sin X < 0}, X = 2 pi (x - 1/2)."""
    if grid.dim != 3:
        raise ValueError("the gyroid initial condition is three-dimensional")
    X, Y, Z = (2 * math.pi * (c - 0.5) for c in grid.coords())
    g = np.cos(X) * np.sin(Y) + np.cos(Y) * np.sin(Z) + np.cos(Z) * np.sin(X)
    return np.where(g < 0, 1.0, -1.0)


def bump_init(grid, center, radius, amplitude=2.0):
    """1 - amplitude * b(x) for a smooth bump b (b = 1 at the centre) supported in a ball.

    The default amplitude 2 takes u to the other well, -1, at the centre.
    """
    dist2 = sum(d * d for d in _periodic_offsets(grid, center)) / radius ** 2
    b = np.zeros(grid.shape)
    inside = dist2 < 1.0
    b[inside] = np.exp(1.0 - 1.0 / (1.0 - dist2[inside]))
    return 1.0 - amplitude * b


def warm_up(u, grid, eps, step, n_steps=10, potential=None):
    """Ten (by default) convex-concave gradient steps to smooth indicator data."""
    backend = GridBackend(grid, potential)
    params = SchemeParams(tau=step, eta=step, eps=eps, scheme="gd")
    state = SchemeState.at_rest(u)
    for _ in range(n_steps):
        state = gd_step(state, params, backend)
    return state.u


def finite_speed_probe(grid, u0, probe_index, t_max, params, potential=None):
    """sup_{t <= t_max} |u(t, probe) - 1| starting at rest from ``u0``."""
    backend = GridBackend(grid, potential)
    state = SchemeState.at_rest(u0)
    dev = abs(state.u[probe_index] - 1.0)
    n_steps = int(round(t_max / params.time_step))
    for _ in range(n_steps):
        state = scheme_step(state, params, backend)
        dev = max(dev, abs(state.u[probe_index] - 1.0))
    return dev
