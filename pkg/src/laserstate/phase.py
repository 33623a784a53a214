"""Canonical phase and phase-difference statistics from Susskind-Glogower moments.

Sign convention: <exp(i m Delta)> = Tr[rho E_a^m (E_b^dag)^m] with
Delta = phi_a - phi_b, and negative orders are complex conjugates.  The
distribution is the Fourier series

    P(Delta) = (1/2pi) sum_p exp(i p Delta) <exp(-i p Delta)>.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import FourierResidue, ValidationError
from .hilbert import LinearOperator, ModeSpace, partial_trace

TWO_PI = 2.0 * math.pi
DEFAULT_GRID = 4096
RESIDUE_DISCARD = 1e-10
RESIDUE_ERROR = 1e-8


def trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    return float(np.trapezoid(y, x))


@dataclass(frozen=True, eq=False)
class PhaseDistribution:
    """A 2pi-periodic density sampled on ``[origin, origin + 2pi]``.

    The grid includes both window endpoints so the trapezoidal rule applies
    to non-periodic integrands such as the variance kernel.
    """

    window_origin: float
    grid: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        g = np.array(self.grid, dtype=float)
        d = np.array(self.density, dtype=float)
        g.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "density", d)
        if g.shape != d.shape or g.ndim != 1:
            raise ValidationError("grid and density must be 1-D arrays of equal length")
        if d.min() < -1e-9:
            raise ValidationError(f"negative density {d.min():.3g}")
        total = trapezoid(d, g)
        if abs(total - 1.0) > 1e-6:
            raise ValidationError(f"density integrates to {total:.9g}, not 1")

    def __call__(self, delta):
        """Periodic linear interpolation of the sampled density."""
        return np.interp(delta, self.grid[:-1], self.density[:-1], period=TWO_PI)

    def peak(self) -> float:
        return float(self.grid[int(np.argmax(self.density))])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta_radians", "density"])
            for x, y in zip(self.grid, self.density):
                w.writerow([f"{x:.12g}", f"{y:.12g}"])

    @classmethod
    def from_function(cls, fn, grid_size: int = DEFAULT_GRID, window_origin: float = -math.pi):
        """Sample and renormalize an arbitrary non-negative periodic function."""
        g = window_grid(window_origin, grid_size)
        d = np.asarray(fn(g), dtype=float)
        return cls(window_origin, g, d / trapezoid(d, g))

    @classmethod
    def uniform(cls, grid_size: int = DEFAULT_GRID, window_origin: float = -math.pi):
        g = window_grid(window_origin, grid_size)
        return cls(window_origin, g, np.full(grid_size, 1.0 / TWO_PI))


def window_grid(origin: float, grid_size: int) -> np.ndarray:
    return np.linspace(origin, origin + TWO_PI, grid_size)


# --------------------------------------------------------------------------
# moments


def _single_mode(rho: LinearOperator, mode: Optional[str]) -> np.ndarray:
    space = rho.space
    if mode is None:
        if len(space) != 1:
            raise ValueError(f"state has factors {space.labels}; name the mode")
        return rho.matrix
    return partial_trace(rho, [mode]).matrix


def phase_moment(rho: LinearOperator, m: int, mode: Optional[str] = None) -> complex:
    """<exp(i m phi)> = Tr(rho E^m) = sum_n <n+m|rho|n>.

    Negative ``m`` gives the complex conjugate of the order ``|m|`` moment.
    """
    if m < 0:
        return phase_moment(rho, -m, mode).conjugate()
    mat = _single_mode(rho, mode)
    if m == 0:
        return complex(np.trace(mat))
    return complex(np.trace(mat, offset=-m))


def two_mode_labels(rho: LinearOperator, mode_a: Optional[str], mode_b: Optional[str]):
    if mode_a is not None and mode_b is not None:
        return mode_a, mode_b
    modes = [f.label for f in rho.space.factors if isinstance(f, ModeSpace)]
    if len(modes) != 2:
        raise ValueError(f"cannot infer the two modes from factors {rho.space.labels}")
    return modes[0], modes[1]


def _two_mode_tensor(rho: LinearOperator, mode_a, mode_b) -> np.ndarray:
    a, b = two_mode_labels(rho, mode_a, mode_b)
    red = partial_trace(rho, [a, b])
    # partial_trace keeps original factor order
    if red.space.labels[0] != a:
        da, db = red.space.factor(a).dim, red.space.factor(b).dim
        t = red.matrix.reshape(db, da, db, da).transpose(1, 0, 3, 2)
    else:
        da, db = red.space.dims
        t = red.matrix.reshape(da, db, da, db)
    return t


def _moments_from_tensor(t: np.ndarray, p_max: int) -> np.ndarray:
    # t[i, j, k, l] = <i j| rho |k l>; the m-th moment is
    # sum_{k, j} <k+m, j| rho |k, j+m>
    da, db = t.shape[0], t.shape[1]
    out = np.zeros(p_max + 1, dtype=complex)
    for m in range(p_max + 1):
        if m >= da or m >= db:
            break
        k = np.arange(da - m)
        j = np.arange(db - m)
        out[m] = t[k[:, None] + m, j[None, :], k[:, None], j[None, :] + m].sum()
    return out


def phase_difference_moment(
    rho_ab: LinearOperator, m: int, mode_a: Optional[str] = None, mode_b: Optional[str] = None
) -> complex:
    """<exp(i m Delta)> = Tr[rho E_a^m (E_b^dag)^m] for Delta = phi_a - phi_b."""
    if m < 0:
        return phase_difference_moment(rho_ab, -m, mode_a, mode_b).conjugate()
    t = _two_mode_tensor(rho_ab, mode_a, mode_b)
    return complex(_moments_from_tensor(t, m)[m])


def phase_difference_moments(
    rho_ab: LinearOperator, p_max: int, mode_a: Optional[str] = None, mode_b: Optional[str] = None
) -> np.ndarray:
    """Moments for orders 0..p_max in one pass."""
    return _moments_from_tensor(_two_mode_tensor(rho_ab, mode_a, mode_b), p_max)


# --------------------------------------------------------------------------
# distributions


def fourier_density(moments: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Evaluate the phase Fourier series from non-negative-order moments."""
    delta = np.asarray(delta, dtype=float)
    total = np.full(delta.shape, moments[0].conjugate(), dtype=complex)
    for p in range(1, len(moments)):
        mp = moments[p]
        if mp == 0:
            continue
        total += np.exp(1j * p * delta) * mp.conjugate() + np.exp(-1j * p * delta) * mp
    return total / TWO_PI


def _peak_origin(moments: np.ndarray, grid_size: int) -> float:
    g = np.linspace(0.0, TWO_PI, grid_size, endpoint=False)
    d = fourier_density(moments, g).real
    return float(g[int(np.argmax(d))]) - math.pi


def distribution_from_moments(
    moments: np.ndarray, grid_size: int = DEFAULT_GRID, window_origin: Optional[float] = None
) -> PhaseDistribution:
    if window_origin is None:
        window_origin = _peak_origin(moments, grid_size)
    g = window_grid(window_origin, grid_size)
    vals = fourier_density(moments, g)
    residue = float(np.max(np.abs(vals.imag)))
    if residue > RESIDUE_ERROR:
        raise FourierResidue(f"imaginary residue {residue:.3g} in phase distribution")
    return PhaseDistribution(window_origin, g, vals.real)


def phase_difference_distribution(
    rho_ab: LinearOperator,
    p_max: Optional[int] = None,
    grid_size: int = DEFAULT_GRID,
    window_origin: Optional[float] = None,
    mode_a: Optional[str] = None,
    mode_b: Optional[str] = None,
) -> PhaseDistribution:
    """Phase-difference density from moments up to order ``p_max``.

    ``p_max`` defaults to the largest order supported by the truncation,
    which makes the series exact on the truncated space.  ``window_origin``
    defaults to placing the density peak at the window centre.
    """
    t = _two_mode_tensor(rho_ab, mode_a, mode_b)
    if p_max is None:
        p_max = min(t.shape[0], t.shape[1]) - 1
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    if grid_size < 8:
        raise ValueError("grid_size must be >= 8")
    moments = _moments_from_tensor(t, p_max)
    return distribution_from_moments(moments, grid_size, window_origin)


def circular_variance(dist: PhaseDistribution, center: Optional[float] = None) -> float:
    """Variance of the phase about ``center`` in the window [center - pi, center + pi].

    ``center`` defaults to the middle of the distribution's own window.
    """
    if center is None:
        center = dist.window_origin + math.pi
    if abs(dist.window_origin - (center - math.pi)) < 1e-12:
        g, d = dist.grid, dist.density
    else:
        g = window_grid(center - math.pi, len(dist.grid))
        d = dist(g)
    return trapezoid((g - center) ** 2 * d, g)


def minimum_variance_center(dist: PhaseDistribution) -> float:
    """Window centre that minimizes the circular variance.

    Scans every grid point at once: the variance about each candidate centre
    is a circular convolution of the density with x^2 on [-pi, pi), done by
    FFT.  For a single-peaked symmetric density this is the peak; for a
    density with two mirror-image peaks it sits between them.
    """
    d = dist.density[:-1]
    g = len(d)
    h = TWO_PI / g
    x = h * np.arange(g)
    x = np.where(x >= math.pi, x - TWO_PI, x)
    # V[j] = h * sum_i (x_i - x_j)^2 P_i  with the offset wrapped into [-pi, pi)
    v = h * np.real(np.fft.ifft(np.fft.fft(d) * np.conj(np.fft.fft(x**2))))
    return float(dist.grid[int(np.argmin(v))])


def minimal_circular_variance(dist: PhaseDistribution) -> float:
    """Circular variance in the 2pi window that makes it smallest."""
    return circular_variance(dist, minimum_variance_center(dist))
