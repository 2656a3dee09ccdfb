"""
Uniform periodic grid, sampled fields and the differentiation primitives
every other module builds on.

The box is [-L, L) identified periodically, x_i = -L + i*dx. Spectral
operators work on the real FFT of the samples (scipy.fft.rfft); the
wavenumbers exposed on the Grid use the full FFT ordering.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import fft as sp_fft

from common.constants import FILTER_ORDER, FILTER_STRENGTH, MIN_N_POINTS
from common.errors import ConfigurationError, SamplingError


def _is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    half_width: float
    n_points: int

    def __post_init__(self):
        if not np.isfinite(self.half_width) or self.half_width <= 0:
            raise ConfigurationError(f"half_width must be > 0, got {self.half_width}")
        if int(self.n_points) != self.n_points or not _is_power_of_two(int(self.n_points)):
            raise ConfigurationError(f"n_points must be a power of two, got {self.n_points}")
        if self.n_points < MIN_N_POINTS:
            raise ConfigurationError(f"n_points must be >= {MIN_N_POINTS}, got {self.n_points}")
        object.__setattr__(self, "half_width", float(self.half_width))
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def length(self) -> float:
        return 2.0 * self.half_width

    @cached_property
    def dx(self) -> float:
        return self.length / self.n_points

    @cached_property
    def x(self):
        positions = -self.half_width + self.dx * np.arange(self.n_points)
        positions.setflags(write=False)
        return positions

    @cached_property
    def wavenumbers(self):
        """Full FFT ordering: 0, 1, ..., N/2-1, -N/2, ..., -1 (times pi/L)."""
        k = 2.0 * np.pi * sp_fft.fftfreq(self.n_points, d=self.dx)
        k.setflags(write=False)
        return k

    @cached_property
    def rwavenumbers(self):
        """Nonnegative wavenumbers of the real transform; the last entry is Nyquist."""
        k = 2.0 * np.pi * sp_fft.rfftfreq(self.n_points, d=self.dx)
        k.setflags(write=False)
        return k

    @property
    def nyquist(self) -> float:
        return np.pi / self.dx


def make_grid(half_width: float, n_points: int) -> Grid:
    """
    Build a periodic grid on [-half_width, half_width).

    Raises:
        ConfigurationError: n_points not a power of two >= 8, or half_width <= 0
    """
    return Grid(half_width=half_width, n_points=n_points)


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray
    blown_up: bool = field(default=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] != self.grid.n_points:
            raise ConfigurationError(
                f"field has {values.size} values, grid expects {self.grid.n_points}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not np.all(np.isfinite(values)):
            object.__setattr__(self, "blown_up", True)

    def __len__(self):
        return self.grid.n_points

    def __neg__(self):
        return self.with_values(-self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def integral(self) -> float:
        """Periodic trapezoid, i.e. sum(values) * dx."""
        return float(np.sum(self.values) * self.grid.dx)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)


def check_same_grid(*fields: "Field") -> Grid:
    grid = fields[0].grid
    for other in fields[1:]:
        if other.grid != grid:
            raise ConfigurationError(f"grid mismatch: {grid} vs {other.grid}")
    return grid


def sample(grid: Grid, f: Callable) -> Field:
    """
    Sample f at the grid nodes. f may be vectorized over a numpy array or a
    plain scalar function.

    Raises:
        SamplingError: f returned a non-finite value
    """
    values = None
    try:
        candidate = np.asarray(f(grid.x), dtype=float)
        if candidate.shape == (grid.n_points,):
            values = candidate
        elif candidate.ndim == 0:
            values = np.full(grid.n_points, float(candidate))
    except (TypeError, ValueError):
        values = None

    if values is None:
        values = np.array([f(float(xi)) for xi in grid.x], dtype=float)

    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise SamplingError(f"sampled function is not finite at x={grid.x[bad[0]]:.6g} ({bad.size} points)")
    return Field(grid, values)


def spectral_multiply(values: np.ndarray, grid: Grid, symbol: np.ndarray) -> np.ndarray:
    """Apply a Fourier multiplier given on grid.rwavenumbers to real samples."""
    coefficients = sp_fft.rfft(values)
    return sp_fft.irfft(coefficients * symbol, n=grid.n_points)


def derivative_symbol(grid: Grid) -> np.ndarray:
    symbol = 1j * np.array(grid.rwavenumbers)
    symbol[-1] = 0.0  # unpaired Nyquist mode
    return symbol


def derivative(f: Field) -> Field:
    """Spectral d/dx; the Nyquist mode's derivative is zero."""
    return f.with_values(spectral_multiply(f.values, f.grid, derivative_symbol(f.grid)))


def second_derivative(f: Field) -> Field:
    """Spectral d2/dx2 with symbol -k^2 (Nyquist kept)."""
    k = f.grid.rwavenumbers
    return f.with_values(spectral_multiply(f.values, f.grid, -k * k))


def upwind_values(values: np.ndarray, wind: np.ndarray, dx: float) -> np.ndarray:
    backward = (values - np.roll(values, 1)) / dx
    forward = (np.roll(values, -1) - values) / dx
    return np.where(wind > 0, backward, forward)


def upwind_derivative(f: Field, wind: Field) -> Field:
    """
    First-order one-sided difference for f_t + wind * f_x = ...:
    backward where wind > 0, forward otherwise, periodic wrap.
    """
    grid = check_same_grid(f, wind)
    return f.with_values(upwind_values(f.values, wind.values, grid.dx))


def centered_derivative(f: Field) -> Field:
    values = f.values
    return f.with_values((np.roll(values, -1) - np.roll(values, 1)) / (2.0 * f.grid.dx))


def spectral_filter(grid: Grid) -> np.ndarray:
    """exp(-strength * (k / k_Nyquist)^order) on grid.rwavenumbers."""
    ratio = np.asarray(grid.rwavenumbers) / grid.nyquist
    return np.exp(-FILTER_STRENGTH * ratio ** FILTER_ORDER)


def dealias_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    return spectral_multiply(values, grid, spectral_filter(grid))


def dealias(f: Field) -> Field:
    """Smooth exponential filter: modes up to 2/3 of Nyquist pass to within 2e-5, Nyquist itself is damped by e^-36."""
    return f.with_values(dealias_values(f.values, f.grid))


def reflect(f: Field) -> Field:
    """x -> -x on the grid, i.e. index i -> (N - i) mod N."""
    return f.with_values(np.roll(f.values[::-1], 1))
