"""
Nonlocal operators P2 = (4*beta0^2 - d2/dx2)^-1 and P1 = d/dx P2.

Two independent routes are provided: Fourier symbols on the real transform
and a physical-space periodic convolution with the Green's kernel
G(x) = exp(-2|beta0||x|) / (4|beta0|). The convolution loop is compiled
with numba.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from common.constants import IMAGE_SUM_TOLERANCE
from common.errors import ParameterError
from grid_field import Field, Grid, spectral_multiply, second_derivative

logging.getLogger('numba').setLevel(logging.WARNING)

MAX_IMAGES = 100_000


@dataclass(frozen=True)
class HelmholtzParams:
    beta0: float

    def __post_init__(self):
        if not np.isfinite(self.beta0) or self.beta0 == 0:
            raise ParameterError(f"beta0 must be a finite nonzero real, got {self.beta0}")
        object.__setattr__(self, "beta0", float(self.beta0))

    @property
    def abs_beta(self):
        return abs(self.beta0)

    @property
    def mass_coefficient(self):
        """4*beta0^2, the zero-frequency value of the inverse symbol."""
        return 4.0 * self.beta0 * self.beta0


@lru_cache(maxsize=64)
def p2_symbol(grid: Grid, params: HelmholtzParams) -> np.ndarray:
    k = np.asarray(grid.rwavenumbers)
    symbol = 1.0 / (params.mass_coefficient + k * k)
    symbol.setflags(write=False)
    return symbol


@lru_cache(maxsize=64)
def p1_symbol(grid: Grid, params: HelmholtzParams) -> np.ndarray:
    k = np.asarray(grid.rwavenumbers)
    symbol = 1j * k / (params.mass_coefficient + k * k)
    symbol[-1] = 0.0
    symbol.setflags(write=False)
    return symbol


def p2_values(values: np.ndarray, grid: Grid, params: HelmholtzParams) -> np.ndarray:
    return spectral_multiply(values, grid, p2_symbol(grid, params))


def p1_values(values: np.ndarray, grid: Grid, params: HelmholtzParams) -> np.ndarray:
    return spectral_multiply(values, grid, p1_symbol(grid, params))


def apply_p2(f: Field, params: HelmholtzParams) -> Field:
    """Fourier mode k multiplied by 1/(4 beta0^2 + k^2)."""
    return f.with_values(p2_values(f.values, f.grid, params))


def apply_p1(f: Field, params: HelmholtzParams) -> Field:
    """Fourier mode k multiplied by i k/(4 beta0^2 + k^2), Nyquist zeroed."""
    return f.with_values(p1_values(f.values, f.grid, params))


@lru_cache(maxsize=16)
def _periodized_kernel(grid, params):
    beta = params.abs_beta
    scale = 1.0 / (4.0 * beta)
    period = grid.length
    separation = grid.dx * np.arange(grid.n_points)

    kernel = scale * np.exp(-2.0 * beta * separation)
    for image in range(1, MAX_IMAGES + 1):
        right = scale * np.exp(-2.0 * beta * (separation + image * period))
        left = scale * np.exp(-2.0 * beta * np.abs(separation - image * period))
        kernel += right + left
        if max(right.max(), left.max()) < IMAGE_SUM_TOLERANCE * scale:
            break
    kernel.setflags(write=False)
    return kernel


def green_kernel(grid: Grid, params: HelmholtzParams) -> np.ndarray:
    """
    Periodized kernel sampled at separations m*dx, m = 0..N-1.

    Images of the line kernel are summed until they drop below
    IMAGE_SUM_TOLERANCE relative to G(0).
    """
    return _periodized_kernel(grid, params)


@njit(cache=True)
def _periodic_convolution(values, kernel, dx):
    n = values.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += kernel[(i - j) % n] * values[j]
        out[i] = acc * dx
    return out


def green_convolve(f: Field, params: HelmholtzParams, kink_correction: bool = True) -> Field:
    """
    Periodic convolution of f with the Green's kernel, quadrature weight dx.

    Args:
        f: Field to smooth
        params: HelmholtzParams
        kink_correction: lower the zero-separation weight by dx/12. G' jumps
            by exactly 1 at the origin for every beta0, and this is the
            matching Euler-Maclaurin term. Without it the quadrature error
            is O(beta0^2 dx^2).

    Returns:
        Field approximating apply_p2(f)
    """
    kernel = np.array(green_kernel(f.grid, params))
    if kink_correction:
        kernel[0] -= f.grid.dx / 12.0
    values = np.ascontiguousarray(f.values, dtype=np.float64)
    return f.with_values(_periodic_convolution(values, kernel, f.grid.dx))


def v_from_n(n: Field, params: HelmholtzParams) -> Field:
    return apply_p2(n, params)


def n_from_v(v: Field, params: HelmholtzParams) -> Field:
    """n = 4 beta0^2 v - v_xx."""
    return v.with_values(params.mass_coefficient * v.values - second_derivative(v).values)
