"""
Littlewood-Paley blocks and Besov norms on the periodic grid.

The low-frequency profile chi is 1 on |k| <= 3/4 and 0 on |k| >= 4/3,
joined by a C^3 septic smoothstep. Annulus profiles are
phi_j(k) = chi(k / 2^(j+1)) - chi(k / 2^j), supported in
3/4 * 2^j <= |k| <= 8/3 * 2^j.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np

from common.errors import ConfigurationError, ParameterError
from grid_field import Field, Grid, spectral_multiply

INNER_RADIUS = 3.0 / 4.0
OUTER_RADIUS = 4.0 / 3.0
MIN_PARTITION_POINTS = 32


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t ** 4 * (35.0 - 84.0 * t + 70.0 * t ** 2 - 20.0 * t ** 3)


def chi(xi):
    r = np.abs(np.asarray(xi, dtype=float))
    t = (r - INNER_RADIUS) / (OUTER_RADIUS - INNER_RADIUS)
    out = 1.0 - _smoothstep(t)
    out = np.where(r <= INNER_RADIUS, 1.0, out)
    return np.where(r >= OUTER_RADIUS, 0.0, out)


def phi(xi):
    xi = np.asarray(xi, dtype=float)
    return chi(xi / 2.0) - chi(xi)


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    grid: Grid
    j_max: int
    chi: np.ndarray
    phi: np.ndarray  # shape (j_max + 1, n_rfft); row j is phi_j

    def profile(self, j):
        if j == -1:
            return self.chi
        if 0 <= j <= self.j_max:
            return self.phi[j]
        return None

    @property
    def indices(self):
        return range(-1, self.j_max + 1)


def top_index(grid: Grid) -> int:
    """Largest j whose annulus lower edge 3/4 * 2^j lies below Nyquist."""
    nyquist = grid.nyquist
    j = -1
    while INNER_RADIUS * 2.0 ** (j + 1) < nyquist:
        j += 1
    return j


@lru_cache(maxsize=16)
def build_partition(grid: Grid) -> DyadicPartition:
    """
    Raises:
        ConfigurationError: the grid cannot hold at least two annuli
    """
    if grid.n_points < MIN_PARTITION_POINTS:
        raise ConfigurationError(
            f"dyadic partition needs n_points >= {MIN_PARTITION_POINTS}, got {grid.n_points}"
        )
    j_max = top_index(grid)
    if j_max < 1:
        raise ConfigurationError(
            f"grid too coarse for a dyadic partition (Nyquist {grid.nyquist:.4g}, J_max {j_max})"
        )
    k = np.asarray(grid.rwavenumbers)
    low = chi(k)
    rows = np.array([phi(k / 2.0 ** j) for j in range(j_max + 1)])
    low.setflags(write=False)
    rows.setflags(write=False)
    return DyadicPartition(grid=grid, j_max=j_max, chi=low, phi=rows)


def dyadic_block(f: Field, j: int, partition: DyadicPartition) -> Field:
    """Delta_j f; zero for j <= -2 and for j above the grid's top annulus."""
    profile = partition.profile(j)
    if profile is None:
        return f.with_values(np.zeros(f.grid.n_points))
    return f.with_values(spectral_multiply(f.values, f.grid, profile))


def low_pass(f: Field, j: int, partition: DyadicPartition) -> Field:
    """S_j f = chi(2^-j D) f."""
    profile = chi(np.asarray(f.grid.rwavenumbers) / 2.0 ** j)
    return f.with_values(spectral_multiply(f.values, f.grid, profile))


def _check_exponent(name, value):
    value = float(value)
    if np.isnan(value) or value < 1.0:
        raise ParameterError(f"{name} must be >= 1 or inf, got {value}")
    return value


def lp_norm(values: np.ndarray, dx: float, p: float) -> float:
    if np.isinf(p):
        return float(np.max(np.abs(values)))
    return float((np.sum(np.abs(values) ** p) * dx) ** (1.0 / p))


def block_norms(f: Field, s: float, p: float, partition: DyadicPartition) -> List[Tuple[int, float]]:
    """[(j, 2^(j s) ||Delta_j f||_Lp)] for j = -1..J_max."""
    p = _check_exponent("p", p)
    rows = []
    for j in partition.indices:
        block = dyadic_block(f, j, partition)
        rows.append((j, 2.0 ** (j * s) * lp_norm(block.values, f.grid.dx, p)))
    return rows


def besov_norm(f: Field, s: float, p: float, r: float, partition: DyadicPartition) -> float:
    """l^r sum over j of 2^(j s) ||Delta_j f||_Lp."""
    r = _check_exponent("r", r)
    weights = np.array([value for _, value in block_norms(f, s, p, partition)])
    if np.isinf(r):
        return float(np.max(weights))
    return float(np.sum(weights ** r) ** (1.0 / r))


def high_frequency_fraction(f: Field, partition: DyadicPartition, j: Optional[int] = None) -> float:
    """
    ||f - S_j f||_2 / ||f||_2, 0 for the zero field. The default j = J_max
    leaves exactly the top annulus, since S_(J_max + 1) passes every grid mode.
    """
    total = lp_norm(f.values, f.grid.dx, 2.0)
    if total == 0.0 or not np.isfinite(total):
        return 0.0 if total == 0.0 else 1.0
    j = partition.j_max if j is None else j
    tail = f.values - low_pass(f, j, partition).values
    return lp_norm(tail, f.grid.dx, 2.0) / total
