"""
Right-hand sides of the two forms of the system.

v-form (used for stepping):
    v_t = (8 b v + 2 v_x) v_x - 8 b^2 v^2
          + 8 b P1(2 b^2 v^2 + v_x^2) + 8 b^2 P2(4 b^2 v^2 - v_x^2)
n-form (conservative, used as an oracle):
    n_t = 4 [n (v_x + 2 b v)]_x,   n = 4 b^2 v - v_xx
with b = beta0.
"""

from dataclasses import dataclass

import numpy as np

from common.constants import KINK_FLOOR
from common.errors import ConfigurationError
from grid_field import (
    Field,
    Grid,
    centered_derivative,
    dealias_values,
    derivative,
    derivative_symbol,
    second_derivative,
    spectral_multiply,
    upwind_values,
)
from helmholtz import HelmholtzParams, n_from_v, p1_values, p2_values, v_from_n

DERIVATIVE_MODES = ("spectral", "upwind")


@dataclass(frozen=True)
class StateV:
    t: float
    v: Field
    params: HelmholtzParams

    @property
    def blown_up(self) -> bool:
        return self.v.blown_up

    @property
    def grid(self) -> Grid:
        return self.v.grid


def _spectral_vx(values: np.ndarray, grid: Grid) -> np.ndarray:
    return spectral_multiply(values, grid, derivative_symbol(grid))


def velocity_values(v: np.ndarray, vx: np.ndarray, beta0: float) -> np.ndarray:
    return -4.0 * (vx + 2.0 * beta0 * v)


def upwind_vx(values: np.ndarray, grid: Grid, beta0: float) -> np.ndarray:
    """
    One-sided v_x against the characteristic speed -4(v_x + 2 beta0 v),
    with the speed's sign taken from a centered difference.

    Kinks (grid extrema where the one-sided slopes jump by more than
    |beta0| |v|) are differenced on their own side: the extremum sits
    toward the flatter one-sided slope, so the kink node takes the
    difference away from it and the neighbour across the kink takes the
    difference away from the kink node. No difference straddles a kink.
    """
    dx = grid.dx
    centered = centered_derivative(Field(grid, values)).values
    wind = velocity_values(values, centered, beta0)
    vx = upwind_values(values, wind, dx)

    backward = (values - np.roll(values, 1)) / dx
    forward = (np.roll(values, -1) - values) / dx
    magnitude = np.abs(values)
    with np.errstate(over="ignore", invalid="ignore"):
        kink = (
            (backward * forward <= 0.0)
            & (np.abs(backward - forward) > abs(beta0) * magnitude)
            & (magnitude > KINK_FLOOR * np.max(magnitude))
        )
    if not np.any(kink):
        return vx
    extremum_left = np.abs(backward) <= np.abs(forward)
    vx = np.where(kink, np.where(extremum_left, forward, backward), vx)
    # the neighbour on the far side of the extremum
    left_neighbour = np.roll(kink & extremum_left, -1) & ~kink
    right_neighbour = np.roll(kink & ~extremum_left, 1) & ~kink
    vx = np.where(left_neighbour, backward, vx)
    return np.where(right_neighbour, forward, vx)


def rhs_values(v: np.ndarray, vx: np.ndarray, grid: Grid, params: HelmholtzParams, dealias: bool = True) -> np.ndarray:
    beta = params.beta0
    beta_sq = beta * beta
    with np.errstate(over="ignore", invalid="ignore"):
        transport = (8.0 * beta * v + 2.0 * vx) * vx
        v_sq = v * v
        vx_sq = vx * vx
        if dealias:
            transport = dealias_values(transport, grid)
            v_sq = dealias_values(v_sq, grid)
            vx_sq = dealias_values(vx_sq, grid)
        return (
            transport
            - 8.0 * beta_sq * v_sq
            + 8.0 * beta * p1_values(2.0 * beta_sq * v_sq + vx_sq, grid, params)
            + 8.0 * beta_sq * p2_values(4.0 * beta_sq * v_sq - vx_sq, grid, params)
        )


def rhs_v(state: StateV, derivative: str = "spectral", dealias: bool = True) -> Field:
    """
    Time derivative of v.

    Args:
        state: StateV
        derivative: "spectral" or "upwind" (first-order one-sided v_x)
        dealias: smooth exponential filter on the quadratic products

    Returns:
        Field of v_t values, flagged blown_up if anything went non-finite
    """
    if derivative not in DERIVATIVE_MODES:
        raise ConfigurationError(f"derivative must be one of {DERIVATIVE_MODES}, got '{derivative}'")
    grid = state.grid
    values = state.v.values
    if derivative == "spectral":
        vx = _spectral_vx(values, grid)
    else:
        vx = upwind_vx(values, grid, state.params.beta0)
    return state.v.with_values(rhs_values(values, vx, grid, state.params, dealias=dealias))


def rhs_n(n: Field, params: HelmholtzParams) -> Field:
    """n_t = 4 [n (v_x + 2 beta0 v)]_x with v = P2 n."""
    v = v_from_n(n, params)
    vx = derivative(v)
    with np.errstate(over="ignore", invalid="ignore"):
        flux = 4.0 * n.values * (vx.values + 2.0 * params.beta0 * v.values)
    return derivative(n.with_values(flux))


def consistency_residual(v: Field, params: HelmholtzParams) -> float:
    """
    Sup-norm mismatch between the two forms, normalized by max(1, ||n||_inf).
    Both sides are evaluated spectrally without dealiasing.
    """
    n = n_from_v(v, params)
    v_t = rhs_v(StateV(0.0, v, params), derivative="spectral", dealias=False)
    n_t_from_v_form = n_from_v(v_t, params)
    n_t = rhs_n(n, params)
    mismatch = np.max(np.abs(n_t_from_v_form.values - n_t.values))
    return float(mismatch / max(1.0, n.sup_norm()))


def flow_velocity(v: Field, params: HelmholtzParams) -> Field:
    """Characteristic speed -4(v_x + 2 beta0 v)."""
    vx = derivative(v)
    return v.with_values(velocity_values(v.values, vx.values, params.beta0))


def flow_velocity_gradient(v: Field, params: HelmholtzParams) -> Field:
    """-4(v_xx + 2 beta0 v_x); integrating it in time along a path gives log psi_x."""
    vx = derivative(v)
    vxx = second_derivative(v)
    return v.with_values(-4.0 * (vxx.values + 2.0 * params.beta0 * vx.values))


def lagrangian_coefficient_values(v: np.ndarray, vx: np.ndarray, beta0: float) -> np.ndarray:
    return 16.0 * beta0 * beta0 * v + 8.0 * beta0 * vx


def lagrangian_coefficient(v: Field, params: HelmholtzParams) -> Field:
    """
    c = 16 b^2 v + 8 b v_x, so that along a characteristic dn/dt = n (c - 4 n).
    """
    vx = derivative(v)
    with np.errstate(over="ignore", invalid="ignore"):
        return v.with_values(lagrangian_coefficient_values(v.values, vx.values, params.beta0))
