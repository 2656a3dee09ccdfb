import math

import numpy as np
import pytest

from common.errors import ConfigurationError, SamplingError
from grid_field import (
    Field,
    centered_derivative,
    dealias,
    derivative,
    make_grid,
    reflect,
    sample,
    second_derivative,
    upwind_derivative,
)


def test_make_grid_spacing():
    grid = make_grid(16, 1024)
    assert grid.dx == 0.03125
    assert grid.dx * grid.n_points == pytest.approx(2 * grid.half_width)
    assert grid.x[0] == -16.0


def test_unit_period_wavenumbers_are_integers():
    grid = make_grid(np.pi, 8)
    np.testing.assert_allclose(grid.wavenumbers, [0, 1, 2, 3, -4, -3, -2, -1], atol=1e-12)


def test_wavenumbers_antisymmetric(box_grid):
    k = box_grid.wavenumbers
    half = box_grid.n_points // 2
    # k_j = -k_{N-j} for every j except zero and Nyquist
    np.testing.assert_allclose(k[1:half], -k[:half:-1])
    assert k.size == box_grid.n_points


@pytest.mark.parametrize('half_width, n_points', [(16, 1000), (16, 4), (0, 64), (-1, 64), (16, 0)])
def test_make_grid_rejects_bad_input(half_width, n_points):
    with pytest.raises(ConfigurationError):
        make_grid(half_width, n_points)


def test_sample_zero(unit_grid):
    f = sample(unit_grid, lambda x: 0.0 * x)
    assert f.sup_norm() == 0.0
    assert not f.blown_up


def test_sample_single_mode(box_grid):
    f = sample(box_grid, lambda x: np.cos(np.pi * x / box_grid.half_width))
    np.testing.assert_allclose(f.values, np.cos(np.pi * box_grid.x / 16.0))


def test_sample_scalar_only_function(unit_grid):
    f = sample(unit_grid, math.sin)
    np.testing.assert_allclose(f.values, np.sin(unit_grid.x), atol=1e-15)


def test_sample_rejects_non_finite(unit_grid):
    with pytest.raises(SamplingError):
        sample(unit_grid, lambda x: np.where(x > 1.0, np.nan, 0.0))


def test_field_checks_length_and_flags_non_finite(unit_grid):
    with pytest.raises(ConfigurationError):
        Field(unit_grid, np.zeros(10))
    values = np.zeros(unit_grid.n_points)
    values[3] = np.inf
    assert Field(unit_grid, values).blown_up


def test_field_values_are_read_only(unit_grid):
    f = Field(unit_grid, np.ones(unit_grid.n_points))
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_derivative_of_constant(box_grid):
    f = sample(box_grid, lambda x: np.full_like(x, 3.5))
    assert derivative(f).sup_norm() < 1e-12


@pytest.mark.parametrize('k', [1, 5, 17, 31])
def test_derivative_of_fourier_mode(unit_grid, k):
    f = sample(unit_grid, lambda x: np.sin(k * x))
    np.testing.assert_allclose(derivative(f).values, k * np.cos(k * unit_grid.x), atol=1e-11)


def test_derivative_of_kinked_profile_away_from_kink(box_grid):
    f = sample(box_grid, lambda x: np.exp(-2 * np.abs(x)))
    exact = -2 * np.sign(box_grid.x) * np.exp(-2 * np.abs(box_grid.x))
    # Gibbs ripples from the kink decay like 1/distance
    away = (np.abs(box_grid.x) >= 2.0) & (np.abs(box_grid.x) <= 14.0)
    error = np.max(np.abs(derivative(f).values - exact)[away])
    assert error < 2e-2


def test_derivative_squared_is_second_derivative(unit_grid):
    f = sample(unit_grid, lambda x: np.cos(3 * x) + 0.5 * np.sin(7 * x) - 0.2 * np.cos(12 * x))
    np.testing.assert_allclose(derivative(derivative(f)).values, second_derivative(f).values, atol=1e-10)


def test_derivative_of_even_function_is_odd(box_grid):
    f = sample(box_grid, lambda x: np.exp(-x ** 2))
    d = derivative(f)
    assert np.max(np.abs(d.values + reflect(d).values)) < 1e-10


def test_periodic_integral_of_derivative_vanishes(box_grid):
    f = sample(box_grid, lambda x: np.exp(-(x - 1.3) ** 2) * (1 + 0.3 * np.sin(2 * x)))
    assert abs(derivative(f).integral()) < 1e-10


def test_upwind_constant_and_linear(unit_grid):
    wind = Field(unit_grid, np.where(unit_grid.x > 0, 1.0, -1.0))
    constant = sample(unit_grid, lambda x: np.full_like(x, 2.0))
    assert upwind_derivative(constant, wind).sup_norm() == 0.0

    ramp = sample(unit_grid, lambda x: 3.0 * x)
    slope = upwind_derivative(ramp, wind).values
    # skip the wrap-around cells where the sawtooth jumps
    np.testing.assert_allclose(slope[1:-1], 3.0, rtol=1e-12)


def test_upwind_direction():
    grid = make_grid(np.pi, 16)
    f = Field(grid, np.arange(16.0) ** 2)
    positive = upwind_derivative(f, Field(grid, np.ones(16))).values
    negative = upwind_derivative(f, Field(grid, -np.ones(16))).values
    i = 5
    assert positive[i] == pytest.approx((f.values[i] - f.values[i - 1]) / grid.dx)
    assert negative[i] == pytest.approx((f.values[i + 1] - f.values[i]) / grid.dx)


def test_upwind_grid_mismatch(unit_grid):
    other = make_grid(2 * np.pi, 64)
    with pytest.raises(ConfigurationError):
        upwind_derivative(Field(unit_grid, np.zeros(64)), Field(other, np.zeros(64)))


def test_upwind_first_order_convergence():
    errors = []
    for n in (64, 128, 256):
        grid = make_grid(np.pi, n)
        f = sample(grid, np.sin)
        wind = Field(grid, np.ones(n))
        errors.append(np.max(np.abs(upwind_derivative(f, wind).values - np.cos(grid.x))))
    slopes = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all((slopes > 0.9) & (slopes < 1.1))


def test_centered_derivative_second_order():
    errors = []
    for n in (64, 128):
        grid = make_grid(np.pi, n)
        f = sample(grid, np.sin)
        errors.append(np.max(np.abs(centered_derivative(f).values - np.cos(grid.x))))
    assert np.log2(errors[0] / errors[1]) == pytest.approx(2.0, abs=0.1)


def test_dealias_filter_profile(unit_grid):
    low = sample(unit_grid, lambda x: np.cos(5 * x))
    np.testing.assert_allclose(dealias(low).values, low.values, atol=1e-13)
    # two thirds of Nyquist passes almost untouched
    two_thirds = sample(unit_grid, lambda x: np.cos(21 * x))
    assert dealias(two_thirds).sup_norm() == pytest.approx(1.0, abs=2e-5)
    near_top = sample(unit_grid, lambda x: np.cos(30 * x))
    expected = math.exp(-36.0 * (30.0 / 32.0) ** 36)
    np.testing.assert_allclose(dealias(near_top).values, expected * near_top.values, atol=1e-13)
    nyquist = sample(unit_grid, lambda x: np.cos(32 * x))
    assert dealias(nyquist).sup_norm() < 1e-13


def test_reflect(unit_grid):
    f = sample(unit_grid, lambda x: x ** 3 + 2.0)
    mirrored = reflect(f).values
    np.testing.assert_allclose(mirrored[1:], -unit_grid.x[1:] ** 3 + 2.0, atol=1e-12)
    assert mirrored[0] == f.values[0]
