import numpy as np
import pytest

from besov import (
    INNER_RADIUS,
    OUTER_RADIUS,
    besov_norm,
    block_norms,
    build_partition,
    chi,
    dyadic_block,
    high_frequency_fraction,
    low_pass,
    lp_norm,
    phi,
    top_index,
)
from common.errors import ConfigurationError, ParameterError
from grid_field import Field, make_grid, sample


@pytest.fixture
def partition(unit_grid):
    return build_partition(unit_grid)


def l2(f):
    return lp_norm(f.values, f.grid.dx, 2.0)


def test_chi_profile():
    xi = np.linspace(-3, 3, 6001)
    values = chi(xi)
    assert np.all((values >= 0) & (values <= 1))
    assert np.all(values[np.abs(xi) <= INNER_RADIUS] == 1.0)
    assert np.all(values[np.abs(xi) >= OUTER_RADIUS] == 0.0)
    np.testing.assert_allclose(values, values[::-1], atol=1e-12)
    # nonincreasing in |xi|
    right = values[xi >= 0]
    assert np.all(np.diff(right) <= 1e-15)


def test_partition_of_unity():
    xi = np.linspace(0, 500, 200001)
    total = chi(xi) + sum(phi(xi / 2.0 ** j) for j in range(12))
    np.testing.assert_allclose(total, 1.0, atol=1e-12)
    assert phi(0.0) == 0.0


def test_annulus_support():
    xi = np.linspace(0, 5, 50001)
    values = phi(xi)
    inside = values > 0
    assert xi[inside].min() >= INNER_RADIUS
    assert xi[inside].max() <= 2 * OUTER_RADIUS
    # annuli two apart never overlap
    assert np.all(phi(xi) * phi(xi / 4.0) == 0.0)


def test_top_index():
    assert top_index(make_grid(np.pi, 64)) == 5
    assert top_index(make_grid(16.0, 4096)) == 9


def test_partition_shape(partition, unit_grid):
    assert partition.j_max == 5
    assert list(partition.indices) == [-1, 0, 1, 2, 3, 4, 5]
    assert partition.phi.shape == (6, unit_grid.n_points // 2 + 1)
    assert partition.profile(-2) is None
    assert partition.profile(6) is None


@pytest.mark.parametrize('half_width, n_points', [(np.pi, 16), (100.0, 32)])
def test_partition_rejects_coarse_grids(half_width, n_points):
    with pytest.raises(ConfigurationError):
        build_partition(make_grid(half_width, n_points))


def test_blocks_sum_to_field(partition, unit_grid, rng):
    f = Field(unit_grid, rng.normal(size=unit_grid.n_points))
    total = sum(dyadic_block(f, j, partition).values for j in partition.indices)
    np.testing.assert_allclose(total, f.values, atol=1e-12)


def test_single_annulus_mode(partition, unit_grid):
    # block 3 is flat on 4/3 * 8 <= k <= 3/4 * 16, so cos(11x) lies wholly inside it
    f = sample(unit_grid, lambda x: np.cos(11 * x))
    np.testing.assert_allclose(dyadic_block(f, 3, partition).values, f.values, atol=1e-12)
    for j in (-1, 0, 1, 2, 4, 5):
        assert dyadic_block(f, j, partition).sup_norm() < 1e-12
    assert besov_norm(f, 1.0, 2.0, 2.0, partition) == pytest.approx(8 * l2(f), rel=1e-12)
    assert besov_norm(f, 0.0, np.inf, 1.0, partition) == pytest.approx(1.0, rel=1e-12)


def test_out_of_range_blocks_are_zero(partition, unit_grid):
    f = sample(unit_grid, np.cos)
    assert dyadic_block(f, -5, partition).sup_norm() == 0.0
    assert dyadic_block(f, 40, partition).sup_norm() == 0.0


def test_zero_field(partition, unit_grid):
    f = Field(unit_grid, np.zeros(unit_grid.n_points))
    assert besov_norm(f, 1.0, 2.0, 2.0, partition) == 0.0
    assert high_frequency_fraction(f, partition) == 0.0


@pytest.mark.parametrize('p, r', [(0.5, 2.0), (2.0, 0.9), (np.nan, 2.0)])
def test_exponents_below_one_are_rejected(partition, unit_grid, p, r):
    f = sample(unit_grid, np.cos)
    with pytest.raises(ParameterError):
        besov_norm(f, 0.0, p, r, partition)


def test_b0_22_is_comparable_to_l2(rng):
    grid = make_grid(np.pi, 256)
    partition = build_partition(grid)
    for _ in range(20):
        f = Field(grid, rng.normal(size=grid.n_points))
        ratio = besov_norm(f, 0.0, 2.0, 2.0, partition) / l2(f)
        assert np.sqrt(0.5) - 1e-12 <= ratio <= 1.0 + 1e-12


def test_besov_norm_grows_with_smoothness(partition, unit_grid, rng):
    f = Field(unit_grid, rng.normal(size=unit_grid.n_points))
    norms = [besov_norm(f, s, 2.0, 2.0, partition) for s in (-1.0, 0.0, 0.5, 1.0)]
    assert all(later > earlier for earlier, later in zip(norms, norms[1:]))


def test_besov_triangle_inequality(partition, unit_grid, rng):
    f = Field(unit_grid, rng.normal(size=unit_grid.n_points))
    g = Field(unit_grid, rng.normal(size=unit_grid.n_points))
    for s, p, r in ((0.0, 2.0, 2.0), (1.0, 1.0, np.inf), (0.5, np.inf, 1.0)):
        combined = besov_norm(f.with_values(f.values + g.values), s, p, r, partition)
        assert combined <= besov_norm(f, s, p, r, partition) + besov_norm(g, s, p, r, partition) + 1e-12


def test_block_norms_rows(partition, unit_grid):
    f = sample(unit_grid, lambda x: np.cos(11 * x))
    rows = block_norms(f, 0.0, 2.0, partition)
    assert [j for j, _ in rows] == list(partition.indices)
    assert dict(rows)[3] == pytest.approx(l2(f), rel=1e-12)


def test_low_pass(partition, unit_grid):
    f = sample(unit_grid, lambda x: np.cos(2 * x) + np.cos(20 * x))
    smoothed = low_pass(f, 3, partition)
    np.testing.assert_allclose(smoothed.values, np.cos(2 * unit_grid.x), atol=1e-12)


def test_high_frequency_fraction(partition, unit_grid):
    smooth = sample(unit_grid, np.cos)
    rough = sample(unit_grid, lambda x: np.cos(30 * x))
    assert high_frequency_fraction(smooth, partition) < 1e-12
    # no grid mode lies wholly in the top annulus; a single mode keeps its profile weight
    assert high_frequency_fraction(rough, partition) == pytest.approx(float(phi(30 / 32)), rel=1e-10)
    assert high_frequency_fraction(rough, partition) > 0.1
    assert 0.0 < high_frequency_fraction(smooth.with_values(smooth.values + rough.values), partition) < 1.0


def test_high_frequency_fraction_below_a_low_pass(partition, unit_grid):
    f = sample(unit_grid, lambda x: np.cos(2 * x) + np.cos(20 * x))
    # S_3 keeps |k| <= 6 and drops |k| >= 32/3
    assert high_frequency_fraction(f, partition, 3) == pytest.approx(np.sqrt(0.5), rel=1e-12)
    assert high_frequency_fraction(f, partition, partition.j_max) == pytest.approx(
        high_frequency_fraction(f, partition), rel=1e-12
    )
    fractions = [high_frequency_fraction(f, partition, j) for j in partition.indices]
    assert all(later <= earlier + 1e-12 for earlier, later in zip(fractions, fractions[1:]))
