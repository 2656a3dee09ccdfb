import math

import numpy as np
import pytest

from blowup_predictor import (
    ANALYTIC,
    CERTIFIED,
    MEASURED,
    NO_CONCLUSION,
    b_from_bounds,
    blowup_threshold,
    check_condition,
    compute_b,
    compute_t1,
    compute_t2,
    supersolution_blowup_time,
    supersolution_ode,
    t1_from_bounds,
)
from common.errors import DomainError
from grid_field import Field, sample
from helmholtz import HelmholtzParams
from peakon import bump, scaled_bump_n0

E = math.e
# beta0 = 1 with ||v0|| <= e/8 and ||v0_x|| <= e/4
B_REFERENCE = 8 * E ** 2
T1_REFERENCE = 1 / (12 * E)
THRESHOLD_REFERENCE = -2 * E - 4 * E / (math.exp(2 / 3) - 1)


def test_b_and_t1_from_bounds(params):
    assert b_from_bounds(E / 8, E / 4, params) == pytest.approx(B_REFERENCE, rel=1e-14)
    assert t1_from_bounds(E / 8, E / 4, params) == pytest.approx(T1_REFERENCE, rel=1e-14)
    assert t1_from_bounds(0.0, 0.0, params) is None


def test_b_and_t1_symmetries():
    half = HelmholtzParams(0.5)
    double = HelmholtzParams(2.0)
    assert b_from_bounds(0.3, 0.2, HelmholtzParams(-0.5)) == b_from_bounds(0.3, 0.2, half)
    # max(beta^2, beta^-2) makes T1 invariant under beta -> 1/beta
    assert t1_from_bounds(0.3, 0.2, half) == pytest.approx(t1_from_bounds(0.3, 0.2, double), rel=1e-14)
    assert t1_from_bounds(0.3, 0.2, double) == pytest.approx(1 / (32 * 4 * 0.5), rel=1e-14)


def test_compute_b_and_t1_from_field(unit_grid, params):
    v = sample(unit_grid, lambda x: 0.5 * np.cos(x))
    assert compute_b(v, params) == pytest.approx((16 * 0.5) ** 2 + (8 * 0.5) ** 2, rel=1e-12)
    assert compute_t1(v, params) == pytest.approx(1 / 32, rel=1e-12)
    assert compute_t1(Field(unit_grid, np.zeros(unit_grid.n_points)), params) is None


def test_threshold_reference_value():
    threshold = blowup_threshold(B_REFERENCE, T1_REFERENCE)
    assert threshold == pytest.approx(THRESHOLD_REFERENCE, rel=1e-12)
    assert threshold == pytest.approx(-16.91, abs=5e-3)


def test_threshold_edge_cases():
    assert blowup_threshold(0.0, 1.0) is None
    assert blowup_threshold(8.0, None) is None
    assert blowup_threshold(8.0, math.inf) == -2.0
    # huge exponent: the correction underflows towards -sqrt(b/2)
    assert blowup_threshold(8.0, 1e4) == pytest.approx(-2.0, abs=1e-12)
    # the threshold sits below -sqrt(b/2) for every finite T1
    assert blowup_threshold(8.0, 0.1) < -2.0


def test_compute_t2_reference():
    t2 = compute_t2(-20.0, B_REFERENCE)
    assert t2 == pytest.approx(0.02565, abs=5e-5)
    assert t2 < T1_REFERENCE


def test_compute_t2_at_threshold_equals_t1():
    assert compute_t2(THRESHOLD_REFERENCE, B_REFERENCE) == pytest.approx(T1_REFERENCE, rel=1e-10)


def test_compute_t2_without_source():
    assert compute_t2(-4.0, 0.0) == pytest.approx(0.125)
    with pytest.raises(DomainError):
        compute_t2(1.0, 0.0)


@pytest.mark.parametrize('f0', [-2.0, 0.0, 3.0])
def test_compute_t2_rejects_non_diverging_start(f0):
    with pytest.raises(DomainError):
        compute_t2(f0, 8.0)


def test_compute_t2_rejects_negative_b():
    with pytest.raises(DomainError):
        compute_t2(-5.0, -1.0)


def test_supersolution_closed_form():
    b = 8.0
    assert supersolution_ode(-3.0, b, 0.0) == pytest.approx(-3.0, rel=1e-12)
    # equilibria
    assert supersolution_ode(-2.0, b, 0.7) == -2.0
    assert supersolution_ode(2.0, b, 0.7) == pytest.approx(2.0, rel=1e-14)
    # above the lower equilibrium the solution relaxes to +sqrt(b/2)
    assert supersolution_ode(0.0, b, 10.0) == pytest.approx(2.0, rel=1e-12)


def test_supersolution_without_source():
    assert supersolution_ode(-1.0, 0.0, 0.25) == pytest.approx(-2.0)
    assert supersolution_ode(1.0, 0.0, 0.5) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        supersolution_ode(-1.0, 0.0, 0.5)


def test_supersolution_domain():
    with pytest.raises(DomainError):
        supersolution_ode(-3.0, 8.0, -0.1)
    t2 = compute_t2(-20.0, B_REFERENCE)
    with pytest.raises(DomainError):
        supersolution_ode(-20.0, B_REFERENCE, t2)
    assert supersolution_ode(-20.0, B_REFERENCE, 0.999 * t2) < -1000.0


def test_supersolution_decreases_towards_divergence():
    t2 = compute_t2(-20.0, B_REFERENCE)
    values = [supersolution_ode(-20.0, B_REFERENCE, fraction * t2) for fraction in (0.0, 0.3, 0.6, 0.9)]
    assert all(later < earlier for earlier, later in zip(values, values[1:]))


def test_numerical_supersolution_matches_closed_form():
    crossing = supersolution_blowup_time(-20.0, B_REFERENCE)
    assert crossing == pytest.approx(compute_t2(-20.0, B_REFERENCE), abs=1e-4)
    assert supersolution_blowup_time(0.0, 8.0) is None


def test_check_condition_of_zero_momentum(box_grid, params):
    report = check_condition(Field(box_grid, np.zeros(box_grid.n_points)), params)
    assert report.verdict == NO_CONCLUSION
    assert report.threshold is None
    assert report.witnesses == []
    assert "witness_x0" not in report.to_dict()


def test_check_condition_certifies_blowup_datum(box_grid, params):
    n0 = sample(box_grid, scaled_bump_n0(-20 * E, 20))
    assert n0.values[box_grid.n_points // 2] == pytest.approx(-20.0, rel=1e-12)

    measured = check_condition(n0, params)
    assert measured.verdict == CERTIFIED
    assert measured.bounds_source == MEASURED
    assert measured.b <= B_REFERENCE
    assert measured.t2 < measured.t1
    assert any(x == 0.0 for x, _ in measured.witnesses)

    analytic = check_condition(n0, params, sup_bounds=(E / 8, E / 4))
    assert analytic.verdict == CERTIFIED
    assert analytic.bounds_source == ANALYTIC
    assert analytic.b == pytest.approx(B_REFERENCE, rel=1e-14)
    assert analytic.threshold == pytest.approx(THRESHOLD_REFERENCE, rel=1e-12)
    assert analytic.t2 == pytest.approx(0.02565, abs=5e-5)
    assert analytic.t2 < T1_REFERENCE
    assert all(value < THRESHOLD_REFERENCE for _, value in analytic.witnesses)

    document = analytic.to_dict()
    assert document["witness_x0"] == 0.0
    assert document["witness_count"] == len(analytic.witnesses) >= 3


def test_check_condition_of_positive_momentum(box_grid, params):
    n0 = sample(box_grid, lambda x: bump(x, 0.0, 1.0, 1.0))
    report = check_condition(n0, params)
    assert report.verdict == NO_CONCLUSION
    assert report.threshold is not None and report.threshold < 0
    assert report.t2 is None
    assert not report.certified
