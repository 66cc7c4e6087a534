import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ncbm.core import PointMeasure, gaussian_density, vandermonde
from ncbm.densities import (
    MultitimeConfiguration,
    confluent_drift_determinant,
    drifted_density,
    drifted_density_from_origin,
    km_determinant,
    multitime_density,
    noncolliding_density,
)
from ncbm.errors import DegenerateStart, NonPositiveTime, OrderViolation, SizeMismatch
from ncbm.verify import oracle_km, oracle_origin_density

# -- frozen oracle values ---------------------------------------------------------

KM_2X2_UNIT = (1 - math.exp(-1)) / (2 * math.pi)  # 0.1006052...


def _ordered_pair_integral(f, centre, half_width, tol=1e-10):
    """Integrate f(y1, y2) over y1 < y2, written as (y1, gap) with gap > 0."""
    lo, hi = centre - half_width, centre + half_width
    val, _ = integrate.dblquad(
        lambda g, z: f(z, z + g), lo, hi, 0.0, 2 * half_width, epsabs=tol, epsrel=tol
    )
    return val


# -- km_determinant -----------------------------------------------------------------


def test_km_one_particle_is_gaussian():
    assert km_determinant(0.7, [0.3], [-0.2]) == pytest.approx(gaussian_density(0.7, 0.3, -0.2), rel=1e-14)


def test_km_unit_example():
    assert km_determinant(1, (0, 1), (0, 1)) == pytest.approx(0.100605, abs=1e-6)
    assert km_determinant(1, (0, 1), (0, 1)) == pytest.approx(KM_2X2_UNIT, rel=1e-13)


def test_km_far_example_matches_cofactor_oracle():
    p = gaussian_density
    expected = p(1, 0, 0) * p(1, 10, 1) - p(1, 0, 1) * p(1, 10, 0)
    got = km_determinant(1, (0, 10), (0, 1))
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(oracle_km(1.0, np.array([0.0, 10.0]), np.array([0.0, 1.0])), rel=1e-12)


def test_km_errors():
    with pytest.raises(SizeMismatch):
        km_determinant(1, (0, 1), (0, 1, 2))
    with pytest.raises(NonPositiveTime):
        km_determinant(0, (0, 1), (0, 1))


sorted_triple = st.lists(st.floats(-3, 3), min_size=3, max_size=3, unique=True).map(sorted).filter(
    lambda v: min(np.diff(v)) > 1e-3
)


@given(st.floats(0.1, 5), sorted_triple, sorted_triple)
def test_km_transpose_symmetry_and_sign(t, y, x):
    a = km_determinant(t, y, x)
    b = km_determinant(t, x, y)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-300)
    assert a >= -1e-300


# -- confluent determinant ----------------------------------------------------------


def test_confluent_examples():
    assert confluent_drift_determinant((0, 1), (0, 1)) == pytest.approx(math.e - 1, rel=1e-14)
    assert confluent_drift_determinant((0, 0), (0.3, 1.7)) == pytest.approx(1.4, rel=1e-13)
    x = np.array([-0.5, 0.4, 2.0])
    assert confluent_drift_determinant((0, 0, 0), x) == pytest.approx(vandermonde(x) / 2, rel=1e-13)


def test_confluent_simple_equals_plain_determinant():
    nu = np.array([-1.0, 0.2, 0.9])
    x = np.array([-0.3, 0.5, 1.1])
    assert confluent_drift_determinant(nu, x) == pytest.approx(np.linalg.det(np.exp(np.outer(nu, x))), rel=1e-12)


def test_confluent_size_mismatch():
    with pytest.raises(SizeMismatch):
        confluent_drift_determinant((0, 1), (0, 1, 2))


# -- noncolliding_density ---------------------------------------------------------------


def test_noncolliding_examples():
    assert noncolliding_density(0.4, [1.0], [0.2]) == pytest.approx(gaussian_density(0.4, 1.0, 0.2), rel=1e-14)
    assert noncolliding_density(1, (0, 1), (0, 1)) == pytest.approx(KM_2X2_UNIT, rel=1e-13)


def test_noncolliding_normalized():
    f = lambda a, b: noncolliding_density(1.0, (a, b), (0.0, 1.0))  # noqa: E731
    assert abs(_ordered_pair_integral(f, 0.5, 10.0) - 1.0) < 1e-6


def test_noncolliding_degenerate_start():
    with pytest.raises(DegenerateStart):
        noncolliding_density(1.0, (0, 1), (0, 0))


# -- drifted_density ----------------------------------------------------------------------


def test_drifted_one_particle():
    t, y, x, v = 0.8, 1.3, -0.2, 0.7
    expected = math.exp(-((y - x - v * t) ** 2) / (2 * t)) / math.sqrt(2 * math.pi * t)
    assert drifted_density(t, [y], [x], [v]) == pytest.approx(expected, rel=1e-13)


def test_drifted_zero_drift_is_noncolliding():
    y, x = (-0.4, 0.3, 1.9), (-1.0, 0.0, 0.5)
    a = drifted_density(1.3, y, x, (0, 0, 0))
    b = noncolliding_density(1.3, y, x)
    assert abs(a - b) <= 1e-10 * abs(b)


def test_drifted_two_particle_example():
    q2 = km_determinant(1, (0, 2), (0, 1))
    expected = math.exp(-0.5) * (math.e**2 - 1) / (math.e - 1) * q2
    assert drifted_density(1, (0, 2), (0, 1), (0, 1)) == pytest.approx(expected, rel=1e-13)


def test_drifted_continuity_across_coincidence():
    y, x = (0.3, 1.2), (0.0, 1.0)
    base = drifted_density(0.9, y, x, (0, 0))
    errs = [abs(drifted_density(0.9, y, x, (0, e)) - base) for e in (1e-2, 1e-3, 1e-4)]
    # first order in eps: each tenfold reduction shrinks the gap about tenfold
    assert errs[0] > errs[1] > errs[2]
    for a, b in zip(errs, errs[1:]):
        assert 5 < a / b < 20


def test_drifted_rejects_partial_coincidence():
    with pytest.raises(DegenerateStart):
        drifted_density(1.0, (0, 1, 2), (0, 0, 1), (0, 0, 0))


def test_drifted_collapsed_start_uses_origin_form():
    y, nu = (-0.1, 0.8), (0.0, 1.0)
    shifted = drifted_density(1.0, (y[0] + 2, y[1] + 2), (2, 2), nu)
    assert shifted == pytest.approx(drifted_density_from_origin(1.0, y, nu), rel=1e-13)


def test_drifted_open_y_required():
    with pytest.raises(OrderViolation):
        drifted_density(1.0, (1, 0), (0, 1), (0, 1))


@pytest.mark.parametrize("s, t", [(0.3, 0.7), (1.0, 1.0)])
def test_chapman_kolmogorov(s, t):
    x, nu, y = (0.0, 1.0), (0.0, 1.0), (0.2, 1.9)
    f = lambda a, b: drifted_density(s, (a, b), x, nu) * drifted_density(t, y, (a, b), nu)  # noqa: E731
    got = _ordered_pair_integral(f, 0.8, 9.0, tol=1e-11)
    expected = drifted_density(s + t, y, x, nu)
    assert abs(got - expected) <= 1e-5 * expected


def test_batched_evaluation_matches_scalar():
    ys = np.array([[0.0, 1.0], [-0.5, 0.4], [0.2, 3.0]])
    batch = drifted_density(1.1, ys, (0.0, 1.0), (0.0, 1.0))
    scal = [drifted_density(1.1, y, (0.0, 1.0), (0.0, 1.0)) for y in ys]
    np.testing.assert_allclose(batch, scal, rtol=1e-14)


def test_log_output_consistent():
    sign, lv = drifted_density(1.0, (0, 2), (0, 1), (0, 1), log=True)
    assert sign == 1.0
    assert math.exp(lv) == pytest.approx(drifted_density(1.0, (0, 2), (0, 1), (0, 1)), rel=1e-14)


def test_far_configurations_do_not_overflow():
    sign, lv = drifted_density(1.0, (400.0, 900.0), (0.0, 500.0), (3.0, 4.0), log=True)
    assert sign == 1.0 and np.isfinite(lv)


# -- drifted_density_from_origin -------------------------------------------------------------


def test_origin_one_particle():
    assert drifted_density_from_origin(2.0, [0.9], [0.3]) == pytest.approx(gaussian_density(2.0, 0.9, 0.6), rel=1e-14)


@pytest.mark.parametrize("t", [0.3, 1.0, 2.5])
def test_origin_reciprocal_form(t):
    nu = (-0.4, 0.5, 1.5)
    y = np.array([-1.0, 0.2, 1.4])
    lhs = drifted_density_from_origin(t, y, nu)
    rhs = t ** (-3) * noncolliding_density(1 / t, y / t, nu)
    assert abs(lhs - rhs) <= 1e-10 * rhs


def test_origin_matches_divided_difference_oracle_with_repeats():
    y = np.array([-0.7, 0.1, 1.3])
    for nu in [(0.0, 0.0, 1.0), (0.5, 0.5, 0.5), (-1.0, 0.2, 0.2)]:
        got = drifted_density_from_origin(1.2, y, nu)
        assert got == pytest.approx(oracle_origin_density(1.2, y, nu), rel=1e-9)


def test_origin_normalized():
    f = lambda a, b: drifted_density_from_origin(1.0, (a, b), (0.0, 1.0))  # noqa: E731
    assert abs(_ordered_pair_integral(f, 0.5, 10.0) - 1.0) < 1e-6


def test_origin_continuity_in_drift():
    y = (-0.2, 0.9)
    base = drifted_density_from_origin(1.0, y, (0.0, 0.0))
    near = drifted_density_from_origin(1.0, y, (0.0, 1e-6))
    assert near == pytest.approx(base, rel=1e-5)


# -- multitime -------------------------------------------------------------------------------


def test_multitime_single_time_reduces():
    mc = MultitimeConfiguration.build([0.8], [(0.1, 0.9)])
    expected = drifted_density_from_origin(0.8, (0.1, 0.9), (0.0, 1.0))
    assert multitime_density(mc, PointMeasure.delta(2), (0.0, 1.0)) == pytest.approx(expected, rel=1e-13)


def test_multitime_one_particle_markov():
    mc = MultitimeConfiguration.build([0.5, 1.5], [[0.3], [-0.4]])
    expected = gaussian_density(0.5, 0.3, 1.0) * gaussian_density(1.0, -0.4, 0.3)
    assert multitime_density(mc, [1.0], [0.0]) == pytest.approx(expected, rel=1e-13)


def test_multitime_validation():
    with pytest.raises(OrderViolation):
        MultitimeConfiguration.build([1.0, 0.5], [(0, 1), (0, 1)])
    with pytest.raises(SizeMismatch):
        MultitimeConfiguration.build([0.5, 1.0], [(0, 1), (0, 1, 2)])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-1, 1), st.floats(0.1, 2))
def test_multitime_reciprocal_two_times(t1, a, gap):
    # (1/t) of the drifted origin process against the driftless process from nu at 1/t
    nu = np.array([0.0, 1.0])
    t2 = t1 + 0.7
    x1, x2 = np.array([a, a + gap]), np.array([a - 0.3, a + gap + 0.5])
    lhs = multitime_density(MultitimeConfiguration.build([t1, t2], [x1, x2]), PointMeasure.delta(2), nu)
    u1, u2 = 1 / t2, 1 / t1
    rhs_mc = MultitimeConfiguration.build([u1, u2], [x2 / t2, x1 / t1])
    rhs = t1 ** (-2) * t2 ** (-2) * multitime_density(rhs_mc, nu, (0.0, 0.0))
    assert abs(lhs - rhs) <= 1e-10 * rhs
