import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ncbm.core import (
    PointMeasure,
    SpaceTimePoint,
    WeylVector,
    dilate,
    gaussian_density,
    log_vandermonde,
    make_weyl_vector,
    survival_constant,
    vandermonde,
)
from ncbm.errors import NonPositiveFactor, NonPositiveTime, OrderViolation

finite = st.floats(min_value=-50, max_value=50, allow_nan=False)
# grid-valued locations: distinct values stay distinct under any dilation
grid = st.integers(-5000, 5000).map(lambda k: k / 100)


# -- WeylVector ---------------------------------------------------------------


def test_open_vector_accepts_increasing():
    assert make_weyl_vector([0, 1, 2]).values == (0.0, 1.0, 2.0)


def test_open_vector_rejects_tie():
    with pytest.raises(OrderViolation):
        make_weyl_vector([0, 0, 1], "open")


def test_closed_vector_accepts_tie():
    w = make_weyl_vector([0, 0, 1], "closed")
    assert not w.is_simple


def test_closed_vector_rejects_decrease():
    with pytest.raises(OrderViolation):
        make_weyl_vector([1, 0], "closed")


def test_empty_vector_rejected():
    with pytest.raises(ValueError):
        make_weyl_vector([])


def test_collapsed_flag():
    assert make_weyl_vector([0, 0, 0], "closed").is_collapsed
    assert not make_weyl_vector([0, 1], "open").is_collapsed


# -- vandermonde ---------------------------------------------------------------


@pytest.mark.parametrize(
    "x, expected",
    [((0, 1), 1.0), ((0, 1, 2), 2.0)],
)
def test_vandermonde_examples(x, expected):
    assert vandermonde(make_weyl_vector(x)) == expected


def test_vandermonde_repeated_point_is_zero():
    assert vandermonde(make_weyl_vector([0, 0, 1], "closed")) == 0.0


def test_vandermonde_is_monomial_determinant():
    x = np.array([-1.3, 0.2, 0.7, 2.5])
    m = np.vander(x, increasing=True).T
    assert vandermonde(x) == pytest.approx(np.linalg.det(m), rel=1e-12)


@given(st.lists(finite, min_size=1, max_size=6, unique=True))
def test_vandermonde_positive_on_open_chamber(vals):
    # the sign is robust where the plain product underflows
    sign, _ = log_vandermonde(np.array(sorted(vals)))
    assert sign > 0


@given(st.lists(st.integers(-5, 5).map(float), min_size=2, max_size=5))
def test_vandermonde_zero_iff_coincidence(vals):
    v = sorted(vals)
    assert (vandermonde(np.array(v)) == 0.0) == (len(set(v)) < len(v))


def test_log_vandermonde_matches_product():
    x = np.array([[0.0, 1.0, 3.0], [0.5, 0.25, 2.0]])
    sign, logabs = log_vandermonde(x)
    direct = np.array([vandermonde(r) for r in x])
    np.testing.assert_allclose(sign * np.exp(logabs), direct, rtol=1e-14)


# -- PointMeasure ---------------------------------------------------------------


def test_from_points_merges_bitwise_equal():
    m = PointMeasure.from_points([1.0, 0.0, 1.0, 0.1 + 0.2, 0.3])
    assert m.atoms == ((0.0, 1), (0.3, 1), (0.30000000000000004, 1), (1.0, 2))
    assert m.size == 5
    assert not m.simple()


def test_measure_invariants_enforced():
    with pytest.raises(OrderViolation):
        PointMeasure(((1.0, 1), (0.0, 1)))
    with pytest.raises(ValueError):
        PointMeasure(((0.0, 0),))


def test_lattice_measure():
    z = PointMeasure.integer_lattice()
    assert z.total_mass == math.inf
    assert z.simple()
    assert z.truncate(2.5).points() == [-2.0, -1.0, 0.0, 1.0, 2.0]
    with pytest.raises(ValueError):
        z.points()


def test_measure_json_round_trip():
    m = PointMeasure.from_atoms([(0.0, 2), (1.5, 1)])
    text = m.to_json()
    assert json.loads(text) == {"atoms": [[0.0, 2], [1.5, 1]], "kind": "finite"}
    assert PointMeasure.from_json(text) == m
    z = PointMeasure.integer_lattice()
    assert PointMeasure.from_json(z.to_json()) == z


# -- dilate ---------------------------------------------------------------------


def test_dilate_examples():
    assert dilate(PointMeasure.from_points([1, 2]), 0.5) == PointMeasure.from_points([0.5, 1.0])
    xi = PointMeasure.from_points([-1, 3, 3])
    assert dilate(xi, 1.0) == xi
    assert dilate(PointMeasure.delta(3), 7.0) == PointMeasure.delta(3)


@pytest.mark.parametrize("c", [0.0, -1.0])
def test_dilate_rejects_nonpositive(c):
    with pytest.raises(NonPositiveFactor):
        dilate(PointMeasure.delta(2), c)


@given(
    st.lists(grid, min_size=1, max_size=6, unique=True),
    st.floats(min_value=1e-3, max_value=1e3),
)
def test_dilate_round_trip(vals, c):
    xi = PointMeasure.from_points(vals)
    back = dilate(dilate(xi, c), 1.0 / c)
    np.testing.assert_allclose(back.support(), xi.support(), rtol=1e-12, atol=1e-12)
    assert list(back.multiplicities()) == list(xi.multiplicities())


# -- gaussian_density -------------------------------------------------------------


def test_gaussian_examples():
    assert gaussian_density(1, 0, 0) == pytest.approx(0.3989423, abs=1e-7)
    assert gaussian_density(1, 1, 0) == pytest.approx(0.2419707, abs=1e-7)
    assert gaussian_density(4, 2, 0) == pytest.approx(gaussian_density(1, 1, 0) / 2, rel=1e-15)


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_gaussian_rejects_nonpositive_time(t):
    with pytest.raises(NonPositiveTime):
        gaussian_density(t, 0.0, 0.0)


@given(st.floats(0.01, 100), finite, finite)
def test_gaussian_symmetry_and_positivity(t, y, x):
    a = gaussian_density(t, y, x)
    assert a == gaussian_density(t, x, y)
    assert a >= 0


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_gaussian_normalized(t):
    total = integrate.quad(lambda y: gaussian_density(t, y, 0.3), -np.inf, np.inf, epsabs=1e-13)[0]
    assert abs(total - 1.0) < 1e-10


# -- misc ---------------------------------------------------------------------------


def test_spacetime_point_requires_nonnegative_time():
    SpaceTimePoint(0.0, 1.0)
    with pytest.raises(NonPositiveTime):
        SpaceTimePoint(-0.1, 0.0)


def test_survival_constant_two_particles():
    assert survival_constant(2) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    assert survival_constant(1) == pytest.approx(1.0, rel=1e-15)
