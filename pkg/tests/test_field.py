import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpwcrit.field import (
    FieldSample,
    draw_coefficients,
    eval_jet,
    eval_values,
    sample_field,
    tail_bound,
    truncation_order,
)
from rpwcrit.special_math import DomainError

from oracles import j0_series_exact


def test_sampling_is_deterministic():
    a = sample_field(11, 10.0)
    b = sample_field(11, 10.0)
    assert np.array_equal(a.coefficients, b.coefficients)
    assert a.truncation_order >= truncation_order(10.0)
    assert not np.array_equal(a.coefficients, sample_field(12, 10.0).coefficients)


def test_coefficients_do_not_depend_on_truncation():
    f = sample_field(3, 2.0)
    N = f.truncation_order
    wide = draw_coefficients(3, np.arange(-N - 40, N + 41))
    assert np.array_equal(wide[40:-40], f.coefficients)


def test_truncation_certificate():
    f = sample_field(5, 20.0)
    assert tail_bound(5, f.truncation_order, 20.0) < 1e-10


def test_json_round_trip():
    f = sample_field(8, 4.0)
    g = FieldSample.from_json(f.to_json())
    assert np.array_equal(f.coefficients, g.coefficients)
    assert g.domain_radius == 4.0


def test_bad_radius():
    with pytest.raises(DomainError):
        sample_field(1, 0.0)
    f = sample_field(1, 1.0)
    with pytest.raises(DomainError):
        eval_jet(f, (1.0, 0.5))


def _ensemble(n, R=2.0, seed0=1000):
    return [sample_field(seed0 + i, R) for i in range(n)]


@pytest.fixture(scope="module")
def ensemble():
    return _ensemble(10_000)


def test_unit_variance_at_origin(ensemble):
    v = np.array([eval_values(f, 0.0, 0.0)[0] for f in ensemble])
    m2 = v**2
    se = m2.std(ddof=1) / math.sqrt(v.size)
    assert abs(m2.mean() - 1.0) < 5 * se


def test_covariance_at_unit_distance(ensemble):
    # points chosen off the axes so the ladder evaluation is exercised
    z = (0.3, -0.2)
    w = (0.3 + math.cos(1.1), -0.2 + math.sin(1.1))
    prod = np.array([eval_values(f, [z[0], w[0]], [z[1], w[1]]).prod() for f in ensemble])
    se = prod.std(ddof=1) / math.sqrt(prod.size)
    target = j0_series_exact(1.0)
    assert abs(target - 0.7651976866) < 1e-10
    assert abs(prod.mean() - target) < 5 * se


def test_stationarity_and_isotropy(ensemble):
    x = np.array([eval_values(f, [0.0, 1.2, 0.0, 1.2 + 0.7, 0.0], [0.0, 0.0, 1.2, 0.0, 0.7 + 1.2])
                  for f in ensemble[:4000]])
    # means at two points
    d = x[:, 0] - x[:, 1]
    assert abs(d.mean()) < 5 * d.std(ddof=1) / math.sqrt(d.size)
    # covariance at distance 0.7 along the two axes
    cx = x[:, 1] * x[:, 3]
    cy = x[:, 2] * x[:, 4]
    diff = cx - cy
    assert abs(diff.mean()) < 5 * diff.std(ddof=1) / math.sqrt(diff.size)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_helmholtz_residual(seed):
    R = 15.0
    f = sample_field(seed, R)
    rng = np.random.default_rng(seed)
    r = R * np.sqrt(rng.uniform(size=100))
    t = rng.uniform(0, 2 * np.pi, size=100)
    for x, y in zip(r * np.cos(t), r * np.sin(t)):
        j = eval_jet(f, (x, y))
        assert abs(np.trace(j.hessian) + j.value) <= 1e-8


@pytest.mark.parametrize("z", [(0.0, 0.0), (1e-9, 0.0), (0.4, -1.3), (-2.5, 2.0)])
def test_derivatives_against_finite_differences(z):
    f = sample_field(21, 4.0)
    h = 1e-5
    j = eval_jet(f, z)
    val = lambda x, y: eval_jet(f, (x, y)).value  # noqa: E731
    grad = lambda x, y: eval_jet(f, (x, y)).gradient  # noqa: E731
    x, y = z
    fd = np.array([(val(x + h, y) - val(x - h, y)) / (2 * h), (val(x, y + h) - val(x, y - h)) / (2 * h)])
    assert np.max(np.abs(fd - j.gradient)) < 1e-6
    H = np.column_stack([(grad(x + h, y) - grad(x - h, y)) / (2 * h), (grad(x, y + h) - grad(x, y - h)) / (2 * h)])
    assert np.max(np.abs(H - j.hessian)) < 1e-5
    assert np.allclose(j.hessian, j.hessian.T)


def test_origin_value_is_zeroth_coefficient():
    f = sample_field(4, 1.0)
    N = f.truncation_order
    assert abs(eval_jet(f, (0.0, 0.0)).value - f.coefficients[N].real) < 1e-15


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**40), st.floats(0.1, 30.0))
def test_truncation_grows_with_radius(seed, R):
    f = sample_field(seed, R)
    assert f.truncation_order >= math.ceil(math.e * R / 2) + 12
    assert f.coefficients.shape == (2 * f.truncation_order + 1,)
