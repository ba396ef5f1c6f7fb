import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpwcrit.kacrice.covariance import conditional_covariance, covariance_blocks, det_a, schur_delta
from rpwcrit.kacrice.twopoint import (
    MIN_SAMPLES,
    TypePair,
    expected_count,
    expected_typed_counts,
    hessian_invariants,
    k1_density,
    k2,
    k2_all_types,
    k2_curve_to_csv,
    k2_limit,
    k2_typed,
    leading_factorial_moment,
    leading_variance,
    one_point_det_oracle,
    partition_residual,
    radial_constant,
    second_factorial_moment,
    typed_weights,
    variance_from_moments,
)


def k2_by_schur_cholesky(r, samples, seed):
    """Independent route: Cholesky of the directly computed Schur complement."""
    L = np.linalg.cholesky(schur_delta(covariance_blocks(r)))
    h = np.random.default_rng(seed).standard_normal((samples, 6)) @ L.T
    w = np.abs((h[:, 0] * h[:, 2] - h[:, 1] ** 2) * (h[:, 3] * h[:, 5] - h[:, 4] ** 2))
    pref = 1 / ((2 * math.pi) ** 2 * math.sqrt(np.linalg.det(covariance_blocks(r).A_r)))
    return pref * w.mean(), pref * w.std(ddof=1) / math.sqrt(samples)


def test_k1_constants():
    assert k1_density() == pytest.approx(1 / (2 * math.sqrt(3) * math.pi), rel=1e-15)
    assert k1_density() == pytest.approx(0.0918881, abs=1e-7)
    assert expected_count(1.0) == pytest.approx(0.2886751, abs=1e-7)
    assert expected_count(0.0) == 0.0
    assert expected_typed_counts(1.0)["saddle"] == pytest.approx(0.1443376, abs=1e-7)
    with pytest.raises(ValueError):
        expected_count(-1.0)


def test_one_point_oracle():
    est = one_point_det_oracle(400_000, seed=1)
    assert abs(est.value - 1 / (2 * math.sqrt(3))) < 4 * est.std_error


def test_k2_limit_constant():
    assert k2_limit() == pytest.approx(6.0937e-4, rel=1e-4)
    # the constant turns into the leading second moment coefficient
    assert math.pi**2 * k2_limit() == pytest.approx(1 / (2**5 * 3 * math.sqrt(3)), rel=1e-14)


@pytest.mark.parametrize("r", [0.3, 1.0, 3.0])
def test_k2_against_independent_route(r):
    a = k2(r, 400_000, seed=5)
    b, se = k2_by_schur_cholesky(r, 400_000, seed=6)
    assert abs(a.value - b) < 4 * math.hypot(a.std_error, se)


def test_k2_decorrelation_at_large_r():
    e = k2(50.0, 400_000, seed=2)
    # J0 still correlates the two points weakly at r = 50
    assert abs(e.value / k1_density() ** 2 - 1) < 0.03 + 3 * e.std_error / k1_density() ** 2


def test_k2_validation():
    with pytest.raises(ValueError):
        k2(-1.0, MIN_SAMPLES, 0)
    with pytest.raises(ValueError):
        k2(1.0, MIN_SAMPLES - 1, 0)


def test_threads_do_not_change_result():
    a = k2_all_types(0.4, 300_000, seed=9, threads=1)
    b = k2_all_types(0.4, 300_000, seed=9, threads=4)
    for p in TypePair:
        assert a[p] == b[p]


def test_typed_weights_partition_exactly():
    zeta = np.random.default_rng(0).standard_normal((10_000, 6))
    w = typed_weights(zeta)
    assert np.all(partition_residual(w) == 0)
    for v in w.values():
        assert np.all(v >= 0)
    assert np.allclose(w[TypePair.EXTREMUM_EXTREMUM], w[TypePair.MIN_MIN] + w[TypePair.MAX_MAX] + 2 * w[TypePair.MIN_MAX])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 20.0), st.integers(0, 2**32))
def test_k2_nonnegative_and_partitioned(r, seed):
    t = k2_all_types(r, MIN_SAMPLES, seed)
    assert t.partition_residual < 1e-12
    assert all(t[p].value >= 0 for p in TypePair)


def test_typed_ratio_and_lookup():
    t = k2_all_types(0.05, 200_000, seed=4)
    assert t["ExtremumSaddle"] is t[TypePair.EXTREMUM_SADDLE]
    ratio, se = t.ratio(TypePair.EXTREMUM_SADDLE)
    assert abs(ratio - 0.5) < 0.05 + 3 * se
    assert k2_typed(0.05, "All", 200_000, seed=4).value == t[TypePair.ALL].value


def test_opposite_curvature_signs_near_zero():
    # near r = 0 the two Hessian determinants have opposite linear terms, so
    # c1 + c2 is much smaller than c1 - c2
    def ratio(r):
        M = conditional_covariance(r).factor
        z = np.random.default_rng(3).standard_normal((200_000, 6)) @ M.T
        _, c1, _, c2 = hessian_invariants(z)
        return np.mean((c1 + c2) ** 2) / np.mean((c1 - c2) ** 2)

    r1, r2 = ratio(0.02), ratio(0.04)
    assert r1 < 1e-2
    assert r2 / r1 == pytest.approx(4.0, rel=0.15)


def test_radial_constant():
    assert abs(radial_constant() - 384.0) < 1e-9


def test_factorial_moment_with_constant_k2_is_exact():
    rho = 0.3
    est = second_factorial_moment(rho, k2_func=lambda r: k2_limit())
    assert abs(est.value - leading_factorial_moment(rho)) < 1e-12 * leading_factorial_moment(rho)
    assert est.std_error == 0.0


def test_factorial_moment_quadrature_integrates_polynomials():
    # int int |z - w|^2 over two discs = 2 * (pi rho^2) * (pi rho^4 / 2)
    rho = 0.7
    est = second_factorial_moment(rho, r_quad_nodes=32, k2_func=lambda r: r * r)
    assert est.value == pytest.approx(math.pi**2 * rho**6, rel=1e-12)


def test_variance_helpers():
    rho = 0.2
    m = expected_count(rho)
    v = variance_from_moments(m, leading_factorial_moment(rho))
    assert v == pytest.approx(leading_variance(rho), rel=1e-12)


def test_curve_csv():
    rows = [k2(r, MIN_SAMPLES, 1) for r in (0.5, 1.0)]
    text = k2_curve_to_csv(rows, ["seed: 1"])
    assert text.splitlines()[0] == "# seed: 1"
    assert len(text.splitlines()) == 4


def test_det_a_prefactor_consistency():
    r = 0.9
    assert det_a(r) == pytest.approx(np.linalg.det(covariance_blocks(r).A_r), rel=1e-12)
