import math

import numpy as np
import pytest

from rpwcrit.kacrice.covariance import (
    ONE_POINT,
    R_SWITCH,
    a_values,
    assemble_delta,
    conditional_covariance,
    covariance_blocks,
    det_a,
    det_a_product,
    det_a_series,
    eigen_delta_closed,
    kernel_values,
    schur_delta,
)
from rpwcrit.special_math import jacobi_eigen_sym

from oracles import sigma_by_differentiation

GRID = np.geomspace(1e-3, 10, 50)


def test_one_point_blocks():
    assert np.allclose(ONE_POINT.A, np.eye(2) / 2)
    assert np.allclose(ONE_POINT.C, [[3 / 8, 0, 1 / 8], [0, 1 / 8, 0], [1 / 8, 0, 3 / 8]])


@pytest.mark.parametrize("r", [0.03, 0.2, 0.7, 3.0])
def test_blocks_match_differentiated_kernel(r):
    assert np.max(np.abs(covariance_blocks(r).sigma - sigma_by_differentiation(r))) < 1e-12


def test_small_r_limits():
    alpha1, alpha2, beta1, beta2, gamma1, gamma2, gamma3 = kernel_values(1e-4)
    assert abs(alpha1 - 0.5) < 1e-8 and abs(alpha2 - 0.5) < 1e-8
    assert abs(gamma3 - 3 / 8) < 1e-8


def test_det_a_leading_term():
    assert abs(det_a(0.1) / (3 * 0.1**4 / 2**8) - 1) < 0.02


def test_beta1_expansion():
    r = 0.1
    beta1 = kernel_values(r)[2]
    assert abs(beta1 - (-r / 8 + r**3 / 96)) < r**5


def test_a2_expansion():
    r = 0.1
    assert abs(a_values(r)[1] - r**2 / 2**7) < r**4


def test_lambda_limits():
    cc = conditional_covariance(1e-3)
    assert abs(cc.lambdas[5] - 2 / 3) < 1e-6
    r = 0.2
    lam1 = conditional_covariance(r).lambdas[0]
    assert abs(lam1 / (r**2 / 2**6) - 1) < 10 * r**4


@pytest.mark.parametrize("r", [0.2, 0.5, 1.0, 1.5, 2.0])
def test_det_a_branches_agree(r):
    assert det_a_product(r) == pytest.approx(det_a_series(r), rel=1e-8)


@pytest.mark.parametrize("r", np.linspace(R_SWITCH, 0.2, 7))
def test_series_and_closed_forms_agree_in_overlap(r):
    from rpwcrit.kacrice.covariance import a_from_kernel, kernel_coefficients
    from rpwcrit.special_math import bessel_j_derivs

    closed = np.array(a_from_kernel(*kernel_coefficients(r, *bessel_j_derivs(r, 4)[1:])))
    series = a_values(r * (1 - 1e-15)) if r == R_SWITCH else a_values(r)
    scale = np.abs(closed).max()
    assert np.max(np.abs(closed - series)) < 1e-8 * scale


@pytest.mark.parametrize("r", [1e-3, 0.01, 0.1, 0.5, 1.0, 4.0])
def test_schur_complement_matches_assembled_delta(r):
    d1 = schur_delta(covariance_blocks(r))
    d2 = assemble_delta(a_values(r))
    if r >= 0.1:
        assert np.max(np.abs(d1 - d2)) < 1e-10
    else:
        # direct solve loses digits near 0; compare at the scale it resolves
        assert np.max(np.abs(d1 - d2)) < 1e-5


@pytest.mark.parametrize("r", GRID)
def test_closed_eigen_against_jacobi(r):
    cc = conditional_covariance(r)
    w, _ = jacobi_eigen_sym(cc.delta)
    assert np.max(np.abs(np.sort(cc.lambdas) - np.sort(w))) < 1e-10
    assert np.max(np.abs(cc.Q.T @ cc.Q - np.eye(6))) < 1e-12
    assert np.max(np.abs(cc.Q @ np.diag(cc.lambdas) @ cc.Q.T - cc.delta)) < 1e-10
    assert w.min() >= -1e-12


def test_delta_at_one_against_jacobi():
    cc = conditional_covariance(1.0)
    lam, Q, fb = eigen_delta_closed(1.0)
    assert not fb
    w, V = jacobi_eigen_sym(cc.delta)
    assert np.max(np.abs(Q @ np.diag(lam) @ Q.T - V @ np.diag(w) @ V.T)) < 1e-10


def test_factor_reproduces_delta():
    cc = conditional_covariance(0.8)
    M = cc.factor
    assert np.max(np.abs(M @ M.T - cc.delta)) < 1e-12


def test_invalid_separation():
    for r in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            covariance_blocks(r)
