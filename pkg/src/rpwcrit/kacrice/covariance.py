"""Covariances of the gradient/Hessian vector of the random plane wave.

Points are fixed at ``z = (0, 0)`` and ``w = (0, r)``; by isotropy this
loses nothing for quantities that depend on ``|z - w|`` only. Vectors are
ordered ``(d1, d2)`` for gradients and ``(d11, d12, d22)`` for Hessians.

Below ``R_SWITCH`` every quantity is evaluated from an exact power series,
because the closed forms divide differences of nearly equal numbers.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ..special_math import bessel_j_derivs, jacobi_eigen_sym
from .powerseries import PowerSeries, j0_series

log = logging.getLogger(__name__)

R_SWITCH = 0.05
SERIES_ORDER = 48
A4_GUARD = 1e-14


class CovarianceError(ArithmeticError):
    """A covariance matrix lost positive definiteness."""


@dataclass(frozen=True)
class OnePointCovariance:
    """Covariance of ``(grad Psi(z), Hess Psi(z))`` at a single point."""

    A: np.ndarray = field(default_factory=lambda: np.diag([0.5, 0.5]))
    B: np.ndarray = field(default_factory=lambda: np.zeros((2, 3)))
    C: np.ndarray = field(
        default_factory=lambda: np.array(
            [[3 / 8, 0.0, 1 / 8], [0.0, 1 / 8, 0.0], [1 / 8, 0.0, 3 / 8]]
        )
    )


ONE_POINT = OnePointCovariance()


# ---------------------------------------------------------------------------
# Closed forms, written so they work for floats and for mpmath numbers alike.


def kernel_coefficients(r, d1, d2, d3, d4):
    """``(alpha1, alpha2, beta1, beta2, gamma1, gamma2, gamma3)`` from the
    first four derivatives of ``J0`` at ``r``."""
    alpha1 = -d1 / r
    alpha2 = -d2
    beta1 = -d2 / r + d1 / r**2
    beta2 = -d3
    gamma1 = 3 * d2 / r**2 - 3 * d1 / r**3
    gamma2 = d3 / r - 2 * d2 / r**2 + 2 * d1 / r**3
    gamma3 = d4
    return alpha1, alpha2, beta1, beta2, gamma1, gamma2, gamma3


def a_from_kernel(alpha1, alpha2, beta1, beta2, gamma1, gamma2, gamma3):
    """The eight entries ``a_1..a_8`` of the conditional covariance."""
    one = alpha1 * 0 + 1
    den2 = 1 - 4 * alpha2**2
    den1 = 1 - 4 * alpha1**2
    return [
        -2 * beta1**2 / den2 + one / 24,
        -2 * beta1**2 / den1 + one / 8,
        -2 * beta2**2 / den2 + 3 * one / 8,
        -2 * beta1 * beta2 / den2 + one / 8,
        gamma1 - 4 * alpha2 * beta1**2 / den2 - one / 3,
        gamma2 - 4 * alpha1 * beta1**2 / den1,
        gamma3 - 4 * alpha2 * beta2**2 / den2,
        gamma2 - 4 * alpha2 * beta1 * beta2 / den2,
    ]


def block_sums(a):
    """``A_i^{+-}`` combinations plus the per-block differences and
    determinants that the eigen formulas need."""
    a1, a2, a3, a4, a5, a6, a7, a8 = a
    two_thirds = (a1 * 0 + 2) / 3
    s = {
        "A1p": a1 + a5 + two_thirds,
        "A1m": a1 - a5,
        "A2p": a2 + a6,
        "A2m": a2 - a6,
        "A3p": a3 + a7,
        "A3m": a3 - a7,
        "A4p": a4 + a8,
        "A4m": a4 - a8,
    }
    for b in "pm":
        s["d" + b] = s["A3" + b] - s["A1" + b]
        s["det" + b] = s["A1" + b] * s["A3" + b] - s["A4" + b] ** 2
    return s


def _quadratic_block(A1, A3, A4, d, det, sqrt):
    # roots of l^2 - (A1 + A3) l + det, plus the first eigenvector component
    # for each root; every branch avoids subtracting nearly equal numbers
    t = A1 + A3
    s = sqrt(d**2 + 4 * A4**2)
    if t >= 0:
        hi = (t + s) / 2
        lo = det / hi if hi != 0 else (t - s) / 2
    else:
        lo = (t - s) / 2
        hi = det / lo
    if d >= 0:
        v_lo = (d + s) / (2 * A4)
        v_hi = -2 * A4 / (d + s)
    else:
        v_hi = (d - s) / (2 * A4)
        v_lo = -2 * A4 / (d - s)
    return lo, hi, v_lo, v_hi


def eigen_from_sums(s, sqrt):
    """Eigenvalues ``lambda_1..lambda_6`` and the components
    ``v31, v41, v51, v61`` of the eigenvectors."""
    l3, l4, v31, v41 = _quadratic_block(s["A1m"], s["A3m"], s["A4m"], s["dm"], s["detm"], sqrt)
    l5, l6, v51, v61 = _quadratic_block(s["A1p"], s["A3p"], s["A4p"], s["dp"], s["detp"], sqrt)
    lambdas = [s["A2m"], s["A2p"], l3, l4, l5, l6]
    return lambdas, (v31, v41, v51, v61)


def eigenvector_columns(v31, v41, v51, v61, sqrt):
    """Normalised eigenvectors ``v_1..v_6`` as a list of columns."""
    one = v31 * 0 + 1
    zero = one * 0
    cols = [
        [zero, -one, zero, zero, one, zero],
        [zero, one, zero, zero, one, zero],
        [v31, zero, -one, -v31, zero, one],
        [v41, zero, -one, -v41, zero, one],
        [-v51, zero, one, -v51, zero, one],
        [-v61, zero, one, -v61, zero, one],
    ]
    out = []
    for c in cols:
        norm = sqrt(sum(x * x for x in c))
        out.append([x / norm for x in c])
    return out


def assemble_delta(a) -> np.ndarray:
    """The 6x6 conditional covariance ``[[D1, D2], [D2, D1]]``."""
    a1, a2, a3, a4, a5, a6, a7, a8 = (float(x) for x in a)
    d1 = np.array([[1 / 3 + a1, 0, a4], [0, a2, 0], [a4, 0, a3]])
    d2 = np.array([[1 / 3 + a5, 0, a8], [0, a6, 0], [a8, 0, a7]])
    return np.block([[d1, d2], [d2, d1]])


# ---------------------------------------------------------------------------
# Exact series branch


@dataclass(frozen=True)
class SeriesBundle:
    kernel: tuple  # alpha1, alpha2, beta1, beta2, gamma1, gamma2, gamma3
    a: tuple
    det_a: PowerSeries
    sums: dict


@lru_cache(maxsize=1)
def series_bundle(order: int = SERIES_ORDER) -> SeriesBundle:
    """Exact power series (in ``r``) of every covariance quantity."""
    j0 = j0_series(order + 8)
    d1 = j0.derivative()
    d2 = d1.derivative()
    d3 = d2.derivative()
    d4 = d3.derivative()
    r = PowerSeries([0, 1], order + 8)
    alpha1 = (-d1).shift(-1)
    alpha2 = -d2
    beta1 = (-(r * d2) + d1).shift(-2)
    beta2 = -d3
    gamma1 = (3 * (r * d2) - 3 * d1).shift(-3)
    gamma2 = (r * r * d3 - 2 * (r * d2) + 2 * d1).shift(-3)
    gamma3 = d4
    kernel = (alpha1, alpha2, beta1, beta2, gamma1, gamma2, gamma3)
    a = a_from_kernel(*kernel)
    quarter = Fraction(1, 4)
    det_a = (alpha1 * alpha1 - quarter) * (alpha2 * alpha2 - quarter)
    sums = block_sums(a)
    cut = lambda s: s.truncated(order)  # noqa: E731
    return SeriesBundle(
        kernel=tuple(cut(k) for k in kernel),
        a=tuple(cut(x) for x in a),
        det_a=cut(det_a),
        sums={k: cut(v) for k, v in sums.items()},
    )


# ---------------------------------------------------------------------------
# Float evaluation


def _check_r(r: float) -> float:
    r = float(r)
    if not math.isfinite(r) or r <= 0:
        raise ValueError("separation r must be a positive finite number")
    return r


def kernel_values(r: float) -> tuple:
    """Alpha, beta, gamma at ``r`` as floats."""
    r = _check_r(r)
    if r < R_SWITCH:
        return tuple(s(r) for s in series_bundle().kernel)
    _, d1, d2, d3, d4 = bessel_j_derivs(r, 4)
    return kernel_coefficients(r, d1, d2, d3, d4)


def det_a_product(r: float) -> float:
    """``det A(r)`` as the product of its factors (accurate away from 0)."""
    alpha1, alpha2, *_ = kernel_coefficients(r, *bessel_j_derivs(_check_r(r), 4)[1:])
    return (alpha1 - 0.5) * (alpha1 + 0.5) * (alpha2 - 0.5) * (alpha2 + 0.5)


def det_a_series(r: float) -> float:
    """``det A(r)`` from its exact power series (accurate near 0)."""
    return series_bundle().det_a(_check_r(r))


def det_a(r: float) -> float:
    r = _check_r(r)
    return det_a_series(r) if r < R_SWITCH else det_a_product(r)


@dataclass(frozen=True)
class CovarianceBlocks:
    """Blocks of the 10x10 covariance of ``(grad z, grad w, Hess z, Hess w)``."""

    r: float
    alphas: tuple
    betas: tuple
    gammas: tuple
    A_r: np.ndarray  # 4x4
    B_r: np.ndarray  # 4x6
    C_r: np.ndarray  # 6x6
    det_A: float

    @property
    def sigma(self) -> np.ndarray:
        return np.block([[self.A_r, self.B_r], [self.B_r.T, self.C_r]])


def covariance_blocks(r: float) -> CovarianceBlocks:
    r = _check_r(r)
    alpha1, alpha2, beta1, beta2, gamma1, gamma2, gamma3 = kernel_values(r)
    a_loc = ONE_POINT.A
    a_cross = np.diag([alpha1, alpha2])
    A_r = np.block([[a_loc, a_cross], [a_cross, a_loc]])
    b_cross = np.array([[0.0, beta1, 0.0], [beta1, 0.0, beta2]])
    zero = np.zeros((2, 3))
    B_r = np.block([[zero, b_cross], [-b_cross, zero]])
    c_cross = np.array([[gamma1, 0.0, gamma2], [0.0, gamma2, 0.0], [gamma2, 0.0, gamma3]])
    C_r = np.block([[ONE_POINT.C, c_cross], [c_cross, ONE_POINT.C]])
    det = det_a(r)
    if not det > 0:
        raise CovarianceError(f"gradient covariance is not positive definite at r={r}")
    return CovarianceBlocks(
        r=r,
        alphas=(alpha1, alpha2),
        betas=(beta1, beta2),
        gammas=(gamma1, gamma2, gamma3),
        A_r=A_r,
        B_r=B_r,
        C_r=C_r,
        det_A=det,
    )


def schur_delta(blocks: CovarianceBlocks) -> np.ndarray:
    """``C - B^T A^{-1} B`` computed directly from the blocks."""
    return blocks.C_r - blocks.B_r.T @ np.linalg.solve(blocks.A_r, blocks.B_r)


def a_values(r: float) -> np.ndarray:
    r = _check_r(r)
    if r < R_SWITCH:
        return np.array([s(r) for s in series_bundle().a])
    return np.array(a_from_kernel(*kernel_values(r)))


def _sums_at(r: float) -> dict:
    if r < R_SWITCH:
        return {k: s(r) for k, s in series_bundle().sums.items()}
    return block_sums([float(x) for x in a_values(r)])


@dataclass(frozen=True)
class ConditionalCovariance:
    """Covariance of the two Hessians given both gradients vanish."""

    r: float
    a: np.ndarray
    delta: np.ndarray
    lambdas: np.ndarray
    Q: np.ndarray
    used_fallback: bool = False

    @property
    def factor(self) -> np.ndarray:
        """``M`` with ``M @ M.T == delta``; a standard normal ``xi`` maps to
        ``zeta = M @ xi``."""
        return self.Q * np.sqrt(np.clip(self.lambdas, 0.0, None))


def eigen_delta_closed(r: float):
    """Closed-form eigenvalues (labelled as ``lambda_1..lambda_6``) and the
    orthogonal matrix whose columns are the matching unit eigenvectors.

    Returns ``(lambdas, Q, used_fallback)``. When ``A_4^{+-}`` is too close
    to zero for the eigenvector formulas the Jacobi solver is used instead.
    """
    r = _check_r(r)
    s = _sums_at(r)
    if min(abs(s["A4p"]), abs(s["A4m"])) < A4_GUARD:
        log.warning("A4 below %g at r=%g; using Jacobi eigenvectors", A4_GUARD, r)
        w, v = jacobi_eigen_sym(assemble_delta(a_values(r)))
        return w, v, True
    lambdas, vs = eigen_from_sums(s, math.sqrt)
    cols = eigenvector_columns(*vs, math.sqrt)
    Q = np.array(cols, dtype=float).T
    return np.array(lambdas, dtype=float), Q, False


def conditional_covariance(r: float) -> ConditionalCovariance:
    r = _check_r(r)
    a = a_values(r)
    lambdas, Q, fallback = eigen_delta_closed(r)
    return ConditionalCovariance(
        r=r, a=a, delta=assemble_delta(a), lambdas=lambdas, Q=Q, used_fallback=fallback
    )
