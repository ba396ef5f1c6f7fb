"""Realisations of the random plane wave with wavenumber 1.

A field is the truncated Bessel series

    Psi(r, theta) = Re sum_{|n| <= N} a_n J_|n|(r) exp(i n theta)

with i.i.d. complex Gaussian ``a_n`` (``E|a_n|^2 = 2``). Its covariance is
``J0(|z - w|)``.

Derivatives use the ladder identities for ``u_m = J_m(r) exp(i m theta)``
(``m`` any integer): ``(d_x + i d_y) u_m = -u_{m+1}`` and
``(d_x - i d_y) u_m = u_{m-1}``. These are regular at the origin and make
every truncated field an exact solution of ``Lap Psi + Psi = 0``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .special_math import DomainError, bessel_j_orders, keyed_rng

TRUNCATION_TOL = 1e-10
CERTIFY_EXTRA = 16
# coefficients are drawn in blocks of this many orders, one stream per block
COEFF_BLOCK = 32
_COEFF_STREAM = 0x5157


def truncation_order(R: float) -> int:
    """Starting truncation for a disc of radius ``R`` (before certification)."""
    return math.ceil(math.e * R / 2) + 12


def _zigzag(n):
    n = np.asarray(n)
    return np.where(n > 0, 2 * n - 1, -2 * n)


def draw_coefficients(seed: int, orders) -> np.ndarray:
    """Coefficients ``a_n`` for the requested orders.

    Coefficient ``n`` depends only on ``(seed, n)``: extending the
    truncation never changes the coefficients already drawn.
    """
    orders = np.asarray(orders, dtype=int)
    slot = _zigzag(orders)
    block = slot // COEFF_BLOCK
    out = np.empty(orders.shape, dtype=complex)
    for b in np.unique(block):
        rng = keyed_rng(seed, _COEFF_STREAM, int(b))
        z = rng.standard_normal((COEFF_BLOCK, 2))
        vals = z[:, 0] + 1j * z[:, 1]
        sel = block == b
        out[sel] = vals[slot[sel] % COEFF_BLOCK]
    return out


def _tail_from(coeffs: np.ndarray, N: int, R: float, extra: int) -> float:
    # coeffs holds a_n for |n| <= M with M >= N + extra
    M = (coeffs.size - 1) // 2
    n = np.arange(N + 1, N + extra + 1)
    a_pos = coeffs[M + n]
    a_neg = coeffs[M - n]
    # each derivative of order <= 2 mixes u_{n-2}..u_{n+2} with weights
    # summing to at most 1, and J_m(r) <= J_m(R) for r <= R < m
    j = special.jv(n - 2, R)
    return float(np.sum((np.abs(a_pos) + np.abs(a_neg)) * np.abs(j)))


def tail_bound(seed: int, N: int, R: float, extra: int = CERTIFY_EXTRA) -> float:
    """Bound on what orders ``N < |n| <= N + extra`` add to the value or to any
    first or second derivative anywhere in the disc of radius ``R``."""
    M = N + extra
    return _tail_from(draw_coefficients(seed, np.arange(-M, M + 1)), N, R, extra)


@dataclass(frozen=True, eq=False)
class FieldSample:
    """One realisation, certified on the disc of radius ``domain_radius``."""

    coefficients: np.ndarray  # a_n for n = -N..N
    truncation_order: int
    seed: int
    domain_radius: float
    wavenumber: float = 1.0

    def __post_init__(self):
        self.coefficients.setflags(write=False)

    @property
    def orders(self) -> np.ndarray:
        N = self.truncation_order
        return np.arange(-N, N + 1)

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "truncation_order": self.truncation_order,
                "domain_radius": self.domain_radius,
                "wavenumber": self.wavenumber,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "FieldSample":
        d = json.loads(text)
        field = sample_field(d["seed"], d["domain_radius"])
        if field.truncation_order != d["truncation_order"]:
            N = d["truncation_order"]
            field = cls(draw_coefficients(d["seed"], np.arange(-N, N + 1)), N, d["seed"], d["domain_radius"])
        return field


def sample_field(seed: int, R: float) -> FieldSample:
    """Draw the field for ``seed``, truncated so the neglected orders change
    the value and first two derivatives by less than 1e-10 on ``|z| <= R``."""
    R = float(R)
    if not R > 0 or not math.isfinite(R):
        raise DomainError("domain radius must be positive")
    N = truncation_order(R)
    while True:
        M = N + CERTIFY_EXTRA
        coeffs = draw_coefficients(seed, np.arange(-M, M + 1))
        if _tail_from(coeffs, N, R, CERTIFY_EXTRA) < TRUNCATION_TOL:
            break
        N += 4
    return FieldSample(coeffs[CERTIFY_EXTRA:-CERTIFY_EXTRA].copy(), N, int(seed), R)


@dataclass(frozen=True)
class FieldJet:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def ladder_coefficients(coeffs: np.ndarray) -> np.ndarray:
    """Rewrite ``a_n J_|n| e^{in theta}`` as ``b_n u_n`` (``J_{-n} = (-1)^n J_n``)."""
    N = (coeffs.shape[-1] - 1) // 2
    n = np.arange(-N, N + 1)
    sign = np.where((n < 0) & (n % 2 == 1), -1.0, 1.0)
    return coeffs * sign


def jet_arrays(b: np.ndarray, x, y):
    """Value, gradient and Hessian entries of ``Re sum b_n u_n`` at points.

    ``b`` holds ladder coefficients, either one row shared by all points or
    one row per point. Returns ``(v, gx, gy, hxx, hxy, hyy)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    N = (b.shape[-1] - 1) // 2
    r = np.hypot(x, y)
    m = np.arange(N + 3)
    J = bessel_j_orders(N + 2, r)
    safe = np.where(r > 0, r, 1.0)
    e1 = np.where(r > 0, (x + 1j * y) / safe, 1.0)
    E = np.cumprod(np.concatenate([np.ones((r.size, 1)), np.repeat(e1[:, None], N + 2, axis=1)], axis=1), axis=1)
    pos = J * E  # u_m, m = 0..N+2
    parity = np.where(m % 2 == 1, -1.0, 1.0)
    neg = (J * parity) * np.conj(E)  # u_{-m}
    U = np.concatenate([neg[:, :0:-1], pos], axis=1)  # m = -N-2..N+2
    bb = np.broadcast_to(b, (r.size, 2 * N + 1))
    W = 2 * N + 1

    def shifted(k):
        return np.einsum("pn,pn->p", bb, U[:, 2 + k : 2 + k + W])

    s0, sp1, sm1, sp2, sm2 = shifted(0), shifted(1), shifted(-1), shifted(2), shifted(-2)
    v = s0.real
    gx = (0.5 * (sm1 - sp1)).real
    gy = (0.5j * (sp1 + sm1)).real
    hxx = (0.25 * (sp2 - 2 * s0 + sm2)).real
    hyy = (-0.25 * (sp2 + 2 * s0 + sm2)).real
    hxy = (-0.25j * (sp2 - sm2)).real
    return v, gx, gy, hxx, hxy, hyy


def eval_jet(field: FieldSample, z) -> FieldJet:
    """Value, gradient and Hessian of ``field`` at the point ``z``."""
    x, y = float(z[0]), float(z[1])
    if math.hypot(x, y) > field.domain_radius * (1 + 1e-12):
        raise DomainError(f"point {z} lies outside the certified disc of radius {field.domain_radius}")
    v, gx, gy, hxx, hxy, hyy = jet_arrays(ladder_coefficients(field.coefficients), x, y)
    return FieldJet(
        value=float(v[0]),
        gradient=np.array([gx[0], gy[0]]),
        hessian=np.array([[hxx[0], hxy[0]], [hxy[0], hyy[0]]]),
    )


def eval_values(field: FieldSample, x, y) -> np.ndarray:
    """Field values at many points (no domain check)."""
    return jet_arrays(ladder_coefficients(field.coefficients), x, y)[0]
