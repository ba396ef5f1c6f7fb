"""One- and two-point Kac-Rice densities of critical points.

The two-point density at separation ``r`` is

    K2(r) = (2 pi)^-2 det(A(r))^-1/2 E|c1 c2|,

where ``zeta ~ N(0, Delta(r))`` stacks the two conditional Hessians,
``c1 = zeta1 zeta3 - zeta2^2`` and ``c2 = zeta4 zeta6 - zeta5^2``. The
expectation is estimated by Monte Carlo with ``zeta = Q sqrt(Lambda) xi``.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ..special_math import derive_seed, disc_overlap_kernel, keyed_rng
from .covariance import ONE_POINT, conditional_covariance, det_a

MIN_SAMPLES = 10_000
CHUNK = 1 << 16
_STREAM_XI = 0x4B32
_STREAM_SPHERE = 0x5350
_STREAM_ONE_POINT = 0x4B31


class TypePair(str, enum.Enum):
    ALL = "All"
    MIN_MIN = "MinMin"
    MAX_MAX = "MaxMax"
    MIN_MAX = "MinMax"
    SADDLE_SADDLE = "SaddleSaddle"
    EXTREMUM_SADDLE = "ExtremumSaddle"
    EXTREMUM_EXTREMUM = "ExtremumExtremum"


# ---------------------------------------------------------------------------
# one point


def gradient_density_at_zero() -> float:
    """Density of ``grad Psi`` at 0, ``1 / (2 pi sqrt(det A))`` with ``A = I/2``."""
    return 1.0 / (2 * math.pi * math.sqrt(np.linalg.det(ONE_POINT.A)))


def expected_abs_det_hessian() -> float:
    """``E|det H|`` for ``H`` with the one-point Hessian covariance: 4/(8 sqrt 3)."""
    return (1.0 / 8.0) * (4.0 / math.sqrt(3.0))


def k1_density() -> float:
    """Critical points per unit area, ``1 / (2 sqrt(3) pi)``."""
    return gradient_density_at_zero() * expected_abs_det_hessian()


def expected_count(rho: float) -> float:
    """Mean number of critical points in a disc of radius ``rho``."""
    if rho < 0 or not math.isfinite(rho):
        raise ValueError("rho must be finite and >= 0")
    return math.pi * rho**2 * k1_density()


def expected_typed_counts(rho: float) -> dict:
    """Means by kind: a quarter minima, a quarter maxima, half saddles."""
    total = expected_count(rho)
    return {
        "total": total,
        "min": total / 4,
        "max": total / 4,
        "saddle": total / 2,
        "extremum": total / 2,
    }


@dataclass(frozen=True)
class MCValue:
    value: float
    std_error: float
    samples: int


def _mean_se(s1: float, s2: float, n: int) -> tuple:
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0) * n / (n - 1)
    return mean, math.sqrt(var / n)


def one_point_det_oracle(samples: int, seed: int) -> MCValue:
    """Monte Carlo ``E|det H|`` with ``H`` drawn from the one-point covariance."""
    if samples < 2:
        raise ValueError("need at least two samples")
    L = np.linalg.cholesky(ONE_POINT.C)
    s1 = s2 = 0.0
    for i, lo in enumerate(range(0, samples, CHUNK)):
        n = min(CHUNK, samples - lo)
        h = keyed_rng(seed, _STREAM_ONE_POINT, i).standard_normal((n, 3)) @ L.T
        d = np.abs(h[:, 0] * h[:, 2] - h[:, 1] ** 2)
        s1 += d.sum()
        s2 += (d * d).sum()
    m, se = _mean_se(s1, s2, samples)
    return MCValue(m, se, samples)


# ---------------------------------------------------------------------------
# two points


def k2_limit() -> float:
    """``K2(0+) = 1 / (2^5 3 sqrt(3) pi^2)``."""
    return 1.0 / (2**5 * 3 * math.sqrt(3) * math.pi**2)


@dataclass(frozen=True)
class K2Estimate:
    r: float
    value: float
    std_error: float
    samples: int
    type_pair: TypePair = TypePair.ALL
    used_fallback: bool = False


def _check_mc(r, samples):
    r = float(r)
    if not math.isfinite(r) or r <= 0:
        raise ValueError("separation r must be a positive finite number")
    if int(samples) < MIN_SAMPLES:
        raise ValueError(f"samples must be at least {MIN_SAMPLES}")
    return r, int(samples)


def _prefactor(r: float) -> float:
    d = det_a(r)
    if not d > 0:
        raise ArithmeticError(f"det A(r) = {d} is not positive at r={r}")
    return 1.0 / ((2 * math.pi) ** 2 * math.sqrt(d))


def hessian_invariants(zeta: np.ndarray) -> tuple:
    """``(b1, c1, b2, c2)`` with ``b = -trace`` and ``c = det`` of each Hessian."""
    b1 = -(zeta[:, 0] + zeta[:, 2])
    c1 = zeta[:, 0] * zeta[:, 2] - zeta[:, 1] ** 2
    b2 = -(zeta[:, 3] + zeta[:, 5])
    c2 = zeta[:, 3] * zeta[:, 5] - zeta[:, 4] ** 2
    return b1, c1, b2, c2


def typed_weights(zeta: np.ndarray) -> dict:
    """Per-draw integrand ``|c1 c2|`` split by the types of the two points.

    Mixed pairs are averaged over which point carries which type.
    """
    b1, c1, b2, c2 = hessian_invariants(zeta)
    w = np.abs(c1 * c2)
    s1, s2 = c1 < 0, c2 < 0
    mn1, mn2 = (c1 > 0) & (b1 < 0), (c2 > 0) & (b2 < 0)
    mx1, mx2 = (c1 > 0) & (b1 > 0), (c2 > 0) & (b2 > 0)
    e1, e2 = mn1 | mx1, mn2 | mx2
    return {
        TypePair.ALL: w,
        TypePair.MIN_MIN: w * (mn1 & mn2),
        TypePair.MAX_MAX: w * (mx1 & mx2),
        TypePair.MIN_MAX: 0.5 * w * ((mn1 & mx2).astype(float) + (mx1 & mn2)),
        TypePair.SADDLE_SADDLE: w * (s1 & s2),
        TypePair.EXTREMUM_SADDLE: 0.5 * w * ((e1 & s2).astype(float) + (s1 & e2)),
        TypePair.EXTREMUM_EXTREMUM: w * (e1 & e2),
    }


def partition_residual(weights: dict) -> np.ndarray:
    """Per-draw ``All - (MinMin + MaxMax + 2 MinMax + SaddleSaddle + 2 ExtremumSaddle)``."""
    return weights[TypePair.ALL] - (
        weights[TypePair.MIN_MIN]
        + weights[TypePair.MAX_MAX]
        + 2 * weights[TypePair.MIN_MAX]
        + weights[TypePair.SADDLE_SADDLE]
        + 2 * weights[TypePair.EXTREMUM_SADDLE]
    )


_PAIRS = list(TypePair)


def _chunk_moments(factor, seed, stream, index, n, sphere):
    xi = keyed_rng(seed, stream, index).standard_normal((n, 6))
    if sphere:
        xi /= np.linalg.norm(xi, axis=1, keepdims=True)
    zeta = xi @ factor.T
    w = typed_weights(zeta)
    resid = float(np.max(np.abs(partition_residual(w)) / np.maximum(w[TypePair.ALL], 1e-300)))
    W = np.stack([w[p] for p in _PAIRS])  # (pairs, n)
    return W.sum(axis=1), (W * W).sum(axis=1), (W * w[TypePair.ALL]).sum(axis=1), resid


def _run_chunks(factor, samples, seed, stream, threads, sphere=False):
    sizes = [min(CHUNK, samples - lo) for lo in range(0, samples, CHUNK)]
    jobs = [(factor, seed, stream, i, n, sphere) for i, n in enumerate(sizes)]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: _chunk_moments(*a), jobs))
    else:
        parts = [_chunk_moments(*a) for a in jobs]
    # reduce in chunk order so the result does not depend on scheduling
    s1 = np.zeros(len(_PAIRS))
    s2 = np.zeros(len(_PAIRS))
    sx = np.zeros(len(_PAIRS))
    resid = 0.0
    for a, b, c, d in parts:
        s1 += a
        s2 += b
        sx += c
        resid = max(resid, d)
    return s1, s2, sx, resid


@dataclass(frozen=True)
class TypedK2:
    """All type-restricted estimates from one common set of draws."""

    r: float
    samples: int
    estimates: dict
    partition_residual: float
    _s1: np.ndarray
    _s2: np.ndarray
    _sx: np.ndarray

    def __getitem__(self, pair) -> K2Estimate:
        return self.estimates[TypePair(pair)]

    def ratio(self, pair) -> tuple:
        """``pair / All`` with a delta-method standard error."""
        i = _PAIRS.index(TypePair(pair))
        j = _PAIRS.index(TypePair.ALL)
        n = self.samples
        mx, my = self._s1[i] / n, self._s1[j] / n
        R = mx / my
        var = self._s2[i] / n - 2 * R * self._sx[i] / n + R * R * self._s2[j] / n
        return R, math.sqrt(max(var, 0.0) / (n - 1)) / my


def _estimates(r, samples, seed, stream, threads):
    cc = conditional_covariance(r)
    scale = _prefactor(r)
    s1, s2, sx, resid = _run_chunks(cc.factor, samples, seed, stream, threads)
    out = {}
    for k, p in enumerate(_PAIRS):
        m, se = _mean_se(s1[k], s2[k], samples)
        out[p] = K2Estimate(r, scale * m, scale * se, samples, p, cc.used_fallback)
    return out, s1, s2, sx, resid


def k2(r: float, samples: int, seed: int, threads: int = 1) -> K2Estimate:
    """Monte Carlo estimate of ``K2(r)``."""
    r, samples = _check_mc(r, samples)
    return _estimates(r, samples, seed, _STREAM_XI, threads)[0][TypePair.ALL]


def k2_all_types(r: float, samples: int, seed: int, threads: int = 1) -> TypedK2:
    """Every type-restricted ``K2`` from the same draws as :func:`k2`."""
    r, samples = _check_mc(r, samples)
    out, s1, s2, sx, resid = _estimates(r, samples, seed, _STREAM_XI, threads)
    return TypedK2(r, samples, out, resid, s1, s2, sx)


def k2_typed(r: float, pair, samples: int, seed: int, threads: int = 1) -> K2Estimate:
    return k2_all_types(r, samples, seed, threads)[TypePair(pair)]


def radial_constant() -> float:
    """``int_0^inf t^9 exp(-t^2/2) dt`` (equals 384)."""
    val, _ = integrate.quad(lambda t: t**9 * math.exp(-0.5 * t * t), 0, math.inf, epsabs=1e-13, epsrel=1e-13)
    return val


def k2_spherical_crosscheck(r: float, samples: int, seed: int, threads: int = 1) -> K2Estimate:
    """``K2(r)`` from the average of ``|c1 c2|`` over the unit sphere in R^6.

    In polar coordinates the Gaussian integral factors into the radial
    constant times the sphere area ``pi^3``, which leaves
    ``K2 = 12 / (pi^2 sqrt(det A)) * mean_{s in S^5} |c1 c2|``.
    """
    r, samples = _check_mc(r, samples)
    cc = conditional_covariance(r)
    s1, s2, _, _ = _run_chunks(cc.factor, samples, seed, _STREAM_SPHERE, threads, sphere=True)
    # (2 pi)^-3 from the Gaussian density times |S^5| = pi^3 and the radial
    # integral; the Kac-Rice prefactor supplies the remaining (2 pi)^-2
    scale = (2 * math.pi) ** -3 * radial_constant() * math.pi**3 * _prefactor(r)
    k = _PAIRS.index(TypePair.ALL)
    m, se = _mean_se(s1[k], s2[k], samples)
    return K2Estimate(r, scale * m, scale * se, samples, TypePair.ALL, cc.used_fallback)


# ---------------------------------------------------------------------------
# second factorial moment


@dataclass(frozen=True)
class FactorialMomentEstimate:
    rho: float
    value: float
    std_error: float
    nodes: int
    samples_per_node: int


def _quadrature_nodes(rho: float, nodes: int):
    """Nodes in ``r`` and weights for ``int_0^{2 rho} f(r) 2 pi r K(r, rho) dr``.

    Gauss-Legendre in ``phi`` with ``r = 2 rho cos(phi)``; the overlap kernel
    becomes ``rho^2 (2 phi - sin 2 phi)`` and the integrand is smooth.
    """
    t, w = np.polynomial.legendre.leggauss(nodes)
    phi = 0.25 * math.pi * (t + 1)
    w = 0.25 * math.pi * w
    r = 2 * rho * np.cos(phi)
    jac = 2 * rho * np.sin(phi)
    overlap = disc_overlap_kernel(r, rho)
    return r, w * 2 * math.pi * r * overlap * jac


def second_factorial_moment(
    rho: float,
    r_quad_nodes: int = 64,
    samples_per_node: int = 20_000,
    seed: int = 0,
    k2_func=None,
    threads: int = 1,
) -> FactorialMomentEstimate:
    """``E[N(N-1)]`` for the number of critical points in a disc of radius ``rho``.

    ``k2_func(r)`` replaces the Monte Carlo ``K2`` when given (it may return a
    float or an object with ``value`` and ``std_error``). Each node uses its
    own stream, so node errors are independent and add in quadrature.
    """
    if not rho > 0 or not math.isfinite(rho):
        raise ValueError("rho must be positive")
    if r_quad_nodes < 2:
        raise ValueError("need at least two quadrature nodes")
    r, wts = _quadrature_nodes(rho, r_quad_nodes)
    vals = np.empty(r_quad_nodes)
    errs = np.zeros(r_quad_nodes)
    for i, ri in enumerate(r):
        if k2_func is None:
            est = k2(ri, samples_per_node, derive_seed(seed, i), threads)
        else:
            est = k2_func(ri)
        vals[i] = getattr(est, "value", est)
        errs[i] = getattr(est, "std_error", 0.0)
    value = float(np.dot(wts, vals))
    se = float(math.sqrt(np.sum((wts * errs) ** 2)))
    if not math.isfinite(value):
        raise ArithmeticError("factorial moment quadrature produced a non-finite value")
    return FactorialMomentEstimate(rho, value, se, r_quad_nodes, samples_per_node if k2_func is None else 0)


def leading_factorial_moment(rho: float) -> float:
    """Leading small-disc term ``rho^4 / (2^5 3 sqrt 3)``."""
    return rho**4 / (2**5 * 3 * math.sqrt(3))


def leading_variance(rho: float) -> float:
    """``rho^2/(2 sqrt 3) - (8 sqrt 3 - 1)/(2^5 3 sqrt 3) rho^4``."""
    return rho**2 / (2 * math.sqrt(3)) - (8 * math.sqrt(3) - 1) / (2**5 * 3 * math.sqrt(3)) * rho**4


def variance_from_moments(mean: float, factorial2: float) -> float:
    """``Var N = E[N(N-1)] + E N - (E N)^2``."""
    return factorial2 + mean - mean * mean


K2_CSV_COLUMNS = ("r", "k2", "se", "samples", "type_pair")


def k2_curve_to_csv(estimates, header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(K2_CSV_COLUMNS)
    for e in estimates:
        w.writerow([repr(e.r), repr(e.value), repr(e.std_error), e.samples, TypePair(e.type_pair).value])
    return buf.getvalue()
