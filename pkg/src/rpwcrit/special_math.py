"""Bessel functions, a small symmetric eigensolver, the disc overlap kernel
and seeded random streams.

Everything here is a pure function of its arguments.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

MAX_BESSEL_ORDER = 400
# J0 derivatives switch from the power series to Bessel recurrences here.
DERIV_SERIES_CUTOFF = 2.0
JACOBI_MAX_SWEEPS = 50


class DomainError(ValueError):
    """An argument lies outside the domain an operation supports."""


class ConvergenceError(RuntimeError):
    """An iterative routine ran out of iterations."""


def bessel_j(n, x):
    """Bessel function of the first kind ``J_n(x)`` for integer ``n >= 0``.

    Works elementwise on arrays. Backed by ``scipy.special.jv``.
    """
    n_arr = np.asarray(n)
    x_arr = np.asarray(x, dtype=float)
    if not np.issubdtype(n_arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(n_arr, 1), 0)):
            raise DomainError("Bessel order must be an integer")
    if np.any(n_arr < 0) or np.any(n_arr > MAX_BESSEL_ORDER):
        raise DomainError(f"Bessel order must lie in [0, {MAX_BESSEL_ORDER}]")
    if not np.all(np.isfinite(x_arr)) or np.any(x_arr < 0):
        raise DomainError("Bessel argument must be finite and >= 0")
    out = special.jv(n_arr, x_arr)
    if np.ndim(out) == 0:
        return float(out)
    return out


def bessel_j_orders(max_order: int, x) -> np.ndarray:
    """``J_0(x) .. J_max_order(x)`` for an array of arguments.

    Miller's backward recurrence normalised by ``J0 + 2 sum J_2k = 1``;
    returns shape ``(len(x), max_order + 1)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise DomainError("Bessel argument must be finite and >= 0")
    out = np.zeros((x.size, max_order + 1))
    if x.size == 0:
        return out
    # start far enough above both the requested orders and the argument
    # that the seed's error has decayed below double precision
    xmax = float(x.max())
    start = max(max_order + 12, math.ceil(xmax + 10 + math.sqrt(40 * (xmax + 1))))
    start += start % 2
    zero = x == 0
    xs = np.where(zero, 1.0, x)
    big = 1e250
    jp = np.zeros_like(xs)
    j = np.full_like(xs, 1e-300)
    norm = np.zeros_like(xs)
    for m in range(start, 0, -1):
        jm = (2.0 * m / xs) * j - jp
        jp, j = j, jm
        # j now holds the unnormalised J_{m-1}
        if m - 1 <= max_order:
            out[:, m - 1] = j
        if (m - 1) % 2 == 0 and m - 1 > 0:
            norm += 2.0 * j
        huge = np.abs(j) > big
        if huge.any():
            j[huge] /= big
            jp[huge] /= big
            norm[huge] /= big
            out[huge] /= big
    norm += j
    out /= norm[:, None]
    out[zero] = 0.0
    out[zero, 0] = 1.0
    return out


def j0_series_coefficient(k: int) -> float:
    """Coefficient of ``x**(2k)`` in the power series of ``J0``."""
    return (-1) ** k / (4.0**k * math.factorial(k) ** 2)


def _j0_derivs_series(x: float, max_deriv: int) -> list[float]:
    out = [0.0] * (max_deriv + 1)
    for k in range(40):
        c = j0_series_coefficient(k)
        p = 2 * k
        for d in range(max_deriv + 1):
            if p < d:
                continue
            # d-th derivative of x**p
            fall = math.perm(p, d)
            out[d] += c * fall * x ** (p - d)
        if abs(c) * max(1.0, x) ** (2 * k) < 1e-30 and k > 4:
            break
    return out


def _j0_derivs_recurrence(x: float, max_deriv: int) -> list[float]:
    # Bessel's equation x*J0'' + J0' + x*J0 = 0, differentiated repeatedly.
    j0 = float(special.j0(x))
    j1 = float(special.j1(x))
    d = [j0, -j1]
    d.append(-d[0] - d[1] / x)
    d.append(-d[1] - d[2] / x + d[1] / x**2)
    d.append(-d[2] - d[3] / x + 2 * d[2] / x**2 - 2 * d[1] / x**3)
    return d[: max_deriv + 1]


def bessel_j_derivs(x: float, max_deriv: int = 4) -> list[float]:
    """Return ``[J0(x), J0'(x), ..., J0^(max_deriv)(x)]``.

    Small arguments use the differentiated power series so that the
    ``1/x**k`` terms of the recurrences never cancel.
    """
    if not 0 <= max_deriv <= 4:
        raise DomainError("max_deriv must be between 0 and 4")
    x = float(x)
    if not math.isfinite(x) or x < 0:
        raise DomainError("argument must be finite and >= 0")
    if x < DERIV_SERIES_CUTOFF:
        return _j0_derivs_series(x, max_deriv)
    return _j0_derivs_recurrence(x, max_deriv)


def jacobi_eigen_sym(m, tol: float = 1e-12, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi diagonalisation of a small real symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues in descending
    order and eigenvectors as the columns of an orthogonal matrix, so that
    ``V @ diag(w) @ V.T`` reproduces ``m``.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("matrix must be square")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12):
        raise DomainError("matrix must be symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.linalg.norm(a), 1e-300)

    mask = ~np.eye(n, dtype=bool)

    def off(mat):
        return float(np.linalg.norm(mat[mask]))

    for _ in range(max_sweeps):
        if off(a) <= 1e-17 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                v[:, idx] = v[:, idx] @ rot
    else:
        if off(a) > tol * scale:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")[::-1]
    return w[order], v[:, order]


def disc_overlap_kernel(r, rho: float):
    """Area of intersection of two discs of radius ``rho`` whose centres are
    ``r`` apart.

    With this kernel a double integral over a disc pair reduces to one
    dimension: ``int int f(|z-w|) dz dw = int_0^{2 rho} f(r) 2 pi r K(r) dr``.
    """
    if rho <= 0:
        raise DomainError("rho must be positive")
    r_arr = np.asarray(r, dtype=float)
    slack = 1e-12 * rho
    if np.any(r_arr < -slack) or np.any(r_arr > 2 * rho + slack):
        raise DomainError("r must lie in [0, 2*rho]")
    r_arr = np.clip(r_arr, 0.0, 2 * rho)
    u = r_arr / (2 * rho)
    # rho^2 (x - sin x) with x = 2 arccos(u); the half-angle arctan form and a
    # short series keep the tangent-disc end free of cancellation
    x = 4 * np.arctan(np.sqrt((1 - u) / (1 + u)))
    x2 = x * x
    series = x * x2 / 6 * (1 - x2 / 20 * (1 - x2 / 42 * (1 - x2 / 72)))
    area = rho**2 * np.where(x < 0.1, series, x - np.sin(x))
    if np.ndim(area) == 0:
        return float(area)
    return area


def keyed_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent random stream addressed by ``(seed, *key)``.

    Streams for different keys never overlap and do not depend on the order
    in which they are requested.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit integer seed derived from ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(hi) << 32 | int(lo)
