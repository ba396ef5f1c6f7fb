"""Independent reference computations shared by the tests."""
from fractions import Fraction


def j0_series_exact(x, terms=60):
    """Alternating power series of J0 summed in exact rational arithmetic."""
    q = Fraction(x) ** 2 / 4
    term, total = Fraction(1), Fraction(1)
    for k in range(1, terms):
        term *= -q / (k * k)
        total += term
    return float(total)


def bisect_zero(f, lo, hi, tol=1e-15):
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sigma_by_differentiation(r, dps=40):
    """Covariance of (grad z, grad w, Hess z, Hess w) at z = 0, w = (0, r),
    built by numerically differentiating J0(|d|) in high precision.

    ``Cov(D^a Psi(P), D^b Psi(Q)) = (-1)^{|b|} (D^{a+b} k)(P - Q)`` with
    ``k(d) = J0(|d|)``; Hessian entries are ordered (xx, xy, yy).
    """
    import mpmath as mp
    import numpy as np

    with mp.workdps(dps):
        k = lambda x, y: mp.besselj(0, mp.sqrt(x * x + y * y))  # noqa: E731
        pts = {"z": (mp.mpf(0), mp.mpf(0)), "w": (mp.mpf(0), mp.mpf(r))}
        ops = [("z", (1, 0)), ("z", (0, 1)), ("w", (1, 0)), ("w", (0, 1)),
               ("z", (2, 0)), ("z", (1, 1)), ("z", (0, 2)),
               ("w", (2, 0)), ("w", (1, 1)), ("w", (0, 2))]
        S = np.zeros((10, 10))
        for i, (p, a) in enumerate(ops):
            for j, (q, b) in enumerate(ops):
                d = (pts[p][0] - pts[q][0], pts[p][1] - pts[q][1])
                S[i, j] = float((-1) ** (b[0] + b[1]) * mp.diff(k, d, (a[0] + b[0], a[1] + b[1])))
    return S
