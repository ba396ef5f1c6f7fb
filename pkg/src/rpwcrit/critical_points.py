"""Critical points of a field realisation inside a disc.

Newton's method on the gradient is started from every node of a square grid
covering the disc plus one grid step of margin. Converged points inside the
open disc are classified by their Hessian and deduplicated.
"""
from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass

import numpy as np

from .field import FieldSample, jet_arrays, ladder_coefficients

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
DEDUP_RADIUS = 1e-6
DET_FLOOR = 1e-12
DEFAULT_GRID_STEP = 0.1
MAX_GRID_STEP = 2 * math.pi / 8
MAX_NEWTON_ITER = 60
MAX_NEWTON_STEP = 0.5
MAX_HALVINGS = 8
# plain Newton for this many iterations, damped afterwards
DAMP_AFTER = 12
POLISH_STEPS = 2
# iterates this far outside the search disc are abandoned
ESCAPE_MARGIN = 0.5
# points evaluated together; bounds memory of the batched Bessel tables
POINT_CHUNK = 16384


class Kind(str, enum.Enum):
    MIN = "min"
    MAX = "max"
    SADDLE = "saddle"


class DegenerateHessianError(ArithmeticError):
    pass


def classify(hessian, floor: float = DET_FLOOR) -> Kind:
    """Min if det > 0 and trace > 0, max if det > 0 and trace < 0, saddle if
    det < 0."""
    h = np.asarray(hessian, dtype=float)
    det = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
    if abs(det) <= floor:
        raise DegenerateHessianError(f"|det H| = {abs(det):.3g} is below the floor {floor:g}")
    if det < 0:
        return Kind.SADDLE
    return Kind.MIN if h[0, 0] + h[1, 1] > 0 else Kind.MAX


@dataclass(frozen=True)
class CriticalPoint:
    location: tuple
    value: float
    hessian: np.ndarray
    kind: Kind
    newton_residual: float

    @property
    def det_hessian(self) -> float:
        h = self.hessian
        return float(h[0, 0] * h[1, 1] - h[0, 1] ** 2)

    @property
    def trace_hessian(self) -> float:
        return float(self.hessian[0, 0] + self.hessian[1, 1])


@dataclass
class SearchResult:
    points: list
    unconverged: int
    starts: int

    def count(self, kind: Kind | None = None) -> int:
        if kind is None:
            return len(self.points)
        return sum(p.kind is kind for p in self.points)


def grid_starts(rho: float, step: float) -> np.ndarray:
    """Grid nodes (cell-index order) covering the disc of radius ``rho + step``."""
    reach = rho + step
    n = math.ceil(reach / step)
    ticks = step * np.arange(-n, n + 1)
    gx, gy = np.meshgrid(ticks, ticks, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    keep = np.hypot(pts[:, 0], pts[:, 1]) <= reach + 1e-12
    return pts[keep]


def _check_args(rho, grid_step, domain_radius):
    if not rho > 0:
        raise ValueError("rho must be positive")
    if not 0 < grid_step <= MAX_GRID_STEP:
        raise ValueError(f"grid_step must lie in (0, 2*pi/8 = {MAX_GRID_STEP:.4f}]")
    if rho + grid_step > domain_radius:
        raise ValueError(
            f"rho + grid_step = {rho + grid_step:g} exceeds the field's domain radius {domain_radius:g}"
        )


def _newton(b, owner, x, y, R, tol):
    """Damped Newton iteration on the gradient, vectorised over points.

    ``b[owner[i]]`` are the ladder coefficients driving point ``i``. After
    ``DAMP_AFTER`` plain steps a step is halved until ``|grad|`` decreases.
    This stops the cycling plain Newton can fall into without slowing the
    many starts that quickly leave the disc. Returns final positions and
    masks of converged and escaped starts.
    """
    x = x.copy()
    y = y.copy()
    P = x.size
    active = np.ones(P, dtype=bool)
    converged = np.zeros(P, dtype=bool)
    escaped = np.zeros(P, dtype=bool)
    jet = np.stack(jet_arrays(b[owner], x, y)[1:])  # gx, gy, hxx, hxy, hyy
    for it in range(MAX_NEWTON_ITER):
        gnorm = np.hypot(jet[0], jet[1])
        done = active & (gnorm <= tol)
        converged |= done
        active &= ~done
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        gx, gy, hxx, hxy, hyy = jet[:, idx]
        det = hxx * hyy - hxy * hxy
        singular = np.abs(det) < 1e-300
        active[idx[singular]] = False
        idx, gx, gy, hxx, hxy, hyy, det = (a[~singular] for a in (idx, gx, gy, hxx, hxy, hyy, det))
        dx = (hyy * gx - hxy * gy) / det
        dy = (hxx * gy - hxy * gx) / det
        length = np.hypot(dx, dy)
        step = np.minimum(1.0, MAX_NEWTON_STEP / np.maximum(length, 1e-300))
        g0 = np.hypot(gx, gy)
        # trial steps: the full (capped) step during the plain phase, then
        # all halvings 1, 1/2, ..., evaluated in one batch
        n_try = 1 if it < DAMP_AFTER else MAX_HALVINGS
        frac = 0.5 ** np.arange(n_try)
        tx = x[idx, None] - (step * dx)[:, None] * frac
        ty = y[idx, None] - (step * dy)[:, None] * frac
        out = np.hypot(tx[:, 0], ty[:, 0]) > R
        escaped[idx[out]] = True
        inside = ~out
        tj = np.stack(jet_arrays(b[owner[np.repeat(idx[inside], n_try)]], tx[inside].ravel(), ty[inside].ravel())[1:])
        tj = tj.reshape(5, -1, n_try)
        better = np.hypot(tj[0], tj[1]) < g0[inside, None]
        if n_try == 1:
            better[:] = True
        has = better.any(axis=1)
        first = np.argmax(better, axis=1)
        k = np.flatnonzero(inside)[has]
        rows = np.flatnonzero(has)
        first = first[has]
        new_x = x[idx].copy()
        new_y = y[idx].copy()
        new_jet = jet[:, idx].copy()
        new_x[k] = tx[k, first]
        new_y[k] = ty[k, first]
        new_jet[:, k] = tj[:, rows, first]
        pending = np.zeros(idx.size, dtype=bool)
        pending[np.flatnonzero(inside)[~has]] = True
        # no decrease after all halvings: a stationary point of |grad| that
        # is not a zero; give up on this start
        active[idx[pending]] = False
        active[idx[out]] = False
        x[idx], y[idx] = new_x, new_y
        jet[:, idx] = new_jet
    # polish converged points a little further
    idx = np.flatnonzero(converged)
    for _ in range(POLISH_STEPS):
        if idx.size == 0:
            break
        _, gx, gy, hxx, hxy, hyy = jet_arrays(b[owner[idx]], x[idx], y[idx])
        det = hxx * hyy - hxy * hxy
        ok = np.abs(det) > 1e-300
        safe = np.where(ok, det, 1.0)
        x[idx] -= np.where(ok, (hyy * gx - hxy * gy) / safe, 0.0)
        y[idx] -= np.where(ok, (hxx * gy - hxy * gx) / safe, 0.0)
    return x, y, converged, escaped


def search_fields(fields, rho: float, grid_step: float = DEFAULT_GRID_STEP, newton_tol: float = NEWTON_TOL):
    """Critical point search on several fields at once.

    All fields must share a domain radius. Returns one ``SearchResult`` per
    field, in order.
    """
    fields = list(fields)
    if not fields:
        return []
    R = min(f.domain_radius for f in fields)
    _check_args(rho, grid_step, R)
    escape = min(R, rho + max(ESCAPE_MARGIN, 2 * grid_step))
    n_max = max(f.truncation_order for f in fields)
    b = np.zeros((len(fields), 2 * n_max + 1), dtype=complex)
    for i, f in enumerate(fields):
        N = f.truncation_order
        b[i, n_max - N : n_max + N + 1] = ladder_coefficients(f.coefficients)

    starts = grid_starts(rho, grid_step)
    S = len(starts)
    owner = np.repeat(np.arange(len(fields)), S)
    x0 = np.tile(starts[:, 0], len(fields))
    y0 = np.tile(starts[:, 1], len(fields))

    xs = np.empty_like(x0)
    ys = np.empty_like(y0)
    conv = np.empty(x0.size, dtype=bool)
    esc = np.empty(x0.size, dtype=bool)
    for lo in range(0, x0.size, POINT_CHUNK):
        sl = slice(lo, lo + POINT_CHUNK)
        xs[sl], ys[sl], conv[sl], esc[sl] = _newton(b, owner[sl], x0[sl], y0[sl], escape, newton_tol)

    # Starts that left the neighbourhood of the disc were heading for points
    # elsewhere; the rest that failed are reported as unconverged cells.
    unconverged = np.bincount(owner[~conv & ~esc], minlength=len(fields))

    accept = conv & (np.hypot(xs, ys) < rho)
    idx = np.flatnonzero(accept)
    results = [SearchResult([], int(unconverged[i]), S) for i in range(len(fields))]
    if idx.size == 0:
        return results
    v, gx, gy, hxx, hxy, hyy = jet_arrays(b[owner[idx]], xs[idx], ys[idx])
    kept = [[] for _ in fields]
    for j, i in enumerate(idx):  # cell-index order within each field
        t = owner[i]
        loc = (xs[i], ys[i])
        if any(math.hypot(loc[0] - q[0], loc[1] - q[1]) <= DEDUP_RADIUS for q in kept[t]):
            continue
        resid = math.hypot(gx[j], gy[j])
        if resid > newton_tol:
            results[t].unconverged += 1
            continue
        hess = np.array([[hxx[j], hxy[j]], [hxy[j], hyy[j]]])
        try:
            kind = classify(hess)
        except DegenerateHessianError as exc:
            log.info("discarding degenerate critical point at %s: %s", loc, exc)
            results[t].unconverged += 1
            continue
        kept[t].append(loc)
        results[t].points.append(
            CriticalPoint(
                location=(float(loc[0]), float(loc[1])),
                value=float(v[j]),
                hessian=hess,
                kind=kind,
                newton_residual=float(resid),
            )
        )
    return results


def search_critical_points(
    field: FieldSample, rho: float, grid_step: float = DEFAULT_GRID_STEP, newton_tol: float = NEWTON_TOL
) -> SearchResult:
    return search_fields([field], rho, grid_step, newton_tol)[0]


def find_critical_points(
    field: FieldSample, rho: float, grid_step: float = DEFAULT_GRID_STEP, newton_tol: float = NEWTON_TOL
) -> list:
    """All critical points of ``field`` in the open disc of radius ``rho``."""
    res = search_critical_points(field, rho, grid_step, newton_tol)
    if res.unconverged:
        log.info("%d of %d Newton starts did not converge", res.unconverged, res.starts)
    return res.points


CSV_COLUMNS = ("x", "y", "value", "kind", "det_hessian", "trace_hessian")


def points_to_csv(points, header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in points:
        w.writerow([repr(p.location[0]), repr(p.location[1]), repr(p.value), p.kind.value,
                    repr(p.det_hessian), repr(p.trace_hessian)])
    return buf.getvalue()
