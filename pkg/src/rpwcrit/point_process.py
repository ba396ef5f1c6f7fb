"""Count statistics of critical points in small discs, and the Poisson and
Ginibre point processes at the same intensity for comparison.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .critical_points import DEFAULT_GRID_STEP, Kind, search_critical_points, search_fields
from .field import sample_field
from .kacrice.twopoint import k1_density
from .special_math import derive_seed, keyed_rng

log = logging.getLogger(__name__)

INTENSITY = k1_density()
MIN_TRIALS = 500
MAX_FAILURE_FRACTION = 0.01
DOMAIN_MARGIN = 1.0
# fields searched together; fixed so results do not depend on --threads
BATCH = 500
_STREAM_POISSON = 0x504F
_STREAM_GINIBRE = 0x4749


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float


@dataclass(frozen=True)
class ProbEstimate:
    value: float
    std_error: float
    wilson_low: float
    wilson_high: float
    events: int


def _mean(x) -> Estimate:
    x = np.asarray(x, dtype=float)
    return Estimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)))


def proportion(events: int, trials: int) -> ProbEstimate:
    p = events / trials
    ci = binomtest(int(events), int(trials)).proportion_ci(confidence_level=0.95, method="wilson")
    return ProbEstimate(p, math.sqrt(p * (1 - p) / trials), float(ci.low), float(ci.high), int(events))


@dataclass
class MomentEstimate:
    rho: float
    trials: int
    mean_count: Estimate
    second_factorial: Estimate
    typed_means: dict
    prob_table: dict
    factorial_moments: dict  # exploratory, E[N(N-1)...(N-k+1)]
    counts: np.ndarray = field(repr=False)  # trials x (total, min, max, saddle)
    failures: list = field(default_factory=list)
    unconverged_cells: int = 0

    def summary(self) -> dict:
        out = {
            "rho": self.rho,
            "trials": self.trials,
            "mean_count": self.mean_count.value,
            "mean_count_se": self.mean_count.std_error,
            "second_factorial": self.second_factorial.value,
            "second_factorial_se": self.second_factorial.std_error,
            "failures": len(self.failures),
            "unconverged_cells": self.unconverged_cells,
        }
        for k, v in self.typed_means.items():
            out[f"mean_{k}"] = v.value
            out[f"mean_{k}_se"] = v.std_error
        for k, v in self.prob_table.items():
            out[k] = v.value
            out[k + "_se"] = v.std_error
        return out


def _count_batch(rho, seeds, grid_step):
    """Counts for one batch of trial seeds; returns (rows, failures, unconverged)."""
    R = rho + DOMAIN_MARGIN
    fields = [sample_field(s, R) for s in seeds]
    try:
        results = search_fields(fields, rho, grid_step)
    except (ArithmeticError, ValueError, FloatingPointError) as exc:
        log.warning("batch search failed (%s); retrying field by field", exc)
        results = []
        for f in fields:
            try:
                results.append(search_critical_points(f, rho, grid_step))
            except (ArithmeticError, ValueError, FloatingPointError) as e:
                results.append(e)
    rows, failures, unconv = [], [], 0
    for s, res in zip(seeds, results):
        if isinstance(res, Exception):
            failures.append((s, repr(res)))
            rows.append(None)
            continue
        unconv += res.unconverged
        rows.append((res.count(), res.count(Kind.MIN), res.count(Kind.MAX), res.count(Kind.SADDLE)))
    return rows, failures, unconv


def simulate_counts(rho: float, trials: int, seed: int, grid_step: float = DEFAULT_GRID_STEP, threads: int = 1):
    """Per-trial counts ``(total, min, max, saddle)`` of critical points in B(rho)."""
    seeds = [derive_seed(seed, t) for t in range(trials)]
    batches = [seeds[i : i + BATCH] for i in range(0, trials, BATCH)]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _count_batch(rho, b, grid_step), batches))
    else:
        parts = [_count_batch(rho, b, grid_step) for b in batches]
    rows, failures, unconv = [], [], 0
    for r, f, u in parts:
        rows.extend(r)
        failures.extend(f)
        unconv += u
    if len(failures) > MAX_FAILURE_FRACTION * trials:
        raise RuntimeError(f"{len(failures)} of {trials} trials failed; first: {failures[0][1]}")
    counts = np.array([r for r in rows if r is not None], dtype=int).reshape(-1, 4)
    return counts, failures, unconv


def _falling(n, k):
    out = np.ones_like(n, dtype=float)
    for j in range(k):
        out *= n - j
    return out


def moments_from_counts(rho: float, counts: np.ndarray, failures=(), unconverged: int = 0) -> MomentEstimate:
    counts = np.asarray(counts, dtype=int)
    n = counts[:, 0]
    T = n.size
    typed = {
        "min": _mean(counts[:, 1]),
        "max": _mean(counts[:, 2]),
        "saddle": _mean(counts[:, 3]),
        "extremum": _mean(counts[:, 1] + counts[:, 2]),
    }
    probs = {
        "P(N=0)": proportion(int(np.sum(n == 0)), T),
        "P(N=1)": proportion(int(np.sum(n == 1)), T),
        "P(N>=2)": proportion(int(np.sum(n >= 2)), T),
        "P(N>=3)": proportion(int(np.sum(n >= 3)), T),
    }
    fact = {k: _mean(_falling(n, k)) for k in range(1, 5)}
    return MomentEstimate(
        rho=rho,
        trials=T,
        mean_count=_mean(n),
        second_factorial=fact[2],
        typed_means=typed,
        prob_table=probs,
        factorial_moments=fact,
        counts=counts,
        failures=list(failures),
        unconverged_cells=unconverged,
    )


def mc_moments(
    rho: float, trials: int, seed: int, grid_step: float = DEFAULT_GRID_STEP, threads: int = 1
) -> MomentEstimate:
    """Moments and small-count probabilities of the number of critical points
    in B(rho), from ``trials`` independent fields."""
    if not rho > 0 or not math.isfinite(rho):
        raise ValueError("rho must be positive")
    if trials < MIN_TRIALS:
        raise ValueError(f"trials must be at least {MIN_TRIALS}")
    counts, failures, unconv = simulate_counts(rho, trials, seed, grid_step, threads)
    return moments_from_counts(rho, counts, failures, unconv)


# ---------------------------------------------------------------------------
# reference processes


@dataclass(frozen=True)
class Disc:
    radius: float
    center: tuple = (0.0, 0.0)

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1]) <= self.radius

    def uniform(self, rng, n) -> np.ndarray:
        r = self.radius * np.sqrt(rng.random(n))
        t = 2 * math.pi * rng.random(n)
        return np.column_stack([self.center[0] + r * np.cos(t), self.center[1] + r * np.sin(t)])


@dataclass(frozen=True)
class Square:
    side: float
    center: tuple = (0.0, 0.0)

    @property
    def area(self) -> float:
        return self.side**2

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        h = self.side / 2
        return (np.abs(pts[:, 0] - self.center[0]) <= h) & (np.abs(pts[:, 1] - self.center[1]) <= h)

    def uniform(self, rng, n) -> np.ndarray:
        u = rng.random((n, 2)) - 0.5
        return np.asarray(self.center) + self.side * u


def simulate_poisson(window, intensity: float = INTENSITY, seed: int = 0, *key) -> np.ndarray:
    """Homogeneous Poisson points in ``window`` (an ``(n, 2)`` array)."""
    if not intensity > 0:
        raise ValueError("intensity must be positive")
    rng = keyed_rng(seed, _STREAM_POISSON, *key)
    n = rng.poisson(intensity * window.area)
    return window.uniform(rng, n)


def poisson_probability(k: int, rho: float, intensity: float = INTENSITY) -> float:
    mu = intensity * math.pi * rho**2
    return mu**k * math.exp(-mu) / math.factorial(k)


def poisson_p_ge2(rho: float, intensity: float = INTENSITY) -> float:
    mu = intensity * math.pi * rho**2
    return -math.expm1(-mu) - mu * math.exp(-mu)


@dataclass(frozen=True)
class GinibreSample:
    points: np.ndarray
    bulk_radius: float
    intensity: float


def simulate_ginibre(n: int = 256, seed: int = 0, margin: float = 0.2, intensity: float = INTENSITY, index: int = 0) -> GinibreSample:
    """Bulk eigenvalues of an ``n x n`` complex Ginibre matrix, rescaled to
    ``intensity`` points per unit area.

    Entries ``(N + iN)/sqrt 2`` put the spectrum uniformly (density ``1/pi``)
    in the disc of radius ``sqrt n``; points beyond ``(1 - margin) sqrt n``
    are dropped.
    """
    if n < 64:
        raise ValueError("n must be at least 64")
    if not 0 <= margin < 1:
        raise ValueError("margin must lie in [0, 1)")
    rng = keyed_rng(seed, _STREAM_GINIBRE, index)
    g = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    try:
        ev = np.linalg.eigvals(g)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigenvalue solver failed: {exc}") from exc
    # eigvals output order is not canonical; sort for reproducible output
    ev = ev[np.lexsort((ev.imag, ev.real))]
    edge = (1 - margin) * math.sqrt(n)
    ev = ev[np.abs(ev) <= edge]
    s = 1 / math.sqrt(math.pi * intensity)
    pts = np.column_stack([ev.real, ev.imag]) * s
    return GinibreSample(pts, edge * s, intensity)


def disc_centres(bulk_radius: float, rho: float) -> np.ndarray:
    """Centres of disjoint radius-``rho`` discs on a square lattice inside the bulk."""
    step = 2 * rho * (1 + 1e-9)
    n = int(bulk_radius // step) + 1
    t = step * np.arange(-n, n + 1)
    gx, gy = np.meshgrid(t, t, indexing="ij")
    c = np.column_stack([gx.ravel(), gy.ravel()])
    return c[np.hypot(c[:, 0], c[:, 1]) <= bulk_radius - rho]


def ginibre_disc_counts(sample: GinibreSample, rho: float) -> np.ndarray:
    centres = disc_centres(sample.bulk_radius, rho)
    d = np.hypot(sample.points[None, :, 0] - centres[:, None, 0], sample.points[None, :, 1] - centres[:, None, 1])
    return np.sum(d < rho, axis=1)


def ginibre_p_ge2(rho: float, matrices: int, seed: int, n: int = 256) -> Estimate:
    """``P(N >= 2)`` in a disc of radius ``rho``, pooled over disjoint discs.

    The error bar treats matrices (not discs) as independent units.
    """
    fr = []
    for m in range(matrices):
        c = ginibre_disc_counts(simulate_ginibre(n, seed, index=m), rho)
        fr.append(np.mean(c >= 2))
    fr = np.asarray(fr)
    return Estimate(float(fr.mean()), float(fr.std(ddof=1) / math.sqrt(fr.size)) if fr.size > 1 else math.nan)


def ginibre_density(matrices: int, seed: int, n: int = 256) -> Estimate:
    dens = []
    for m in range(matrices):
        s = simulate_ginibre(n, seed, index=m)
        dens.append(len(s.points) / (math.pi * s.bulk_radius**2))
    dens = np.asarray(dens)
    return Estimate(float(dens.mean()), float(dens.std(ddof=1) / math.sqrt(dens.size)) if dens.size > 1 else math.nan)


@dataclass(frozen=True)
class ComparisonRow:
    rho: float
    process: str
    p_ge2: float
    se: float


def compare_processes(
    rho_grid, trials: int, seed: int, ginibre_matrices: int = 50, n: int = 256, threads: int = 1
) -> list:
    """``P(N >= 2)`` in a disc for critical points, Poisson and Ginibre."""
    rows = []
    for i, rho in enumerate(rho_grid):
        rho = float(rho)
        if not 0 < rho <= 1:
            raise ValueError("rho values must lie in (0, 1]")
        est = mc_moments(rho, trials, derive_seed(seed, 1, i), threads=threads)
        p = est.prob_table["P(N>=2)"]
        rows.append(ComparisonRow(rho, "critical", p.value, p.std_error))
        disc = Disc(rho)
        pc = np.array([len(simulate_poisson(disc, INTENSITY, seed, 2, i, t)) for t in range(trials)])
        pp = proportion(int(np.sum(pc >= 2)), trials)
        rows.append(ComparisonRow(rho, "poisson", pp.value, pp.std_error))
        rows.append(ComparisonRow(rho, "poisson_exact", poisson_p_ge2(rho), 0.0))
        g = ginibre_p_ge2(rho, ginibre_matrices, derive_seed(seed, 3, i), n)
        rows.append(ComparisonRow(rho, "ginibre", g.value, g.std_error))
    return rows


def scatter_points(side: float, seed: int, n_ginibre: int = 256) -> list:
    """Rows ``(x, y, label)`` for the three processes in a square of side
    ``side``: critical points labelled by kind, then Poisson and Ginibre."""
    sq = Square(side)
    half_diag = side / math.sqrt(2)
    f = sample_field(derive_seed(seed, 0), half_diag + DOMAIN_MARGIN)
    rows = []
    for p in search_critical_points(f, half_diag + 1e-9).points:
        if sq.contains(p.location)[0]:
            rows.append((p.location[0], p.location[1], p.kind.value))
    for x, y in simulate_poisson(sq, INTENSITY, seed, 1):
        rows.append((float(x), float(y), "poisson"))
    g = simulate_ginibre(n_ginibre, seed)
    if g.bulk_radius * math.sqrt(2) < side:
        raise ValueError("Ginibre bulk too small for this square; increase n")
    for x, y in g.points[sq.contains(g.points)]:
        rows.append((float(x), float(y), "ginibre"))
    return rows
