import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpwcrit.critical_points import (
    MAX_GRID_STEP,
    DegenerateHessianError,
    Kind,
    classify,
    find_critical_points,
    grid_starts,
    points_to_csv,
    search_critical_points,
    search_fields,
)
from rpwcrit.field import eval_jet, sample_field


def test_classify_trivial():
    assert classify(np.diag([1.0, 1.0])) is Kind.MIN
    assert classify(np.diag([-1.0, -1.0])) is Kind.MAX
    assert classify(np.diag([1.0, -1.0])) is Kind.SADDLE
    with pytest.raises(DegenerateHessianError):
        classify(np.diag([1.0, 1e-14]))


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_classify_agrees_with_eigenvalues(a, b, c):
    h = np.array([[a, b], [b, c]])
    w = np.linalg.eigvalsh(h)
    if abs(a * c - b * b) <= 1e-9:
        return
    kind = classify(h)
    if w[0] > 0:
        assert kind is Kind.MIN
    elif w[1] < 0:
        assert kind is Kind.MAX
    else:
        assert kind is Kind.SADDLE


def test_grid_covers_disc_with_margin():
    pts = grid_starts(1.0, 0.1)
    r = np.hypot(pts[:, 0], pts[:, 1])
    assert r.max() <= 1.1 + 1e-12
    assert np.any(np.isclose(r, 1.1))


def test_argument_validation():
    f = sample_field(0, 2.0)
    with pytest.raises(ValueError):
        find_critical_points(f, -1.0)
    with pytest.raises(ValueError):
        find_critical_points(f, 1.0, grid_step=MAX_GRID_STEP * 1.01)
    with pytest.raises(ValueError):
        find_critical_points(f, 1.95, grid_step=0.1)


@pytest.fixture(scope="module")
def big_search():
    f = sample_field(17, 9.0)
    return f, search_critical_points(f, 8.0)


def test_points_are_critical_and_inside(big_search):
    f, res = big_search
    assert res.count() > 10
    for p in res.points:
        assert math.hypot(*p.location) < 8.0
        j = eval_jet(f, p.location)
        assert np.hypot(*j.gradient) <= 1e-10
        assert classify(j.hessian) is p.kind


def test_polishing_does_not_move_points(big_search):
    f, res = big_search
    for p in res.points:
        x = np.array(p.location)
        for _ in range(5):
            j = eval_jet(f, x)
            x = x - np.linalg.solve(j.hessian, j.gradient)
        assert np.hypot(*(x - p.location)) < 1e-10


def test_no_duplicates(big_search):
    _, res = big_search
    loc = np.array([p.location for p in res.points])
    d = np.hypot(loc[:, None, 0] - loc[None, :, 0], loc[:, None, 1] - loc[None, :, 1])
    np.fill_diagonal(d, np.inf)
    assert d.min() > 1e-6


def test_counts_partition_by_kind(big_search):
    _, res = big_search
    assert res.count(Kind.MIN) + res.count(Kind.MAX) + res.count(Kind.SADDLE) == res.count()


def test_refinement_stability(big_search):
    f, coarse = big_search
    fine = search_critical_points(f, 8.0, grid_step=0.05)
    a = {tuple(np.round(p.location, 7)) for p in coarse.points}
    b = {tuple(np.round(p.location, 7)) for p in fine.points}
    assert len(a ^ b) <= coarse.unconverged + fine.unconverged


def test_tiny_disc_away_from_critical_points():
    f = sample_field(23, 3.0)
    j = eval_jet(f, (0.0, 0.0))
    # a disc much smaller than |grad| / |Hess| cannot contain a zero of grad
    rho = 0.1 * np.hypot(*j.gradient) / (1 + np.abs(j.hessian).sum())
    assert find_critical_points(f, rho, grid_step=rho / 2) == []


def test_batched_search_matches_single():
    fields = [sample_field(s, 2.5) for s in range(8)]
    batched = search_fields(fields, 1.5)
    for f, res in zip(fields, batched):
        single = search_critical_points(f, 1.5)
        assert [p.location for p in single.points] == [p.location for p in res.points]


def test_csv_export(big_search):
    _, res = big_search
    text = points_to_csv(res.points[:3], ["seed: 17"])
    lines = text.splitlines()
    assert lines[0] == "# seed: 17"
    assert lines[1] == "x,y,value,kind,det_hessian,trace_hessian"
    assert len(lines) == 5
