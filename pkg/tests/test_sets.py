import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import WALK, WALK_DYN, WALK_INPUTS, walk_region, walk_states
from stlftc.dynamics import integrator, unicycle
from stlftc.errors import LatticeMismatch, UnsupportedFastPath
from stlftc.sets import (BoxUnion, GridMask, InputGrid, Lattice, Space, agrees_within, one_step_pred,
                         rasterize, region_from_json)

WS = ((-5.0, -5.0), (5.0, 5.0))
DYN = integrator(2)


def box(lo, hi):
    return BoxUnion([(lo, hi)], WS)


def test_member_examples():
    s1 = BoxUnion([((-4.5, -4.5), (-1.5, -1.5))], ((-20, -20), (20, 20)))
    assert s1.member((-3, -3))
    assert not box((0, 0), (0, 0)).intersect(box((1, 1), (1, 1))).member((0, 0))
    assert not box((-1, -1), (1, 1)).complement().member((0, 0))


def test_algebra_examples():
    assert box((0, 0), (2, 2)).intersect(box((1, 1), (3, 3))).same_set(box((1, 1), (2, 2)))
    r = box((0, 0), (2, 2))
    assert r.union(BoxUnion([], WS)).same_set(r)
    ws = ((-20, -20), (20, 20))
    mu2 = BoxUnion([((1.5, -4.5), (4.5, -1.5))], ws)
    mu3 = BoxUnion([((1.75, -1.25), (4.25, 1.25))], ws)
    assert mu2.intersect(mu3).is_empty()


def test_boxes_are_canonical():
    r = BoxUnion([((0, 0), (4, 4)), ((1, 1), (2, 2))], WS)
    assert r.boxes == (((0.0, 0.0), (4.0, 4.0)),)


def test_difference_and_complement_roundtrip():
    a = box((-2, -2), (2, 2))
    b = box((0, -1), (3, 1))
    d = a.difference(b)
    for x in [(-1, 0), (1, 0), (1, 1.5), (2.5, 0)]:
        assert d.member(x) == (a.member(x) and not b.member(x))
    assert a.complement().complement().same_set(a)


def test_one_step_pred_examples_box():
    ws = ((-20, -20), (20, 20))
    r = BoxUnion([((1.5, -4.5), (4.5, -1.5))], ws)
    assert one_step_pred(DYN, r, mode="exists").same_set(BoxUnion([((0.5, -5.5), (5.5, -0.5))], ws))
    assert one_step_pred(DYN, BoxUnion([], ws), mode="exists").is_empty()
    r = BoxUnion([((0, 0), (4, 4))], ws)
    assert one_step_pred(DYN, r, mode="forall").same_set(BoxUnion([((1, 1), (3, 3))], ws))


def test_one_step_pred_exists_brute_force_grid():
    """Minkowski-sum example against a brute-force sweep over a 0.1 grid."""
    ws = ((-20, -20), (20, 20))
    r = BoxUnion([((1.5, -4.5), (4.5, -1.5))], ws)
    pred = one_step_pred(DYN, r, mode="exists")
    us = np.linspace(-1, 1, 21)
    for x1 in np.arange(-0.5, 7.0, 0.35):
        for x2 in np.arange(-7.0, 0.5, 0.35):
            hit = any(1.5 <= x1 + a <= 4.5 and -4.5 <= x2 + b <= -1.5 for a in us for b in us)
            assert pred.member((x1, x2)) == hit


def test_box_fast_path_rejects_unicycle():
    with pytest.raises(UnsupportedFastPath):
        one_step_pred(unicycle(), box((0, 0), (1, 1)))


def test_grid_walk_pred():
    r = walk_region({2})
    assert walk_states(one_step_pred(WALK_DYN, r, WALK_INPUTS, "exists")) == {1, 2, 3}
    assert walk_states(one_step_pred(WALK_DYN, walk_region(set(range(-5, 6))), WALK_INPUTS, "forall")) == set(range(-5, 6))
    assert walk_states(one_step_pred(WALK_DYN, walk_region({0, 1, 2}), WALK_INPUTS, "forall")) == {1}


subsets = st.sets(st.integers(-5, 5))


@given(subsets, subsets)
@settings(max_examples=150, deadline=None)
def test_pred_monotone_and_dual_on_grid(a, b):
    small, big = walk_region(a & b), walk_region(a)
    for mode in ("exists", "forall"):
        ps = one_step_pred(WALK_DYN, small, WALK_INPUTS, mode)
        pb = one_step_pred(WALK_DYN, big, WALK_INPUTS, mode)
        assert not ps.difference(pb).mask.any()
    r = walk_region(a)
    forall = one_step_pred(WALK_DYN, r, WALK_INPUTS, "forall")
    dual = one_step_pred(WALK_DYN, r.complement(), WALK_INPUTS, "exists").complement()
    assert forall == dual


coord = st.floats(-4, 4).map(lambda v: round(v * 4) / 4)


@given(coord, coord, st.floats(0.5, 3).map(lambda v: round(v * 4) / 4),
       st.floats(0.5, 3).map(lambda v: round(v * 4) / 4))
@settings(max_examples=60, deadline=None)
def test_box_pred_monotone_random(x, y, wx, wy):
    ws = ((-20, -20), (20, 20))
    big = BoxUnion([((x - wx, y - wy), (x + wx, y + wy))], ws)
    small = BoxUnion([((x - wx / 2, y - wy / 2), (x + wx / 2, y + wy / 2))], ws)
    for mode in ("exists", "forall"):
        ps = one_step_pred(DYN, small, mode=mode)
        pb = one_step_pred(DYN, big, mode=mode)
        assert ps.difference(pb).is_empty()


def test_box_fast_path_agrees_with_grid_within_one_cell():
    space = Space([[-10, 10], [-10, 10]], "grid", resolution=0.25)
    ws = ((-10, -10), (10, 10))
    inputs = InputGrid.box([-1, -1], [1, 1], 3)
    rng = np.random.default_rng(3)
    for _ in range(10):
        c = rng.uniform(-4, 4, 2).round(2)
        h = rng.uniform(0.5, 3, 2).round(2)
        target = BoxUnion([(tuple(c - h), tuple(c + h))], ws)
        for mode in ("exists", "forall"):
            boxes = one_step_pred(DYN, target, mode=mode)
            grid = one_step_pred(DYN, rasterize(target, space.lattice), inputs, mode)
            assert agrees_within(grid, boxes, 0.25 + 1e-9)


def test_lattice_mismatch_is_an_error():
    a = Space([[-1, 1]], "grid", resolution=0.5).full()
    b = Space([[-1, 1]], "grid", resolution=0.25).full()
    with pytest.raises(LatticeMismatch):
        a.union(b)
    with pytest.raises(LatticeMismatch):
        box((0, 0), (1, 1)).union(BoxUnion([], ((0, 0), (1, 1))))


def test_conservative_rasterization_is_inner():
    L = Lattice.make([[-2, 2], [-2, 2]], resolution=0.5)
    r = BoxUnion([((-1.3, -1.3), (1.3, 1.3))], ((-2, -2), (2, 2)))
    center = rasterize(r, L)
    corner = rasterize(r, L, conservative=True)
    assert corner.count() < center.count()
    assert not corner.difference(center).mask.any()


def test_periodic_lattice_wraps():
    L = Lattice.make([[0, 1], [0, 2 * np.pi]], shape=[2, 24], periodic=[False, True])
    assert L.locate([[0.2, 2 * np.pi + 0.1]])[0] == L.locate([[0.2, 0.1]])[0]
    assert L.locate([[1.5, 0.0]])[0] == -1


def test_json_roundtrip():
    r = box((-1, -2), (3, 4)).union(box((2, 2), (4, 4)))
    assert region_from_json(r.to_json()).same_set(r)
    g = walk_region({-3, 0, 1, 4})
    assert region_from_json(g.to_json()) == g


def test_input_grid():
    g = InputGrid.box([-1, -1], [1, 1], 3)
    assert g.samples.shape == (9, 2)
    assert g.within([-1, -1], [1, 1])
