"""Seam metrics against a scalar double-loop reimplementation and hand cases."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from tilecraft.metrics import (
    OddExtent,
    seam_profile,
    swap_halves,
    tiling_score,
    ts_line,
)


def _naive_ts_line(i1, i2, axis, position):
    """Independent oracle: explicit loops, no transposes or vector ops."""
    def gray(img):
        img = np.asarray(img, dtype=np.float64)
        if img.ndim == 2:
            return img
        h, w, d = img.shape
        return np.array([[sum(img[r, c, k] for k in range(d)) / d
                          for c in range(w)] for r in range(h)])

    g1, g2 = gray(i1), gray(i2)
    if axis == "y":   # stacked: compare rows; transpose reduces to the x case
        g1, g2 = g1.T, g2.T
    # now the joint is vertical: columns of g1 then columns of g2
    if position == 0:
        one = [g1[r, g1.shape[1] - 1] for r in range(g1.shape[0])]
        two = [g2[r, 0] for r in range(g2.shape[0])]
    elif position < 0:
        one = [g1[r, g1.shape[1] + position - 1] for r in range(g1.shape[0])]
        two = [g1[r, g1.shape[1] + position] for r in range(g1.shape[0])]
    else:
        one = [g2[r, position - 1] for r in range(g2.shape[0])]
        two = [g2[r, position] for r in range(g2.shape[0])]
    return sum(abs(a - b) for a, b in zip(one, two)) / len(one)


def test_ts_line_matches_naive_oracle(rng):
    for _ in range(60):
        h, w = rng.integers(3, 12, 2)
        shape = (h, w) if rng.random() < 0.5 else (h, w, 3)
        i1 = rng.uniform(0, 1, shape)
        i2 = rng.uniform(0, 1, shape)
        for axis in ("x", "y"):
            extent = w if axis == "x" else h
            for position in range(-(extent - 1), extent):
                got = ts_line(i1, i2, axis, position)
                want = _naive_ts_line(i1, i2, axis, position)
                assert abs(got - want) <= 1e-12, (shape, axis, position)


def test_ts_line_hand_case():
    i1 = np.array([[0.0, 0.2], [0.0, 0.6]])
    i2 = np.array([[0.5, 0.5], [0.2, 0.9]])
    assert ts_line(i1, i2, "x", 0) == pytest.approx((0.3 + 0.4) / 2)
    assert ts_line(i1, i2, "x", -1) == pytest.approx((0.2 + 0.6) / 2)
    assert ts_line(i1, i2, "x", 1) == pytest.approx((0.0 + 0.7) / 2)
    assert ts_line(i1, i2, "y", 0) == pytest.approx((0.5 + 0.1) / 2)  # i1 row1 vs i2 row0


def test_ts_line_constant_images():
    a = np.full((4, 4), 0.2)
    b = np.full((4, 4), 0.5)
    assert ts_line(a, b, "x", 0) == pytest.approx(0.3)
    assert ts_line(a, b, "x", -2) == 0.0
    assert ts_line(a, b, "x", 2) == 0.0
    assert tiling_score(a, b, "x", offset=2).mean == pytest.approx(0.1)


def test_ts_line_errors(rng):
    a = rng.uniform(0, 1, (4, 4))
    with pytest.raises(ValueError):
        ts_line(a, a, "z", 0)
    with pytest.raises(ValueError):
        ts_line(a, a, "x", 4)
    with pytest.raises(ValueError):
        ts_line(a, a, "x", -4)
    with pytest.raises(ValueError):
        ts_line(a, rng.uniform(0, 1, (5, 4)), "x", 0)  # joint lengths differ
    tall = rng.uniform(0, 1, (5, 4))
    assert ts_line(tall, tall, "y", 0) >= 0  # y joint needs equal widths only


def test_tiling_score_fields(rng):
    i1 = rng.uniform(0, 1, (16, 16))
    i2 = rng.uniform(0, 1, (16, 16))
    rep = tiling_score(i1, i2, "x", offset=8)
    assert rep.offset == 8
    assert rep.connection == ts_line(i1, i2, "x", 0)
    assert rep.inside_first == ts_line(i1, i2, "x", -8)
    assert rep.inside_second == ts_line(i1, i2, "x", 8)
    assert rep.mean == pytest.approx(
        (rep.connection + rep.inside_first + rep.inside_second) / 3)
    with pytest.raises(ValueError):
        tiling_score(i1, i2, "x", offset=0)


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, (6, 8),
                  elements=st.floats(0, 1, allow_nan=False)),
       hnp.arrays(np.float64, (6, 8),
                  elements=st.floats(0, 1, allow_nan=False)),
       st.sampled_from(["x", "y"]))
def test_ts_properties(i1, i2, axis):
    rep = tiling_score(i1, i2, axis, offset=3)
    for v in (rep.connection, rep.inside_first, rep.inside_second, rep.mean):
        assert 0.0 <= v <= 1.0
    # mirror symmetry: flipping the pair through the joint preserves the score
    flip_axis = 1 if axis == "x" else 0
    mirrored = ts_line(np.flip(i2, flip_axis), np.flip(i1, flip_axis), axis, 0)
    assert ts_line(i1, i2, axis, 0) == pytest.approx(mirrored, abs=1e-12)


def test_circular_pair_scores_at_interior_level(rng):
    """An exactly wrapping tile paired with itself shows no special joint:
    the connection equals the wrap-around gradient of the texture."""
    img = rng.uniform(0, 1, (8, 8))
    rep = tiling_score(img, img, "x", offset=3)
    wrap = np.abs(img[:, 0] - img[:, -1]).mean()
    assert rep.connection == pytest.approx(wrap)


def test_swap_halves_involution_and_layout(rng):
    img = rng.uniform(0, 1, (6, 8, 3))
    swapped = swap_halves(img, "x")
    assert np.array_equal(swapped[:, :4], img[:, 4:])
    assert np.array_equal(swapped[:, 4:], img[:, :4])
    assert np.array_equal(swap_halves(swapped, "x"), img)
    vert = swap_halves(img, "y")
    assert np.array_equal(vert[:3], img[3:])
    assert np.array_equal(swap_halves(vert, "y"), img)


def test_swap_halves_ramp_bookkeeping():
    """8-wide ramp: the swap moves the big 0->7 step into the middle."""
    ramp = np.tile(np.arange(8.0) / 7.0, (4, 1))
    swapped = swap_halves(ramp, "x")
    assert ts_line(swapped, swapped, "x", -4) == pytest.approx(1.0)
    assert ts_line(ramp, ramp, "x", -4) == pytest.approx(1.0 / 7.0)


def test_swap_halves_odd_extent():
    with pytest.raises(OddExtent):
        swap_halves(np.zeros((4, 5)), "x")
    with pytest.raises(OddExtent):
        swap_halves(np.zeros((5, 4)), "y")
    swap_halves(np.zeros((5, 4)), "x")  # only the swapped axis must be even


def test_seam_profile_uniform_ramp_is_invisible():
    """On a linear ramp every adjacent step is identical: ratio exactly 1."""
    sheet = np.tile(np.arange(64.0) / 63.0, (8, 1))
    (prof,) = seam_profile(sheet, [32], axis="x", band=8)
    assert prof.position == 32
    assert prof.ratio == pytest.approx(1.0)


def test_seam_profile_step_sheet():
    """A hard step at the seam of an otherwise flat sheet: infinite ratio."""
    sheet = np.concatenate([np.zeros((8, 32)), np.ones((8, 32))], axis=1)
    (prof,) = seam_profile(sheet, [32], axis="x", band=8)
    assert prof.cross == pytest.approx(1.0)
    assert prof.interior == 0.0
    assert prof.ratio == float("inf")


def test_seam_profile_hand_window():
    """band=2 on a tiny sheet: flank pairs are exactly (x-1,x-2) and (x+1,x)."""
    col = np.array([0.0, 0.1, 0.5, 0.6, 0.6])
    sheet = np.tile(col, (3, 1))
    (prof,) = seam_profile(sheet, [2], axis="x", band=2)
    assert prof.cross == pytest.approx(0.4)
    assert prof.interior == pytest.approx((0.1 + 0.1) / 2)
    assert prof.ratio == pytest.approx(4.0)


def test_seam_profile_y_axis_and_bounds(rng):
    sheet = rng.uniform(0, 1, (10, 6))
    profs = seam_profile(sheet, [5], axis="y", band=4)
    assert profs[0].cross == pytest.approx(np.abs(sheet[5] - sheet[4]).mean())
    for bad in (0, 10):
        with pytest.raises(ValueError):
            seam_profile(sheet, [bad], axis="y")
