"""Seam quality metrics on decoded images.

The tiling score of an ordered pair measures the mean absolute step across
their joint in a virtual concatenation, plus the same statistic at a fixed
offset into each image, to catch discontinuities buried just inside the
borders. All images are taken as float values in [0, 1]; color is reduced
to grayscale by an unweighted channel mean, so scores live in [0, 1] and
lower is smoother.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class OddExtent(Exception):
    pass


def _gray(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3:
        return arr.mean(axis=2)
    if arr.ndim != 2:
        raise ValueError(f"image must be 2-d or 3-d, got shape {arr.shape}")
    return arr


def _lines(img: np.ndarray, axis: str) -> np.ndarray:
    """View with the compared lines along axis 0: columns for "x" seams
    (side-by-side pair), rows for "y" (stacked pair)."""
    gray = _gray(img)
    return gray.T if axis == "x" else gray


def ts_line(i1: np.ndarray, i2: np.ndarray, axis: str = "x", position: int = 0) -> float:
    """Mean |difference| of one adjacent line pair near the joint of the
    virtual concatenation [i1 | i2].

    position 0 compares i1's edge line against i2's; position -k compares
    the adjacent pair k lines deep inside i1, position +k the pair k lines
    inside i2 (both lines then come from the same image).
    """
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    a, b = _lines(i1, axis), _lines(i2, axis)
    if position == 0:
        one, two = a[-1], b[0]
    elif position < 0:
        if -position >= a.shape[0]:
            raise ValueError(f"offset {position} leaves image of {a.shape[0]} lines")
        one, two = a[position - 1], a[position]
    else:
        if position >= b.shape[0]:
            raise ValueError(f"offset {position} leaves image of {b.shape[0]} lines")
        one, two = b[position - 1], b[position]
    if one.shape != two.shape:
        raise ValueError("images disagree along the joint")
    return float(np.abs(one - two).mean())


@dataclass(frozen=True)
class ScoreReport:
    connection: float
    inside_first: float   # offset -k, inside the first image
    inside_second: float  # offset +k, inside the second image
    offset: int

    @property
    def mean(self) -> float:
        return (self.connection + self.inside_first + self.inside_second) / 3.0


def tiling_score(i1: np.ndarray, i2: np.ndarray, axis: str = "x", offset: int = 8) -> ScoreReport:
    """Three-line seam score: the joint itself plus the offset pair on each
    side, averaged. Lower is smoother; identical circular tiles score at
    their own interior gradient level."""
    if offset < 1:
        raise ValueError("offset must be >= 1")
    return ScoreReport(
        connection=ts_line(i1, i2, axis, 0),
        inside_first=ts_line(i1, i2, axis, -offset),
        inside_second=ts_line(i1, i2, axis, offset),
        offset=offset,
    )


def swap_halves(img: np.ndarray, axis: str = "x") -> np.ndarray:
    """Exchange the two halves along the axis; its own inverse. A seamless
    tile stays seamless; anything else acquires a visible interior cut."""
    arr = np.asarray(img)
    ax = 1 if axis == "x" else 0
    n = arr.shape[ax]
    if n % 2:
        raise OddExtent(f"axis {axis} has odd extent {n}, halves are ambiguous")
    return np.concatenate([arr.take(range(n // 2, n), axis=ax),
                           arr.take(range(0, n // 2), axis=ax)], axis=ax)


@dataclass(frozen=True)
class SeamProfile:
    position: int
    cross: float      # mean |step| across the seam line pair
    interior: float   # mean |step| of adjacent pairs in the flanking band
    @property
    def ratio(self) -> float:
        return self.cross / self.interior if self.interior > 0 else float("inf")


def seam_profile(sheet: np.ndarray, seams: list[int], axis: str = "x",
                 band: int = 16) -> list[SeamProfile]:
    """Compare each seam's cross-step against the ordinary neighbor step
    within `band` lines on both sides. A ratio near 1 means the seam is
    statistically invisible; a stitched-together sheet reads well above 1.

    Seam positions index the line just after the joint (a 1x2 sheet of
    W-wide tiles has its seam at W).
    """
    lines = _lines(sheet, axis)
    n = lines.shape[0]
    out = []
    for x in seams:
        if not 1 <= x <= n - 1:
            raise ValueError(f"seam {x} outside sheet of {n} lines")
        cross = float(np.abs(lines[x] - lines[x - 1]).mean())
        steps = []
        for c in range(max(1, x - band + 1), x):
            steps.append(np.abs(lines[c] - lines[c - 1]).mean())
        for c in range(x + 1, min(n, x + band)):
            steps.append(np.abs(lines[c] - lines[c - 1]).mean())
        interior = float(np.mean(steps)) if steps else 0.0
        out.append(SeamProfile(position=x, cross=cross, interior=interior))
    return out
