"""Latent-space enforcement of tiling constraints.

Every image samples on a padded canvas: the interior is the image proper,
the pad frame is scratch context that a constraint overwrites each step with
content copied from the far side of the joint. Decoding crops the frame, so
the pads only exist to steer the denoiser at the borders.

Coordinates are matrix-style throughout: rows grow downward, columns grow
rightward, arrays are (rows, cols, channels).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraints import (
    Constraint,
    OUTWARD,
    SIMILARITY_BAND,
    Side,
    SideRef,
    ValidatedSpec,
)


def _turn(v: tuple[int, int]) -> tuple[int, int]:
    # One counterclockwise quarter turn of a (drow, dcol) direction, matching
    # what np.rot90 does to the content of an array.
    return (-v[1], v[0])


def _solve_turns(start: tuple[int, int], goal: tuple[int, int]) -> int:
    v = start
    for k in range(4):
        if v == goal:
            return k
        v = _turn(v)
    raise AssertionError("unreachable: quarter turns cover all four directions")


def _neg(v: tuple[int, int]) -> tuple[int, int]:
    return (-v[0], -v[1])


# Array axis along the edge (the tangent) runs down the rows for vertical
# sides and across the columns for horizontal ones.
_TANGENT = {Side.LEFT: (1, 0), Side.RIGHT: (1, 0), Side.TOP: (0, 1), Side.BOTTOM: (0, 1)}

# Quarter turns that place a strip cut at from_side into the pad outside
# to_side: outward(from) must land on inward(to).
_PLACE_ROT: dict[tuple[Side, Side], int] = {}
# Quarter turns that overlay a strip cut at from_side onto the same-role band
# at to_side (outward onto outward); used for interchangeable-side bands.
_MATCH_ROT: dict[tuple[Side, Side], int] = {}
# Whether the placement rotation reverses the tangent direction.
_PLACE_FLIP: dict[tuple[Side, Side], bool] = {}

for _f in Side:
    for _t in Side:
        k = _solve_turns(OUTWARD[_f], _neg(OUTWARD[_t]))
        _PLACE_ROT[(_f, _t)] = k
        _MATCH_ROT[(_f, _t)] = _solve_turns(OUTWARD[_f], OUTWARD[_t])
        tan = _TANGENT[_f]
        for _ in range(k):
            tan = _turn(tan)
        if tan == _TANGENT[_t]:
            _PLACE_FLIP[(_f, _t)] = False
        elif tan == _neg(_TANGENT[_t]):
            _PLACE_FLIP[(_f, _t)] = True
        else:  # pragma: no cover - the rotation either keeps or reverses the tangent
            raise AssertionError("tangent must map onto the target tangent")


def rotation_quarter_turns(from_side: Side, to_side: Side) -> int:
    """CCW quarter turns orient_strip applies for this side pair."""
    return _PLACE_ROT[(from_side, to_side)]


def orient_strip(strip: np.ndarray, from_side: Side, to_side: Side) -> np.ndarray:
    """Rotate a strip cut at from_side so it can sit in the pad outside
    to_side, facing the target interior.

    Opposite sides need no turn, the same side needs a half turn, and
    perpendicular sides a quarter turn; channels are untouched. The map is
    invertible: orienting back with the swapped sides restores the input.
    """
    return np.rot90(strip, _PLACE_ROT[(from_side, to_side)]).copy()


@dataclass
class LatentCanvas:
    """One image's padded latent state: (pads + interior + pads) per axis."""

    image: str
    data: np.ndarray  # float64 (pad_t + H + pad_b, pad_l + W + pad_r, D)
    pads: dict[Side, int]

    @property
    def interior_dims(self) -> tuple[int, int, int]:
        rows, cols, depth = self.data.shape
        return (
            rows - self.pads[Side.TOP] - self.pads[Side.BOTTOM],
            cols - self.pads[Side.LEFT] - self.pads[Side.RIGHT],
            depth,
        )

    @property
    def interior(self) -> np.ndarray:
        h, w, _ = self.interior_dims
        pt, pl = self.pads[Side.TOP], self.pads[Side.LEFT]
        return self.data[pt:pt + h, pl:pl + w]


def make_canvas(image: str, interior_dims: tuple[int, int, int],
                pads: dict[Side, int] | None = None) -> LatentCanvas:
    h, w, d = interior_dims
    pads = {s: int((pads or {}).get(s, 0)) for s in Side}
    data = np.zeros((pads[Side.TOP] + h + pads[Side.BOTTOM],
                     pads[Side.LEFT] + w + pads[Side.RIGHT], d), dtype=np.float64)
    return LatentCanvas(image=image, data=data, pads=pads)


def make_canvases(vspec: ValidatedSpec) -> dict[str, LatentCanvas]:
    dims = (vspec.latent_h, vspec.latent_w, vspec.latent_d)
    return {slot.id: make_canvas(slot.id, dims, vspec.padding.for_image(slot.id))
            for slot in vspec.images}


def _band(canvas: LatentCanvas, side: Side, width: int, region: str,
          full_tangent: bool) -> np.ndarray:
    """View of the width-wide band hugging `side` from inside the interior
    (region "interior") or from inside the pad frame (region "padding")."""
    h, w, _ = canvas.interior_dims
    pt, pl = canvas.pads[Side.TOP], canvas.pads[Side.LEFT]
    rows_all = slice(0, canvas.data.shape[0])
    cols_all = slice(0, canvas.data.shape[1])
    inner = region == "interior"
    if side is Side.LEFT:
        cols = slice(pl, pl + width) if inner else slice(pl - width, pl)
        rows = rows_all if full_tangent else slice(pt, pt + h)
    elif side is Side.RIGHT:
        cols = slice(pl + w - width, pl + w) if inner else slice(pl + w, pl + w + width)
        rows = rows_all if full_tangent else slice(pt, pt + h)
    elif side is Side.TOP:
        rows = slice(pt, pt + width) if inner else slice(pt - width, pt)
        cols = cols_all if full_tangent else slice(pl, pl + w)
    else:
        rows = slice(pt + h - width, pt + h) if inner else slice(pt + h, pt + h + width)
        cols = cols_all if full_tangent else slice(pl, pl + w)
    return canvas.data[rows, cols]


def extract_strip(canvas: LatentCanvas, side: Side, width: int, region: str = "interior") -> np.ndarray:
    """Copy of the band of `width` cells adjacent to `side`.

    region "interior" reads just inside the edge, "padding" reads the pad
    frame just outside it; width may not exceed what is there.
    """
    if width < 0:
        raise ValueError("strip width must be >= 0")
    h, w, _ = canvas.interior_dims
    limit = (h if side.axis == "y" else w) if region == "interior" else canvas.pads[side]
    if width > limit:
        raise ValueError(f"strip width {width} exceeds {region} extent {limit} at {side.value}")
    if region not in ("interior", "padding"):
        raise ValueError(f"unknown region {region!r}")
    return _band(canvas, side, width, region, full_tangent=False).copy()


def _tangent_pads(canvas: LatentCanvas, side: Side) -> tuple[int, int]:
    # Pads at the two ends of the side's tangent, in array order.
    if side.axis == "x":
        return canvas.pads[Side.TOP], canvas.pads[Side.BOTTOM]
    return canvas.pads[Side.LEFT], canvas.pads[Side.RIGHT]


def _copy_context(src: LatentCanvas, src_side: Side, dst: LatentCanvas,
                  dst_side: Side, width: int) -> None:
    """Tiling write: src's interior band, rotated into place, overwrites the
    pad band outside dst_side.

    The band is cut across the full padded tangent so the pad corners pick up
    wrap-around content; where the two canvases' tangent pads differ, only
    the overlapping span is written. Interior cells are never touched.
    """
    if width == 0:
        return
    band = _band(src, src_side, width, "interior", full_tangent=True).copy()
    strip = np.rot90(band, _PLACE_ROT[(src_side, dst_side)])

    lead_s, trail_s = _tangent_pads(src, src_side)
    if _PLACE_FLIP[(src_side, dst_side)]:
        lead_s, trail_s = trail_s, lead_s
    lead_d, trail_d = _tangent_pads(dst, dst_side)
    lead = min(lead_s, lead_d)
    trail = min(trail_s, trail_d)

    dst_band = _band(dst, dst_side, width, "padding", full_tangent=True)
    tangent_axis = 0 if dst_side.axis == "x" else 1
    extent = dst_band.shape[tangent_axis] - lead_d - trail_d
    if strip.shape[tangent_axis] - lead_s - trail_s != extent:
        raise ValueError("interior tangent extents differ between source and target")

    src_slice = slice(lead_s - lead, lead_s + extent + trail)
    dst_slice = slice(lead_d - lead, lead_d + extent + trail)
    if tangent_axis == 0:
        dst_band[dst_slice, :] = strip[src_slice, :]
    else:
        dst_band[:, dst_slice] = strip[:, src_slice]


class InteriorTooSmall(ValueError):
    """The similarity band does not fit inside an interior."""


@dataclass
class RoundRobinState:
    """Per-(constraint, target) counters for cycling through sources."""

    counters: dict[tuple, int] = field(default_factory=dict)

    def advance(self, key: tuple, n: int, offset: int) -> int:
        c = self.counters.get(key, 0)
        self.counters[key] = c + 1
        return (c + offset) % n


def round_robin_pick(state: RoundRobinState, constraint: Constraint,
                     target: SideRef | str, candidates: tuple[SideRef, ...]) -> SideRef:
    """Next source for `target`, cycling through `candidates` fairly.

    Each target keeps its own counter; its start index is staggered by the
    target's position within its own set so sibling targets do not all draw
    the same source on the same step. `target` is the side receiving context
    (tiling) or a set label when choosing a reference band.
    """
    if isinstance(target, SideRef):
        own = constraint.set_a if target in constraint.set_a else constraint.set_b
        offset = own.index(target)
    else:
        offset = 0
    idx = state.advance((constraint.id, target), len(candidates), offset)
    return candidates[idx]


def apply_tiling_constraint(canvases: dict[str, LatentCanvas], constraint: Constraint,
                            state: RoundRobinState, axis: str | None = None) -> None:
    """Refresh the pad bands of every side the constraint touches.

    Each target side draws one source from the opposite set (round robin)
    and receives its interior band, oriented to face the target interior.
    When both axes are written, the horizontal sides go first so that writes
    through the vertical sides win the shared pad corners.
    """
    passes = ("y", "x") if axis is None else (axis,)
    for pass_axis in passes:
        for target, pool in [(t, constraint.set_b) for t in constraint.set_a] + \
                            [(t, constraint.set_a) for t in constraint.set_b]:
            if target.side.axis != pass_axis:
                continue
            source = round_robin_pick(state, constraint, target, pool)
            _copy_context(canvases[source.image], source.side,
                          canvases[target.image], target.side, constraint.window)


def apply_similarity_constraint(canvases: dict[str, LatentCanvas], constraint: Constraint,
                                state: RoundRobinState, width: int = SIMILARITY_BAND) -> None:
    """Make the interior edge bands of each multi-member set identical.

    One member is picked as the reference (round robin) and its band is
    copied onto the others, rotated so that outward edges correspond; any
    member can then stand in for any other at a joint. Single-member sets
    need no work. Only interior cells are written.
    """
    for label, group in (("a", constraint.set_a), ("b", constraint.set_b)):
        if len(group) < 2:
            continue
        for member in group:
            cv = canvases[member.image]
            h, w, _ = cv.interior_dims
            extent = w if member.side.axis == "x" else h
            if width > extent:
                raise InteriorTooSmall(
                    f"{width}-cell band exceeds {member} interior extent {extent}")
        ref = round_robin_pick(state, constraint, label, group)
        ref_band = _band(canvases[ref.image], ref.side, width, "interior", full_tangent=False).copy()
        for member in group:
            if member == ref:
                continue
            rotated = np.rot90(ref_band, _MATCH_ROT[(ref.side, member.side)])
            target = _band(canvases[member.image], member.side, width, "interior", full_tangent=False)
            target[...] = rotated


def apply_constraints(canvases: dict[str, LatentCanvas], vspec: ValidatedSpec,
                      state: RoundRobinState, tiling: bool = True,
                      similarity: bool = True,
                      similarity_width: int = SIMILARITY_BAND) -> None:
    """One barrier application: all tiling writes, then all similarity writes.

    Constraints run in spec order within each phase; later writes win where
    bands overlap. The tiling phase is split so every horizontal-side write
    lands before any vertical-side write (the vertical sides own the pad
    corners).
    """
    if tiling:
        for pass_axis in ("y", "x"):
            for c in vspec.constraints:
                apply_tiling_constraint(canvases, c, state, axis=pass_axis)
    if similarity:
        for c in vspec.constraints:
            apply_similarity_constraint(canvases, c, state, width=similarity_width)


def facing_side(direction: tuple[int, int], turns: int) -> Side:
    """Which image side faces `direction` after `turns` CCW quarter turns."""
    for side, outward in OUTWARD.items():
        v = outward
        for _ in range(turns % 4):
            v = _turn(v)
        if v == direction:
            return side
    raise ValueError(f"not a unit direction: {direction!r}")
