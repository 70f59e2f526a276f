"""Latent/pixel conversion and sheet layout.

decode_and_crop is the one place the pad frame dies: the whole padded canvas
is decoded so border pixels see their context, then the frame (pad cells
times the codec scale) is cut away. Layouts place decoded tiles on a grid so
that every seam was licensed by some constraint, and assemble abuts them
into one sheet with no blending; if the sampler did its job the seams carry
themselves.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .constraints import OUTWARD, Side, ValidatedSpec
from .lattice import LatentCanvas, facing_side


# ── codecs ────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class IdentityCodec:
    """Latent cells are pixels: channel 0 (or the first three) shown as is."""

    name: str = "identity"
    scale: int = 1

    def decode(self, latent: np.ndarray) -> np.ndarray:
        return np.clip(_to_pixels(latent), 0.0, 1.0)

    def encode(self, pixels: np.ndarray, depth: int) -> np.ndarray:
        return _to_latent(pixels, depth)


@dataclass(frozen=True)
class LinearUpsampleCodec:
    """Bilinear upsampling by an integer factor, clamp-to-edge at borders.

    Sampling positions are pixel centers, so content shifts by whole cells
    map to shifts by whole pixel blocks (translation equivariance at
    multiples of the factor)."""

    factor: int = 4

    @property
    def name(self) -> str:
        return f"linear{self.factor}"

    @property
    def scale(self) -> int:
        return self.factor

    def decode(self, latent: np.ndarray) -> np.ndarray:
        img = _to_pixels(latent)
        img = _upsample_axis(img, self.factor, axis=0)
        img = _upsample_axis(img, self.factor, axis=1)
        return np.clip(img, 0.0, 1.0)

    def encode(self, pixels: np.ndarray, depth: int) -> np.ndarray:
        f = self.factor
        arr = np.asarray(pixels, dtype=np.float64)
        if arr.shape[0] % f or arr.shape[1] % f:
            raise ValueError(f"pixel dims {arr.shape[:2]} are not a multiple of {f}")
        h, w = arr.shape[0] // f, arr.shape[1] // f
        if arr.ndim == 2:
            arr = arr.reshape(h, f, w, f).mean(axis=(1, 3))
        else:
            arr = arr.reshape(h, f, w, f, arr.shape[2]).mean(axis=(1, 3))
        return _to_latent(arr, depth)


def make_codec(name: str):
    """"identity" or "linear<factor>" (e.g. linear4)."""
    if name == "identity":
        return IdentityCodec()
    if name.startswith("linear") and name[6:].isdigit() and int(name[6:]) >= 1:
        return LinearUpsampleCodec(int(name[6:]))
    raise ValueError(f"unknown codec {name!r}")


def _to_pixels(latent: np.ndarray) -> np.ndarray:
    latent = np.asarray(latent, dtype=np.float64)
    if latent.ndim != 3:
        raise ValueError(f"latent must be (h, w, d), got {latent.shape}")
    if latent.shape[2] >= 3:
        return latent[:, :, :3].copy()
    return latent[:, :, 0].copy()


def _to_latent(pixels: np.ndarray, depth: int) -> np.ndarray:
    arr = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    out = np.full((arr.shape[0], arr.shape[1], depth), 0.5, dtype=np.float64)
    if arr.ndim == 2:
        for c in range(depth):
            out[:, :, c] = arr
    elif arr.ndim == 3 and arr.shape[2] == 3:
        for c in range(min(3, depth)):
            out[:, :, c] = arr[:, :, c]
    else:
        raise ValueError(f"pixels must be (h, w) or (h, w, 3), got {arr.shape}")
    return out


def _upsample_axis(arr: np.ndarray, f: int, axis: int) -> np.ndarray:
    if f == 1:
        return arr
    n = arr.shape[axis]
    # Output pixel p samples source coordinate (p + 0.5)/f - 0.5.
    src = (np.arange(n * f, dtype=np.float64) + 0.5) / f - 0.5
    i0 = np.clip(np.floor(src).astype(int), 0, n - 1)
    i1 = np.clip(i0 + 1, 0, n - 1)
    frac = np.clip(src - np.floor(src), 0.0, 1.0)
    lo = np.take(arr, i0, axis=axis)
    hi = np.take(arr, i1, axis=axis)
    shape = [1] * arr.ndim
    shape[axis] = n * f
    w = frac.reshape(shape)
    return lo * (1.0 - w) + hi * w


def decode_and_crop(canvas: LatentCanvas, codec) -> np.ndarray:
    """Decode the padded canvas, then cut pad*scale pixels off each padded
    side. Border pixels of the result were decoded with their cross-joint
    context still present."""
    full = codec.decode(canvas.data)
    s = codec.scale
    h, w, _ = canvas.interior_dims
    top, left = canvas.pads[Side.TOP] * s, canvas.pads[Side.LEFT] * s
    return full[top:top + h * s, left:left + w * s]


def encode_init(pixels: np.ndarray, depth: int, codec) -> np.ndarray:
    """Pixel image -> interior latent for image-to-image starts."""
    return codec.encode(pixels, depth)


# ── layout ────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Placement:
    image: str
    turns: int = 0  # CCW quarter turns applied when the tile is pasted

    def __str__(self) -> str:
        return f"{self.image} turns {self.turns}"


@dataclass(frozen=True)
class Layout:
    rows: int
    cols: int
    cells: tuple[tuple[Placement, ...], ...]  # row-major

    def __iter__(self):
        for r in range(self.rows):
            for c in range(self.cols):
                yield r, c, self.cells[r][c]


class NoValidLayout(Exception):
    pass


def _licensed(vspec: ValidatedSpec) -> frozenset:
    """Ordered (facing, facing-back) side pairs some constraint allows."""
    pairs = set()
    for c in vspec.constraints:
        for a in c.set_a:
            for b in c.set_b:
                pairs.add(((a.image, a.side), (b.image, b.side)))
                pairs.add(((b.image, b.side), (a.image, a.side)))
    return frozenset(pairs)


def _rotation_allowed(vspec: ValidatedSpec) -> bool:
    # Tiles stay upright unless some constraint joins sides that are not an
    # opposite pair (those joints only meet when one tile is turned).
    for c in vspec.constraints:
        for a in c.set_a:
            for b in c.set_b:
                oa, ob = OUTWARD[a.side], OUTWARD[b.side]
                if (oa[0] + ob[0], oa[1] + ob[1]) != (0, 0):
                    return True
    return False


def _fits(licensed, left: Placement | None, above: Placement | None, cand: Placement) -> bool:
    if left is not None:
        give = (left.image, facing_side((0, 1), left.turns))
        take = (cand.image, facing_side((0, -1), cand.turns))
        if (give, take) not in licensed:
            return False
    if above is not None:
        give = (above.image, facing_side((1, 0), above.turns))
        take = (cand.image, facing_side((-1, 0), cand.turns))
        if (give, take) not in licensed:
            return False
    return True


def solve_layout(vspec: ValidatedSpec, rows: int, cols: int, seed: int = 0) -> Layout:
    """First grid assignment (row-major backtracking) whose every seam is
    licensed by a constraint. The candidate order is shuffled by seed, so
    different seeds explore different but reproducible sheets."""
    if rows < 1 or cols < 1:
        raise ValueError("layout needs at least one row and column")
    turns = (0, 1, 2, 3) if _rotation_allowed(vspec) else (0,)
    candidates = [Placement(img, k) for img in vspec.image_ids() for k in turns]
    random.Random(seed).shuffle(candidates)
    licensed = _licensed(vspec)

    grid: list[list[Placement | None]] = [[None] * cols for _ in range(rows)]

    def place(idx: int) -> bool:
        if idx == rows * cols:
            return True
        r, c = divmod(idx, cols)
        for cand in candidates:
            left = grid[r][c - 1] if c > 0 else None
            above = grid[r - 1][c] if r > 0 else None
            if _fits(licensed, left, above, cand):
                grid[r][c] = cand
                if place(idx + 1):
                    return True
                grid[r][c] = None
        return False

    if not place(0):
        raise NoValidLayout(f"no {rows}x{cols} arrangement satisfies the constraints")
    return Layout(rows=rows, cols=cols, cells=tuple(tuple(row) for row in grid))


def audit_layout(vspec: ValidatedSpec, layout: Layout) -> list[str]:
    """Re-check every seam of a layout straight against the constraint list
    (separately from the solver's candidate machinery). Empty = sound."""
    problems: list[str] = []

    def allowed(give: tuple[str, Side], take: tuple[str, Side]) -> bool:
        for c in vspec.constraints:
            in_a = lambda ref: any(x.image == ref[0] and x.side == ref[1] for x in c.set_a)
            in_b = lambda ref: any(x.image == ref[0] and x.side == ref[1] for x in c.set_b)
            if (in_a(give) and in_b(take)) or (in_b(give) and in_a(take)):
                return True
        return False

    for r in range(layout.rows):
        for c in range(layout.cols):
            here = layout.cells[r][c]
            if c + 1 < layout.cols:
                right = layout.cells[r][c + 1]
                give = (here.image, facing_side((0, 1), here.turns))
                take = (right.image, facing_side((0, -1), right.turns))
                if not allowed(give, take):
                    problems.append(f"seam ({r},{c})-({r},{c + 1}): "
                                    f"{give[0]}.{give[1].value} / {take[0]}.{take[1].value} unlicensed")
            if r + 1 < layout.rows:
                below = layout.cells[r + 1][c]
                give = (here.image, facing_side((1, 0), here.turns))
                take = (below.image, facing_side((-1, 0), below.turns))
                if not allowed(give, take):
                    problems.append(f"seam ({r},{c})-({r + 1},{c}): "
                                    f"{give[0]}.{give[1].value} / {take[0]}.{take[1].value} unlicensed")
    return problems


def assemble(layout: Layout, images: dict[str, np.ndarray]) -> np.ndarray:
    """Paste decoded tiles (rotated per placement) edge to edge, no blending."""
    rows = []
    for r in range(layout.rows):
        row_imgs = []
        for c in range(layout.cols):
            p = layout.cells[r][c]
            row_imgs.append(np.rot90(images[p.image], p.turns))
        rows.append(np.concatenate(row_imgs, axis=1))
    return np.concatenate(rows, axis=0)


def layout_sidecar(layout: Layout) -> str:
    """Plain-text record of what assemble pasted where."""
    lines = [f"layout {layout.rows}x{layout.cols}"]
    for r, c, p in layout:
        lines.append(f"cell {r} {c} {p.image} turns {p.turns}")
    return "\n".join(lines) + "\n"
