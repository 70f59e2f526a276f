"""Constraint model for multi-image tiling.

A tiling spec declares a set of image slots plus edge constraints between
them. Each constraint names two groups of sides, A and B: any side in A is
required to join seamlessly with any side in B when the outputs are laid
side by side. Everything here is declarative bookkeeping; the sampling-time
enforcement lives in tilecraft.lattice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

DEFAULT_WINDOW = 16
SIMILARITY_BAND = 5  # edge band kept identical across interchangeable sides


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"
    TOP = "top"
    BOTTOM = "bottom"

    @property
    def axis(self) -> str:
        """Normal axis: "x" for the vertical edges, "y" for the horizontal ones."""
        return "x" if self in (Side.LEFT, Side.RIGHT) else "y"

    @property
    def opposite(self) -> "Side":
        return _OPPOSITE[self]


_OPPOSITE = {
    Side.LEFT: Side.RIGHT,
    Side.RIGHT: Side.LEFT,
    Side.TOP: Side.BOTTOM,
    Side.BOTTOM: Side.TOP,
}

# Outward normal of each side as (drow, dcol); rows grow downward.
OUTWARD = {
    Side.LEFT: (0, -1),
    Side.RIGHT: (0, 1),
    Side.TOP: (-1, 0),
    Side.BOTTOM: (1, 0),
}


@dataclass(frozen=True)
class SideRef:
    """One side of one image slot, e.g. I1.right."""

    image: str
    side: Side

    def __str__(self) -> str:
        return f"{self.image}.{self.side.value}"


@dataclass(frozen=True)
class ImageSlot:
    """An output slot: text-conditioned unless an init image path is given."""

    id: str
    prompt: str | None = None
    init: str | None = None


@dataclass(frozen=True)
class Constraint:
    """Sides in set_a connect seamlessly with sides in set_b, and vice versa.

    window is the context width in latent cells copied across the joint each
    sampling step.
    """

    id: str
    set_a: tuple[SideRef, ...]
    set_b: tuple[SideRef, ...]
    window: int = DEFAULT_WINDOW

    def sides(self) -> tuple[SideRef, ...]:
        return self.set_a + self.set_b


@dataclass(frozen=True)
class ConstraintSpec:
    """Parsed spec: image slots, constraints, and free-form settings.

    The reserved settings width/height/depth give the shared latent size of
    every slot (all slots sample at one resolution).
    """

    images: tuple[ImageSlot, ...] = ()
    constraints: tuple[Constraint, ...] = ()
    settings: tuple[tuple[str, int | str], ...] = ()

    def setting(self, key: str, default=None):
        for k, v in self.settings:
            if k == key:
                return v
        return default

    def latent_dims(self) -> tuple[int, int, int]:
        """(height, width, depth) in latent cells."""
        return (
            int(self.setting("height", 64)),
            int(self.setting("width", 64)),
            int(self.setting("depth", 1)),
        )


class ScenarioKind(Enum):
    SELF_TILING = "SelfTiling"
    ONE_TO_ONE = "OneToOne"
    MANY_TO_MANY = "ManyToMany"


def classify(constraint: Constraint) -> ScenarioKind:
    """Bucket a constraint by how many images and sides it couples."""
    a, b = constraint.set_a, constraint.set_b
    if len(a) == 1 and len(b) == 1:
        if a[0].image == b[0].image:
            return ScenarioKind.SELF_TILING
        return ScenarioKind.ONE_TO_ONE
    return ScenarioKind.MANY_TO_MANY


@dataclass(frozen=True)
class PaddingPlan:
    """Pad width, in latent cells, for every (image, side) pair."""

    pads: tuple[tuple[tuple[str, Side], int], ...]

    def pad(self, image: str, side: Side) -> int:
        for (img, s), w in self.pads:
            if img == image and s == side:
                return w
        return 0

    def for_image(self, image: str) -> dict[Side, int]:
        out = {s: 0 for s in Side}
        for (img, s), w in self.pads:
            if img == image:
                out[s] = w
        return out


def padding_plan(constraints: tuple[Constraint, ...]) -> PaddingPlan:
    """A side is padded by the widest window of any constraint touching it."""
    pads: dict[tuple[str, Side], int] = {}
    for c in constraints:
        for ref in c.sides():
            key = (ref.image, ref.side)
            pads[key] = max(pads.get(key, 0), c.window)
    return PaddingPlan(tuple(sorted(pads.items(), key=lambda kv: (kv[0][0], kv[0][1].value))))


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    subject: str | None = None

    def __str__(self) -> str:
        where = f" [{self.subject}]" if self.subject else ""
        return f"{self.kind}{where}: {self.message}"


class SpecValidationError(Exception):
    """Raised by validate(); carries the full list of violations."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


@dataclass(frozen=True)
class ValidatedSpec:
    """A spec in canonical order with derived lookups attached.

    Images and constraints are sorted by id, which also fixes the serializer
    output and the batch order used by the sampler.
    """

    spec: ConstraintSpec
    latent_h: int
    latent_w: int
    latent_d: int
    scenarios: tuple[tuple[str, ScenarioKind], ...]
    padding: PaddingPlan

    @property
    def images(self) -> tuple[ImageSlot, ...]:
        return self.spec.images

    @property
    def constraints(self) -> tuple[Constraint, ...]:
        return self.spec.constraints

    def scenario(self, constraint_id: str) -> ScenarioKind:
        for cid, kind in self.scenarios:
            if cid == constraint_id:
                return kind
        raise KeyError(constraint_id)

    def image_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.images)


def _check_dims_setting(spec: ConstraintSpec, out: list[Violation]) -> None:
    for key in ("width", "height", "depth"):
        val = spec.setting(key)
        if val is None:
            continue
        if not isinstance(val, int) or val < 1:
            out.append(Violation("InvalidSetting", f"{key} must be a positive integer, got {val!r}", key))


def validate(spec: ConstraintSpec, latent_dims: tuple[int, int, int] | None = None) -> ValidatedSpec:
    """Check a spec and return it in canonical form.

    latent_dims overrides the width/height/depth settings when given.
    Raises SpecValidationError listing every violation found.
    """
    bad: list[Violation] = []

    if not spec.images:
        bad.append(Violation("ZeroImages", "spec declares no images"))

    known: set[str] = set()
    for slot in spec.images:
        if slot.id in known:
            bad.append(Violation("DuplicateId", f"image {slot.id!r} declared twice", slot.id))
        known.add(slot.id)

    _check_dims_setting(spec, bad)
    if latent_dims is None:
        try:
            latent_dims = spec.latent_dims()
        except (TypeError, ValueError):
            latent_dims = (64, 64, 1)
    h, w, d = latent_dims
    max_window = min(h, w) // 2

    seen_cids: set[str] = set()
    for c in spec.constraints:
        if c.id in seen_cids:
            bad.append(Violation("DuplicateId", f"constraint {c.id!r} declared twice", c.id))
        seen_cids.add(c.id)

        for label, group in (("A", c.set_a), ("B", c.set_b)):
            if not group:
                bad.append(Violation("EmptySet", f"set {label} of {c.id} is empty", c.id))
            dupes = {r for r in group if group.count(r) > 1}
            for r in sorted(dupes, key=str):
                bad.append(Violation("DuplicateSide", f"{r} listed twice in set {label} of {c.id}", c.id))
            for r in group:
                if r.image not in known:
                    bad.append(Violation("UnknownImage", f"{c.id} references undeclared image {r.image!r}", c.id))

        if not (0 <= c.window <= max_window):
            bad.append(Violation(
                "WindowOutOfRange",
                f"{c.id} has w={c.window}, valid range is 0..{max_window} for a {h}x{w} latent",
                c.id,
            ))

        cross_axis = any(a.side.axis != b.side.axis for a in c.set_a for b in c.set_b)
        if cross_axis and h != w:
            bad.append(Violation(
                "CrossAxisNonSquare",
                f"{c.id} joins perpendicular sides, which needs a square latent (got {h}x{w})",
                c.id,
            ))
        if classify(c) is ScenarioKind.MANY_TO_MANY and min(h, w) < SIMILARITY_BAND:
            bad.append(Violation(
                "WindowOutOfRange",
                f"{c.id} needs the {SIMILARITY_BAND}-cell similarity band, latent is only {h}x{w}",
                c.id,
            ))

    if bad:
        raise SpecValidationError(bad)

    canonical = ConstraintSpec(
        images=tuple(ImageSlot(s.id, s.prompt or "", s.init)
                     for s in sorted(spec.images, key=lambda s: s.id)),
        constraints=tuple(sorted(spec.constraints, key=lambda c: c.id)),
        settings=tuple(sorted(spec.settings, key=lambda kv: kv[0])),
    )
    return ValidatedSpec(
        spec=canonical,
        latent_h=h,
        latent_w=w,
        latent_d=d,
        scenarios=tuple((c.id, classify(c)) for c in canonical.constraints),
        padding=padding_plan(canonical.constraints),
    )
