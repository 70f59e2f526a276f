"""Command line front end.

Exit codes: 0 success, 1 spec or input validation failure, 2 runtime failure
(layout search, remote denoiser, file IO).  `generate` records every knob
that influenced sampling in a flat key=value manifest; rerunning with
--manifest and a fresh --out must reproduce the directory byte for byte.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import dsl
from .constraints import (Constraint, ConstraintSpec, Side, SpecValidationError,
                          ValidatedSpec, validate)
from .engine import (DenoiserFailure, SamplerParams, constant_denoiser,
                     gaussian_denoiser, sample)
from .imaging import (Layout, NoValidLayout, assemble, audit_layout, decode_and_crop,
                      encode_init, layout_sidecar, make_codec, solve_layout)
from .imgio import CorruptFile, UnsupportedFormat, read_image, write_image
from .metrics import seam_profile, tiling_score
from .report import (ScoreRow, SweepEntry, render_score_figure, render_sweep_figure,
                     write_scores_csv, write_sweep_csv)
from .wire import WireError, remote_denoiser

_MANIFEST_KEYS = ("codec", "cols", "denoiser", "endpoint", "offset_k", "rows",
                  "sampler", "seed", "similarity_width", "spec", "steps",
                  "strength", "w")


class _CliError(Exception):
    """Carries the exit code alongside the message."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class GenerateConfig:
    spec: str
    seed: int = 0
    steps: int = 50
    w: int | None = None
    denoiser: str = "gaussian"
    endpoint: str = ""
    codec: str = "identity"
    rows: int = 1
    cols: int = 2
    offset_k: int = 8
    sampler: str = "ddim"
    strength: float = 0.8
    similarity_width: int = 5

    def manifest_text(self) -> str:
        values = {
            "codec": self.codec, "cols": self.cols, "denoiser": self.denoiser,
            "endpoint": self.endpoint, "offset_k": self.offset_k,
            "rows": self.rows, "sampler": self.sampler, "seed": self.seed,
            "similarity_width": self.similarity_width, "spec": self.spec,
            "steps": self.steps, "strength": self.strength,
            "w": "" if self.w is None else self.w,
        }
        return "".join(f"{k}={values[k]}\n" for k in _MANIFEST_KEYS)


def parse_manifest(text: str) -> GenerateConfig:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if "=" not in line:
            raise _CliError(1, f"manifest line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        if key not in _MANIFEST_KEYS:
            raise _CliError(1, f"manifest line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise _CliError(1, f"manifest line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    missing = [k for k in _MANIFEST_KEYS if k not in pairs]
    if missing:
        raise _CliError(1, f"manifest missing keys: {', '.join(missing)}")
    try:
        return GenerateConfig(
            spec=pairs["spec"], seed=int(pairs["seed"]), steps=int(pairs["steps"]),
            w=None if pairs["w"] == "" else int(pairs["w"]),
            denoiser=pairs["denoiser"], endpoint=pairs["endpoint"],
            codec=pairs["codec"], rows=int(pairs["rows"]), cols=int(pairs["cols"]),
            offset_k=int(pairs["offset_k"]), sampler=pairs["sampler"],
            strength=float(pairs["strength"]),
            similarity_width=int(pairs["similarity_width"]))
    except ValueError as exc:
        raise _CliError(1, f"manifest: {exc}") from None


def _load_spec(path: str) -> ConstraintSpec:
    return _load_spec_with_spans(path)[0]


def _load_spec_with_spans(path: str) -> tuple[ConstraintSpec, dict[str, tuple[int, int, int]]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _CliError(2, f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        return dsl.parse_with_spans(text)
    except dsl.TileSpecParseError as exc:
        lines = [f"{path}:{e.line}:{e.col}: {e.kind}: {e.message}" for e in exc.errors]
        raise _CliError(1, "\n".join(lines)) from None


def _validated(spec: ConstraintSpec, window: int | None,
               spans: dict[str, tuple[int, int, int]] | None = None,
               path: str = "") -> ValidatedSpec:
    """Validate, turning violations into exit-1 diagnostics. With spans from
    the parser, each violation tied to a declared id points at its source."""
    if window is not None:
        spec = replace(spec, constraints=tuple(
            Constraint(c.id, c.set_a, c.set_b, window) for c in spec.constraints))
    try:
        return validate(spec)
    except SpecValidationError as exc:
        lines = []
        for v in exc.violations:
            at = (spans or {}).get(v.subject)
            where = f"{path}:{at[0]}:{at[1]}: " if at else ""
            lines.append(f"{where}{v.kind}: {v.message}")
        raise _CliError(1, "\n".join(lines)) from None


def _make_denoiser(config: GenerateConfig):
    if config.denoiser == "gaussian":
        return gaussian_denoiser()
    if config.denoiser == "constant":
        return constant_denoiser()
    if config.denoiser == "remote":
        endpoint = config.endpoint or os.environ.get("TILECRAFT_ENDPOINT", "")
        if not endpoint:
            raise _CliError(1, "remote denoiser needs --endpoint or TILECRAFT_ENDPOINT")
        return remote_denoiser(endpoint)
    raise _CliError(1, f"unknown denoiser {config.denoiser!r}")


def _resolve_endpoint(args: argparse.Namespace) -> str:
    if args.denoiser != "remote":
        return ""
    return args.endpoint or os.environ.get("TILECRAFT_ENDPOINT", "")


def _load_inits(vspec: ValidatedSpec, spec_path: str, codec) -> dict[str, np.ndarray]:
    """Decode init images into latents; paths resolve beside the spec file."""
    inits: dict[str, np.ndarray] = {}
    base = Path(spec_path).resolve().parent
    expect_h = vspec.latent_h * codec.scale
    expect_w = vspec.latent_w * codec.scale
    for slot in vspec.images:
        if not slot.init:
            continue
        src = Path(slot.init)
        if not src.is_absolute():
            src = base / src
        try:
            pixels = read_image(src)
        except (OSError, UnsupportedFormat, CorruptFile) as exc:
            raise _CliError(2, f"init image {src}: {exc}") from None
        if pixels.shape[:2] != (expect_h, expect_w):
            raise _CliError(1, f"init image {src}: expected {expect_h}x{expect_w} "
                               f"pixels, got {pixels.shape[0]}x{pixels.shape[1]}")
        inits[slot.id] = encode_init(pixels, vspec.latent_d, codec)
    return inits


def _score_layout(layout: Layout, images: dict[str, np.ndarray],
                  spec_label: str, offset_k: int) -> list[ScoreRow]:
    """Score every interior seam of the assembled grid.

    Seam pairs are scored on the oriented tiles as placed, so the first line
    of the second image really is the line that sits across the seam.
    """
    oriented = {(p.image, p.turns): np.rot90(images[p.image], p.turns)
                for _, _, p in layout}
    rows: list[ScoreRow] = []
    for r, c, place in layout:
        if c + 1 < layout.cols:
            right = layout.cells[r][c + 1]
            rep = tiling_score(oriented[place.image, place.turns],
                               oriented[right.image, right.turns],
                               axis="x", offset=offset_k)
            rows.append(ScoreRow(spec_label, f"{place.image}@{r}.{c}|{right.image}@{r}.{c + 1}",
                                 "x", rep))
        if r + 1 < layout.rows:
            below = layout.cells[r + 1][c]
            rep = tiling_score(oriented[place.image, place.turns],
                               oriented[below.image, below.turns],
                               axis="y", offset=offset_k)
            rows.append(ScoreRow(spec_label, f"{place.image}@{r}.{c}|{below.image}@{r + 1}.{c}",
                                 "y", rep))
    return rows


def _sheet_seam_ratios(sheet: np.ndarray, layout: Layout, tile_h: int, tile_w: int) -> list[float]:
    ratios = []
    cols = [tile_w * j for j in range(1, layout.cols)]
    if cols:
        ratios += [p.ratio for p in seam_profile(sheet, cols, axis="x")]
    rows = [tile_h * i for i in range(1, layout.rows)]
    if rows:
        ratios += [p.ratio for p in seam_profile(sheet, rows, axis="y")]
    return ratios


def run_generate(config: GenerateConfig, out_dir: str | Path) -> list[ScoreRow]:
    """Full pipeline: sample, decode, lay out, assemble, score, render."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = _load_spec(config.spec)
    vspec = _validated(spec, config.w)
    try:
        codec = make_codec(config.codec)
    except ValueError as exc:
        raise _CliError(1, str(exc)) from None
    denoiser = _make_denoiser(config)
    inits = _load_inits(vspec, config.spec, codec)

    params = SamplerParams(steps=config.steps, seed=config.seed,
                           sampler=config.sampler, strength=config.strength,
                           similarity_width=config.similarity_width)
    try:
        canvases = sample(vspec, denoiser, params, init_latents=inits or None)
    except (DenoiserFailure, WireError) as exc:
        raise _CliError(2, f"denoise: {exc}") from None

    images = {img: decode_and_crop(cv, codec) for img, cv in canvases.items()}
    for img in vspec.image_ids():
        write_image(out / f"{img}.png", images[img])

    try:
        layout = solve_layout(vspec, config.rows, config.cols, seed=config.seed)
    except NoValidLayout as exc:
        raise _CliError(2, f"layout: {exc}") from None
    problems = audit_layout(vspec, layout)
    if problems:
        raise _CliError(2, "layout: audit failed: " + "; ".join(problems))
    sheet = assemble(layout, images)
    write_image(out / "sheet.png", sheet)
    (out / "sheet.layout.txt").write_text(layout_sidecar(layout), encoding="utf-8")

    spec_label = Path(config.spec).stem
    rows = _score_layout(layout, images, spec_label, config.offset_k)
    write_scores_csv(out / "scores.csv", rows)
    render_score_figure(out / "scores.png", rows)
    (out / "manifest.txt").write_text(config.manifest_text(), encoding="utf-8")
    return rows


def cmd_validate(args: argparse.Namespace) -> int:
    spec, spans = _load_spec_with_spans(args.spec)
    vspec = _validated(spec, None, spans, args.spec)
    for cid, kind in vspec.scenarios:
        print(f"{cid}: {kind.value}")
    for img in vspec.image_ids():
        pads = vspec.padding.for_image(img)
        print(f"pads {img}: " + " ".join(f"{s.value}={pads[s]}" for s in Side))
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    if args.manifest:
        if args.spec:
            raise _CliError(1, "--manifest replaces --spec; pass one or the other")
        try:
            text = Path(args.manifest).read_text(encoding="utf-8")
        except OSError as exc:
            raise _CliError(2, f"cannot read {args.manifest}: {exc.strerror or exc}") from None
        config = parse_manifest(text)
    else:
        if not args.spec:
            raise _CliError(1, "generate needs --spec or --manifest")
        config = GenerateConfig(
            spec=str(Path(args.spec).resolve()), seed=args.seed, steps=args.steps, w=args.w,
            denoiser=args.denoiser, endpoint=_resolve_endpoint(args),
            codec=args.codec, rows=args.rows, cols=args.cols,
            offset_k=args.offset_k, sampler=args.sampler, strength=args.strength,
            similarity_width=args.similarity_width)
    rows = run_generate(config, args.out)
    for row in rows:
        print(f"{row.pair} axis={row.axis} ts={row.report.mean:.6f}")
    return 0


def cmd_sweep_w(args: argparse.Namespace) -> int:
    try:
        windows = [int(part) for part in args.w_list.split(",") if part.strip() != ""]
    except ValueError:
        raise _CliError(1, f"--w expects comma-separated integers, got {args.w_list!r}") from None
    if not windows:
        raise _CliError(1, "--w lists no window values")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries: list[SweepEntry] = []
    for w in windows:
        config = GenerateConfig(
            spec=args.spec, seed=args.seed, steps=args.steps, w=w,
            denoiser=args.denoiser, endpoint=_resolve_endpoint(args),
            codec=args.codec, rows=args.rows, cols=args.cols,
            offset_k=args.offset_k, sampler=args.sampler, strength=args.strength,
            similarity_width=args.similarity_width)
        sub = out / f"w{w}"
        rows = run_generate(config, sub)
        sheet = read_image(sub / "sheet.png")
        vspec = _validated(_load_spec(args.spec), w)
        codec = make_codec(args.codec)
        ratios = _sheet_seam_ratios(sheet, solve_layout(vspec, args.rows, args.cols, seed=args.seed),
                                    vspec.latent_h * codec.scale, vspec.latent_w * codec.scale)
        mean_ts = float(np.mean([row.report.mean for row in rows])) if rows else 0.0
        mean_ratio = float(np.mean(ratios)) if ratios else 0.0
        entries.append(SweepEntry(w, mean_ts, mean_ratio))
        print(f"w={w} mean_ts={mean_ts:.6f} seam_ratio={mean_ratio:.4f}")
    write_sweep_csv(out / "sweep.csv", entries)
    render_sweep_figure(out / "sweep.png", entries)
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    try:
        first = read_image(args.first)
        second = read_image(args.second)
    except (OSError, UnsupportedFormat, CorruptFile) as exc:
        raise _CliError(2, f"cannot read image: {exc}") from None
    try:
        rep = tiling_score(first, second, axis=args.axis, offset=args.offset_k)
    except ValueError as exc:
        raise _CliError(1, str(exc)) from None
    row = ScoreRow("-", f"{Path(args.first).name}|{Path(args.second).name}", args.axis, rep)
    if args.out:
        write_scores_csv(args.out, [row])
    else:
        print(row.csv())
    return 0


def _add_sampling_flags(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("--seed", type=int, default=0)
    cmd.add_argument("--steps", type=int, default=50)
    cmd.add_argument("--denoiser", choices=["gaussian", "constant", "remote"],
                     default="gaussian")
    cmd.add_argument("--endpoint", default="",
                     help="remote denoiser URL (or set TILECRAFT_ENDPOINT)")
    cmd.add_argument("--codec", default="identity",
                     help="latent codec: identity or linear<factor>")
    cmd.add_argument("--rows", type=int, default=1)
    cmd.add_argument("--cols", type=int, default=2)
    cmd.add_argument("--offset-k", type=int, default=8, dest="offset_k")
    cmd.add_argument("--sampler", choices=["ddim", "ancestral"], default="ddim")
    cmd.add_argument("--strength", type=float, default=0.8)
    cmd.add_argument("--similarity-width", type=int, default=5, dest="similarity_width",
                     help="expert override of the shared-edge band width")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tilecraft",
                                     description="constraint-driven tileable texture sampler")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="parse a spec and print its canonical form")
    v.add_argument("--spec", required=True)
    v.set_defaults(func=cmd_validate)

    g = sub.add_parser("generate", help="sample images and assemble a scored sheet")
    g.add_argument("--spec", default="")
    g.add_argument("--manifest", default="",
                   help="rerun from a recorded manifest instead of flags")
    g.add_argument("--out", required=True)
    g.add_argument("--w", type=int, default=None,
                   help="override every constraint's context window")
    _add_sampling_flags(g)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("sweep-w", help="generate at several context windows and compare")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--w", required=True, dest="w_list",
                   help="comma-separated window values, e.g. 0,8,16,32")
    _add_sampling_flags(s)
    s.set_defaults(func=cmd_sweep_w)

    c = sub.add_parser("score", help="score one seam between two image files")
    c.add_argument("--first", required=True)
    c.add_argument("--second", required=True)
    c.add_argument("--axis", choices=["x", "y"], default="x")
    c.add_argument("--offset-k", type=int, default=8, dest="offset_k")
    c.add_argument("--out", default="", help="write a CSV row here instead of stdout")
    c.set_defaults(func=cmd_score)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
