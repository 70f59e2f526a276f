"""Delimited score output and the figures rendered alongside it.

Everything here must be byte-stable across reruns: floats are written with
repr (shortest exact form) and the figures carry no volatile metadata, so a
regenerated output directory can be compared file by file.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 (backend must be pinned first)

from .metrics import ScoreReport  # noqa: E402

_SCORE_HEADER = "spec,pair,axis,k,ts_conn,ts_minus,ts_plus,ts_mean"
_PNG_META = {"Software": None}  # drop the library banner; bytes stay stable


@dataclass(frozen=True)
class ScoreRow:
    spec: str
    pair: str
    axis: str
    report: ScoreReport

    def csv(self) -> str:
        r = self.report
        return ",".join([self.spec, self.pair, self.axis, str(r.offset),
                         repr(r.connection), repr(r.inside_first),
                         repr(r.inside_second), repr(r.mean)])


def write_scores_csv(path: str | Path, rows: list[ScoreRow]) -> None:
    lines = [_SCORE_HEADER] + [row.csv() for row in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class SweepEntry:
    window: int
    mean_ts: float
    mean_seam_ratio: float


def write_sweep_csv(path: str | Path, entries: list[SweepEntry]) -> None:
    lines = ["w,mean_ts,mean_seam_ratio"]
    lines += [f"{e.window},{e.mean_ts!r},{e.mean_seam_ratio!r}" for e in entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def render_score_figure(path: str | Path, rows: list[ScoreRow]) -> None:
    """Grouped bars: connection and both offset scores for every seam."""
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(rows) + 2.0), 3.2))
    xs = range(len(rows))
    width = 0.27
    for slot, (label, pick) in enumerate([
            ("connection", lambda r: r.connection),
            ("offset into first", lambda r: r.inside_first),
            ("offset into second", lambda r: r.inside_second)]):
        ax.bar([x + (slot - 1) * width for x in xs],
               [pick(row.report) for row in rows], width=width, label=label)
    ax.set_xticks(list(xs))
    ax.set_xticklabels([row.pair for row in rows], rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("tiling score")
    ax.set_title("seam scores (lower is smoother)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)


def render_sweep_figure(path: str | Path, entries: list[SweepEntry]) -> None:
    """Mean tiling score and seam ratio as the context window widens."""
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    ws = [e.window for e in entries]
    ax.plot(ws, [e.mean_ts for e in entries], marker="o", label="mean tiling score")
    ax.set_xlabel("context window w (latent cells)")
    ax.set_ylabel("tiling score")
    ax2 = ax.twinx()
    ax2.plot(ws, [e.mean_seam_ratio for e in entries], marker="s", color="tab:red",
             label="seam/interior ratio")
    ax2.set_ylabel("seam/interior step ratio")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, fontsize=7)
    ax.set_title("context window sweep")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
