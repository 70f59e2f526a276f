"""CSV layout goldens and byte-stable figure rendering."""

from __future__ import annotations

from tilecraft.metrics import ScoreReport
from tilecraft.report import (
    ScoreRow,
    SweepEntry,
    render_score_figure,
    render_sweep_figure,
    write_scores_csv,
    write_sweep_csv,
)

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _rows():
    return [
        ScoreRow("spec.tilespec", "A@0.0|B@0.1", "x",
                 ScoreReport(connection=0.125, inside_first=0.25,
                             inside_second=0.0625, offset=8)),
        ScoreRow("spec.tilespec", "B@0.1|A@0.0", "x",
                 ScoreReport(connection=0.1, inside_first=0.2,
                             inside_second=0.3, offset=8)),
    ]


def test_scores_csv_golden(tmp_path):
    p = tmp_path / "scores.csv"
    write_scores_csv(p, _rows())
    assert p.read_text() == (
        "spec,pair,axis,k,ts_conn,ts_minus,ts_plus,ts_mean\n"
        "spec.tilespec,A@0.0|B@0.1,x,8,0.125,0.25,0.0625,0.14583333333333334\n"
        "spec.tilespec,B@0.1|A@0.0,x,8,0.1,0.2,0.3,0.20000000000000004\n"
    )


def test_scores_csv_floats_survive_round_trip(tmp_path):
    """repr floats: parsing the cell back gives the identical double."""
    p = tmp_path / "scores.csv"
    write_scores_csv(p, _rows())
    line = p.read_text().splitlines()[2]
    cells = line.split(",")
    assert float(cells[4]) == 0.1
    assert float(cells[7]) == _rows()[1].report.mean


def test_sweep_csv_golden(tmp_path):
    p = tmp_path / "sweep.csv"
    write_sweep_csv(p, [SweepEntry(0, 0.5, 4.25), SweepEntry(16, 0.03125, 1.0)])
    assert p.read_text() == (
        "w,mean_ts,mean_seam_ratio\n"
        "0,0.5,4.25\n"
        "16,0.03125,1.0\n"
    )


def test_score_figure_is_byte_stable(tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    render_score_figure(a, _rows())
    render_score_figure(b, _rows())
    blob = a.read_bytes()
    assert blob.startswith(_PNG_SIG)
    assert len(blob) > 1000
    assert blob == b.read_bytes()


def test_sweep_figure_is_byte_stable(tmp_path):
    entries = [SweepEntry(w, 0.1 / (w + 1), 1.0 + 3.0 / (w + 1)) for w in (0, 8, 16, 32)]
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    render_sweep_figure(a, entries)
    render_sweep_figure(b, entries)
    blob = a.read_bytes()
    assert blob.startswith(_PNG_SIG)
    assert blob == b.read_bytes()
