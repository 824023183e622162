"""CSV readers and writers for every file the pipeline exchanges.

Floats are written with repr (shortest round-trip form), which keeps
output byte-deterministic for identical inputs.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .detector import DetectionReport, EventInterval, FrameScore, ReportRow
from .errors import InvalidValue
from .tracker import TrackResult


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# matrices ("rows,cols" header, then one CSV line per matrix row)
# ---------------------------------------------------------------------------

def write_matrix_csv(path: str | Path, mat: np.ndarray) -> None:
    mat = np.asarray(mat, dtype=np.float64)
    rows, cols = mat.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("rows,cols\n")
        fh.write(f"{rows},{cols}\n")
        for r in range(rows):
            fh.write(",".join(_fmt(v) for v in mat[r]) + "\n")


def read_matrix_csv(path: str | Path) -> np.ndarray:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) < 2 or lines[0].strip() != "rows,cols":
        raise InvalidValue(f"{path}: expected 'rows,cols' header")
    try:
        rows, cols = (int(v) for v in lines[1].split(","))
    except ValueError as exc:
        raise InvalidValue(f"{path}: bad dimension line {lines[1]!r}") from exc
    if len(lines) < 2 + rows:
        raise InvalidValue(f"{path}: expected {rows} data rows")
    data = np.empty((rows, cols))
    for r in range(rows):
        vals = lines[2 + r].split(",")
        if len(vals) != cols:
            raise InvalidValue(f"{path}: row {r} has {len(vals)} values, expected {cols}")
        data[r] = [float(v) for v in vals]
    return data


def write_trace_csv(path: str | Path, trace: list[float]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iteration,objective\n")
        for i, v in enumerate(trace):
            fh.write(f"{i},{_fmt(v)}\n")


# ---------------------------------------------------------------------------
# frame scores and event intervals
# ---------------------------------------------------------------------------

def write_scores_csv(path: str | Path, scores: list[FrameScore]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("frame,lsmd_energy,tracker_conf,combined\n")
        for sc in scores:
            fh.write(
                f"{sc.frame},{_fmt(sc.lsmd_energy)},{_fmt(sc.tracker_conf)},{_fmt(sc.combined)}\n"
            )


def write_events_csv(path: str | Path, events: list[EventInterval]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("start,end,peak\n")
        for ev in events:
            fh.write(f"{ev.start},{ev.end},{_fmt(ev.peak)}\n")


def read_events_csv(path: str | Path) -> list[EventInterval]:
    """Reads detection events ('start,end,peak') or ground truth
    ('start,end,kind'); only the interval is kept."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise InvalidValue(f"{path}: empty events file")
    header = [h.strip() for h in lines[0].split(",")]
    if header[:2] != ["start", "end"]:
        raise InvalidValue(f"{path}: expected 'start,end,...' header, got {lines[0]!r}")
    events = []
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split(",")
        events.append(EventInterval(start=int(parts[0]), end=int(parts[1])))
    return events


def write_truth_csv(path: str | Path, events: list[tuple[int, int, str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("start,end,kind\n")
        for start, end, kind in events:
            fh.write(f"{start},{end},{kind}\n")


# ---------------------------------------------------------------------------
# track results
# ---------------------------------------------------------------------------

def write_track_csv(path: str | Path, results: list[TrackResult]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("frame,l_x,l_y,theta,s,alpha,phi,confidence,occlusion_fraction\n")
        for r in results:
            st = r.state
            cells = [
                str(r.frame_index),
                _fmt(st.l_x),
                _fmt(st.l_y),
                _fmt(st.theta),
                _fmt(st.s),
                _fmt(st.alpha),
                _fmt(st.phi),
                _fmt(r.confidence),
                _fmt(r.occlusion_fraction),
            ]
            fh.write(",".join(cells) + "\n")


# ---------------------------------------------------------------------------
# detection reports
# ---------------------------------------------------------------------------

REPORT_HEADER = "name,total_frames,num_events,correct_detections"


def write_report_csv(path: str | Path, report: DetectionReport) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(REPORT_HEADER + "\n")
        for row in report.rows:
            fh.write(
                f"{row.name},{row.total_frames},{row.num_events},{row.correct_detections}\n"
            )
        t = report.totals
        fh.write(f"{t.name},{t.total_frames},{t.num_events},{t.correct_detections}\n")
        acc = "n/a" if report.accuracy is None else f"{report.accuracy:.4f}"
        fh.write(f"accuracy={acc}\n")


def read_report_rows(path: str | Path) -> list[ReportRow]:
    """Read the per-video rows back (TOTAL row and footer are derived)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != REPORT_HEADER:
        raise InvalidValue(f"{path}: expected report header {REPORT_HEADER!r}")
    rows = []
    for line in lines[1:]:
        if not line.strip() or line.startswith("accuracy="):
            continue
        parts = line.rsplit(",", 3)
        if len(parts) != 4:
            raise InvalidValue(f"{path}: malformed report row {line!r}")
        name, frames, events, correct = parts
        if name == "TOTAL":
            continue
        rows.append(
            ReportRow(
                name=name,
                total_frames=int(frames),
                num_events=int(events),
                correct_detections=int(correct),
            )
        )
    return rows
