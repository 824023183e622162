"""Frame-level activity energy, hysteresis event detection, report
aggregation, and synthetic sequence generation.

Per frame the pipeline is: difference image -> proposal grid -> feature
matrix -> index tree -> low-rank/sparse decomposition -> per-proposal
activity scores -> one scalar energy. Hysteresis over the per-frame
energies yields event intervals.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadThresholds,
    EmptyScores,
    EventOutOfRange,
    NegativeCounts,
    TooFewFrames,
    UnsortedInput,
)
from .ingest import Frame, FrameSequence, extract_proposals, feature_matrix, frame_difference
from .lsmd import (
    LsmdParams,
    activity_scores,
    build_index_tree,
    clustering_points,
    decompose,
    motion_prior,
    uniform_weights,
)


@dataclass
class FrameScore:
    frame: int
    lsmd_energy: float
    tracker_conf: float = 0.0
    combined: float = 0.0


def make_frame_score(frame: int, lsmd_energy: float, tracker_conf: float, kappa: float) -> FrameScore:
    return FrameScore(
        frame=frame,
        lsmd_energy=lsmd_energy,
        tracker_conf=tracker_conf,
        combined=lsmd_energy * (1.0 - tracker_conf * kappa),
    )


@dataclass
class EventInterval:
    start: int
    end: int  # inclusive
    peak: float = 0.0

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"start {self.start} > end {self.end}")

    def length(self) -> int:
        return self.end - self.start + 1


@dataclass
class ReportRow:
    name: str
    total_frames: int
    num_events: int
    correct_detections: int


@dataclass
class DetectionReport:
    rows: list[ReportRow]
    totals: ReportRow
    accuracy: float | None  # None when no events were evaluated


@dataclass
class DetectorConfig:
    patch_size: int = 16
    stride: int = 8
    tree_k: int = 4
    lsmd: LsmdParams = field(default_factory=LsmdParams)
    group_weight: float = 1.0
    tau_on: float = 0.5
    tau_off: float = 0.35
    min_len: int = 5
    kappa: float = 0.0
    normalize: bool = True
    temporal_stride: int = 1
    lsmd_input: str = "difference"  # or "raw"
    seed: int = 0
    use_tracker: bool = False
    tracker: object | None = None  # TrackerConfig for the optional branch


# ---------------------------------------------------------------------------
# scoring and hysteresis
# ---------------------------------------------------------------------------

def frame_activity_energy(scores: np.ndarray) -> float:
    """Mean of the top 10% of proposal scores (at least one)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise EmptyScores("no proposal scores")
    k = max(1, math.ceil(0.1 * scores.size))
    top = np.partition(scores, scores.size - k)[scores.size - k :]
    return float(top.mean())


def detect_events(
    scores: list[FrameScore], tau_on: float, tau_off: float, min_len: int
) -> list[EventInterval]:
    """Hysteresis thresholding of the combined score."""
    if tau_off > tau_on:
        raise BadThresholds(f"tau_off {tau_off} > tau_on {tau_on}")
    if min_len < 1:
        raise ValueError("min_len must be >= 1")
    events: list[EventInterval] = []
    open_start = None
    peak = 0.0
    for sc in scores:
        if open_start is None:
            if sc.combined >= tau_on:
                open_start = sc.frame
                peak = sc.combined
        else:
            if sc.combined >= tau_off:
                peak = max(peak, sc.combined)
            else:
                if sc.frame - 1 - open_start + 1 >= min_len:
                    events.append(EventInterval(open_start, sc.frame - 1, peak))
                open_start = None
    if open_start is not None and scores:
        last = scores[-1].frame
        if last - open_start + 1 >= min_len:
            events.append(EventInterval(open_start, last, peak))
    return events


def _check_sorted(intervals: list[EventInterval], label: str) -> None:
    for a, b in zip(intervals, intervals[1:]):
        if b.start <= a.end:
            raise UnsortedInput(f"{label} intervals must be sorted and disjoint")


def _overlap(a: EventInterval, b: EventInterval) -> int:
    return min(a.end, b.end) - max(a.start, b.start) + 1


def match_events(detected: list[EventInterval], truth: list[EventInterval]) -> int:
    """Greedy one-to-one matching in time order. A truth event counts as
    correct when an unmatched detection overlaps it by at least 50% of
    the shorter interval."""
    _check_sorted(detected, "detected")
    _check_sorted(truth, "truth")
    used = [False] * len(detected)
    correct = 0
    for tr in truth:
        for i, det in enumerate(detected):
            if used[i]:
                continue
            ov = _overlap(det, tr)
            if ov >= 0.5 * min(det.length(), tr.length()):
                used[i] = True
                correct += 1
                break
    return correct


def aggregate_report(rows: list[ReportRow]) -> DetectionReport:
    """Echo rows, add a totals row and the overall accuracy."""
    for r in rows:
        if r.total_frames < 0 or r.num_events < 0 or r.correct_detections < 0:
            raise NegativeCounts(f"negative count in row {r.name!r}")
        if r.correct_detections > r.num_events:
            raise NegativeCounts(
                f"row {r.name!r}: correct {r.correct_detections} exceeds events {r.num_events}"
            )
    totals = ReportRow(
        name="TOTAL",
        total_frames=sum(r.total_frames for r in rows),
        num_events=sum(r.num_events for r in rows),
        correct_detections=sum(r.correct_detections for r in rows),
    )
    accuracy = totals.correct_detections / totals.num_events if totals.num_events else None
    return DetectionReport(rows=list(rows), totals=totals, accuracy=accuracy)


# ---------------------------------------------------------------------------
# synthetic sequences
# ---------------------------------------------------------------------------

@dataclass
class SynthSpec:
    h: int = 64
    w: int = 64
    n_frames: int = 100
    events: list[tuple[int, int, str]] = field(default_factory=list)


_KINDS = ("burst", "swap")


def _render(bg: np.ndarray, centers: np.ndarray, amps: np.ndarray, sigma: float) -> np.ndarray:
    h, w = bg.shape
    yy, xx = np.mgrid[0:h, 0:w]
    img = bg.copy()
    for (cy, cx), amp in zip(centers, amps):
        img += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma * sigma))
    # quantize to the 8-bit grid the PGM pipeline delivers; this also snaps
    # far-field Gaussian tails to exact zero difference
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


def synth_sequence(spec: SynthSpec, seed: int = 0) -> tuple[FrameSequence, list[EventInterval]]:
    """Two Gaussian blobs over static noise, as seen by a stationary
    camera: outside events the scene is static (motion 0 <= 0.5 px/frame),
    inside events blobs move 4-8 px/frame (burst: one blob oscillates;
    swap: the blobs trade places). Frames are quantized to the 8-bit grid
    the PGM pipeline delivers."""
    for start, end, kind in spec.events:
        if not (0 <= start <= end < spec.n_frames):
            raise EventOutOfRange(f"event ({start}, {end}) outside [0, {spec.n_frames})")
        if kind not in _KINDS:
            raise EventOutOfRange(f"unknown event kind {kind!r}")

    rng = np.random.default_rng(seed)
    bg = 0.08 + 0.02 * rng.random((spec.h, spec.w))
    margin = 12.0
    pos = np.array(
        [
            [rng.uniform(margin, spec.h - margin), rng.uniform(margin, spec.w * 0.45)],
            [rng.uniform(margin, spec.h - margin), rng.uniform(spec.w * 0.55, spec.w - margin)],
        ]
    )
    amps = np.array([0.8, 0.7])
    sigma = 2.5

    active: dict[int, tuple[int, int, str]] = {}
    for ev in spec.events:
        for t in range(ev[0], ev[1] + 1):
            active[t] = ev

    swap_anchor: dict[tuple[int, int], np.ndarray] = {}
    frames = []
    for t in range(spec.n_frames):
        frames.append(Frame(pixels=_render(bg, pos, amps, sigma), index=t))
        if t + 1 >= spec.n_frames:
            break
        ev = active.get(t + 1)
        if ev is None:
            pass  # static scene between events
        elif ev[2] == "burst":
            # blob 0 jumps diagonally around its base point, ~4.5 px/frame
            start, _end, _ = ev
            phase = (t + 1) - start
            offset = 3.2 if phase % 2 else -3.2
            pos = pos.copy()
            pos[0, 0] += offset
            pos[0, 1] += -offset
        else:  # swap
            key = (ev[0], ev[1])
            if key not in swap_anchor:
                swap_anchor[key] = pos.copy()
            anchor = swap_anchor[key]
            dur = max(ev[1] - ev[0], 1)
            u = ((t + 1) - ev[0]) / dur
            lerp = anchor[::-1] * u + anchor * (1.0 - u)
            # alternating row wobble tops the lerp step up to ~5 px/frame
            step = np.linalg.norm(anchor[::-1] - anchor, axis=1) / dur
            wob = 0.5 * np.sqrt(np.maximum(25.0 - step**2, 0.0))
            sign = 1.0 if ((t + 1) - ev[0]) % 2 else -1.0
            pos = lerp + np.stack([sign * wob, np.zeros(2)], axis=1)
        pos[:, 0] = np.clip(pos[:, 0], 2.0, spec.h - 3.0)
        pos[:, 1] = np.clip(pos[:, 1], 2.0, spec.w - 3.0)

    truth = [EventInterval(s, e) for s, e, _k in sorted(spec.events)]
    return FrameSequence(frames=frames, name=f"synth-{seed}"), truth


# ---------------------------------------------------------------------------
# the end-to-end detection pipeline
# ---------------------------------------------------------------------------

def _worker_count() -> int:
    raw = os.environ.get("MOTION_LSMD_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n == 0:
        n = os.cpu_count() or 1
    return max(1, n)


def _frame_energy(seq: FrameSequence, t: int, cfg: DetectorConfig) -> float:
    if cfg.lsmd_input == "raw":
        frame = seq.frames[t]
    else:
        frame = frame_difference(seq.frames[t - 1], seq.frames[t])
    proposals = extract_proposals(frame, cfg.patch_size, cfg.stride)
    fm = feature_matrix(proposals)
    h, w = frame.shape
    tree = build_index_tree(
        clustering_points(fm, h, w), k=cfg.tree_k, seed=cfg.seed * 7919 + t
    )
    weights = uniform_weights(tree, cfg.group_weight)
    dec = decompose(fm, tree, weights, cfg.lsmd)
    scores = activity_scores(dec.S, proposals, motion_prior(proposals))
    return frame_activity_energy(scores)


def run_detection(
    seq: FrameSequence, config: DetectorConfig | None = None
) -> tuple[list[FrameScore], list[EventInterval]]:
    """Score frames 1..T-1 and extract events by hysteresis.

    Thresholds are interpreted in normalized-energy units (relative to
    the sequence maximum) unless config.normalize is off. Per-frame
    decompositions run on a thread pool capped by MOTION_LSMD_THREADS.
    """
    cfg = config or DetectorConfig()
    if len(seq) < 2:
        raise TooFewFrames("need at least two frames")

    compute_frames = list(range(1, len(seq), cfg.temporal_stride))
    workers = _worker_count()
    if workers > 1 and len(compute_frames) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            energies = list(pool.map(lambda t: _frame_energy(seq, t, cfg), compute_frames))
    else:
        energies = [_frame_energy(seq, t, cfg) for t in compute_frames]
    by_frame = dict(zip(compute_frames, energies))

    tracker_conf = {t: 0.0 for t in range(1, len(seq))}
    if cfg.use_tracker:
        from .tracker import AffineState, TrackerConfig, track_sequence

        # auto-init on the strongest first difference
        d0 = frame_difference(seq.frames[0], seq.frames[1])
        peak = np.unravel_index(int(np.argmax(d0.pixels)), d0.pixels.shape)
        init = AffineState(l_x=float(peak[1]), l_y=float(peak[0]))
        tcfg = cfg.tracker if cfg.tracker is not None else TrackerConfig(seed=cfg.seed)
        for r in track_sequence(seq, init, tcfg):
            tracker_conf[r.frame_index] = r.confidence

    scores: list[FrameScore] = []
    held = 0.0
    for t in range(1, len(seq)):
        held = by_frame.get(t, held)  # hold energy between temporal strides
        scores.append(make_frame_score(t, held, tracker_conf[t], cfg.kappa))

    tau_on, tau_off = cfg.tau_on, cfg.tau_off
    if cfg.normalize:
        peak = max((sc.combined for sc in scores), default=0.0)
        tau_on, tau_off = tau_on * peak, tau_off * peak
        if peak <= 0.0:
            return scores, []
    events = detect_events(scores, tau_on, tau_off, cfg.min_len)
    return scores, events
