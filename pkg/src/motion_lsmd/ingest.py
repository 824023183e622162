"""Frame loading, differencing, affine patch warps, proposal grids and
feature-matrix assembly.

All functions are pure; nothing here keeps mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

import numpy as np

from . import _kernels
from .errors import (
    DimensionMismatch,
    EmptyProposals,
    InconsistentDimensions,
    MalformedPgm,
    MissingSource,
    NonPositiveScale,
    PatchTooLarge,
    TooFewFrames,
)

if TYPE_CHECKING:
    from .tracker import AffineState

# A patch is a plain 2-D float array with values in [0, 1]; consumers
# validate the size they need (template ops require the canonical size).
Patch = np.ndarray

CANONICAL_SIZE = 32
CANONICAL_HALF = CANONICAL_SIZE // 2


@dataclass
class Frame:
    """One grayscale raster with intensities in [0, 1]."""

    pixels: np.ndarray
    index: int = 0

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2:
            raise ValueError("frame pixels must be a 2-D array")
        h, w = self.pixels.shape
        if h < 8 or w < 8:
            raise ValueError(f"frame must be at least 8x8, got {h}x{w}")
        if self.index < 0:
            raise ValueError("frame index must be non-negative")
        lo, hi = float(self.pixels.min()), float(self.pixels.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"pixel values outside [0,1]: min={lo}, max={hi}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


@dataclass
class FrameSequence:
    """Ordered frames with consecutive indices starting at 0."""

    frames: list[Frame]
    name: str = ""

    def __post_init__(self):
        if not self.frames:
            raise ValueError("empty frame sequence")
        shape = self.frames[0].shape
        for i, f in enumerate(self.frames):
            if f.index != i:
                raise ValueError(f"frame {i} has index {f.index}")
            if f.shape != shape:
                raise InconsistentDimensions(
                    f"frame {i} is {f.shape}, expected {shape}"
                )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape


@dataclass
class ProposalSet:
    """Axis-aligned grid patches cut from one frame."""

    patches: list[Patch]
    coords: list[tuple[int, int]]
    grid: tuple[int, int, int] = (0, 0, 1)  # (rows, cols, stride)

    def __post_init__(self):
        if len(self.patches) != len(self.coords):
            raise ValueError("patches and coords length mismatch")

    def __len__(self) -> int:
        return len(self.patches)


@dataclass
class FeatureMatrix:
    """d x n matrix; column j is the unit-normalized vectorized patch j."""

    data: np.ndarray
    coords: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError("feature matrix must be 2-D")

    @property
    def n_columns(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# PGM I/O and manifests
# ---------------------------------------------------------------------------

def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary (P5, maxval 255) PGM into a float array in [0, 1]."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise MissingSource(f"cannot read {path}: {exc}") from exc

    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(raw):
            ch = raw[pos : pos + 1]
            if ch == b"#":  # comment runs to end of line
                while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MalformedPgm(f"{path}: truncated header")
        return raw[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise MalformedPgm(f"{path}: bad magic {magic!r}, expected P5")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise MalformedPgm(f"{path}: non-numeric header field") from exc
    if width <= 0 or height <= 0:
        raise MalformedPgm(f"{path}: bad dimensions {width}x{height}")
    if maxval != 255:
        raise MalformedPgm(f"{path}: maxval {maxval}, only 255 supported")
    pos += 1  # single whitespace byte after maxval
    payload = raw[pos : pos + width * height]
    if len(payload) < width * height:
        raise MalformedPgm(f"{path}: truncated payload")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return pixels.astype(np.float64) / 255.0


def write_pgm(path: str | Path, pixels: np.ndarray) -> None:
    """Write a [0, 1] float array as a binary P5 PGM."""
    arr = np.asarray(pixels, dtype=np.float64)
    data = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def _frame_paths(source: Path) -> list[Path]:
    if source.is_dir():
        paths = sorted(p for p in source.iterdir() if p.suffix.lower() == ".pgm")
        return paths
    # manifest: one relative path per line, '#' comments ignored
    lines = source.read_text(encoding="utf-8").splitlines()
    paths = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        paths.append((source.parent / line).resolve())
    return paths


def load_frame_sequence(source: str | Path) -> FrameSequence:
    """Load a sequence from a directory of PGM files or a manifest file."""
    source = Path(source)
    if not source.exists():
        raise MissingSource(f"no such source: {source}")
    paths = _frame_paths(source)
    if len(paths) < 2:
        raise TooFewFrames(f"{source}: found {len(paths)} frames, need >= 2")
    frames = []
    shape = None
    for i, p in enumerate(paths):
        if not p.exists():
            raise MissingSource(f"manifest entry missing: {p}")
        pixels = read_pgm(p)
        if shape is None:
            shape = pixels.shape
        elif pixels.shape != shape:
            raise InconsistentDimensions(
                f"{p}: {pixels.shape} differs from first frame {shape}"
            )
        frames.append(Frame(pixels=pixels, index=i))
    return FrameSequence(frames=frames, name=source.stem)


# ---------------------------------------------------------------------------
# frame differencing
# ---------------------------------------------------------------------------

def frame_difference(prev: Frame, cur: Frame) -> Frame:
    """Elementwise absolute difference |cur - prev|, indexed like cur."""
    if prev.shape != cur.shape:
        raise DimensionMismatch(f"{prev.shape} vs {cur.shape}")
    return Frame(pixels=np.abs(cur.pixels - prev.pixels), index=cur.index)


# ---------------------------------------------------------------------------
# affine patch warping
# ---------------------------------------------------------------------------

def warp_sample_grid(
    state: "AffineState", out_h: int, out_w: int
) -> tuple[np.ndarray, np.ndarray]:
    """Sample coordinates (rows, cols) for each output pixel of a warp.

    The canonical patch grid spans [-16, 16)^2; it is scaled by (s, s*alpha),
    sheared by phi, rotated by theta and translated to (l_x, l_y).
    """
    gy = -CANONICAL_HALF + np.arange(out_h) * (CANONICAL_SIZE / out_h)
    gx = -CANONICAL_HALF + np.arange(out_w) * (CANONICAL_SIZE / out_w)
    gxx, gyy = np.meshgrid(gx, gy)
    sx = state.s * gxx
    sy = state.s * state.alpha * gyy
    x1 = sx + state.phi * sy
    y1 = sy
    ct, st = np.cos(state.theta), np.sin(state.theta)
    cols = state.l_x + ct * x1 - st * y1
    rows = state.l_y + st * x1 + ct * y1
    return rows, cols


def warp_patch(frame: Frame, state: "AffineState", out_h: int, out_w: int) -> Patch:
    """Bilinear sample of the affine-warped patch; outside reads as 0."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be >= 1")
    if not (state.s > 0 and state.alpha > 0):
        raise NonPositiveScale(f"s={state.s}, alpha={state.alpha}")
    rows, cols = warp_sample_grid(state, out_h, out_w)
    return _kernels.bilinear_sample(frame.pixels, rows, cols)


# ---------------------------------------------------------------------------
# proposal grids and feature matrices
# ---------------------------------------------------------------------------

def extract_proposals(frame: Frame, patch_size: int, stride: int) -> ProposalSet:
    """Regular grid of axis-aligned patches fully inside the frame."""
    h, w = frame.shape
    if patch_size > min(h, w):
        raise PatchTooLarge(f"patch {patch_size} exceeds frame {h}x{w}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    rows = (h - patch_size) // stride + 1
    cols = (w - patch_size) // stride + 1
    half = patch_size // 2
    patches: list[Patch] = []
    coords: list[tuple[int, int]] = []
    for ri in range(rows):
        r = ri * stride
        for ci in range(cols):
            c = ci * stride
            patches.append(frame.pixels[r : r + patch_size, c : c + patch_size].copy())
            coords.append((r + half, c + half))
    return ProposalSet(patches=patches, coords=coords, grid=(rows, cols, stride))


def unit_columns(mat: np.ndarray) -> np.ndarray:
    """Scale each column to unit l2 norm; zero columns stay zero."""
    norms = np.linalg.norm(mat, axis=0)
    safe = np.where(norms > 0.0, norms, 1.0)
    return mat / safe


def feature_matrix(proposals: ProposalSet) -> FeatureMatrix:
    """Column j = unit-normalized row-major vectorization of patch j."""
    if len(proposals) == 0:
        raise EmptyProposals("no proposals to featurize")
    cols = np.stack([p.reshape(-1) for p in proposals.patches], axis=1)
    return FeatureMatrix(data=unit_columns(cols), coords=list(proposals.coords))
