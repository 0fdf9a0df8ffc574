"""Frame-metadata video traces, GoP layout and synthetic luma frames."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage


class FrameType(str, enum.Enum):
    I = "I"
    P = "P"
    B = "B"

    @property
    def is_anchor(self) -> bool:
        return self is not FrameType.B


@dataclass(frozen=True)
class FrameRecord:
    index: int
    kind: FrameType
    size_bytes: int
    mv_count: int = 0
    mv_total_distance: float = 0.0
    mb_width: int = 16
    mb_height: int = 16
    mb_count: int = 0

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("frame index must be >= 0")
        if self.size_bytes <= 0:
            raise ValueError("size_bytes must be > 0")
        if self.mv_count < 0 or self.mv_total_distance < 0 or self.mb_count < 0:
            raise ValueError("motion-vector aggregates must be non-negative")
        if self.mb_width <= 0 or self.mb_height <= 0:
            raise ValueError("macroblock dimensions must be > 0")
        if self.kind is FrameType.I and (self.mv_count or self.mv_total_distance):
            raise ValueError("I-frames carry no motion vectors")
        if self.mv_count == 0 and self.mv_total_distance:
            raise ValueError("mv_total_distance must be 0 when mv_count is 0")


@dataclass(frozen=True)
class GopLayout:
    """GoP of ``n_ratio`` frames with an anchor every ``m_ratio`` frames.

    A 19-frame GoP with two B-frames between anchors is ``GopLayout(19, 3)``.
    """

    n_ratio: int
    m_ratio: int

    def __post_init__(self):
        if self.n_ratio < 1:
            raise ValueError("n_ratio must be >= 1")
        if not 1 <= self.m_ratio <= self.n_ratio:
            raise ValueError("m_ratio must satisfy 1 <= m_ratio <= n_ratio")

    @property
    def length(self) -> int:
        return self.n_ratio

    def frame_type(self, index: int) -> FrameType:
        pos = index % self.n_ratio
        if pos == 0:
            return FrameType.I
        return FrameType.P if pos % self.m_ratio == 0 else FrameType.B

    def types(self) -> list[FrameType]:
        return [self.frame_type(i) for i in range(self.n_ratio)]

    def anchor_count(self) -> int:
        return 1 + (self.n_ratio - 1) // self.m_ratio


@dataclass(frozen=True)
class PixelFrame:
    width: int
    height: int
    samples: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.shape != (self.height, self.width):
            raise ValueError(
                f"samples shape {s.shape} does not match {self.height}x{self.width}"
            )
        if s.dtype != np.uint8:
            if s.min() < 0 or s.max() > 255:
                raise ValueError("samples must lie in [0, 255]")
            s = s.astype(np.uint8)
        s = s.copy()
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @classmethod
    def filled(cls, width: int, height: int, value: int) -> "PixelFrame":
        return cls(width, height, np.full((height, width), value, dtype=np.uint8))

    def __eq__(self, other):
        if not isinstance(other, PixelFrame):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and bool(
            np.array_equal(self.samples, other.samples)
        )

    __hash__ = None


@dataclass(frozen=True)
class VideoTrace:
    frames: tuple[FrameRecord, ...]
    gop: GopLayout
    width: int = 352
    height: int = 288
    fps: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        for i, f in enumerate(self.frames):
            if f.index != i:
                raise ValueError(f"frame indices must be contiguous from 0 (got {f.index} at {i})")
            if f.kind is not self.gop.frame_type(i):
                raise ValueError(
                    f"frame {i} is {f.kind.value}, GoP layout expects {self.gop.frame_type(i).value}"
                )

    def __len__(self):
        return len(self.frames)

    @property
    def gop_count(self) -> int:
        return math.ceil(len(self.frames) / self.gop.n_ratio)

    def gops(self) -> list[tuple[FrameRecord, ...]]:
        n = self.gop.n_ratio
        return [self.frames[i:i + n] for i in range(0, len(self.frames), n)]

    @property
    def total_bytes(self) -> int:
        return sum(f.size_bytes for f in self.frames)


def generate_gop_layout(n_ratio: int, m_ratio: int, total_frames: int) -> list[FrameType]:
    if n_ratio < 1 or m_ratio < 1:
        raise ValueError("GoP ratios must be >= 1")
    if total_frames < 1:
        raise ValueError("total_frames must be >= 1")
    out = []
    for i in range(total_frames):
        pos = i % n_ratio
        if pos == 0:
            out.append(FrameType.I)
        elif pos % m_ratio == 0:
            out.append(FrameType.P)
        else:
            out.append(FrameType.B)
    return out


def relative_position(frame_index: int, layout: GopLayout) -> int:
    """Rank of an anchor frame inside its GoP: 1 for the I-frame, 2 for the first P, ..."""
    kind = layout.frame_type(frame_index)
    if kind is FrameType.B:
        raise ValueError(f"frame {frame_index} is a B-frame and has no relative position")
    return 1 + (frame_index % layout.n_ratio) // layout.m_ratio


def packetize(frame: FrameRecord, payload_bytes: int) -> int:
    if payload_bytes <= 0:
        raise ValueError("payload_bytes must be > 0")
    return max(1, -(-frame.size_bytes // payload_bytes))


# Per-profile mean frame sizes (bytes) and per-predicted-frame motion-vector
# distance sums.  Size fractions sit in the MINT-FEC frame-size cores
# (Low -> I LARGE / P,B SMALL, High -> I SMALL / P,B LARGE); distances sit in
# the uavFEC motion cores.
_PROFILES = {
    "Low": {"sizes": (36000, 6600, 3000), "mv_distance": 5000.0, "speed": 0.5},
    "Medium": {"sizes": (33000, 16800, 10200), "mv_distance": 45000.0, "speed": 2.0},
    "High": {"sizes": (26000, 39000, 35100), "mv_distance": 150000.0, "speed": 6.0},
}


def _profile_name(motion_profile) -> str:
    name = getattr(motion_profile, "name", motion_profile)
    name = str(name).capitalize()
    if name not in _PROFILES:
        raise ValueError(f"unknown motion profile {motion_profile!r}")
    return name


def synthesize_video(
    layout: GopLayout,
    gop_count: int,
    motion_profile,
    seed: int,
    width: int = 352,
    height: int = 288,
    fps: float = 30.0,
    mb_size: int = 16,
    with_pixels: bool = True,
) -> tuple[VideoTrace, list[PixelFrame]]:
    """Build a deterministic frame trace plus matching luma frames.

    ``motion_profile`` is an ``IntensityClass`` or one of ``"low"``,
    ``"medium"``, ``"high"``.  The luma frames are a smooth periodic texture
    translated by a per-frame displacement that grows with the profile, so
    frame-copy concealment has a measurable cost.  ``with_pixels=False``
    skips them and returns an empty list (the trace is unchanged).
    """
    if gop_count < 1:
        raise ValueError("gop_count must be >= 1")
    prof = _PROFILES[_profile_name(motion_profile)]
    rng = np.random.default_rng(seed)
    mb_count = (width // mb_size) * (height // mb_size)
    partitions = (width * height) // 16
    sizes = dict(zip((FrameType.I, FrameType.P, FrameType.B), prof["sizes"]))

    frames = []
    total = gop_count * layout.n_ratio
    for i, kind in enumerate(generate_gop_layout(layout.n_ratio, layout.m_ratio, total)):
        size = max(1, int(round(sizes[kind] * rng.lognormal(0.0, 0.1))))
        if kind is FrameType.I:
            mv_count, dist = 0, 0.0
        else:
            mv_count = int(rng.integers(partitions // 2, partitions + 1))
            dist = round(prof["mv_distance"] * float(rng.lognormal(0.0, 0.15)), 3)
        frames.append(
            FrameRecord(i, kind, size, mv_count, dist, mb_size, mb_size, mb_count)
        )
    trace = VideoTrace(tuple(frames), layout, width, height, fps)
    if not with_pixels:
        return trace, []

    pixels = _render_pixels(rng, total, width, height, prof["speed"])
    return trace, pixels


def _render_pixels(rng, count: int, width: int, height: int, speed: float) -> list[PixelFrame]:
    texture = ndimage.gaussian_filter(rng.normal(0.0, 1.0, (height, width)), 3.0, mode="wrap")
    texture = (texture - texture.mean()) / (texture.std() + 1e-12)
    texture = 128.0 + 45.0 * texture
    angle = rng.uniform(0.0, 2.0 * math.pi)
    step = speed * np.array([math.sin(angle), math.cos(angle)])
    pixels = []
    for i in range(count):
        dy, dx = np.rint(step * i).astype(int)
        img = np.roll(texture, (dy, dx), axis=(0, 1)) + rng.normal(0.0, 1.5, (height, width))
        pixels.append(PixelFrame(width, height, np.clip(np.rint(img), 0, 255).astype(np.uint8)))
    return pixels


def synthesize_pixels(trace: VideoTrace, motion_profile, seed: int) -> list[PixelFrame]:
    """Luma frames for an existing trace (e.g. one read from a file)."""
    prof = _PROFILES[_profile_name(motion_profile)]
    return _render_pixels(np.random.default_rng(seed), len(trace), trace.width, trace.height, prof["speed"])


# ---- trace file ------------------------------------------------------------

def dumps_trace(trace: VideoTrace) -> str:
    lines = [f"{trace.width},{trace.height},{_num(trace.fps)},{trace.gop.n_ratio},{trace.gop.m_ratio}"]
    for f in trace.frames:
        lines.append(
            f"{f.index},{f.kind.value},{f.size_bytes},{f.mv_count},{_num(f.mv_total_distance)},"
            f"{f.mb_width},{f.mb_height},{f.mb_count}"
        )
    return "\n".join(lines) + "\n"


def loads_trace(text: str) -> VideoTrace:
    rows = [ln for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise ValueError("empty trace file")
    try:
        w, h, fps, n, m = rows[0].split(",")
        gop = GopLayout(int(n), int(m))
        frames = []
        for lineno, row in enumerate(rows[1:], start=2):
            parts = row.split(",")
            if len(parts) != 8:
                raise ValueError(f"line {lineno}: expected 8 fields, got {len(parts)}")
            idx, kind, size, mvc, mvd, mbw, mbh, mbc = parts
            frames.append(
                FrameRecord(int(idx), FrameType(kind.strip()), int(size), int(mvc),
                            float(mvd), int(mbw), int(mbh), int(mbc))
            )
    except ValueError:
        raise
    except Exception as exc:  # malformed header or field
        raise ValueError(f"malformed trace: {exc}") from exc
    return VideoTrace(tuple(frames), gop, int(w), int(h), float(fps))


def write_trace(trace: VideoTrace, path) -> None:
    Path(path).write_text(dumps_trace(trace), encoding="ascii", newline="\n")


def read_trace(path) -> VideoTrace:
    return loads_trace(Path(path).read_text(encoding="ascii"))


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))
