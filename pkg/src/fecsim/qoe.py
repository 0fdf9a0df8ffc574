"""Loss propagation through the GoP, frame-copy concealment and quality metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .video import FrameType, GopLayout, PixelFrame

MAX_VALUE = 255
GRAY = 128


def propagate_gop_damage(lost_frames: Iterable[int], layout: GopLayout, gop_start: int = 0,
                         gop_length: int | None = None) -> list[bool]:
    """Impaired flags for the frames of one GoP (index 0 = ``gop_start``).

    A lost B-frame only impairs itself, a lost P-frame impairs itself and the
    rest of the GoP, a lost I-frame the whole GoP.  ``gop_length`` may be
    shorter than the layout for a truncated final GoP.
    """
    n = layout.n_ratio if gop_length is None else gop_length
    damaged = [False] * n
    for idx in lost_frames:
        off = idx - gop_start
        if not 0 <= off < n:
            raise ValueError(f"frame {idx} is outside the GoP starting at {gop_start}")
        kind = layout.frame_type(idx)
        if kind is FrameType.I:
            return [True] * n
        if kind is FrameType.P:
            for j in range(off, n):
                damaged[j] = True
        else:
            damaged[off] = True
    return damaged


def damage_map(lost_frames: Iterable[int], layout: GopLayout, total_frames: int) -> list[bool]:
    """Impaired flags for a whole trace."""
    lost = sorted(set(lost_frames))
    out = []
    for start in range(0, total_frames, layout.n_ratio):
        length = min(layout.n_ratio, total_frames - start)
        in_gop = [i for i in lost if start <= i < start + length]
        out.extend(propagate_gop_damage(in_gop, layout, start, length))
    return out


def frame_copy_conceal(display: Sequence[PixelFrame], damage: Sequence[bool]) -> list[PixelFrame]:
    if len(display) != len(damage):
        raise ValueError("display and damage map differ in length")
    out, last = [], None
    for frame, bad in zip(display, damage):
        if not bad:
            last = frame
            out.append(frame)
        elif last is not None:
            out.append(last)
        else:
            out.append(PixelFrame.filled(frame.width, frame.height, GRAY))
    return out


def _pair(a: PixelFrame, b: PixelFrame) -> tuple[np.ndarray, np.ndarray]:
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError("frames differ in size")
    return a.samples.astype(np.float64), b.samples.astype(np.float64)


def mse(a: PixelFrame, b: PixelFrame) -> float:
    x, y = _pair(a, b)
    return float(np.mean((x - y) ** 2))


def psnr(mse_value: float, max_value: float = MAX_VALUE) -> float:
    """Decibels; ``math.inf`` for identical frames."""
    if mse_value < 0:
        raise ValueError("mse must be >= 0")
    if mse_value == 0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / mse_value)


@dataclass(frozen=True)
class SsimWeights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) <= 0:
            raise ValueError("SSIM exponents must be > 0")


C1 = (0.01 * MAX_VALUE) ** 2
C2 = (0.03 * MAX_VALUE) ** 2
C3 = C2 / 2
WINDOW = 8
STRIDE = 4


def _windows(x: np.ndarray) -> np.ndarray:
    v = np.lib.stride_tricks.sliding_window_view(x, (WINDOW, WINDOW))
    return v[::STRIDE, ::STRIDE].reshape(-1, WINDOW * WINDOW)


def ssim(a: PixelFrame, b: PixelFrame, weights: SsimWeights = SsimWeights()) -> float:
    """Mean over 8x8 windows (stride 4) of l^alpha * c^beta * s^gamma.

    Windows with a negative structure term contribute through
    ``sign(s) * |s|^gamma`` so non-integer exponents stay real.
    """
    x, y = _pair(a, b)
    if a.width < WINDOW or a.height < WINDOW:
        raise ValueError(f"frames must be at least {WINDOW}x{WINDOW}")
    wx, wy = _windows(x), _windows(y)
    mx, my = wx.mean(axis=1), wy.mean(axis=1)
    dx, dy = wx - mx[:, None], wy - my[:, None]
    vx, vy = (dx * dx).mean(axis=1), (dy * dy).mean(axis=1)
    cov = (dx * dy).mean(axis=1)
    # sqrt(vx * vy) rather than sx * sy keeps ssim(a, a) at exactly 1
    sxy = np.sqrt(vx * vy)
    lum = (2 * mx * my + C1) / (mx * mx + my * my + C1)
    con = (2 * sxy + C2) / (vx + vy + C2)
    struct = (cov + C3) / (sxy + C3)
    s_term = np.sign(struct) * np.abs(struct) ** weights.gamma
    vals = lum ** weights.alpha * con ** weights.beta * s_term
    return float(vals.mean())


def overhead_pct(sent_bytes: float, original_bytes: float) -> float:
    """Extra bytes as a fraction of the original (0.38 means 38 %)."""
    if original_bytes <= 0:
        raise ValueError("original_bytes must be > 0")
    if sent_bytes < original_bytes:
        raise ValueError("sent bytes cannot be below the original size")
    return (sent_bytes - original_bytes) / original_bytes


def decodable_frame_ratio(damage: Sequence[bool]) -> float:
    if len(damage) == 0:
        raise ValueError("damage map is empty")
    return sum(1 for d in damage if not d) / len(damage)


@dataclass(frozen=True)
class QoeReport:
    mechanism: str
    seed: int
    plr_setting: float
    decodable_ratio: float
    mean_mse: float
    mean_psnr_db: float
    mean_ssim: float
    overhead_pct: float
    frames: int = 0
    frames_lost: int = 0
    packets_sent: int = 0
    packets_lost: int = 0

    def __post_init__(self):
        if not 0.0 <= self.decodable_ratio <= 1.0:
            raise ValueError("decodable_ratio outside [0, 1]")
        if self.overhead_pct < 0:
            raise ValueError("overhead must be >= 0")


def quality_summary(reference: Sequence[PixelFrame], shown: Sequence[PixelFrame]) -> tuple[float, float, float]:
    """Mean MSE, sequence PSNR and mean SSIM over paired frames.

    Intact frames have infinite PSNR, so the sequence PSNR is taken from the
    mean MSE; it is ``inf`` only when every frame is identical.
    """
    m = [mse(a, b) for a, b in zip(reference, shown)]
    mean_mse = math.fsum(m) / len(m)
    # concealed frames repeat, so cache SSIM per distinct pair
    cache: dict = {}
    s = []
    for a, b in zip(reference, shown):
        key = (id(a), id(b))
        if key not in cache:
            cache[key] = 1.0 if a is b else ssim(a, b)
        s.append(cache[key])
    return mean_mse, psnr(mean_mse), math.fsum(s) / len(s)


REPORT_COLUMNS = ["mechanism", "seed", "plr_setting", "decodable_ratio", "mean_psnr_db", "mean_ssim", "overhead_pct"]


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.6f}"
    return str(x)


def reports_to_csv(reports: Iterable[QoeReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        w.writerow([_fmt(getattr(r, c)) for c in REPORT_COLUMNS])
    return buf.getvalue()
