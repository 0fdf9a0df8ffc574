"""Network-condition inputs: windowed loss rate, node density from convex hulls."""

from __future__ import annotations

import csv
from collections import namedtuple
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class NodePosition:
    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError("node coordinates must be finite")


@dataclass(frozen=True)
class NetworkSnapshot:
    positions: tuple[NodePosition, ...]
    recent_plr: float = 0.0
    snr_db: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(self.positions))
        if not self.positions:
            raise ValueError("snapshot needs at least one node")
        if not 0.0 <= self.recent_plr <= 1.0:
            raise ValueError("recent_plr must lie in [0, 1]")


@dataclass(frozen=True)
class Hull:
    """Counter-clockwise vertices; fewer than 3 vertices means a degenerate hull."""

    vertices: tuple[tuple[float, float], ...]
    area: float

    @property
    def degenerate(self) -> bool:
        return self.area <= 0.0


def _xy(points) -> list[tuple[float, float]]:
    out = []
    for p in points:
        if isinstance(p, NodePosition):
            out.append((float(p.x), float(p.y)))
        else:
            x, y = p
            out.append((float(x), float(y)))
    return out


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def polygon_area(vertices) -> float:
    v = _xy(vertices)
    if len(v) < 3:
        return 0.0
    s = 0.0
    for (x0, y0), (x1, y1) in zip(v, v[1:] + v[:1]):
        s += x0 * y1 - x1 * y0
    return abs(s) / 2.0


def _finish(vertices: list[tuple[float, float]]) -> Hull:
    if len(vertices) < 3:
        return Hull(tuple(vertices), 0.0)
    return Hull(tuple(vertices), polygon_area(vertices))


def quickhull(points) -> Hull:
    """Exact convex hull by recursive farthest-point splitting.

    Vertices are strict corners (collinear boundary points dropped), listed
    counter-clockwise starting from the lowest-x point.
    """
    pts = sorted(set(_xy(points)))
    if len(pts) < 3:
        return Hull(tuple(pts), 0.0)
    left, right = pts[0], pts[-1]

    def side(a, b, cand):
        # hull chain from a to b over the points strictly right of a->b
        if not cand:
            return []
        far = max(cand, key=lambda p: (-_cross(a, b, p), p))
        return (side(a, far, [p for p in cand if _cross(a, far, p) < 0])
                + [far]
                + side(far, b, [p for p in cand if _cross(far, b, p) < 0]))

    below = [p for p in pts if _cross(left, right, p) < 0]
    above = [p for p in pts if _cross(left, right, p) > 0]
    if not below and not above:
        return Hull((left, right), 0.0)
    chain = [left] + side(left, right, below) + [right] + side(right, left, above)
    return _finish(chain)


def _monotone_chain(pts: list[tuple[float, float]]) -> list[tuple[float, float]]:
    pts = sorted(set(pts))
    if len(pts) < 3:
        return pts
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def bfp_hull(points, strips: int) -> Hull:
    """Approximate hull from per-strip vertical extremes (Bentley-Faust-Preparata).

    One pass over the points fills ``strips`` equal-width vertical strips with
    their lowest and highest point; the global x-extremes (lowest and highest
    y among ties) are always kept.  A monotone chain over the at most
    2 * strips + 4 candidates gives the polygon, which lies inside the exact
    hull.
    """
    if strips < 1:
        raise ValueError("strips must be >= 1")
    pts = _xy(points)
    if len(pts) < 3:
        return Hull(tuple(sorted(set(pts))), 0.0)
    xs = [p[0] for p in pts]
    xmin, xmax = min(xs), max(xs)
    width = (xmax - xmin) / strips
    lo: list = [None] * strips
    hi: list = [None] * strips
    xl = [None, None]  # lowest / highest point at xmin
    xr = [None, None]
    for p in pts:
        x, y = p
        if x == xmin:
            xl[0] = p if xl[0] is None or y < xl[0][1] else xl[0]
            xl[1] = p if xl[1] is None or y > xl[1][1] else xl[1]
        if x == xmax:
            xr[0] = p if xr[0] is None or y < xr[0][1] else xr[0]
            xr[1] = p if xr[1] is None or y > xr[1][1] else xr[1]
        i = min(strips - 1, int((x - xmin) / width)) if width > 0 else 0
        if lo[i] is None or y < lo[i][1]:
            lo[i] = p
        if hi[i] is None or y > hi[i][1]:
            hi[i] = p
    cand = [p for p in lo + hi + xl + xr if p is not None]
    return _finish(_monotone_chain(cand))


class DegenerateDensityError(ValueError):
    """Hull has zero area (fewer than 3 non-collinear nodes)."""


def density(snapshot: NetworkSnapshot, hull: Hull) -> float:
    if hull.area <= 0.0:
        raise DegenerateDensityError("hull area is zero; density undefined")
    return len(snapshot.positions) / hull.area


def snapshot_density(snapshot: NetworkSnapshot, method: str = "quick", strips: int = 64,
                     fallback: float = 0.0) -> float:
    """Density with the sparse-network fallback for degenerate hulls."""
    pts = snapshot.positions
    hull = quickhull(pts) if method == "quick" else bfp_hull(pts, strips)
    try:
        return density(snapshot, hull)
    except DegenerateDensityError:
        return fallback


WindowedPlr = namedtuple("WindowedPlr", ["value", "empty"])


def windowed_plr(flags: Sequence[bool], window: int) -> WindowedPlr:
    """Loss fraction over the most recent ``window`` delivered/lost flags."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(flags) == 0:
        return WindowedPlr(0.0, True)
    recent = list(flags)[-window:]
    return WindowedPlr(sum(1 for f in recent if not f) / len(recent), False)


def read_snapshot(path, recent_plr: float = 0.0) -> NetworkSnapshot:
    """Read ``node_id,x,y[,snr_db]`` rows; the snapshot SNR is the mean of the given values."""
    positions, snrs = [], []
    with open(Path(path), newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if lineno == 1 and row[0].strip() == "node_id":
                continue
            if len(row) not in (3, 4):
                raise ValueError(f"{path}:{lineno}: expected 3 or 4 fields")
            try:
                positions.append(NodePosition(float(row[1]), float(row[2])))
                if len(row) == 4 and row[3].strip():
                    snrs.append(float(row[3]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    snr = float(np.mean(snrs)) if snrs else None
    return NetworkSnapshot(tuple(positions), recent_plr, snr)


def write_snapshot(snapshot: NetworkSnapshot, path, snr_per_node: Sequence[float] | None = None) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "x", "y"] + (["snr_db"] if snr_per_node is not None else []))
        for i, p in enumerate(snapshot.positions):
            row = [i, repr(p.x), repr(p.y)]
            if snr_per_node is not None:
                row.append(repr(float(snr_per_node[i])))
            w.writerow(row)


def synthesize_snapshot(node_count: int, rng: np.random.Generator, length: float = 1000.0,
                        width: float = 200.0, snr_db: float | None = None,
                        recent_plr: float = 0.0) -> NetworkSnapshot:
    """Uniform nodes on a road-like rectangle."""
    xy = rng.random((node_count, 2)) * np.array([length, width])
    return NetworkSnapshot(tuple(NodePosition(float(x), float(y)) for x, y in xy), recent_plr, snr_db)
