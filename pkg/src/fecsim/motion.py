"""Motion and spatial features, Ward clustering and intensity classification."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.cluster import hierarchy

from .video import FrameRecord, FrameType, VideoTrace


class IntensityClass(enum.Enum):
    Low = 0
    Medium = 1
    High = 2

    @property
    def natural_resilience_plr(self) -> float:
        """Loss rate a sequence of this class tolerates before quality drops."""
        return _RESILIENCE[self]

    @classmethod
    def parse(cls, value) -> "IntensityClass":
        if isinstance(value, cls):
            return value
        if isinstance(value, int):
            return cls(value)
        return cls[str(value).capitalize()]


_RESILIENCE = {IntensityClass.Low: 0.20, IntensityClass.Medium: 0.10, IntensityClass.High: 0.06}


class DegenerateMotionError(ValueError):
    """Vectors are present but all have zero length (static frame)."""


@dataclass(frozen=True)
class NormalizedSizes:
    mu_i: float
    mu_p: float
    mu_b: float
    nhat_i: float
    nhat_p: float
    nhat_b: float

    def fraction(self, kind: FrameType) -> float:
        return {FrameType.I: self.nhat_i, FrameType.P: self.nhat_p, FrameType.B: self.nhat_b}[kind]

    def mean(self, kind: FrameType) -> float:
        return {FrameType.I: self.mu_i, FrameType.P: self.mu_p, FrameType.B: self.mu_b}[kind]


def mv_ratio(frame: FrameRecord) -> float:
    """Number of motion vectors divided by the total distance they describe."""
    if frame.kind is FrameType.I or frame.mv_count == 0:
        raise ValueError("mv_ratio is defined for predicted frames with motion vectors")
    if frame.mv_total_distance == 0:
        raise DegenerateMotionError(f"frame {frame.index}: all motion vectors are zero")
    return frame.mv_count / frame.mv_total_distance


def macroblock_area(mb_width: float, mb_height: float) -> float:
    if mb_width <= 0 or mb_height <= 0:
        raise ValueError("macroblock dimensions must be > 0")
    return mb_width * mb_height


def temporal_intensity(per_mb: Sequence[tuple[float, float]]) -> float:
    """Mean over macroblocks of area x motion-vector length."""
    if len(per_mb) == 0:
        raise ValueError("temporal intensity needs at least one macroblock")
    return math.fsum(a * d for a, d in per_mb) / len(per_mb)


def frame_temporal_intensity(frame: FrameRecord) -> float:
    """Temporal intensity of a trace record, assuming uniform macroblocks.

    With a common area the per-macroblock sum collapses to
    ``area * mv_total_distance / mb_count``.
    """
    if frame.mb_count == 0 or frame.mv_total_distance == 0:
        return 0.0
    return macroblock_area(frame.mb_width, frame.mb_height) * frame.mv_total_distance / frame.mb_count


def normalize_size_means(mu_i: float, mu_p: float, mu_b: float) -> NormalizedSizes:
    total = mu_i + mu_p + mu_b
    if total <= 0:
        raise ValueError("at least one frame-type mean must be positive")
    return NormalizedSizes(mu_i, mu_p, mu_b, mu_i / total, mu_p / total, mu_b / total)


def normalize_frame_sizes(trace: VideoTrace) -> NormalizedSizes:
    expected = set(trace.gop.types())
    means = {}
    for kind in FrameType:
        sizes = [f.size_bytes for f in trace.frames if f.kind is kind]
        if sizes:
            means[kind] = math.fsum(sizes) / len(sizes)
        elif kind in expected:
            raise ValueError(f"trace has no {kind.value}-frames although its GoP layout includes them")
        else:
            means[kind] = 0.0
    return normalize_size_means(means[FrameType.I], means[FrameType.P], means[FrameType.B])


def video_motion_level(trace: VideoTrace) -> float:
    """Mean motion-vector distance sum over the predicted frames of a trace."""
    d = [f.mv_total_distance for f in trace.frames if f.kind is not FrameType.I]
    return math.fsum(d) / len(d) if d else 0.0


def video_temporal_intensity(trace: VideoTrace) -> float:
    ti = [frame_temporal_intensity(f) for f in trace.frames if f.kind is not FrameType.I]
    return math.fsum(ti) / len(ti) if ti else 0.0


def frame_feature_vector(frame: FrameRecord) -> list[float]:
    """Per-frame clustering / classifier features: size, type code, mv ratio.

    Static or intra frames get ratio 0.
    """
    try:
        ratio = mv_ratio(frame)
    except ValueError:
        ratio = 0.0
    return [float(frame.size_bytes), float(_TYPE_CODE[frame.kind]), ratio]


_TYPE_CODE = {FrameType.I: 0, FrameType.P: 1, FrameType.B: 2}


# ---- clustering ------------------------------------------------------------

@dataclass(frozen=True)
class ClusterModel:
    features: np.ndarray
    assignments: tuple[int, ...]
    merges: tuple[tuple[int, float, int, int], ...]  # (step, distance, left, right)

    @property
    def n_clusters(self) -> int:
        return len(set(self.assignments))

    @property
    def merge_distances(self) -> list[float]:
        return [m[1] for m in self.merges]

    def members(self, cluster_id: int) -> list[int]:
        return [i for i, c in enumerate(self.assignments) if c == cluster_id]

    def centroids(self) -> np.ndarray:
        return np.array([self.features[self.members(c)].mean(axis=0) for c in range(self.n_clusters)])


def _standardize(x: np.ndarray) -> np.ndarray:
    std = x.std(axis=0)
    std[std == 0] = 1.0
    return (x - x.mean(axis=0)) / std


def ward_cluster(samples, k: int | None = None, distance: float | None = None,
                 standardize: bool = True) -> ClusterModel:
    """Agglomerative Ward clustering cut at ``k`` clusters or a linkage distance.

    Cluster ids are relabelled in order of first appearance so the output
    does not depend on the library's internal numbering.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    if n < 2:
        raise ValueError("ward_cluster needs at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    if (k is None) == (distance is None):
        raise ValueError("give exactly one of k or distance")
    if k is not None and not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    z = _standardize(x) if standardize else x
    link = hierarchy.linkage(z, method="ward", metric="euclidean")
    if k is not None:
        raw = hierarchy.fcluster(link, t=k, criterion="maxclust")
    else:
        raw = hierarchy.fcluster(link, t=distance, criterion="distance")
    relabel: dict[int, int] = {}
    assignments = tuple(relabel.setdefault(int(c), len(relabel)) for c in raw)
    merges = tuple((i, float(row[2]), int(row[0]), int(row[1])) for i, row in enumerate(link))
    return ClusterModel(x, assignments, merges)


def write_cluster_report(model: ClusterModel, assignments_path, merges_path) -> None:
    with open(assignments_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "cluster_id"])
        w.writerows(enumerate(model.assignments))
    with open(merges_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "distance", "left", "right"])
        for step, dist, left, right in model.merges:
            w.writerow([step, repr(dist), left, right])


# ---- classification --------------------------------------------------------

class UntrainedModelError(RuntimeError):
    pass


class FuzzyMotionClassifier:
    """Max-membership labelling on the uavFEC motion sets (vector distance sums)."""

    def __init__(self, variable=None):
        if variable is None:
            from .fuzzy import uavfec_motion_variable

            variable = uavfec_motion_variable()
        self.variable = variable

    def classify(self, features) -> IntensityClass:
        x = _motion_scalar(features)
        degrees = [t.membership(x) for t in self.variable.terms]
        return IntensityClass(int(np.argmax(degrees)))


class ClusterIntensityClassifier:
    """Nearest-centroid labelling on a fitted cluster model.

    Clusters are ranked by their mean along ``order_feature`` (ascending is
    Low -> High); a two-cluster model maps to Low / High.
    """

    def __init__(self, model: ClusterModel | None = None, order_feature: int = 0):
        self.model = model
        self.order_feature = order_feature

    def classify(self, features) -> IntensityClass:
        if self.model is None:
            raise UntrainedModelError("cluster classifier has no fitted model")
        cents = self.model.centroids()
        order = np.argsort(cents[:, self.order_feature], kind="stable")
        rank = {int(c): r for r, c in enumerate(order)}
        x = np.atleast_1d(np.asarray(features, dtype=float))
        nearest = int(np.argmin(((cents - x) ** 2).sum(axis=1)))
        r = rank[nearest]
        n = len(cents)
        if n == 1:
            return IntensityClass.Medium
        return IntensityClass(round(2 * r / (n - 1)))


def _motion_scalar(features) -> float:
    if isinstance(features, FrameRecord):
        return features.mv_total_distance
    arr = np.atleast_1d(np.asarray(features, dtype=float))
    return float(arr[0])


def classify_intensity(features, model) -> IntensityClass:
    """Classify with any configured classifier exposing ``classify``."""
    if model is None:
        raise UntrainedModelError("no intensity classifier configured")
    if isinstance(features, FrameRecord) and features.mv_count > 0 and features.mv_total_distance == 0:
        return IntensityClass.Low
    return model.classify(features)
