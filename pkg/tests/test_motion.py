import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fecsim.motion import (ClusterIntensityClassifier, DegenerateMotionError, FuzzyMotionClassifier,
                           IntensityClass, UntrainedModelError, classify_intensity, macroblock_area, mv_ratio,
                           normalize_frame_sizes, normalize_size_means, temporal_intensity, ward_cluster,
                           write_cluster_report)
from fecsim.fuzzy import uavfec_motion_variable
from fecsim.video import FrameRecord, FrameType, GopLayout, VideoTrace, synthesize_video


def pframe(count, dist):
    return FrameRecord(1, FrameType.P, 1000, count, dist)


def test_mv_ratio_examples():
    assert mv_ratio(pframe(4959, 109300)) == pytest.approx(4959 / 109300, rel=1e-15)
    assert mv_ratio(pframe(4959, 109300)) == pytest.approx(0.04537, abs=1e-5)
    assert mv_ratio(pframe(4963, 14117)) == pytest.approx(0.35156, abs=1e-5)
    assert mv_ratio(pframe(10, 10)) == 1.0


def test_mv_ratio_errors():
    with pytest.raises(DegenerateMotionError):
        mv_ratio(pframe(5, 0))
    with pytest.raises(ValueError):
        mv_ratio(FrameRecord(0, FrameType.I, 100))


@pytest.mark.parametrize("w,h,area", [(16, 16, 256), (16, 8, 128), (4, 4, 16)])
def test_macroblock_area(w, h, area):
    assert macroblock_area(w, h) == area


def test_temporal_intensity_examples():
    assert temporal_intensity([(256, 5), (256, 0)]) == 640
    assert temporal_intensity([(256, 0)] * 4) == 0
    assert temporal_intensity([(256, np.hypot(3, 4))]) == 1280
    with pytest.raises(ValueError):
        temporal_intensity([])


@given(st.lists(st.tuples(st.sampled_from([16, 64, 128, 256]), st.floats(0, 50)), min_size=1, max_size=30),
       st.floats(0.1, 10), st.randoms())
def test_temporal_intensity_linear_and_permutation_invariant(mbs, c, rnd):
    base = temporal_intensity(mbs)
    scaled = temporal_intensity([(a, c * d) for a, d in mbs])
    assert scaled == pytest.approx(c * base, rel=1e-9, abs=1e-9)
    shuffled = list(mbs)
    rnd.shuffle(shuffled)
    assert temporal_intensity(shuffled) == pytest.approx(base, rel=1e-12, abs=1e-12)


def test_normalize_examples():
    n = normalize_size_means(2000, 1000, 1000)
    assert (n.nhat_i, n.nhat_p, n.nhat_b) == (0.5, 0.25, 0.25)
    n = normalize_size_means(1, 1, 1)
    assert n.nhat_i == pytest.approx(1 / 3, abs=1e-15)
    g = GopLayout(2, 1)
    trace = VideoTrace((FrameRecord(0, FrameType.I, 1000), FrameRecord(1, FrameType.P, 500),
                        FrameRecord(2, FrameType.I, 3000)), g)
    assert normalize_frame_sizes(trace).mu_i == 2000


def test_normalize_missing_type():
    g = GopLayout(3, 1)
    trace = VideoTrace((FrameRecord(0, FrameType.I, 1000),), g)
    with pytest.raises(ValueError):
        normalize_frame_sizes(trace)


@given(st.integers(1, 1000))
def test_normalize_scale_invariant(c):
    trace, _ = synthesize_video(GopLayout(9, 3), 1, "medium", 2, with_pixels=False)
    scaled = VideoTrace(tuple(FrameRecord(f.index, f.kind, f.size_bytes * c, f.mv_count, f.mv_total_distance)
                              for f in trace.frames), trace.gop)
    a, b = normalize_frame_sizes(trace), normalize_frame_sizes(scaled)
    for x, y in [(a.nhat_i, b.nhat_i), (a.nhat_p, b.nhat_p), (a.nhat_b, b.nhat_b)]:
        assert x == pytest.approx(y, rel=1e-12)


def blobs(rng, centers, per=6, spread=0.1):
    return np.vstack([rng.normal(c, spread, (per, 2)) for c in centers])


def ssq(x, labels):
    return sum(((x[labels == c] - x[labels == c].mean(axis=0)) ** 2).sum() for c in set(labels))


def test_two_blobs_match_best_partition(rng):
    x = blobs(rng, [(0, 0), (5, 5)], per=5)
    model = ward_cluster(x, k=2, standardize=False)
    best = None
    for mask in itertools.product([0, 1], repeat=len(x) - 1):
        labels = np.array((0,) + mask)
        if labels.min() == labels.max():
            continue
        s = ssq(x, labels)
        if best is None or s < best[0]:
            best = (s, labels)
    assert np.array_equal(np.array(model.assignments), best[1])


def test_single_cluster(rng):
    model = ward_cluster(rng.random((7, 2)), k=1)
    assert set(model.assignments) == {0}


def naive_ward_heights(x):
    clusters = [[i] for i in range(len(x))]
    heights = []
    while len(clusters) > 1:
        best = None
        for a, b in itertools.combinations(range(len(clusters)), 2):
            ca, cb = x[clusters[a]], x[clusters[b]]
            na, nb = len(ca), len(cb)
            d = np.sqrt(2 * na * nb / (na + nb)) * np.linalg.norm(ca.mean(axis=0) - cb.mean(axis=0))
            if best is None or d < best[0]:
                best = (d, a, b)
        d, a, b = best
        heights.append(d)
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]
    return heights


def test_merge_heights_match_naive_ward(rng):
    x = rng.random((9, 2))
    model = ward_cluster(x, k=1, standardize=False)
    assert model.merge_distances == pytest.approx(naive_ward_heights(x), rel=1e-9)


def test_three_blob_cut_levels(rng):
    x = blobs(rng, [(0, 0), (4, 0), (0, 30)])
    d = ward_cluster(x, k=1, standardize=False).merge_distances
    cut2 = (d[-1] + d[-2]) / 2
    cut3 = (d[-2] + d[-3]) / 2
    assert ward_cluster(x, distance=cut2, standardize=False).n_clusters == 2
    assert ward_cluster(x, distance=cut3, standardize=False).n_clusters == 3


@given(st.integers(0, 10_000))
def test_merge_distances_non_decreasing(seed):
    x = np.random.default_rng(seed).random((12, 3))
    d = ward_cluster(x, k=2).merge_distances
    assert all(a <= b + 1e-12 for a, b in zip(d, d[1:]))


def test_ward_errors(rng):
    x = rng.random((4, 2))
    with pytest.raises(ValueError):
        ward_cluster(x, k=5)
    with pytest.raises(ValueError):
        ward_cluster(x)
    with pytest.raises(ValueError):
        ward_cluster(x[:1], k=1)


def test_cluster_report(tmp_path, rng):
    model = ward_cluster(rng.random((5, 2)), k=2)
    write_cluster_report(model, tmp_path / "a.csv", tmp_path / "m.csv")
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "sample_id,cluster_id"
    assert len((tmp_path / "m.csv").read_text().splitlines()) == 5


def test_resilience_table():
    assert IntensityClass.Low.natural_resilience_plr == 0.20
    assert IntensityClass.Medium.natural_resilience_plr == 0.10
    assert IntensityClass.High.natural_resilience_plr == 0.06


def test_fuzzy_classifier():
    clf = FuzzyMotionClassifier()
    assert clf.variable.term("LOW").membership(5000) == 1.0
    assert classify_intensity(pframe(100, 5000), clf) is IntensityClass.Low
    assert classify_intensity([200000.0], clf) is IntensityClass.High


@given(st.floats(0, 300000))
def test_classifier_agrees_with_max_membership(x):
    var = uavfec_motion_variable()
    degrees = sorted((t.membership(x) for t in var.terms), reverse=True)
    if degrees[0] - degrees[1] > 1e-9:  # outside overlaps
        label = max(var.terms, key=lambda t: t.membership(x)).label
        assert classify_intensity([x], FuzzyMotionClassifier()).name.upper() == label


def test_static_frame_is_low():
    assert classify_intensity(pframe(40, 0), FuzzyMotionClassifier()) is IntensityClass.Low


def test_untrained():
    with pytest.raises(UntrainedModelError):
        classify_intensity([1.0], None)
    with pytest.raises(UntrainedModelError):
        ClusterIntensityClassifier().classify([1.0])


def test_cluster_classifier(rng):
    x = np.concatenate([rng.normal(1, 0.1, 5), rng.normal(5, 0.1, 5), rng.normal(9, 0.1, 5)])
    clf = ClusterIntensityClassifier(ward_cluster(x, k=3))
    assert clf.classify([1.0]) is IntensityClass.Low
    assert clf.classify([5.0]) is IntensityClass.Medium
    assert clf.classify([9.2]) is IntensityClass.High
    two = ClusterIntensityClassifier(ward_cluster(x[:10], k=2))
    assert two.classify([5.0]) is IntensityClass.High
