import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from egosocial import dataset, geometry
from egosocial.dataset import (
    AugmentSpec,
    InteractionSeries,
    SplitSpec,
    augment,
    augment_all,
    augment_with_origin,
    build_series,
    denormalize,
    normalize,
    split_dataset,
)
from egosocial.errors import InfeasibleSplitError, InvalidArgumentError
from egosocial.geometry import DistanceModel, FaceObservation, PersonTrack, frame_interacting


def make_series(n_pos, n_neg, length=12, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n_pos + n_neg):
        frames = np.column_stack([rng.uniform(20, 400, length), rng.uniform(-90, 90, length)])
        out.append(InteractionSeries(f"s{k}", frames, 1 if k < n_pos else 0))
    return out


def linear_model():
    # distance = 260 - h on [50, 250]
    return DistanceModel(260.0, -1.0, 0.0, 50.0, 250.0)


def test_build_series_composes_geometry():
    obs = [FaceObservation(0, 400, 140, 0.0), FaceObservation(3, 420, 130, 15.0), FaceObservation(4, 410, 120, 0.0)]
    s = build_series(PersonTrack("seq", "p1", obs, 1), linear_model())
    np.testing.assert_allclose(s.frames, [[120, 0], [130, 15], [140, 0]])
    assert s.label == 1 and s.series_id == "seq/p1"


def test_build_series_single_frame_and_missing_pose():
    one = PersonTrack("a", "b", [FaceObservation(0, 1, 100, 30.0)])
    assert len(build_series(one, linear_model())) == 1
    gap = PersonTrack("a", "b", [FaceObservation(0, 1, 100, None), FaceObservation(1, 1, 100, 0.0)])
    with pytest.raises(InvalidArgumentError):
        build_series(gap, linear_model())
    assert len(build_series(geometry.impute_poses(gap), linear_model())) == 2


def test_split_ten_and_ten():
    data = make_series(10, 10)
    train, val, test = split_dataset(data, SplitSpec(seed=3))
    count = lambda part, c: sum(s.label == c for s in part)  # noqa: E731
    assert (count(train, 1), count(train, 0)) == (7, 7)
    assert sorted((count(val, 1), count(val, 0))) == [1, 2]
    assert len(test) == 20 - 14 - len(val) == 3
    ids = [s.series_id for s in train + val + test]
    assert sorted(ids) == sorted(s.series_id for s in data)


def test_split_deterministic_and_seed_sensitive():
    data = make_series(12, 9)
    a = split_dataset(data, SplitSpec(seed=5))
    b = split_dataset(data, SplitSpec(seed=5))
    c = split_dataset(data, SplitSpec(seed=6))
    ids = lambda parts: [[s.series_id for s in p] for p in parts]  # noqa: E731
    assert ids(a) == ids(b)
    assert ids(a) != ids(c)


def test_split_single_class_infeasible():
    with pytest.raises(InfeasibleSplitError):
        split_dataset(make_series(5, 0), SplitSpec(balanced=True))
    with pytest.raises(InvalidArgumentError):
        split_dataset([InteractionSeries("u", [[1, 2]])])
    assert sum(map(len, split_dataset(make_series(5, 0), SplitSpec(balanced=False)))) == 5


@given(st.integers(1, 60), st.integers(1, 60), st.integers(0, 2**16))
@settings(max_examples=60, deadline=None)
def test_split_partition_properties(n_pos, n_neg, seed):
    data = make_series(n_pos, n_neg, length=2, seed=1)
    train, val, test = split_dataset(data, SplitSpec(seed=seed))
    ids = [s.series_id for s in train + val + test]
    assert len(ids) == len(set(ids)) == n_pos + n_neg
    assert sum(s.label for s in train) * 2 == len(train)
    assert len(train) // 2 == math.floor(0.7 * min(n_pos, n_neg) + 1e-9)


def test_series_label_validation():
    with pytest.raises(InvalidArgumentError):
        InteractionSeries("x", [[1, 2]], label=2)


def test_augment_lengths_and_labels():
    spec = AugmentSpec(copies_per_series=200, seed=1)
    for source in make_series(1, 1, length=25):
        out = augment(source, spec)
        assert len(out) == 200
        assert all(10 <= len(s) <= 40 for s in out)
        assert all(s.label == source.label for s in out)
        assert {len(s) for s in out} >= {10, 40}


def test_augment_positive_injections_are_interacting():
    spec = AugmentSpec(copies_per_series=300, seed=2)
    (pos,) = make_series(1, 0, length=20)
    for series, origin in augment_with_origin(pos, spec):
        for (d, o), tag in zip(series.frames, origin):
            if tag == 1:
                assert frame_interacting(d, o)
                assert 10 <= d <= 150 and -30 <= o <= 30
            if tag == 2:
                assert not frame_interacting(d, o)


def test_augment_negative_injections_are_not_interacting():
    spec = AugmentSpec(copies_per_series=300, seed=4)
    (neg,) = make_series(0, 1, length=20)
    far = turned = 0
    for series, origin in augment_with_origin(neg, spec):
        for (d, o), tag in zip(series.frames, origin):
            if tag == 1:
                assert not frame_interacting(d, o)
                assert 0 < d <= 500 and -90 <= o <= 90
                far += d > 150
                turned += abs(o) > 30
            if tag == 2:
                assert frame_interacting(d, o)
    # the two ways of breaking the F-formation are drawn about equally often
    assert 0.4 < far / (far + turned) < 0.75


def test_augment_injection_counts():
    spec = AugmentSpec(copies_per_series=100, injection_fraction=0.3, bias_fraction=0.1, seed=9)
    (pos,) = make_series(1, 0, length=30)
    for series, origin in augment_with_origin(pos, spec):
        n = len(series)
        assert np.count_nonzero(origin == 2) == math.ceil(0.1 * n)
        # bias frames may overwrite injected ones, never the other way round
        assert np.count_nonzero(origin >= 1) >= math.ceil(0.3 * n)
        kept = np.count_nonzero(origin == 1)
        assert kept >= (1 - 0.1) * math.ceil(0.3 * n) - 1e-9 or kept >= math.ceil(0.3 * n) - math.ceil(0.1 * n)


def test_augment_degenerate_spec_is_pure_resampling():
    (src,) = make_series(1, 0, length=20)
    spec = AugmentSpec(copies_per_series=20, length_range=(20, 20), injection_fraction=0, bias_fraction=0, seed=0)
    for s in augment(src, spec):
        assert len(s) == 20
        rows = [tuple(r) for r in src.frames]
        idx = [rows.index(tuple(r)) for r in s.frames]
        assert idx == sorted(idx)


def test_augment_reproducible():
    (src,) = make_series(0, 1, length=15)
    spec = AugmentSpec(copies_per_series=30, seed=11)
    a, b = augment(src, spec), augment(src, spec)
    assert all(np.array_equal(x.frames, y.frames) and x.series_id == y.series_id for x, y in zip(a, b))


def test_augment_all_independent_of_threading():
    data = make_series(4, 4)
    spec = AugmentSpec(copies_per_series=5, seed=1)
    serial = augment_all(data, spec)
    with ThreadPoolExecutor(8) as pool:
        parallel = [s for chunk in pool.map(lambda i: augment(data[i], spec, np.random.default_rng([1, i])),
                                            range(len(data))) for s in chunk]
    assert all(np.array_equal(a.frames, b.frames) for a, b in zip(serial, parallel))


def test_augment_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        augment(InteractionSeries("u", [[100, 0]]), AugmentSpec())
    with pytest.raises(InvalidArgumentError):
        AugmentSpec(length_range=(5, 40))
    with pytest.raises(InvalidArgumentError):
        AugmentSpec(injection_fraction=1.5)


def test_normalize_examples():
    np.testing.assert_array_equal(normalize(np.array([[500, 90], [250, 0], [600, -90]])),
                                  [[1, 1], [0, 0], [1, -1]])


@given(st.floats(1e-6, 500), st.floats(-90, 90))
def test_normalize_round_trip(d, o):
    n = normalize(np.array([[d, o]]))
    assert np.all(np.abs(n) <= 1)
    np.testing.assert_allclose(denormalize(n), [[d, o]], rtol=0, atol=1e-12 * 500)


def test_track_file_round_trip(tmp_path):
    tracks = [
        PersonTrack("s1", "a", [FaceObservation(0, 10.5, 80.0, 15.0), FaceObservation(2, 11.0, 82.0, None)], 1),
        PersonTrack("s1", "b", [FaceObservation(1, 700.0, 40.0, -30.0)], None),
    ]
    dataset.write_tracks_jsonl(tmp_path / "t.jsonl", tracks)
    assert dataset.read_tracks_jsonl(tmp_path / "t.jsonl") == tracks
    (tmp_path / "bad.jsonl").write_text('{"sequence_id": "x"}\n')
    with pytest.raises(InvalidArgumentError):
        dataset.read_tracks_jsonl(tmp_path / "bad.jsonl")


def test_series_file_round_trip(tmp_path):
    series = make_series(2, 1, length=4) + [InteractionSeries("unlabelled", [[120.0, 15.0]])]
    dataset.write_series_csv(tmp_path / "s.csv", series)
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header == "series_id,frame,distance_cm,orientation_deg,label"
    back = dataset.read_series_csv(tmp_path / "s.csv")
    assert [s.series_id for s in back] == [s.series_id for s in series]
    for a, b in zip(series, back):
        assert np.array_equal(a.frames, b.frames) and a.label == b.label


def test_to_batch_padding():
    series = [InteractionSeries("a", [[500, 90]] * 3, 1), InteractionSeries("b", [[250, 0]], 0)]
    b = dataset.to_batch(series)
    assert b.inputs.shape == (2, 3, 2)
    np.testing.assert_array_equal(b.lengths, [3, 1])
    np.testing.assert_array_equal(b.inputs[1, 1:], 0)
    assert b.subset([1]).inputs.shape == (1, 1, 2)
