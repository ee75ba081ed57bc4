import numpy as np
import pytest
from hypothesis import given, strategies as st

from egosocial.baseline import BaselineConfig, classify_baseline, default_grid, interacting_fraction, sweep_threshold
from egosocial.dataset import InteractionSeries
from egosocial.errors import InvalidArgumentError

NEAR, FAR = [100.0, 0.0], [300.0, 0.0]


def series_with(hits, total, label=None, sid="x"):
    return InteractionSeries(sid, [NEAR] * hits + [FAR] * (total - hits), label)


def random_frames(rng, n):
    return np.column_stack([rng.uniform(0, 300, n), rng.uniform(-90, 90, n)])


def test_examples():
    assert classify_baseline(series_with(10, 10), BaselineConfig(0.5)) == 1
    assert classify_baseline(series_with(4, 10), BaselineConfig(0.5)) == 0
    assert classify_baseline(series_with(5, 10), BaselineConfig(0.5)) == 0  # strict comparison
    assert classify_baseline(series_with(6, 10), BaselineConfig(0.5)) == 1


def test_validation():
    with pytest.raises(InvalidArgumentError):
        BaselineConfig(1.5)
    with pytest.raises(InvalidArgumentError):
        interacting_fraction(np.zeros((0, 2)))
    with pytest.raises(InvalidArgumentError):
        sweep_threshold([series_with(1, 2, 1)], [])


def test_matches_brute_force_count():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        frames = random_frames(rng, int(rng.integers(1, 40)))
        threshold = float(rng.uniform())
        count = 0
        for d, o in frames:
            if d <= 150 and -30 <= o <= 30:
                count += 1
        expected = 1 if count / len(frames) > threshold else 0
        assert classify_baseline(InteractionSeries("r", frames), BaselineConfig(threshold)) == expected


@given(st.integers(1, 40), st.data())
def test_monotone_in_threshold(n, data):
    hits = data.draw(st.integers(0, n))
    t1, t2 = sorted(data.draw(st.lists(st.floats(0, 1), min_size=2, max_size=2)))
    s = series_with(hits, n)
    assert classify_baseline(s, BaselineConfig(t2)) <= classify_baseline(s, BaselineConfig(t1))


def test_permutation_invariance():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        frames = random_frames(rng, int(rng.integers(1, 40)))
        cfg = BaselineConfig(float(rng.uniform()))
        a = classify_baseline(InteractionSeries("a", frames), cfg)
        b = classify_baseline(InteractionSeries("b", rng.permutation(frames)), cfg)
        assert a == b


def test_sweep_grid_boundaries():
    data = [series_with(3, 10, 1, "a"), series_with(1, 5, 0, "b"), series_with(10, 10, 1, "c")]
    zero = sweep_threshold(data, [0.0])
    assert zero.best.recall == 1.0
    one = sweep_threshold(data, [1.0])
    assert one.best.tp + one.best.fp == 0
    assert one.best.precision == 0.0 and one.best.precision_undefined


def test_sweep_argmax_and_tie_break():
    rng = np.random.default_rng(2)
    data = [InteractionSeries(f"s{k}", random_frames(rng, 12), int(rng.integers(2))) for k in range(60)]
    res = sweep_threshold(data, default_grid())
    assert all(res.best.f_measure >= m.f_measure for m in res.metrics)
    ties = [t for t, m in zip(res.thresholds, res.metrics) if m.f_measure == res.best.f_measure]
    assert res.best_threshold == min(ties)
    # unsorted grids give the same answer
    shuffled = sweep_threshold(data, list(reversed(default_grid())))
    assert shuffled.best_threshold == res.best_threshold


def test_sweep_equal_f_prefers_smaller_threshold():
    # thresholds 0.2 and 0.4 classify identically here
    data = [series_with(5, 10, 1, "a"), series_with(1, 10, 0, "b")]
    res = sweep_threshold(data, [0.4, 0.2])
    assert res.best_threshold == 0.2


def test_default_grid():
    g = default_grid()
    assert len(g) == 101 and g[0] == 0.0 and g[-1] == 1.0 and g[37] == 0.37
