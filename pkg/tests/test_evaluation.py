import numpy as np
import pytest
from hypothesis import given, strategies as st

from egosocial.errors import InvalidArgumentError
from egosocial.evaluation import (
    REPORTED_TABLE,
    Metrics,
    compare_report,
    compute_metrics,
    convergence_compare,
    epochs_to_target,
    percent,
)
from egosocial.training import TrainRun

binary_pairs = st.integers(1, 1000).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 1), min_size=n, max_size=n),
                        st.lists(st.integers(0, 1), min_size=n, max_size=n)))


def test_metric_examples():
    m = Metrics.from_counts(3, 1, 1)
    assert (m.precision, m.recall, m.f_measure) == (0.75, 0.75, 0.75)
    perfect = compute_metrics([1, 0, 1, 1], [1, 0, 1, 1])
    assert (perfect.precision, perfect.recall, perfect.f_measure) == (1, 1, 1)
    none = compute_metrics([0, 0, 0], [1, 0, 1])
    assert none.precision == 0 and none.precision_undefined and none.recall == 0 and none.f_measure == 0


def test_metric_errors():
    with pytest.raises(InvalidArgumentError):
        compute_metrics([1, 0], [1])
    with pytest.raises(InvalidArgumentError):
        compute_metrics([], [])


@given(binary_pairs)
def test_brute_force_counts(pair):
    pred, lab = pair
    m = compute_metrics(pred, lab)
    p, y = np.array(pred), np.array(lab)
    assert (m.tp, m.fp, m.fn, m.tn) == (int(((p == 1) & (y == 1)).sum()), int(((p == 1) & (y == 0)).sum()),
                                        int(((p == 0) & (y == 1)).sum()), int(((p == 0) & (y == 0)).sum()))


@given(binary_pairs)
def test_harmonic_mean_bounds(pair):
    m = compute_metrics(*pair)
    if m.precision + m.recall > 0:
        assert min(m.precision, m.recall) - 1e-15 <= m.f_measure <= max(m.precision, m.recall) + 1e-15


@given(binary_pairs, st.randoms(use_true_random=False))
def test_permutation_invariance(pair, rnd):
    pred, lab = pair
    idx = list(range(len(pred)))
    rnd.shuffle(idx)
    assert compute_metrics(pred, lab) == compute_metrics([pred[i] for i in idx], [lab[i] for i in idx])


@pytest.mark.parametrize("x, expected", [(0.775, 78), (0.82, 82), (0.745, 75), (0.7449, 74), (1.0, 100), (0.0, 0),
                                         (0.005, 1), (0.125, 13)])
def test_percent_rounding(x, expected):
    assert percent(x) == expected


def test_reported_table_fixture_renders():
    text = compare_report(REPORTED_TABLE)
    lines = text.splitlines()
    assert lines[0].split() == ["|", "LBFGS", "|", "SGD", "|", "HVFF"]
    rows = {line.split("|")[0].strip(): [c.strip() for c in line.split("|")[1:]] for line in lines[2:]}
    assert rows["Precision"] == ["82%", "73%", "80%"]
    assert rows["Recall"] == ["74%", "85%", "72%"]
    assert rows["F-measure"] == ["77%", "78%", "75%"]


def test_single_method_table():
    text = compare_report([("LSTM", Metrics.from_counts(3, 1, 1))])
    assert text.splitlines()[0].split() == ["|", "LSTM"]
    assert text.splitlines()[2].endswith("75%")
    with pytest.raises(InvalidArgumentError):
        compare_report([])


def make_run(losses):
    run = TrainRun()
    run.val_loss = list(losses)
    run.val_acc = [0.0] * len(losses)
    run.train_loss = list(losses)
    run.best_epoch = int(np.argmin(losses)) + 1
    return run


def test_convergence_examples():
    a = make_run([1.0, 0.5, 0.3, 0.2])
    same = convergence_compare(a, make_run([1.0, 0.5, 0.3, 0.2]))
    assert same.sgd_epochs == same.lbfgs_epochs == 4
    assert same.target == pytest.approx(0.22)
    never = convergence_compare(make_run([0.9, 0.8]), make_run([0.5, 0.1]))
    assert never.sgd_epochs is None and never.lbfgs_epochs == 2 and never.lbfgs_not_slower
    explicit = convergence_compare(a, make_run([0.25, 0.25]), target=0.3)
    assert (explicit.sgd_epochs, explicit.lbfgs_epochs) == (4, 1)
    assert epochs_to_target([0.3, 0.3], 0.3) is None   # strictly below the target
