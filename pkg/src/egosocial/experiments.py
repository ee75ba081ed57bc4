"""Desk-scale experiment recipes shared by scripts/, the CLI and the acceptance tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baseline import default_grid, sweep_threshold
from .evaluation import Metrics, compute_metrics, convergence_compare, LSTM_DECISION_THRESHOLD
from .lstm import LstmConfig, init_model
from .synthetic import SyntheticData, make_dataset
from .training import TrainConfig, TrainRun, predict_proba, train

REFERENCE_BATCH = 500
REFERENCE_TRAIN_SIZE = 10_000


def scaled_batch_size(n_train: int) -> int:
    """Keep the reference batch-to-training-set ratio (500 of 10,000) on smaller data."""
    return max(1, min(REFERENCE_BATCH, round(n_train * REFERENCE_BATCH / REFERENCE_TRAIN_SIZE)))


def default_lstm(seed: int = 0) -> LstmConfig:
    return LstmConfig(num_blocks=35, cells_per_block=2, alpha=3.5, seed=seed)


def default_sgd(n_train: int, seed: int = 0, max_epochs: int = 200, patience: int = 20) -> TrainConfig:
    return TrainConfig(optimizer="sgd", learning_rate=0.01, momentum=0.8,
                       batch_size=scaled_batch_size(n_train), max_epochs=max_epochs,
                       patience=patience, seed=seed)


def lbfgs_config(seed: int = 0, max_epochs: int = 200, patience: int = 20) -> TrainConfig:
    return TrainConfig(optimizer="lbfgs", max_epochs=max_epochs, patience=patience, seed=seed)


def lstm_metrics(run: TrainRun, series) -> Metrics:
    probs = predict_proba(run.model, series)
    return compute_metrics((probs > LSTM_DECISION_THRESHOLD).astype(int).tolist(), [s.label for s in series])


@dataclass
class Comparison:
    seed: int
    sgd: TrainRun
    sgd_test: Metrics
    baseline_test: Metrics
    baseline_threshold: float


def method_comparison(seed: int, data: SyntheticData | None = None, max_epochs: int = 200) -> Comparison:
    data = data or make_dataset(seed=seed)
    run = train(init_model(default_lstm(seed)), data.train, data.val, default_sgd(len(data.train), seed, max_epochs))
    sweep = sweep_threshold(data.test, default_grid())
    return Comparison(seed, run, lstm_metrics(run, data.test), sweep.best, sweep.best_threshold)


@dataclass
class ConvergenceTrial:
    seed: int
    budget: int
    sgd: TrainRun
    lbfgs: TrainRun

    @property
    def summary(self):
        return convergence_compare(self.sgd, self.lbfgs)


def convergence_trial(seed: int, budget: int, data: SyntheticData | None = None) -> ConvergenceTrial:
    """SGD and L-BFGS from the same initial weights for at most ``budget`` epochs."""
    data = data or make_dataset(seed=seed)
    model = init_model(default_lstm(seed))
    sgd = train(model, data.train, data.val, default_sgd(len(data.train), seed, budget, patience=budget))
    lbfgs = train(model, data.train, data.val, lbfgs_config(seed, budget, patience=budget))
    return ConvergenceTrial(seed, budget, sgd, lbfgs)


def median_epochs(values, budget: int) -> float:
    """Median with not-reached counted as beyond the budget."""
    return float(np.median([budget + 1 if v is None else v for v in values]))
