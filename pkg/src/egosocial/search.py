"""Random hyperparameter search with log-uniform sampling."""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import DivergedError, InvalidSpaceError, NoViableConfigError
from .lstm import LstmConfig, init_model
from .training import TrainConfig, train

# A momentum of 1 never decays the velocity; sampled values are capped here.
MOMENTUM_CAP = 0.999


@dataclass(frozen=True)
class SearchSpace:
    num_blocks: tuple[int, int] = (2, 200)
    learning_rate: tuple[float, float] = (1e-5, 1.0)
    momentum: tuple[float, float] = (0.01, 1.0)
    batch_size: tuple[int, int] = (200, 1000)

    def __post_init__(self):
        for name in ("num_blocks", "learning_rate", "momentum", "batch_size"):
            lo, hi = getattr(self, name)
            if not (lo > 0 and hi >= lo):
                raise InvalidSpaceError(f"{name} bounds {lo, hi} must satisfy 0 < lo <= hi")


def log_uniform(rng, lo, hi):
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def log_uniform_int(rng, lo, hi):
    return int(min(max(round(log_uniform(rng, lo, hi)), lo), hi))


def sample_config(space: SearchSpace, master_seed: int, trial_index: int,
                  base_lstm: LstmConfig = LstmConfig(), base_train: TrainConfig = TrainConfig()):
    """Draw one (LstmConfig, TrainConfig); depends only on (master_seed, trial_index)."""
    if trial_index < 0:
        raise InvalidSpaceError("trial index must be non-negative")
    rng = np.random.default_rng([master_seed, trial_index])
    blocks = log_uniform_int(rng, *space.num_blocks)
    lr = log_uniform(rng, *space.learning_rate)
    momentum = min(log_uniform(rng, *space.momentum), MOMENTUM_CAP)
    batch = log_uniform_int(rng, *space.batch_size)
    seed = int(rng.integers(2**31 - 1))
    lstm_cfg = replace(base_lstm, num_blocks=blocks, seed=seed)
    train_cfg = replace(base_train, learning_rate=lr, momentum=momentum, batch_size=batch, seed=seed)
    return lstm_cfg, train_cfg


@dataclass
class TrialResult:
    trial: int
    lstm: LstmConfig
    train: TrainConfig
    val_loss: float
    val_acc: float
    best_epoch: int
    seconds: float
    diverged: bool = False

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["val_loss"] = None if math.isinf(self.val_loss) else self.val_loss
        return rec

    def key(self):
        return (self.val_loss, self.trial)


def run_trial(lstm_cfg: LstmConfig, train_cfg: TrainConfig, train_set, val_set, trial: int) -> TrialResult:
    start = time.perf_counter()
    try:
        run = train(init_model(lstm_cfg), train_set, val_set, train_cfg)
    except DivergedError as exc:
        return TrialResult(trial, lstm_cfg, train_cfg, math.inf, 0.0, exc.epoch, time.perf_counter() - start, True)
    return TrialResult(trial, lstm_cfg, train_cfg, run.best_val_loss, run.best_val_acc, run.best_epoch,
                       time.perf_counter() - start)


def _run_indexed(args):
    return run_trial(*args)


def random_search(space: SearchSpace, train_set, val_set, trials: int, master_seed: int = 0,
                  base_lstm: LstmConfig = LstmConfig(), base_train: TrainConfig = TrainConfig(),
                  workers: int = 1, log_path=None) -> list[TrialResult]:
    """Run ``trials`` sampled configurations; return them ranked by validation loss.

    Diverged trials stay in the list with an infinite loss. Ties break by
    trial index, so the ranking never depends on execution order.
    """
    if trials < 1:
        raise InvalidSpaceError("need at least one trial")
    jobs = [(*sample_config(space, master_seed, i, base_lstm, base_train), train_set, val_set, i)
            for i in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_indexed, jobs))
    else:
        results = [_run_indexed(j) for j in jobs]
    if log_path is not None:
        with open(log_path, "a") as fh:
            for r in results:
                fh.write(json.dumps(r.to_record()) + "\n")
    if all(r.diverged for r in results):
        raise NoViableConfigError(f"all {trials} trials diverged")
    return sorted(results, key=TrialResult.key)


SUMMARY_HEADER = ["rank", "trial", "num_blocks", "lr", "momentum", "batch", "val_loss", "val_acc"]


def write_summary_csv(path, ranked: list[TrialResult]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for rank, r in enumerate(ranked, 1):
            w.writerow([rank, r.trial, r.lstm.num_blocks, repr(r.train.learning_rate), repr(r.train.momentum),
                        r.train.batch_size, repr(r.val_loss), repr(r.val_acc)])
