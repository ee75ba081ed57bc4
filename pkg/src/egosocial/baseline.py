"""Frame-vote baseline: F-formation test per frame, then a fraction threshold."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evaluation import Metrics, compute_metrics
from .errors import InvalidArgumentError
from .geometry import INTERACTION_CONE_DEG, O_SPACE_DIAMETER_CM


@dataclass(frozen=True)
class BaselineConfig:
    threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise InvalidArgumentError(f"threshold must lie in [0, 1], got {self.threshold}")


def interacting_fraction(series) -> float:
    frames = series.frames if hasattr(series, "frames") else np.asarray(series, dtype=float).reshape(-1, 2)
    if len(frames) == 0:
        raise InvalidArgumentError("empty series")
    hits = (frames[:, 0] <= O_SPACE_DIAMETER_CM) & (np.abs(frames[:, 1]) <= INTERACTION_CONE_DEG)
    return float(np.count_nonzero(hits)) / len(frames)


def classify_baseline(series, config: BaselineConfig = BaselineConfig()) -> int:
    """1 when strictly more than ``threshold`` of the frames are interacting."""
    return int(interacting_fraction(series) > config.threshold)


@dataclass
class SweepResult:
    thresholds: list
    metrics: list
    best_threshold: float
    best: Metrics

    def rows(self):
        return [(t, m.precision, m.recall, m.f_measure) for t, m in zip(self.thresholds, self.metrics)]


def sweep_threshold(series_list, grid) -> SweepResult:
    grid = [float(t) for t in grid]
    if not grid:
        raise InvalidArgumentError("threshold grid is empty")
    for t in grid:
        BaselineConfig(t)
    labels = [s.label for s in series_list]
    if any(lab is None for lab in labels):
        raise InvalidArgumentError("sweep needs labelled series")
    fractions = np.array([interacting_fraction(s) for s in series_list])
    metrics = [compute_metrics((fractions > t).astype(int).tolist(), labels) for t in grid]
    # ascending scan with strict improvement keeps the smaller threshold on ties
    order = sorted(range(len(grid)), key=lambda i: grid[i])
    best_i = order[0]
    for i in order[1:]:
        if metrics[i].f_measure > metrics[best_i].f_measure:
            best_i = i
    return SweepResult(grid, metrics, grid[best_i], metrics[best_i])


def default_grid(step: float = 0.01):
    return np.round(np.arange(0.0, 1.0 + step / 2, step), 10).tolist()
