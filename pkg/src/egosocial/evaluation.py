"""Confusion metrics, comparison tables and optimizer convergence summaries."""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional

from .errors import InvalidArgumentError

LSTM_DECISION_THRESHOLD = 0.5

# Precision/recall/F-measure as printed in the original comparison table.
# Used to check table formatting only; not reproducible without that data.
REPORTED_TABLE = [
    ("LBFGS", 0.82, 0.74, 0.77),
    ("SGD", 0.73, 0.85, 0.78),
    ("HVFF", 0.80, 0.72, 0.75),
]


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f_measure: float
    precision_undefined: bool = False

    @classmethod
    def from_counts(cls, tp, fp, fn, tn=0) -> "Metrics":
        undefined = tp + fp == 0
        p = 0.0 if undefined else tp / (tp + fp)
        r = 0.0 if tp + fn == 0 else tp / (tp + fn)
        f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
        return cls(tp, fp, fn, tn, p, r, f, undefined)

    @property
    def accuracy(self) -> float:
        n = self.tp + self.fp + self.fn + self.tn
        return (self.tp + self.tn) / n if n else 0.0


def compute_metrics(predictions, labels) -> Metrics:
    predictions, labels = list(predictions), list(labels)
    if len(predictions) != len(labels):
        raise InvalidArgumentError(f"{len(predictions)} predictions for {len(labels)} labels")
    if not predictions:
        raise InvalidArgumentError("no predictions")
    tp = fp = fn = tn = 0
    for p, y in zip(predictions, labels):
        p, y = bool(p), bool(y)
        if p and y:
            tp += 1
        elif p:
            fp += 1
        elif y:
            fn += 1
        else:
            tn += 1
    return Metrics.from_counts(tp, fp, fn, tn)


def percent(x: float) -> int:
    """Fraction to integer percent, halves rounded away from zero."""
    return int(Decimal(repr(float(x))).scaleb(2).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def compare_report(runs) -> str:
    """Plain-text table: one column per method, rows Precision/Recall/F-measure.

    ``runs`` holds (name, Metrics) or (name, precision, recall, f_measure).
    """
    runs = list(runs)
    if not runs:
        raise InvalidArgumentError("nothing to report")
    names, cols = [], []
    for run in runs:
        if len(run) == 2:
            name, m = run
            vals = (m.precision, m.recall, m.f_measure)
        else:
            name, *vals = run
        names.append(str(name))
        cols.append([f"{percent(v)}%" for v in vals])
    label_w = max(len("F-measure"), 9)
    widths = [max(len(n), 4) for n in names]
    lines = [" " * label_w + " | " + " | ".join(n.rjust(w) for n, w in zip(names, widths))]
    lines.append("-" * len(lines[0]))
    for r, row_name in enumerate(("Precision", "Recall", "F-measure")):
        cells = " | ".join(col[r].rjust(w) for col, w in zip(cols, widths))
        lines.append(row_name.ljust(label_w) + " | " + cells)
    return "\n".join(lines)


@dataclass(frozen=True)
class ConvergenceSummary:
    target: float
    sgd_epochs: Optional[int]    # None: target not reached
    lbfgs_epochs: Optional[int]

    @property
    def lbfgs_not_slower(self) -> bool:
        if self.lbfgs_epochs is None:
            return self.sgd_epochs is None
        return self.sgd_epochs is None or self.lbfgs_epochs <= self.sgd_epochs


def epochs_to_target(val_losses, target) -> Optional[int]:
    for i, v in enumerate(val_losses, 1):
        if v < target:
            return i
    return None


def convergence_compare(run_sgd, run_lbfgs, target: Optional[float] = None, margin: float = 1.10) -> ConvergenceSummary:
    """First epoch each run's validation loss drops below ``target``.

    The default target is ``margin`` times the better of the two runs' best
    validation loss, so the better run always reaches it.
    """
    if target is None:
        best = min(min(run_sgd.val_loss, default=math.inf), min(run_lbfgs.val_loss, default=math.inf))
        target = margin * best
    return ConvergenceSummary(target, epochs_to_target(run_sgd.val_loss, target),
                              epochs_to_target(run_lbfgs.val_loss, target))


def metrics_rows(named_metrics):
    return [(name, m.precision, m.recall, m.f_measure) for name, m in named_metrics]
