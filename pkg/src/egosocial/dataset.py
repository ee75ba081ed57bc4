"""Interaction series: construction, balanced splitting, augmentation, I/O."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import geometry
from .errors import InfeasibleSplitError, InvalidArgumentError
from .geometry import FaceObservation, PersonTrack

MAX_DISTANCE_CM = 500.0
AUGMENT_LENGTH_BOUNDS = (10, 40)


@dataclass(eq=False)
class InteractionSeries:
    series_id: str
    frames: np.ndarray  # (T, 2): distance_cm, orientation_deg
    label: Optional[int] = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float).reshape(-1, 2)
        if self.label is not None:
            self.label = int(self.label)
            if self.label not in (0, 1):
                raise InvalidArgumentError(f"label must be 0 or 1, got {self.label}")

    def __len__(self):
        return len(self.frames)

    @property
    def distances(self) -> np.ndarray:
        return self.frames[:, 0]

    @property
    def orientations(self) -> np.ndarray:
        return self.frames[:, 1]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    val_fraction: float = 0.15
    test_fraction: float = 0.15
    balanced: bool = True
    seed: int = 0

    def __post_init__(self):
        fr = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(f < 0 for f in fr) or not math.isclose(sum(fr), 1.0, abs_tol=1e-9):
            raise InvalidArgumentError(f"split fractions must be non-negative and sum to 1, got {fr}")


@dataclass(frozen=True)
class AugmentSpec:
    copies_per_series: int = 50
    length_range: tuple[int, int] = AUGMENT_LENGTH_BOUNDS
    positive_distance_range_cm: tuple[float, float] = (10.0, geometry.O_SPACE_DIAMETER_CM)
    positive_orientation_range_deg: tuple[float, float] = (
        -geometry.INTERACTION_CONE_DEG,
        geometry.INTERACTION_CONE_DEG,
    )
    injection_fraction: float = 0.3
    bias_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.length_range
        if not AUGMENT_LENGTH_BOUNDS[0] <= lo <= hi <= AUGMENT_LENGTH_BOUNDS[1]:
            raise InvalidArgumentError(f"length range {self.length_range} must lie within {AUGMENT_LENGTH_BOUNDS}")
        if self.copies_per_series < 1:
            raise InvalidArgumentError("copies_per_series must be positive")
        for name in ("injection_fraction", "bias_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidArgumentError(f"{name} must lie in [0, 1]")


def build_series(track: PersonTrack, model: geometry.DistanceModel) -> InteractionSeries:
    if not track.observations:
        raise InvalidArgumentError("empty track")
    if not track.poses_complete:
        raise InvalidArgumentError(f"track {track.sequence_id}/{track.person_id} has missing poses; impute first")
    frames = [
        (geometry.estimate_distance(model, o.face_height_px), o.pose_deg) for o in track.observations
    ]
    return InteractionSeries(f"{track.sequence_id}/{track.person_id}", np.array(frames), track.label)


def split_dataset(series: list[InteractionSeries], spec: SplitSpec = SplitSpec()):
    """Partition labelled series into (train, val, test).

    With ``balanced`` the train set takes ``floor(train_fraction * n_c)`` of
    the minority class from each class, so it holds equal class counts; the
    majority-class surplus goes to val/test. The leftover of each class is
    shared between val and test in proportion to their fractions, with odd
    items assigned alternately (starting side chosen by the seed).
    """
    if any(s.label is None for s in series):
        raise InvalidArgumentError("every series must be labelled before splitting")
    rng = np.random.default_rng(spec.seed)
    by_class = {c: [s for s in series if s.label == c] for c in (0, 1)}
    if spec.balanced and min(len(v) for v in by_class.values()) == 0:
        raise InfeasibleSplitError("balanced split needs both classes present")
    for c in (0, 1):
        order = rng.permutation(len(by_class[c]))
        by_class[c] = [by_class[c][i] for i in order]

    if spec.balanced:
        minority = min(len(v) for v in by_class.values())
        per_class = math.floor(spec.train_fraction * minority + 1e-9)
        n_train = {0: per_class, 1: per_class}
    else:
        n_train = {c: math.floor(spec.train_fraction * len(v) + 1e-9) for c, v in by_class.items()}

    train, val, test = [], [], []
    give_val_first = rng.random() < 0.5
    for c in (0, 1):
        items = by_class[c]
        train.extend(items[: n_train[c]])
        rest = items[n_train[c]:]
        exact = len(rest) * spec.val_fraction / max(spec.val_fraction + spec.test_fraction, 1e-300)
        k = math.floor(exact + 1e-9)
        if exact - k > 1e-9:
            if give_val_first:
                k += 1
            give_val_first = not give_val_first
        val.extend(rest[:k])
        test.extend(rest[k:])
    return train, val, test


def _interacting_frames(rng, n, spec: AugmentSpec):
    d = rng.uniform(*spec.positive_distance_range_cm, size=n)
    o = rng.uniform(*spec.positive_orientation_range_deg, size=n)
    return np.column_stack([d, o])


def _non_interacting_frames(rng, n, spec: AugmentSpec):
    """Half the draws break the distance bound, the other half the cone."""
    d_lo, d_hi = spec.positive_distance_range_cm
    o_lo, o_hi = spec.positive_orientation_range_deg
    lim = geometry.POSE_LIMIT_DEG
    out = np.empty((n, 2))
    far = rng.random(n) < 0.5
    for i in range(n):
        if far[i]:
            # (d_hi, MAX]: reflect the half-open uniform draw
            out[i, 0] = MAX_DISTANCE_CM - rng.uniform(0.0, MAX_DISTANCE_CM - d_hi)
            out[i, 1] = rng.uniform(-lim, lim)
        else:
            out[i, 0] = rng.uniform(d_lo, MAX_DISTANCE_CM)
            width_left, width_right = o_lo + lim, lim - o_hi
            u = rng.uniform(0.0, width_left + width_right)
            # [-lim, o_lo) and (o_hi, lim]
            out[i, 1] = -lim + u if u < width_left else lim - (u - width_left)
    return out


def augment_with_origin(series: InteractionSeries, spec: AugmentSpec, rng=None):
    """Like ``augment`` but also returns, per copy, an array tagging each frame
    as 0 (resampled source), 1 (label-consistent injection) or 2 (bias)."""
    if series.label is None:
        raise InvalidArgumentError("augmentation needs a labelled series")
    if len(series) == 0:
        raise InvalidArgumentError("cannot augment an empty series")
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    consistent, inconsistent = (
        (_interacting_frames, _non_interacting_frames)
        if series.label == 1
        else (_non_interacting_frames, _interacting_frames)
    )
    out = []
    lo, hi = spec.length_range
    n_src = len(series)
    for k in range(spec.copies_per_series):
        length = int(rng.integers(lo, hi + 1))
        idx = np.sort(rng.integers(0, n_src, size=length))
        frames = series.frames[idx].copy()
        origin = np.zeros(length, dtype=np.int8)
        n_inj = math.ceil(spec.injection_fraction * length - 1e-9)
        if n_inj:
            pos = rng.choice(length, size=n_inj, replace=False)
            frames[pos] = consistent(rng, n_inj, spec)
            origin[pos] = 1
        n_bias = math.ceil(spec.bias_fraction * length - 1e-9)
        if n_bias:
            pos = rng.choice(length, size=n_bias, replace=False)
            frames[pos] = inconsistent(rng, n_bias, spec)
            origin[pos] = 2
        out.append((InteractionSeries(f"{series.series_id}#aug{k}", frames, series.label), origin))
    return out


def augment(series: InteractionSeries, spec: AugmentSpec, rng=None) -> list[InteractionSeries]:
    """Synthetic variants of a labelled series.

    Each copy resamples source frames (sorted indices, with replacement) to a
    random length, overwrites a share of frames with label-consistent features,
    then a smaller share with label-inconsistent ones.
    """
    return [s for s, _ in augment_with_origin(series, spec, rng)]


def augment_all(series: Iterable[InteractionSeries], spec: AugmentSpec) -> list[InteractionSeries]:
    """Augment every series with its own generator derived from (seed, position)."""
    out = []
    for i, s in enumerate(series):
        rng = np.random.default_rng([spec.seed, i])
        out.extend(augment(s, spec, rng))
    return out


def normalize(series) -> np.ndarray:
    """Map (distance, orientation) frames into [-1, 1]^2."""
    frames = series.frames if isinstance(series, InteractionSeries) else np.asarray(series, dtype=float)
    frames = frames.reshape(-1, 2)
    d = np.minimum(frames[:, 0], MAX_DISTANCE_CM) / MAX_DISTANCE_CM * 2.0 - 1.0
    o = frames[:, 1] / geometry.POSE_LIMIT_DEG
    return np.column_stack([d, o])


def denormalize(pairs) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    d = (pairs[:, 0] + 1.0) / 2.0 * MAX_DISTANCE_CM
    o = pairs[:, 1] * geometry.POSE_LIMIT_DEG
    return np.column_stack([d, o])


@dataclass
class Batch:
    """Zero-padded normalized inputs (B, T, 2), true lengths and labels."""

    inputs: np.ndarray
    lengths: np.ndarray
    labels: Optional[np.ndarray] = None
    ids: list = field(default_factory=list)

    def __len__(self):
        return len(self.lengths)

    def subset(self, idx) -> "Batch":
        idx = np.asarray(idx)
        lengths = self.lengths[idx]
        t_max = int(lengths.max())
        return Batch(
            self.inputs[idx, :t_max],
            lengths,
            None if self.labels is None else self.labels[idx],
            [self.ids[i] for i in idx] if self.ids else [],
        )


def to_batch(series: list[InteractionSeries]) -> Batch:
    if not series:
        raise InvalidArgumentError("empty batch")
    lengths = np.array([len(s) for s in series], dtype=int)
    if lengths.min() < 1:
        raise InvalidArgumentError("series must have at least one frame")
    inputs = np.zeros((len(series), int(lengths.max()), 2))
    for i, s in enumerate(series):
        inputs[i, : len(s)] = normalize(s)
    labels = None
    if all(s.label is not None for s in series):
        labels = np.array([s.label for s in series], dtype=float)
    return Batch(inputs, lengths, labels, [s.series_id for s in series])


# --- file formats ---------------------------------------------------------

def read_tracks_jsonl(path) -> list[PersonTrack]:
    tracks = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                obs = [
                    FaceObservation(
                        int(f["t"]),
                        float(f["x_center_px"]),
                        float(f["face_height_px"]),
                        None if f.get("pose_deg") is None else float(f["pose_deg"]),
                    )
                    for f in rec["frames"]
                ]
                label = rec.get("label")
                tracks.append(PersonTrack(str(rec["sequence_id"]), str(rec["person_id"]), obs,
                                          None if label is None else int(label)))
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise InvalidArgumentError(f"{path}:{lineno}: bad track record ({exc})") from exc
    return tracks


def write_tracks_jsonl(path, tracks: Iterable[PersonTrack]):
    with open(path, "w") as fh:
        for tr in tracks:
            rec = {
                "sequence_id": tr.sequence_id,
                "person_id": tr.person_id,
                "label": tr.label,
                "frames": [
                    {"t": o.frame_index, "x_center_px": o.x_center_px,
                     "face_height_px": o.face_height_px, "pose_deg": o.pose_deg}
                    for o in tr.observations
                ],
            }
            fh.write(json.dumps(rec) + "\n")


SERIES_HEADER = ["series_id", "frame", "distance_cm", "orientation_deg", "label"]


def write_series_csv(path, series: Iterable[InteractionSeries]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_HEADER)
        for s in series:
            label = "" if s.label is None else s.label
            for t, (d, o) in enumerate(s.frames):
                w.writerow([s.series_id, t, repr(float(d)), repr(float(o)), label])


def read_series_csv(path) -> list[InteractionSeries]:
    rows: dict[str, list] = {}
    labels: dict[str, Optional[int]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(SERIES_HEADER) <= set(reader.fieldnames):
            raise InvalidArgumentError(f"series file needs header {','.join(SERIES_HEADER)}")
        for r in reader:
            sid = r["series_id"]
            rows.setdefault(sid, []).append((int(r["frame"]), float(r["distance_cm"]), float(r["orientation_deg"])))
            lab = r["label"].strip()
            labels[sid] = None if lab == "" else int(lab)
    out = []
    for sid, frames in rows.items():
        frames.sort()
        out.append(InteractionSeries(sid, np.array([f[1:] for f in frames]), labels[sid]))
    return out
