"""F-formation quantities from face observations.

Head pose is yaw only, in degrees, negative to the wearer's left. Distance is
the camera-to-face depth in centimetres estimated from face pixel height.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError, UnderdeterminedFitError, UnusableTrackError

O_SPACE_DIAMETER_CM = 150.0
INTERACTION_CONE_DEG = 30.0
WEARER_FOV_DEG = 180.0
POSE_STEP_DEG = 15.0
POSE_LIMIT_DEG = WEARER_FOV_DEG / 2
DEFAULT_FOCAL_PX = 600.0
IMPUTE_WINDOW = 2
MIN_DISTANCE_CM = 1.0


@dataclass(frozen=True)
class FaceObservation:
    frame_index: int
    x_center_px: float
    face_height_px: float
    pose_deg: Optional[float] = None

    def __post_init__(self):
        if self.frame_index < 0:
            raise InvalidArgumentError(f"negative frame index {self.frame_index}")
        if not self.face_height_px > 0:
            raise InvalidArgumentError(f"face height must be positive, got {self.face_height_px}")


@dataclass(frozen=True)
class PersonTrack:
    sequence_id: str
    person_id: str
    observations: tuple[FaceObservation, ...]
    label: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))
        if not self.observations:
            raise InvalidArgumentError("a track needs at least one observation")
        frames = [o.frame_index for o in self.observations]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise InvalidArgumentError("frame indices must be strictly increasing")
        if self.label not in (None, 0, 1):
            raise InvalidArgumentError(f"label must be 0, 1 or None, got {self.label!r}")

    @property
    def poses_complete(self) -> bool:
        return all(o.pose_deg is not None for o in self.observations)


@dataclass(frozen=True)
class DistanceModel:
    """distance_cm = c0 + c1*h + c2*h**2, with h clamped to [h_min, h_max]."""

    c0: float
    c1: float
    c2: float
    h_min: float
    h_max: float

    def save(self, path):
        lines = [f"{k}={getattr(self, k)!r}" for k in ("c0", "c1", "c2", "h_min", "h_max")]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "DistanceModel":
        values = {}
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            values[key.strip()] = float(value)
        missing = {"c0", "c1", "c2", "h_min", "h_max"} - set(values)
        if missing:
            raise InvalidArgumentError(f"distance model file lacks {sorted(missing)}")
        return cls(**{k: values[k] for k in ("c0", "c1", "c2", "h_min", "h_max")})


@dataclass(frozen=True)
class BirdViewPoint:
    x_cm: float
    z_cm: float


def quantize_pose(angle_deg: float) -> float:
    """Snap a yaw angle to the 15 degree grid, clamped to [-90, 90].

    Exact half-way values round toward zero, so 7.5 -> 0 and -22.5 -> -15.
    """
    if not math.isfinite(angle_deg):
        raise InvalidArgumentError(f"pose must be finite, got {angle_deg}")
    q = abs(angle_deg) / POSE_STEP_DEG
    lower = math.floor(q)
    steps = lower if q - lower <= 0.5 else lower + 1
    value = min(steps * POSE_STEP_DEG, POSE_LIMIT_DEG)
    if value == 0:
        return 0.0
    return math.copysign(value, angle_deg)


def _median_quantized(values: Sequence[float]) -> float:
    return quantize_pose(float(np.median(values)))


def impute_poses(track: PersonTrack, window: int = IMPUTE_WINDOW) -> PersonTrack:
    """Fill missing poses with the median of known poses within +-window frames.

    If no known pose falls inside the window, the nearest known pose is used
    (earlier frame wins a tie). Only originally known poses feed the median,
    so the result does not depend on fill order. Known poses are untouched.
    """
    known = [(o.frame_index, quantize_pose(o.pose_deg)) for o in track.observations if o.pose_deg is not None]
    if not known:
        raise UnusableTrackError(f"track {track.sequence_id}/{track.person_id} has no pose estimates")
    filled = []
    for obs in track.observations:
        if obs.pose_deg is not None:
            filled.append(obs)
            continue
        near = [p for f, p in known if abs(f - obs.frame_index) <= window]
        if near:
            pose = _median_quantized(near)
        else:
            pose = min(known, key=lambda fp: (abs(fp[0] - obs.frame_index), fp[0]))[1]
        filled.append(replace(obs, pose_deg=pose))
    return replace(track, observations=tuple(filled))


def fit_distance_model(samples) -> DistanceModel:
    """Least-squares quadratic from (face_height_px, distance_cm) pairs."""
    data = np.asarray(samples, dtype=float).reshape(-1, 2)
    h, d = data[:, 0], data[:, 1]
    if np.unique(h).size < 3:
        raise UnderdeterminedFitError("need at least 3 distinct face heights for a quadratic fit")
    # scale heights for conditioning, then undo on the coefficients
    scale = float(np.max(np.abs(h)))
    u = h / scale
    design = np.column_stack([np.ones_like(u), u, u * u])
    coef, *_ = np.linalg.lstsq(design, d, rcond=None)
    return DistanceModel(
        c0=float(coef[0]),
        c1=float(coef[1] / scale),
        c2=float(coef[2] / scale**2),
        h_min=float(h.min()),
        h_max=float(h.max()),
    )


def estimate_distance(model: DistanceModel, face_height_px: float) -> float:
    if not face_height_px > 0:
        raise InvalidArgumentError(f"face height must be positive, got {face_height_px}")
    h = min(max(face_height_px, model.h_min), model.h_max)
    d = model.c0 + model.c1 * h + model.c2 * h * h
    return max(d, MIN_DISTANCE_CM)


def to_bird_view(
    obs: FaceObservation,
    model: DistanceModel,
    image_width_px: int,
    focal_px: float = DEFAULT_FOCAL_PX,
) -> BirdViewPoint:
    if obs.pose_deg is None:
        raise InvalidArgumentError("observation pose must be imputed before projection")
    if image_width_px <= 0:
        raise InvalidArgumentError("image width must be positive")
    if not 0 <= obs.x_center_px <= image_width_px:
        raise InvalidArgumentError(f"x center {obs.x_center_px} outside image of width {image_width_px}")
    z = estimate_distance(model, obs.face_height_px)
    x = (obs.x_center_px - image_width_px / 2) * z / focal_px
    return BirdViewPoint(x_cm=x, z_cm=z)


def frame_interacting(distance_cm: float, orientation_deg: float) -> bool:
    """Frame-level F-formation test: inside the o-space and facing the wearer."""
    return distance_cm <= O_SPACE_DIAMETER_CM and abs(orientation_deg) <= INTERACTION_CONE_DEG


def read_calibration_csv(path) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"face_height_px", "distance_cm"} <= set(reader.fieldnames):
            raise InvalidArgumentError("calibration file needs header face_height_px,distance_cm")
        return [(float(r["face_height_px"]), float(r["distance_cm"])) for r in reader]


def write_calibration_csv(path, samples):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["face_height_px", "distance_cm"])
        for h, d in samples:
            w.writerow([repr(float(h)), repr(float(d))])
