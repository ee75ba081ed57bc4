"""Desk-scale stand-in for a labelled egocentric face-track corpus.

People are simulated in the bird-view plane and projected through a pinhole
camera, so the geometry pipeline (pose imputation, distance regression) is
exercised end to end. Interacting people stand close and mostly face the
wearer with occasional glances away; non-interacting people are far
bystanders, close people turned away, or passers-by.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .dataset import AugmentSpec, SplitSpec, augment_all, build_series, split_dataset
from .geometry import FaceObservation, PersonTrack


@dataclass(frozen=True)
class CameraSpec:
    image_width_px: int = 1000
    focal_px: float = geometry.DEFAULT_FOCAL_PX
    face_height_cm: float = 24.0

    def face_height_px(self, distance_cm):
        return self.focal_px * self.face_height_cm / np.asarray(distance_cm, dtype=float)


@dataclass(frozen=True)
class CorpusSpec:
    n_people: int = 100
    positive_fraction: float = 0.75
    length_range: tuple[int, int] = (10, 40)
    missing_pose_rate: float = 0.15
    seed: int = 0


def calibration_samples(camera: CameraSpec = CameraSpec(), heights=None, noise_cm: float = 0.0, seed: int = 0):
    """(face_height_px, distance_cm) pairs from the pinhole relation."""
    if heights is None:
        heights = np.arange(48.0, 241.0, 4.0)
    heights = np.asarray(heights, dtype=float)
    d = camera.focal_px * camera.face_height_cm / heights
    if noise_cm:
        d = d + np.random.default_rng(seed).normal(0.0, noise_cm, size=d.shape)
    return list(zip(heights.tolist(), d.tolist()))


def _positive_path(rng, n):
    if rng.random() < 0.6:  # face to face conversation
        base, pose_sd = rng.uniform(60, 135), 10.0
    else:  # conversation held just beyond the o-space bound, per-frame tests miss it
        base, pose_sd = rng.uniform(145, 190), 12.0
    dist = base + np.cumsum(rng.normal(0, 1.5, n)) + rng.normal(0, 8, n)
    pose = rng.normal(0, pose_sd, n)
    glance = rng.random(n) < rng.uniform(0.05, 0.3)
    pose[glance] = rng.choice([-1, 1], glance.sum()) * rng.uniform(35, 90, glance.sum())
    return dist, pose


def _negative_path(rng, n):
    kind = rng.choice(3, p=[0.25, 0.25, 0.5])
    if kind == 0:  # bystander at a distance, often looking our way
        dist = rng.uniform(250, 400) + rng.normal(0, 15, n)
        pose = rng.normal(0, 20, n)
    elif kind == 1:  # near but oriented elsewhere
        dist = rng.uniform(70, 170) + rng.normal(0, 10, n)
        pose = rng.choice([-1, 1]) * rng.uniform(40, 80) + rng.normal(0, 10, n)
    else:  # passer-by: a close, facing stretch between far approach and departure
        u = np.abs(np.linspace(-1, 1, n) + rng.uniform(-0.2, 0.2))
        plateau = rng.uniform(0.2, 0.6)
        ramp = np.maximum(u - plateau, 0.0) / (1.0 - plateau)
        dist = rng.uniform(80, 130) + rng.uniform(200, 350) * ramp + rng.normal(0, 10, n)
        pose = rng.uniform(40, 80) * ramp * rng.choice([-1, 1], n) + rng.normal(0, 10, n)
    return dist, pose


def simulate_tracks(spec: CorpusSpec = CorpusSpec(), camera: CameraSpec = CameraSpec()) -> list[PersonTrack]:
    rng = np.random.default_rng(spec.seed)
    n_pos = int(round(spec.positive_fraction * spec.n_people))
    labels = np.array([1] * n_pos + [0] * (spec.n_people - n_pos))
    rng.shuffle(labels)
    tracks = []
    for k, label in enumerate(labels):
        n = int(rng.integers(spec.length_range[0], spec.length_range[1] + 1))
        dist, pose = _positive_path(rng, n) if label else _negative_path(rng, n)
        dist = np.clip(dist, 40.0, 500.0)
        h = camera.face_height_px(dist) * (1.0 + rng.normal(0, 0.02, n))
        lateral = rng.uniform(-60, 60) + rng.normal(0, 10, n)
        x = camera.image_width_px / 2 + camera.focal_px * lateral / dist
        x = np.clip(x, 0, camera.image_width_px)
        missing = rng.random(n) < spec.missing_pose_rate
        missing[rng.integers(n)] = False
        frames = np.sort(rng.choice(np.arange(n + n // 4 + 1), size=n, replace=False))
        obs = [
            FaceObservation(int(frames[i]), float(x[i]), float(h[i]),
                            None if missing[i] else geometry.quantize_pose(float(np.clip(pose[i], -100, 100))))
            for i in range(n)
        ]
        tracks.append(PersonTrack(f"seq{k:04d}", "p0", obs, int(label)))
    return tracks


@dataclass
class SyntheticData:
    train: list
    val: list
    test: list
    real_train: list
    real_val: list
    real_test: list
    distance_model: geometry.DistanceModel


def make_dataset(
    corpus: CorpusSpec = CorpusSpec(),
    augment_train: AugmentSpec = AugmentSpec(copies_per_series=60),
    augment_eval: AugmentSpec = AugmentSpec(copies_per_series=10),
    camera: CameraSpec = CameraSpec(),
    seed: int | None = None,
) -> SyntheticData:
    """Simulate tracks, push them through geometry, split 70/15/15, augment.

    ``seed`` overrides the corpus, split and augmentation seeds together.
    """
    if seed is not None:
        corpus = CorpusSpec(**{**corpus.__dict__, "seed": seed})
        augment_train = AugmentSpec(**{**augment_train.__dict__, "seed": seed})
        augment_eval = AugmentSpec(**{**augment_eval.__dict__, "seed": seed + 1})
    dm = geometry.fit_distance_model(calibration_samples(camera))
    tracks = simulate_tracks(corpus, camera)
    series = [build_series(geometry.impute_poses(t), dm) for t in tracks]
    train, val, test = split_dataset(series, SplitSpec(seed=corpus.seed))
    augment_test = AugmentSpec(**{**augment_eval.__dict__, "seed": augment_eval.seed + 7919})
    return SyntheticData(
        train=augment_all(train, augment_train),
        val=augment_all(val, augment_eval),
        test=augment_all(test, augment_test),
        real_train=train,
        real_val=val,
        real_test=test,
        distance_model=dm,
    )
