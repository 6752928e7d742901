"""Simulated pre-touch scanning: pose offsets and perimeter-band extraction.

A scan region is a rotated rectangle in the image plane. The simulator picks
cloud points whose projections fall within a band of the rectangle perimeter:
a wide band on the reference cloud (the region a scan should land in) and a
narrow band on the offset cloud (the scan line itself), then perturbs the
scan with sensor noise. Ground truth for scoring is the noised scan mapped
back through the inverse offset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .geometry import RotatedRect, perimeter_distances
from .pointcloud import CameraModel, PointCloud, RigidTransform, add_gaussian_noise, apply_transform, project


@dataclass(frozen=True, slots=True)
class OffsetSpec:
    """Uniform bounds for simulated miscalibration: +-trans_limit cm per axis,
    +-rot_limit degrees per roll/pitch/yaw angle."""

    trans_limit: float = 2.0
    rot_limit: float = 5.0

    def __post_init__(self) -> None:
        if self.trans_limit < 0 or self.rot_limit < 0:
            raise ValueError("offset limits must be >= 0")


@dataclass(frozen=True, slots=True)
class ScanConfig:
    """Perimeter-band half-widths (px) and scan noise (cm).

    Defaults: a scan lies on the perimeter within 1 px; a reference point
    counts as near it within 3 px. At the default orthographic 20 px/cm the
    near band is 0.15 cm, matching the noise scale so targets tolerate
    source jitter.
    """

    on_band: float = 1.0
    near_band: float = 3.0
    noise_sigma: float = 0.15

    def __post_init__(self) -> None:
        if not (0 < self.on_band <= self.near_band):
            raise ValueError("bands must satisfy 0 < on_band <= near_band")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def rotation_zyx(roll: float, pitch: float, yaw: float) -> NDArray[np.float64]:
    """Rotation matrix Rz(yaw) @ Ry(pitch) @ Rx(roll), angles in radians."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


def random_offset(spec: OffsetSpec, rng: np.random.Generator) -> RigidTransform:
    """Draw a pose offset: translations first, then roll/pitch/yaw, all
    uniform within the spec bounds."""
    t = rng.uniform(-spec.trans_limit, spec.trans_limit, 3)
    roll, pitch, yaw = rng.uniform(
        -np.deg2rad(spec.rot_limit), np.deg2rad(spec.rot_limit), 3
    )
    return RigidTransform(rotation_zyx(roll, pitch, yaw), t)


def band_indices(
    uv: NDArray[np.float64], r: RotatedRect, band: float
) -> NDArray[np.intp]:
    """Indices of projected pixels within `band` px of the rect perimeter."""
    if len(uv) == 0:
        return np.empty(0, dtype=np.intp)
    return np.nonzero(perimeter_distances(r, uv) <= band)[0]


def extract_target(
    k: PointCloud, r: RotatedRect, cam: CameraModel, cfg: ScanConfig
) -> PointCloud:
    """Reference-cloud points near or on the rect perimeter (near_band).

    May be empty: a rect whose perimeter misses the cloud has no target, and
    callers must treat that as an unusable region.
    """
    if len(k) == 0:
        raise ValueError("extract_target requires a nonempty cloud")
    uv, _ = project(k, cam)
    return k.select(band_indices(uv, r, cfg.near_band))


def extract_source(
    k_off: PointCloud, r: RotatedRect, cam: CameraModel, cfg: ScanConfig
) -> PointCloud:
    """Offset-cloud points on the rect perimeter (on_band): the simulated
    noiseless scan line."""
    if len(k_off) == 0:
        return PointCloud.empty()
    uv, _ = project(k_off, cam)
    return k_off.select(band_indices(uv, r, cfg.on_band))


def simulate_scan(
    obj: PointCloud,
    r: RotatedRect,
    offset: RigidTransform,
    cam: CameraModel,
    cfg: ScanConfig,
    rng: np.random.Generator,
) -> tuple[PointCloud, PointCloud]:
    """Scan the offset object along the rect perimeter.

    Returns (source, ground_truth_aligned): the noised scan of the offset
    cloud, and the same points mapped back by the inverse offset — where a
    perfect alignment would put them. Both share point order; both are empty
    when the perimeter misses the offset cloud.
    """
    k_off = apply_transform(obj, offset)
    source = add_gaussian_noise(extract_source(k_off, r, cam, cfg), cfg.noise_sigma, rng)
    return source, apply_transform(source, offset.inverse())
