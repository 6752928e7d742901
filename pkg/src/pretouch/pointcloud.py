"""Point clouds, rigid transforms, camera projection, and file I/O.

All lengths are centimeters. Clouds are immutable, order-preserving value
objects: point i of a transformed or noised cloud corresponds to point i of
the input, which the scan scoring relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray


class PcdFormatError(ValueError):
    """Raised for malformed or unsupported PCD content."""


@dataclass(frozen=True)
class PointCloud:
    """Ordered (N, 3) array of points in centimeters."""

    points: NDArray[np.float64]

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"expected (N, 3) points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.empty((0, 3)))

    def select(self, indices: NDArray[np.intp]) -> "PointCloud":
        """Subset cloud keeping the given row order."""
        return PointCloud(self.points[np.asarray(indices, dtype=np.intp)])


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) pose: p -> rotation @ p + translation (cm)."""

    rotation: NDArray[np.float64]
    translation: NDArray[np.float64]

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise ValueError("transform entries must be finite")
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-9:
            raise ValueError("rotation is not orthonormal (R^T R != I within 1e-9)")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation determinant must be +1 (no reflections)")
        r = r.copy()
        t = t.copy()
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self o other)(p) = self(other(p))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def as_matrix(self) -> NDArray[np.float64]:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply_points(self, pts: NDArray[np.float64]) -> NDArray[np.float64]:
        return pts @ self.rotation.T + self.translation


@dataclass(frozen=True)
class CameraModel:
    """Projection model for the image plane the scan regions live in.

    mode "pinhole": u = fx*x/z + cx, v = fy*y/z + cy (z > 0 required).
    mode "orthographic": u = scale*x + ox, v = scale*y + oy, depth ignored.

    Pinhole defaults match a first-generation structured-light depth camera;
    orthographic is the desk-scale model where the sensing axis is normal to
    the supporting table.
    """

    mode: str
    width: int = 640
    height: int = 480
    fx: float = 525.0
    fy: float = 525.0
    cx: float = 319.5
    cy: float = 239.5
    scale: float = 20.0
    ox: float = 0.0
    oy: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in ("pinhole", "orthographic"):
            raise ValueError(f"unknown camera mode {self.mode!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.mode == "pinhole" and (self.fx <= 0 or self.fy <= 0):
            raise ValueError("focal lengths must be positive")
        if self.mode == "orthographic" and self.scale <= 0:
            raise ValueError("orthographic scale must be positive")

    @classmethod
    def pinhole(
        cls,
        fx: float = 525.0,
        fy: float = 525.0,
        cx: float = 319.5,
        cy: float = 239.5,
        width: int = 640,
        height: int = 480,
    ) -> "CameraModel":
        return cls(mode="pinhole", width=width, height=height, fx=fx, fy=fy, cx=cx, cy=cy)

    @classmethod
    def orthographic(
        cls,
        scale: float = 20.0,
        ox: float = 0.0,
        oy: float = 0.0,
        width: int = 640,
        height: int = 480,
    ) -> "CameraModel":
        return cls(mode="orthographic", width=width, height=height, scale=scale, ox=ox, oy=oy)


def apply_transform(c: PointCloud, t: RigidTransform) -> PointCloud:
    return PointCloud(t.apply_points(c.points))


def add_gaussian_noise(c: PointCloud, sigma: float, rng: np.random.Generator) -> PointCloud:
    """Perturb every coordinate by independent N(0, sigma^2) cm."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return c
    return PointCloud(c.points + rng.normal(0.0, sigma, size=c.points.shape))


def centroid(c: PointCloud) -> NDArray[np.float64]:
    if len(c) == 0:
        raise ValueError("centroid of an empty cloud is undefined")
    return c.points.mean(axis=0)


def project(c: PointCloud, cam: CameraModel) -> tuple[NDArray[np.float64], NDArray[np.intp]]:
    """Project to pixels; returns (pixels (N, 2), source indices (N,)).

    Index order follows point order, so pixels[i] is the image of point i.
    """
    pts = c.points
    idx = np.arange(len(pts), dtype=np.intp)
    if cam.mode == "orthographic":
        uv = cam.scale * pts[:, :2] + np.array([cam.ox, cam.oy])
        return uv, idx
    z = pts[:, 2]
    bad = np.nonzero(z <= 0)[0]
    if bad.size:
        raise ValueError(
            f"pinhole projection requires z > 0; point {int(bad[0])} has z={z[bad[0]]:g}"
        )
    u = cam.fx * pts[:, 0] / z + cam.cx
    v = cam.fy * pts[:, 1] / z + cam.cy
    return np.column_stack([u, v]), idx


def depth_image_to_cloud(depth_mm: NDArray[np.floating], cam: CameraModel) -> PointCloud:
    """Back-project a depth image (millimeters, 0 = missing) to centimeters.

    Valid pixels map row-major to cloud points: z = depth/10, x = (u-cx)*z/fx,
    y = (v-cy)*z/fy.
    """
    if cam.mode != "pinhole":
        raise ValueError("depth back-projection requires a pinhole camera")
    d = np.asarray(depth_mm, dtype=np.float64)
    if d.ndim != 2:
        raise ValueError(f"depth image must be 2D, got shape {d.shape}")
    if d.shape != (cam.height, cam.width):
        raise ValueError(
            f"depth image shape {d.shape} does not match camera {cam.height}x{cam.width}"
        )
    if np.any(d < 0):
        raise ValueError("depth values must be >= 0 (0 marks missing)")
    v, u = np.nonzero(d > 0)
    z = d[v, u] / 10.0
    x = (u - cam.cx) * z / cam.fx
    y = (v - cam.cy) * z / cam.fy
    return PointCloud(np.column_stack([x, y, z]))


# ---------------------------------------------------------------------------
# PCD ASCII v0.7 subset: FIELDS x y z, TYPE F, one point per line.
# ---------------------------------------------------------------------------

_HEADER_KEYS = (
    "VERSION",
    "FIELDS",
    "SIZE",
    "TYPE",
    "COUNT",
    "WIDTH",
    "HEIGHT",
    "VIEWPOINT",
    "POINTS",
    "DATA",
)


def save_pcd(c: PointCloud, path: str | Path) -> None:
    n = len(c)
    lines = [
        "VERSION 0.7",
        "FIELDS x y z",
        "SIZE 4 4 4",
        "TYPE F F F",
        "COUNT 1 1 1",
        f"WIDTH {n}",
        "HEIGHT 1",
        "VIEWPOINT 0 0 0 1 0 0 0",
        f"POINTS {n}",
        "DATA ascii",
    ]
    for x, y, z in c.points:
        lines.append(f"{x:.6f} {y:.6f} {z:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_pcd(path: str | Path) -> PointCloud:
    text = Path(path).read_text()
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if len(lines) < len(_HEADER_KEYS):
        raise PcdFormatError("truncated PCD header")

    header: dict[str, str] = {}
    for expected, line in zip(_HEADER_KEYS, lines):
        key, _, value = line.partition(" ")
        if key != expected:
            raise PcdFormatError(f"expected header key {expected}, got {key!r}")
        header[key] = value.strip()

    if header["FIELDS"].split() != ["x", "y", "z"]:
        raise PcdFormatError(f"unsupported FIELDS {header['FIELDS']!r} (only 'x y z')")
    if header["TYPE"].split() != ["F", "F", "F"]:
        raise PcdFormatError(f"unsupported TYPE {header['TYPE']!r} (only float fields)")
    if header["SIZE"].split() != ["4", "4", "4"]:
        raise PcdFormatError(f"unsupported SIZE {header['SIZE']!r}")
    if header["COUNT"].split() != ["1", "1", "1"]:
        raise PcdFormatError(f"unsupported COUNT {header['COUNT']!r}")
    if header["DATA"] != "ascii":
        raise PcdFormatError(f"unsupported DATA format {header['DATA']!r} (only ascii)")

    try:
        width = int(header["WIDTH"])
        height = int(header["HEIGHT"])
        points = int(header["POINTS"])
    except ValueError as e:
        raise PcdFormatError(f"non-integer WIDTH/HEIGHT/POINTS: {e}") from None
    if width * height != points:
        raise PcdFormatError(f"WIDTH*HEIGHT = {width * height} but POINTS = {points}")

    body = lines[len(_HEADER_KEYS):]
    if len(body) != points:
        raise PcdFormatError(f"expected {points} data lines, found {len(body)}")
    if points == 0:
        return PointCloud.empty()
    try:
        data = np.array([[float(f) for f in ln.split()] for ln in body])
    except ValueError as e:
        raise PcdFormatError(f"malformed data line: {e}") from None
    if data.shape != (points, 3):
        raise PcdFormatError("each data line must hold exactly three floats")
    return PointCloud(data)
