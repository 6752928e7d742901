"""Deterministic desk-scale test objects with known pose-information structure.

Each fixture is a 2.5D sample of a shape's visible-from-above surface: points
are stratified over the footprint (one jittered sample per grid cell at the
requested density) and lifted by an analytic height field. The same spec
always produces the same cloud.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pointcloud import PointCloud

KINDS = ("plane", "box_top", "l_plate", "disk", "ring", "asym_blob")

_DEFAULT_DIMENSIONS = {
    "plane": (10.0, 10.0),
    "box_top": (10.0, 10.0),
    "l_plate": (10.0, 4.0),
    "disk": (5.0,),
    "ring": (5.0, 3.5),
    "asym_blob": (10.0, 8.0),
}

# box_top and l_plate plateaus: raised surfaces joined to the rim by a linear
# bevel, so the visible surface has in-plane depth gradients at its edges
# rather than a single vertical step. A plate on a table shows its edges as
# depth discontinuities; keeping that ramp inside the footprint means a
# perimeter scan crossing an edge retains a persistent pull toward the true
# edge position instead of losing all height signal past the rim.
_TOP_FRAC = 0.55
_TOP_HEIGHT = 2.5
_BEVEL_WIDTH = 1.2

# asym_blob bump field; amplitudes and widths keep surface slopes well above
# one sample pitch of height change so registration cannot alias onto the
# sampling lattice.
_N_BUMPS = 5
_BUMP_AMP = (1.5, 3.0)
_BUMP_SIGMA = (1.0, 1.8)


@dataclass(frozen=True, slots=True)
class FixtureSpec:
    """Recipe for one synthetic object.

    dimensions (cm) are interpreted per kind:
      plane, box_top, asym_blob: (width, height) of the footprint
      l_plate: (arm_length, arm_width), arm_length > arm_width
      disk: (radius,)
      ring: (outer_radius, inner_radius)
    """

    kind: str
    dimensions: tuple[float, ...] | None = None
    sample_density: float = 25.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown fixture kind {self.kind!r}; expected one of {KINDS}")
        dims = self.dimensions
        if dims is None:
            dims = _DEFAULT_DIMENSIONS[self.kind]
        dims = tuple(float(d) for d in dims)
        expected = len(_DEFAULT_DIMENSIONS[self.kind])
        if len(dims) != expected:
            raise ValueError(f"{self.kind} takes {expected} dimension(s), got {len(dims)}")
        if any(not math.isfinite(d) or d <= 0 for d in dims):
            raise ValueError("dimensions must be positive and finite")
        if self.kind == "l_plate" and dims[0] <= dims[1]:
            raise ValueError("l_plate arm_length must exceed arm_width")
        if self.kind == "ring" and dims[1] >= dims[0]:
            raise ValueError("ring inner radius must be smaller than outer radius")
        if not math.isfinite(self.sample_density) or self.sample_density <= 0:
            raise ValueError("sample_density must be positive")
        object.__setattr__(self, "dimensions", dims)


@dataclass(frozen=True, eq=False)
class FixtureTruth:
    """Analytic feature metadata: in-plane symmetry plus known corner points.

    corners are world-frame xy (cm). For the l_plate the concave arm-junction
    corner is also exposed separately.
    """

    symmetry: str  # "continuous" | "cyclic-4" | "cyclic-2" | "trivial"
    corners: np.ndarray
    concave_corner: np.ndarray | None = None


def _l_plate_centroid(length: float, width: float) -> tuple[float, float]:
    a1 = length * width
    a2 = width * (length - width)
    cx = (a1 * (length / 2) + a2 * (width / 2)) / (a1 + a2)
    cy = (a1 * (width / 2) + a2 * ((length + width) / 2)) / (a1 + a2)
    return cx, cy


def fixture_area(spec: FixtureSpec) -> float:
    """Footprint area in cm^2 (the quantity sample_density multiplies)."""
    d = spec.dimensions
    if spec.kind in ("plane", "box_top", "asym_blob"):
        return d[0] * d[1]
    if spec.kind == "l_plate":
        return d[0] * d[1] + d[1] * (d[0] - d[1])
    if spec.kind == "disk":
        return math.pi * d[0] ** 2
    return math.pi * (d[0] ** 2 - d[1] ** 2)  # ring


def _footprint_bounds(spec: FixtureSpec) -> tuple[float, float, float, float]:
    d = spec.dimensions
    if spec.kind in ("plane", "box_top", "asym_blob"):
        return -d[0] / 2, d[0] / 2, -d[1] / 2, d[1] / 2
    if spec.kind == "l_plate":
        cx, cy = _l_plate_centroid(d[0], d[1])
        return -cx, d[0] - cx, -cy, d[0] - cy
    r = d[0]
    return -r, r, -r, r  # disk, ring


def _inside(spec: FixtureSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = spec.dimensions
    if spec.kind in ("plane", "box_top", "asym_blob"):
        return (np.abs(x) <= d[0] / 2) & (np.abs(y) <= d[1] / 2)
    if spec.kind == "l_plate":
        cx, cy = _l_plate_centroid(d[0], d[1])
        rx, ry = x + cx, y + cy
        horizontal = (rx >= 0) & (rx <= d[0]) & (ry >= 0) & (ry <= d[1])
        vertical = (rx >= 0) & (rx <= d[1]) & (ry >= 0) & (ry <= d[0])
        return horizontal | vertical
    rr = x * x + y * y
    if spec.kind == "disk":
        return rr <= d[0] ** 2
    return (rr <= d[0] ** 2) & (rr >= d[1] ** 2)  # ring


def _bump_field(spec: FixtureSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    w, h = spec.dimensions
    rng = np.random.default_rng(spec.seed)
    cx = rng.uniform(-0.35 * w, 0.35 * w, _N_BUMPS)
    cy = rng.uniform(-0.35 * h, 0.35 * h, _N_BUMPS)
    amp = rng.uniform(*_BUMP_AMP, _N_BUMPS)
    sigma = rng.uniform(*_BUMP_SIGMA, _N_BUMPS)
    return cx, cy, amp, sigma


def _segment_distances(x: np.ndarray, y: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Distance from each (x, y) to the closed polygon outline given by verts."""
    p = np.column_stack([x, y])
    best = np.full(len(p), np.inf)
    for i in range(len(verts)):
        a = verts[i]
        b = verts[(i + 1) % len(verts)]
        ab = b - a
        t = np.clip((p - a) @ ab / (ab @ ab), 0.0, 1.0)
        closest = a + t[:, None] * ab
        best = np.minimum(best, np.linalg.norm(p - closest, axis=1))
    return best


def _height(spec: FixtureSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if spec.kind == "box_top":
        w, h = spec.dimensions
        dx = np.abs(x) - w * _TOP_FRAC / 2
        dy = np.abs(y) - h * _TOP_FRAC / 2
        outside = np.maximum(np.maximum(dx, dy), 0.0)
        return _TOP_HEIGHT * np.clip(1.0 - outside / _BEVEL_WIDTH, 0.0, 1.0)
    if spec.kind == "l_plate":
        length, width = spec.dimensions
        cx, cy = _l_plate_centroid(length, width)
        verts = np.array(
            [
                [0.0, 0.0],
                [length, 0.0],
                [length, width],
                [width, width],
                [width, length],
                [0.0, length],
            ]
        )
        rim = _segment_distances(x + cx, y + cy, verts)
        return _TOP_HEIGHT * np.clip(rim / _BEVEL_WIDTH, 0.0, 1.0)
    if spec.kind == "asym_blob":
        cx, cy, amp, sigma = _bump_field(spec)
        z = np.zeros_like(x)
        for j in range(_N_BUMPS):
            rr = (x - cx[j]) ** 2 + (y - cy[j]) ** 2
            z += amp[j] * np.exp(-rr / (2 * sigma[j] ** 2))
        return z
    return np.zeros_like(x)


def make_fixture(spec: FixtureSpec) -> PointCloud:
    """Sample the fixture's top surface at spec.sample_density points/cm^2."""
    # asym_blob draws its bump parameters from default_rng(seed) inside
    # _bump_field; the jitter stream is offset so the two never overlap.
    rng = np.random.default_rng(spec.seed + 1 if spec.kind == "asym_blob" else spec.seed)
    step = 1.0 / math.sqrt(spec.sample_density)
    x0, x1, y0, y1 = _footprint_bounds(spec)
    nx = math.ceil((x1 - x0) / step)
    ny = math.ceil((y1 - y0) / step)
    jitter = rng.uniform(0.0, 1.0, (ny, nx, 2))
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny))
    x = x0 + (ix + jitter[:, :, 0]) * step
    y = y0 + (iy + jitter[:, :, 1]) * step
    x, y = x.ravel(), y.ravel()
    keep = _inside(spec, x, y)
    x, y = x[keep], y[keep]
    z = _height(spec, x, y)
    return PointCloud(np.column_stack([x, y, z]))


def fixture_truth(spec: FixtureSpec) -> FixtureTruth:
    """Analytic corner coordinates and in-plane symmetry group for a spec."""
    d = spec.dimensions
    if spec.kind in ("disk", "ring"):
        return FixtureTruth("continuous", np.empty((0, 2)))
    if spec.kind == "l_plate":
        length, width = d
        cx, cy = _l_plate_centroid(length, width)
        raw = np.array(
            [
                [0.0, 0.0],
                [length, 0.0],
                [length, width],
                [width, width],
                [width, length],
                [0.0, length],
            ]
        )
        corners = raw - np.array([cx, cy])
        return FixtureTruth("trivial", corners, concave_corner=corners[3].copy())
    w, h = d
    corners = np.array(
        [[-w / 2, -h / 2], [w / 2, -h / 2], [w / 2, h / 2], [-w / 2, h / 2]]
    )
    if spec.kind == "asym_blob":
        return FixtureTruth("trivial", corners)
    symmetry = "cyclic-4" if w == h else "cyclic-2"
    return FixtureTruth(symmetry, corners)
