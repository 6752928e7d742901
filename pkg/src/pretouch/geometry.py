"""Rotated-rectangle geometry in the image plane.

Scan regions are rotated rectangles. Candidate generation and filtering need
exact overlap between pairs of them, which for convex shapes reduces to
Sutherland-Hodgman clipping plus the shoelace formula. Everything here is
pure 2D math in pixel units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

_HALF_PI = math.pi / 2.0

# Intersections thinner than this (px^2) are treated as empty so IoU is
# continuous at shared-edge configurations.
_SLIVER_AREA = 1e-9


def normalize_theta(theta: float) -> float:
    """Wrap an angle to [-pi/2, pi/2), the canonical range for shapes with
    180-degree rotational symmetry."""
    if not math.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    return (theta + _HALF_PI) % math.pi - _HALF_PI


@dataclass(frozen=True, slots=True)
class RotatedRect:
    """Rectangle with center (cx, cy), sides (w, h) and rotation theta.

    Units are pixels in the image plane; theta is radians and is normalized
    to [-pi/2, pi/2) on construction, which pairs with the 2-theta angle
    encoding's period.
    """

    cx: float
    cy: float
    w: float
    h: float
    theta: float

    def __post_init__(self) -> None:
        for name in ("cx", "cy", "w", "h", "theta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ValueError(f"rect field {name} must be finite, got {v!r}")
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"rect sides must be positive, got w={self.w} h={self.h}")
        object.__setattr__(self, "theta", normalize_theta(self.theta))

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True, slots=True)
class AngleEncoding:
    """(cos 2*theta, sin 2*theta): a continuous embedding of rectangle
    orientation that identifies theta with theta + pi."""

    c2: float
    s2: float


@dataclass(frozen=True)
class ConvexPolygon:
    """Counter-clockwise convex vertex loop; zero vertices is the empty polygon."""

    vertices: NDArray[np.float64]

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2).copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        n = len(v)
        if n == 0:
            return
        if n < 3:
            raise ValueError(f"polygon needs >= 3 vertices (or none), got {n}")
        if not np.all(np.isfinite(v)):
            raise ValueError("polygon vertices must be finite")
        edges = np.roll(v, -1, axis=0) - v
        nxt = np.roll(edges, -1, axis=0)
        cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        if np.any(cross < -1e-9):
            raise ValueError("vertices are not convex in counter-clockwise order")

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0


EMPTY_POLYGON = ConvexPolygon(np.empty((0, 2)))


def polygon_area(p: ConvexPolygon) -> float:
    """Shoelace area; zero for the empty polygon, positive for CCW loops."""
    if p.is_empty:
        return 0.0
    v = p.vertices
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return float(0.5 * np.sum(x * yn - xn * y))


def rect_corners(r: RotatedRect) -> ConvexPolygon:
    """Four CCW corners, starting from the (-w/2, -h/2) corner in rect frame."""
    c, s = math.cos(r.theta), math.sin(r.theta)
    hw, hh = 0.5 * r.w, 0.5 * r.h
    local = np.array([(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)])
    rot = np.array([(c, -s), (s, c)])
    return ConvexPolygon(local @ rot.T + np.array([r.cx, r.cy]))


def _dedupe_ring(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    for p in points:
        if not out or math.hypot(p[0] - out[-1][0], p[1] - out[-1][1]) > 1e-12:
            out.append(p)
    while len(out) > 1 and math.hypot(out[0][0] - out[-1][0], out[0][1] - out[-1][1]) <= 1e-12:
        out.pop()
    return out


def clip_convex(a: ConvexPolygon, b: ConvexPolygon) -> ConvexPolygon:
    """Intersection a ^ b via Sutherland-Hodgman, clipping a against b's edges.

    Degenerate results (shared edge or corner only) collapse to the empty
    polygon so downstream area/IoU stay continuous.
    """
    if a.is_empty or b.is_empty:
        return EMPTY_POLYGON
    output = [(float(p[0]), float(p[1])) for p in a.vertices]
    clip = b.vertices
    n = len(clip)
    for i in range(n):
        if not output:
            return EMPTY_POLYGON
        e1 = clip[i]
        e2 = clip[(i + 1) % n]
        ex, ey = e2[0] - e1[0], e2[1] - e1[1]

        def inside(p: tuple[float, float]) -> bool:
            # CCW clip polygon: interior lies to the left of each edge.
            return ex * (p[1] - e1[1]) - ey * (p[0] - e1[0]) >= 0.0

        def intersect(p: tuple[float, float], q: tuple[float, float]) -> tuple[float, float]:
            dx, dy = q[0] - p[0], q[1] - p[1]
            denom = ex * dy - ey * dx
            if abs(denom) <= 1e-12 * math.hypot(ex, ey) * math.hypot(dx, dy):
                # pq runs (near-)parallel to the edge with an endpoint put on
                # opposite sides only by rounding; dividing by the tiny cross
                # product would shoot the crossing far off both segments, so
                # collapse it to the endpoint on the line instead.
                return p
            t = (ex * (e1[1] - p[1]) - ey * (e1[0] - p[0])) / denom
            return (p[0] + t * dx, p[1] + t * dy)

        current = output
        output = []
        prev = current[-1]
        prev_in = inside(prev)
        for cur in current:
            cur_in = inside(cur)
            if cur_in:
                if not prev_in:
                    output.append(intersect(prev, cur))
                output.append(cur)
            elif prev_in:
                output.append(intersect(prev, cur))
            prev, prev_in = cur, cur_in

    ring = _dedupe_ring(output)
    if len(ring) < 3:
        return EMPTY_POLYGON
    arr = np.asarray(ring)
    x, y = arr[:, 0], arr[:, 1]
    area = 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    if area <= _SLIVER_AREA:
        return EMPTY_POLYGON
    return ConvexPolygon(arr)


def rect_iou(a: RotatedRect, b: RotatedRect) -> float:
    """Intersection-over-union of two rotated rectangles, in [0, 1]."""
    inter = polygon_area(clip_convex(rect_corners(a), rect_corners(b)))
    union = a.area + b.area - inter
    return min(max(inter / union, 0.0), 1.0)


def angle_encode(theta: float) -> AngleEncoding:
    if not math.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    return AngleEncoding(math.cos(2.0 * theta), math.sin(2.0 * theta))


def angle_decode(e: AngleEncoding) -> float:
    """Angle in [-pi/2, pi/2) whose double has direction (c2, s2)."""
    if math.hypot(e.c2, e.s2) < 1e-12:
        raise ValueError("cannot decode a zero-magnitude angle encoding")
    return normalize_theta(0.5 * math.atan2(e.s2, e.c2))


def perimeter_distance(r: RotatedRect, p: tuple[float, float]) -> float:
    """Euclidean distance from p to the closest point on the rect boundary."""
    v = rect_corners(r).vertices
    px, py = float(p[0]), float(p[1])
    best = math.inf
    for i in range(4):
        ax, ay = v[i]
        bx, by = v[(i + 1) % 4]
        dx, dy = bx - ax, by - ay
        t = ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)
        t = min(max(t, 0.0), 1.0)
        best = min(best, math.hypot(px - (ax + t * dx), py - (ay + t * dy)))
    return best


def perimeter_distances(r: RotatedRect, pts: NDArray[np.float64]) -> NDArray[np.float64]:
    """Vectorized perimeter_distance for an (N, 2) pixel array.

    The inner loops of label generation call this per candidate rect over
    every projected point, so it has to stay allocation-light.
    """
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    v = rect_corners(r).vertices
    best = np.full(len(pts), np.inf)
    for i in range(4):
        a = v[i]
        b = v[(i + 1) % 4]
        d = b - a
        seg_len2 = float(d @ d)
        t = ((pts - a) @ d) / seg_len2
        np.clip(t, 0.0, 1.0, out=t)
        proj = a + t[:, None] * d
        np.minimum(best, np.linalg.norm(pts - proj, axis=1), out=best)
    return best


def rect_contains(r: RotatedRect, pts: NDArray[np.float64]) -> NDArray[np.bool_]:
    """Boolean mask of points inside or on the rectangle."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    c, s = math.cos(r.theta), math.sin(r.theta)
    rel = pts - np.array([r.cx, r.cy])
    u = rel[:, 0] * c + rel[:, 1] * s
    v = -rel[:, 0] * s + rel[:, 1] * c
    return (np.abs(u) <= r.w / 2) & (np.abs(v) <= r.h / 2)
