"""Comparison region proposers: random rectangles and a surface-change
(NARF-style) detector over range images.

The random proposer reuses the label-generation candidate sampler so both
pipelines draw from the same rectangle distribution. The surface-change
proposer works on a top-down range image: keypoints sit where depth gradients
aggregated over a support disk change in more than one direction, and each
keypoint grows a rectangle along its two strongest perpendicular beam
directions.

Interest blends the two eigenvalues of the disk-aggregated gradient structure
tensor: the smaller eigenvalue only rises when the surface changes along two
directions (a corner), while a small fraction of the larger keeps
single-direction change (a straight edge) above flat regions. Plain summed
gradient magnitude cannot rank a corner above an equally long straight edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray
from scipy.ndimage import maximum_filter
from scipy.signal import fftconvolve

from .geometry import RotatedRect
from .labelgen import CandidateConstraints, LabelGenConfig, generate_candidates, label_generation
from .pointcloud import CameraModel, PointCloud, project

# Camera standoff added when converting height fields to camera depths, and
# the weight of the larger structure-tensor eigenvalue in the interest blend.
_CAMERA_CLEARANCE = 10.0
_EDGE_WEIGHT = 1.0 / 16.0


@dataclass(frozen=True)
class RegionProposal:
    """A proposed scan rectangle with a confidence score (higher = scan earlier)."""

    rect: RotatedRect
    confidence: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.confidence):
            raise ValueError(f"confidence must be finite, got {self.confidence}")
        object.__setattr__(self, "confidence", float(self.confidence))


@dataclass(frozen=True, eq=False)
class RangeImage:
    """Grid of camera depths (cm) over a pixel window, with a validity mask.

    The window is anchored at absolute pixel (origin_u, origin_v) in the same
    image frame that scan rectangles live in: grid cell [row, col] covers
    absolute pixel (origin_u + col, origin_v + row). Cells no point projected
    into are marked invalid and take no part in gradients or descriptors.
    """

    depth: NDArray[np.float64]
    valid: NDArray[np.bool_]
    cam: CameraModel
    origin_u: int = 0
    origin_v: int = 0

    def __post_init__(self) -> None:
        d = np.asarray(self.depth, dtype=np.float64)
        v = np.asarray(self.valid, dtype=bool)
        if d.ndim != 2 or d.shape != v.shape:
            raise ValueError(f"depth {d.shape} and valid {v.shape} must be matching 2D grids")
        if d.size == 0:
            raise ValueError("range image must have at least one cell")
        if not np.all(np.isfinite(d[v])):
            raise ValueError("valid depths must be finite")
        if np.any(d[v] <= 0):
            raise ValueError("valid depths must be > 0")
        d = d.copy()
        v = v.copy()
        d.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "depth", d)
        object.__setattr__(self, "valid", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    def px_per_cm(self) -> float:
        """Image-plane scale. Exact for orthographic cameras; for pinhole
        cameras approximated at the median valid depth."""
        if self.cam.mode == "orthographic":
            return self.cam.scale
        if not self.valid.any():
            raise ValueError("cannot estimate pinhole scale on an all-invalid image")
        return self.cam.fx / float(np.median(self.depth[self.valid]))

    @classmethod
    def from_cloud(cls, c: PointCloud, cam: CameraModel, margin_px: int = 2) -> "RangeImage":
        """Render a cloud to a range image covering its projected extent.

        Orthographic cameras look down from above, so depth is measured from
        a plane hovering above the highest point; pinhole depths are the
        points' z directly. Where several points share a cell the nearest
        (smallest depth) wins.
        """
        if len(c) == 0:
            raise ValueError("cannot build a range image from an empty cloud")
        if margin_px < 0:
            raise ValueError("margin_px must be >= 0")
        uv, _ = project(c, cam)
        if cam.mode == "orthographic":
            depth = (c.points[:, 2].max() + _CAMERA_CLEARANCE) - c.points[:, 2]
        else:
            depth = c.points[:, 2].copy()
        cols = np.rint(uv[:, 0]).astype(int)
        rows = np.rint(uv[:, 1]).astype(int)
        u0 = int(cols.min()) - margin_px
        v0 = int(rows.min()) - margin_px
        w = int(cols.max()) - u0 + 1 + margin_px
        h = int(rows.max()) - v0 + 1 + margin_px
        grid = np.full((h, w), np.inf)
        np.minimum.at(grid, (rows - v0, cols - u0), depth)
        valid = np.isfinite(grid)
        grid[~valid] = 0.0
        return cls(depth=grid, valid=valid, cam=cam, origin_u=u0, origin_v=v0)


@dataclass(frozen=True)
class Keypoint:
    """Absolute-pixel location of a surface-change maximum."""

    u: int
    v: int
    interest: float


@dataclass(frozen=True)
class NarfParams:
    """Configuration for the surface-change proposer.

    top_m and n_beams are exposed configuration, not claims about any
    published detector; n_beams must be divisible by 4 so the perpendicular
    beam lookup is exact. equal_sides switches the rectangle construction
    from descriptor-ratio sides to a square-ish equal-length rule.
    """

    support_radius: float = 1.5
    descriptor_radius: float = 3.5
    top_m: int = 20
    n_beams: int = 36
    equal_sides: bool = False

    def __post_init__(self) -> None:
        if self.support_radius <= 0 or self.descriptor_radius <= 0:
            raise ValueError("radii must be positive")
        if self.top_m < 1:
            raise ValueError("top_m must be >= 1")
        if self.n_beams < 4 or self.n_beams % 4 != 0:
            raise ValueError("n_beams must be a positive multiple of 4")


def _masked_gradients(img: RangeImage) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Central-difference depth gradients using only valid-valid cell pairs.

    Cells bordering invalid neighbors fall back to the one-sided difference;
    isolated cells get zero. Object silhouettes against missing background
    therefore contribute no change - only the object's own surface does.
    """
    d, v = img.depth, img.valid

    def axis_gradient(axis: int) -> NDArray[np.float64]:
        fwd = np.diff(d, axis=axis)
        ok = np.logical_and(np.take(v, range(1, v.shape[axis]), axis=axis),
                            np.take(v, range(0, v.shape[axis] - 1), axis=axis))
        fwd = np.where(ok, fwd, 0.0)
        grad_sum = np.zeros_like(d)
        count = np.zeros_like(d)
        head = [slice(None)] * d.ndim
        tail = [slice(None)] * d.ndim
        head[axis] = slice(0, -1)
        tail[axis] = slice(1, None)
        grad_sum[tuple(head)] += fwd
        count[tuple(head)] += ok
        grad_sum[tuple(tail)] += fwd
        count[tuple(tail)] += ok
        out = np.divide(grad_sum, count, out=np.zeros_like(d), where=count > 0)
        return np.where(v, out, 0.0)

    return axis_gradient(1), axis_gradient(0)


def _disk_kernel(radius_px: float) -> NDArray[np.float64]:
    r = max(int(math.ceil(radius_px)), 1)
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return (xx * xx + yy * yy <= radius_px * radius_px).astype(np.float64)


def interest_image(img: RangeImage, support_radius: float) -> NDArray[np.float64]:
    """Surface-change interest per valid pixel (zero at invalid pixels)."""
    if support_radius <= 0:
        raise ValueError("support_radius must be positive")
    du, dv = _masked_gradients(img)
    kernel = _disk_kernel(support_radius * img.px_per_cm())
    sxx = fftconvolve(du * du, kernel, mode="same")
    syy = fftconvolve(dv * dv, kernel, mode="same")
    sxy = fftconvolve(du * dv, kernel, mode="same")
    mean = 0.5 * (sxx + syy)
    span = np.sqrt(np.maximum(0.25 * (sxx - syy) ** 2 + sxy * sxy, 0.0))
    lam_min = np.maximum(mean - span, 0.0)
    lam_max = np.maximum(mean + span, 0.0)
    return np.where(img.valid, lam_min + _EDGE_WEIGHT * lam_max, 0.0)


def surface_change_keypoints(
    img: RangeImage, support_radius: float, top_m: int
) -> list[Keypoint]:
    """Strongest non-overlapping surface-change locations, best first.

    Non-maximum suppression uses a square window of the support radius, so
    returned keypoints are at least that far apart along each axis. A flat
    image yields no keypoints at all.
    """
    if top_m < 1:
        raise ValueError("top_m must be >= 1")
    interest = interest_image(img, support_radius)
    peak = float(interest.max())
    if peak <= 0.0:
        return []
    size = 2 * int(math.ceil(support_radius * img.px_per_cm())) + 1
    local_max = interest >= maximum_filter(interest, size=size, mode="constant", cval=0.0)
    keep = img.valid & local_max & (interest > peak * 1e-9)
    rows, cols = np.nonzero(keep)
    order = np.lexsort((cols, rows, -interest[rows, cols]))
    out = []
    for i in order[:top_m]:
        r, c = int(rows[i]), int(cols[i])
        out.append(Keypoint(u=c + img.origin_u, v=r + img.origin_v, interest=float(interest[r, c])))
    return out


def radial_descriptor(
    img: RangeImage, kp: Keypoint, n_beams: int = 36, radius: float = 4.0
) -> NDArray[np.float64]:
    """Mean absolute depth derivative along each of n_beams rays from kp.

    Each element integrates |depth change| over the ray's valid extent and
    divides by the full radius, so a ray that leaves the object early scores
    only what it saw. Rays visit integer pixel steps; samples that fall
    outside the grid or on invalid cells break the chain of differences. A
    fully invalid ray scores 0.
    """
    if n_beams < 4 or n_beams % 4 != 0:
        raise ValueError("n_beams must be a positive multiple of 4")
    if radius <= 0:
        raise ValueError("radius must be positive")
    h, w = img.shape
    col0 = kp.u - img.origin_u
    row0 = kp.v - img.origin_v
    if not (0 <= row0 < h and 0 <= col0 < w):
        raise ValueError(f"keypoint ({kp.u}, {kp.v}) lies outside the range image")
    n_steps = int(math.floor(radius * img.px_per_cm()))
    desc = np.zeros(n_beams)
    if n_steps < 1:
        return desc
    steps = np.arange(n_steps + 1)
    for b in range(n_beams):
        ang = 2.0 * math.pi * b / n_beams
        cols = np.rint(col0 + math.cos(ang) * steps).astype(int)
        rows = np.rint(row0 + math.sin(ang) * steps).astype(int)
        inside = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
        ok = inside & img.valid[rows.clip(0, h - 1), cols.clip(0, w - 1)]
        depths = img.depth[rows.clip(0, h - 1), cols.clip(0, w - 1)]
        pair = ok[1:] & ok[:-1]
        desc[b] = float(np.sum(np.abs(np.diff(depths))[pair])) / radius
    return desc


def random_proposals(
    bbox: RotatedRect, cc: CandidateConstraints, n: int, rng: np.random.Generator
) -> list[RegionProposal]:
    """n rectangles drawn from the label-generation candidate distribution.

    Confidence is the (descending) generation rank, so "the first k proposed"
    is a well-defined prefix.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n == 0:
        return []
    rects = generate_candidates(bbox, replace(cc, n_candidates=n), rng)
    return [RegionProposal(rect=r, confidence=float(n - i)) for i, r in enumerate(rects)]


def narf_variant_proposals(
    img: RangeImage, bbox: RotatedRect, params: NarfParams = NarfParams()
) -> list[RegionProposal]:
    """One rectangle per surface-change keypoint, sorted by confidence.

    The rectangle's sides run along the keypoint's strongest descriptor beam
    and the stronger of the two perpendicular beams, with the keypoint at the
    corner where both sides originate. Side lengths split the fixed area
    (half the bbox area) according to the two descriptor values, clamped to
    [1/3, 3] so neither side degenerates. Keypoints whose descriptor is all
    zero propose nothing.
    """
    keypoints = surface_change_keypoints(img, params.support_radius, params.top_m)
    half_area = bbox.area / 2.0
    n = params.n_beams
    quarter = n // 4
    entries: list[tuple[float, int, int, RegionProposal]] = []
    for kp in keypoints:
        desc = radial_descriptor(img, kp, n_beams=n, radius=params.descriptor_radius)
        if desc.max() <= 0.0:
            continue
        first = int(np.argmax(desc))
        cand_a = (first + quarter) % n
        cand_b = (first + 3 * quarter) % n
        second = cand_a if desc[cand_a] >= desc[cand_b] else cand_b
        if params.equal_sides:
            ratio = 1.0
        elif desc[second] <= 0.0:
            ratio = 3.0
        else:
            ratio = min(max(desc[first] / desc[second], 1.0 / 3.0), 3.0)
        len_second = math.sqrt(half_area / ratio)
        len_first = ratio * len_second
        ang1 = 2.0 * math.pi * first / n
        ang2 = 2.0 * math.pi * second / n
        e1 = np.array([math.cos(ang1), math.sin(ang1)])
        e2 = np.array([math.cos(ang2), math.sin(ang2)])
        center = np.array([kp.u, kp.v], dtype=float) + e1 * (len_first / 2) + e2 * (len_second / 2)
        rect = RotatedRect(center[0], center[1], len_first, len_second, ang1)
        confidence = float(desc[first] + desc[second])
        entries.append((confidence, kp.v, kp.u, RegionProposal(rect=rect, confidence=confidence)))
    entries.sort(key=lambda e: (-e[0], e[1], e[2]))
    return [e[3] for e in entries]


def proposal_dicts(proposals: list[RegionProposal]) -> list[dict]:
    """Serialize proposals with the same rect schema the label files use."""
    return [
        {
            "rect": {
                "cx": p.rect.cx,
                "cy": p.rect.cy,
                "w": p.rect.w,
                "h": p.rect.h,
                "theta": p.rect.theta,
            },
            "confidence": p.confidence,
        }
        for p in proposals
    ]


def proposals_from_dicts(rows: list[dict]) -> list[RegionProposal]:
    """Rebuild RegionProposals from proposal_dicts output."""
    out = []
    for row in rows:
        r = row["rect"]
        out.append(
            RegionProposal(
                rect=RotatedRect(r["cx"], r["cy"], r["w"], r["h"], r["theta"]),
                confidence=float(row["confidence"]),
            )
        )
    return out


def oracle_proposals(
    cloud: PointCloud,
    cam: CameraModel,
    cfg: LabelGenConfig,
    n: int,
    rng: np.random.Generator,
) -> list[RegionProposal]:
    """Top-n label-generation rectangles as proposals.

    Confidence is the negated worst-case score so better-scoring regions are
    scanned earlier. Candidates that could not be scored (infinite score)
    are not proposable and are skipped.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n == 0:
        return []
    records = label_generation(cloud, cam, replace(cfg, top_k=n), rng)
    return [
        RegionProposal(rect=r.rect, confidence=-r.worst_score)
        for r in records
        if math.isfinite(r.worst_score)
    ]
