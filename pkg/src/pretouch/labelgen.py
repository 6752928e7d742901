"""Monte-Carlo scoring of candidate scan regions by worst-case alignment error.

Candidate rectangles are sampled against the object's projected bounding box,
each is scored over a set of simulated pose-offset trials (perimeter-band
scan, noise, trimmed-ICP re-alignment, mean distance to the known ground
truth), and a candidate keeps its worst trial score. The best-scoring regions
double as an oracle proposer at evaluation time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import RotatedRect, rect_iou
from .icp import IcpParams, icp_align
from .pointcloud import CameraModel, PointCloud, apply_transform, project
from .scan_sim import OffsetSpec, ScanConfig, band_indices, random_offset

_LOG_ASPECT = math.log(4.0)


class InfeasibleConstraintsError(ValueError):
    """Rejection sampling could not satisfy the candidate constraints."""


class NoViableRegionError(RuntimeError):
    """Every candidate produced an empty extraction or failed alignment."""


@dataclass(frozen=True, slots=True)
class CandidateConstraints:
    n_candidates: int = 1000
    min_iou_with_bbox: float = 0.15
    area_frac_min: float = 0.10
    area_frac_max: float = 0.50

    def __post_init__(self) -> None:
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be at least 1")
        if not 0.0 <= self.min_iou_with_bbox <= 1.0:
            raise ValueError("min_iou_with_bbox must lie in [0, 1]")
        if not 0.0 < self.area_frac_min <= self.area_frac_max <= 1.0:
            raise ValueError("need 0 < area_frac_min <= area_frac_max <= 1")


@dataclass(frozen=True)
class LabelRecord:
    """One candidate region with its per-trial and worst-case scores (cm)."""

    rect: RotatedRect
    worst_score: float
    trial_scores: tuple[float, ...]

    def __post_init__(self) -> None:
        scores = tuple(float(s) for s in self.trial_scores)
        object.__setattr__(self, "trial_scores", scores)
        if not scores:
            raise ValueError("trial_scores must be nonempty")
        if any(math.isnan(s) or s < 0 for s in scores):
            raise ValueError("scores must be nonnegative")
        if self.worst_score != max(scores):
            raise ValueError("worst_score must equal max(trial_scores)")


@dataclass(frozen=True)
class LabelGenConfig:
    constraints: CandidateConstraints = field(default_factory=CandidateConstraints)
    n_trials: int = 10
    offsets: OffsetSpec = field(default_factory=OffsetSpec)
    scan: ScanConfig = field(default_factory=ScanConfig)
    icp: IcpParams = field(default_factory=IcpParams)
    top_k: int = 1

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")


def projected_bbox(cloud: PointCloud, cam: CameraModel) -> RotatedRect:
    """Axis-aligned bounding rectangle of the cloud's projected points (px)."""
    if len(cloud) == 0:
        raise ValueError("cannot bound an empty cloud")
    uv, _ = project(cloud, cam)
    lo = uv.min(axis=0)
    hi = uv.max(axis=0)
    if (hi[0] - lo[0]) <= 0 or (hi[1] - lo[1]) <= 0:
        raise ValueError("projected points span a degenerate bounding box")
    return RotatedRect(
        (lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, hi[0] - lo[0], hi[1] - lo[1], 0.0
    )


def generate_candidates(
    bbox: RotatedRect,
    cc: CandidateConstraints,
    rng: np.random.Generator,
    max_attempts: int = 1_000_000,
) -> list[RotatedRect]:
    """Rejection-sample candidate rectangles against the bounding box.

    Centers are uniform over the bbox, area fractions uniform over the
    configured range, aspect ratios log-uniform in [1/4, 4], angles uniform.
    Draws that miss the IoU or area constraints are discarded.
    """
    if abs(bbox.theta) > 1e-12:
        raise ValueError("bbox must be axis aligned")
    out: list[RotatedRect] = []
    attempts = 0
    while len(out) < cc.n_candidates:
        if attempts >= max_attempts:
            raise InfeasibleConstraintsError(
                f"{attempts} draws yielded {len(out)} of {cc.n_candidates} "
                "candidates; constraints look infeasible"
            )
        attempts += 1
        u = rng.uniform(size=5)
        area = (cc.area_frac_min + u[2] * (cc.area_frac_max - cc.area_frac_min)) * bbox.area
        aspect = math.exp((2.0 * u[3] - 1.0) * _LOG_ASPECT)
        cand = RotatedRect(
            bbox.cx + (u[0] - 0.5) * bbox.w,
            bbox.cy + (u[1] - 0.5) * bbox.h,
            math.sqrt(area * aspect),
            math.sqrt(area / aspect),
            -math.pi / 2 + u[4] * math.pi,
        )
        if rect_iou(cand, bbox) >= cc.min_iou_with_bbox:
            out.append(cand)
    return out


def score_pair(
    source: PointCloud,
    target: PointCloud,
    ground_truth_aligned: PointCloud,
    icp_params: IcpParams,
) -> float:
    """Align source to target, return mean distance to the ground truth (cm).

    Alignment failure (no usable correspondences) scores +inf so it sorts
    after every finite candidate.
    """
    if len(source) != len(ground_truth_aligned):
        raise ValueError("source and ground truth must share point count and order")
    if len(target) == 0:
        raise ValueError("target cloud is empty")
    result = icp_align(source, target, icp_params)
    if result.failed:
        return math.inf
    aligned = apply_transform(source, result.transform)
    return float(np.mean(np.linalg.norm(aligned.points - ground_truth_aligned.points, axis=1)))


def filter_recs(records: list[LabelRecord], k: int) -> list[LabelRecord]:
    """Keep the k best records by worst_score, ties in input order."""
    if not records:
        raise ValueError("no records to filter")
    if k < 1:
        raise ValueError("k must be at least 1")
    ranked = sorted(records, key=lambda r: r.worst_score)
    if k > len(ranked):
        warnings.warn(
            f"requested top {k} of {len(ranked)} records; returning all",
            stacklevel=2,
        )
        return ranked
    return ranked[:k]


def label_generation(
    k: PointCloud,
    cam: CameraModel,
    cfg: LabelGenConfig,
    rng: np.random.Generator,
) -> list[LabelRecord]:
    """Score candidate scan regions by worst-case simulated alignment error.

    One shared set of pose offsets is drawn before the per-candidate loop, so
    every candidate faces the same trials. Per-trial sources come from the
    offset cloud's on-perimeter band with gaussian noise; targets are the
    near-perimeter band of the original cloud. Candidates whose source or
    target band is ever empty score +inf. Returns the filter_recs output
    (top cfg.top_k, ascending by worst_score).
    """
    bbox = projected_bbox(k, cam)
    uv, _ = project(k, cam)
    candidates = generate_candidates(bbox, cfg.constraints, rng)
    offsets = [random_offset(cfg.offsets, rng) for _ in range(cfg.n_trials)]

    targets = [k.select(band_indices(uv, rect, cfg.scan.near_band)) for rect in candidates]
    n_cand = len(candidates)
    scores = np.full((cfg.n_trials, n_cand), np.inf)
    trial_rngs = rng.spawn(cfg.n_trials)
    for t, offset in enumerate(offsets):
        k_off = apply_transform(k, offset)
        uv_off, _ = project(k_off, cam)
        inverse = offset.inverse()
        cell_rngs = trial_rngs[t].spawn(n_cand)
        for c, rect in enumerate(candidates):
            if len(targets[c]) == 0:
                continue
            idx = band_indices(uv_off, rect, cfg.scan.on_band)
            if idx.size == 0:
                continue
            pts = k_off.points[idx]
            if cfg.scan.noise_sigma > 0:
                pts = pts + cell_rngs[c].normal(0.0, cfg.scan.noise_sigma, pts.shape)
            source = PointCloud(pts)
            ground_truth = apply_transform(source, inverse)
            scores[t, c] = score_pair(source, targets[c], ground_truth, cfg.icp)

    records = [
        LabelRecord(
            rect=rect,
            worst_score=float(scores[:, c].max()),
            trial_scores=tuple(float(s) for s in scores[:, c]),
        )
        for c, rect in enumerate(candidates)
    ]
    if all(math.isinf(r.worst_score) for r in records):
        raise NoViableRegionError(
            "no candidate region yielded a scannable, alignable perimeter band"
        )
    return filter_recs(records, cfg.top_k)


def _score_to_json(value: float) -> float | str:
    return value if math.isfinite(value) else "inf"


def _score_from_json(value: float | str) -> float:
    return float(value)


def labels_document(
    object_id: str,
    camera_dict: dict,
    cfg: LabelGenConfig,
    records: list[LabelRecord],
    seed: int | None = None,
) -> dict:
    """Assemble the label-file JSON document (one object per file)."""
    doc = {
        "object_id": object_id,
        "camera": camera_dict,
        "config": asdict(cfg),
        "records": [
            {
                "rect": {
                    "cx": r.rect.cx,
                    "cy": r.rect.cy,
                    "w": r.rect.w,
                    "h": r.rect.h,
                    "theta": r.rect.theta,
                },
                "worst_score_cm": _score_to_json(r.worst_score),
                "trial_scores_cm": [_score_to_json(s) for s in r.trial_scores],
            }
            for r in records
        ],
    }
    if seed is not None:
        doc["seed"] = seed
    return doc


def records_from_document(doc: dict) -> list[LabelRecord]:
    """Rebuild LabelRecords from a labels_document dict."""
    out = []
    for row in doc["records"]:
        r = row["rect"]
        out.append(
            LabelRecord(
                rect=RotatedRect(r["cx"], r["cy"], r["w"], r["h"], r["theta"]),
                worst_score=_score_from_json(row["worst_score_cm"]),
                trial_scores=tuple(_score_from_json(s) for s in row["trial_scores_cm"]),
            )
        )
    return out
