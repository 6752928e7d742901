"""Pose-error evaluation of scan-region proposers.

Protocol: inject a known pose offset into the object cloud, simulate a
pre-touch scan along each proposed region, register the scan (or the running
concatenation of scans) back to the original reference cloud, and measure the
mean distance between where the estimated alignment puts the scanned points
and where the true inverse offset would put them. The report's baseline is
the same measure applied to the whole untouched offset cloud: the error of
trusting the prior pose outright.

Two modes mirror the two questions one asks of a proposer: how well does a
single scan of each region recover the pose (independent trials), and how
quickly does scanning regions in confidence order converge (sequential,
sources concatenated, targets unioned).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import pairwise
from typing import IO, Iterable, Sequence

import numpy as np

from .baselines import RegionProposal
from .geometry import RotatedRect
from .icp import IcpParams, icp_align
from .pointcloud import (
    CameraModel,
    PointCloud,
    RigidTransform,
    add_gaussian_noise,
    apply_transform,
    project,
)
from .scan_sim import ScanConfig, band_indices


@dataclass(frozen=True, slots=True)
class EvalConfig:
    """Evaluation knobs on top of the scan and registration parameters.

    include_failures: whether unusable scans (empty band, degenerate
    registration) count toward the summary mean/std. They are always recorded
    as rows either way, carrying their pre-scan error and converged=False;
    excluding them only narrows the summary statistics.

    truth_from_full_scan: estimate ground truth by registering a noised scan
    of the entire offset object instead of using the exactly known inverse
    offset. Matches how truth must be obtained on real hardware; simulation
    defaults to the exact inverse.
    """

    scan: ScanConfig = ScanConfig()
    icp: IcpParams = IcpParams()
    include_failures: bool = True
    truth_from_full_scan: bool = False


@dataclass(frozen=True, slots=True)
class ScanTrialResult:
    """One evaluated scan: which region, how wrong the pose estimate was
    (cm), what fraction of the object the scan(s) have covered, and whether
    registration produced a usable estimate at all.

    converged=False means no estimate existed (the band missed the cloud or
    ICP degenerated) and pose_error holds the pre-scan baseline error. An ICP
    run that merely hit its iteration cap still yields a measured estimate
    and counts as converged here.
    """

    scan_index: int
    region: RotatedRect
    pose_error: float
    percent_scanned: float
    converged: bool

    def __post_init__(self) -> None:
        if self.scan_index < 0:
            raise ValueError(f"scan_index must be >= 0, got {self.scan_index}")
        if not math.isfinite(self.pose_error) or self.pose_error < 0:
            raise ValueError(f"pose_error must be finite and >= 0, got {self.pose_error}")
        if not 0.0 <= self.percent_scanned <= 1.0:
            raise ValueError(f"percent_scanned must be in [0, 1], got {self.percent_scanned}")


def _float_to_json(value: float) -> float | str:
    return value if math.isfinite(value) else str(value)


@dataclass(frozen=True, slots=True)
class EvalReport:
    """Per-scan results plus summary statistics over the included rows.

    baseline_error is the error of doing nothing: the raw injected offset
    measured against ground truth, the reference any scan must beat. The
    stored mean/std are recomputable from the rows and the include_failures
    flag; construction enforces that.
    """

    results: tuple[ScanTrialResult, ...]
    mean_error: float
    std_error: float
    baseline_error: float
    include_failures: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "results", tuple(self.results))
        if not self.results:
            raise ValueError("EvalReport requires at least one scan result")
        if not math.isfinite(self.baseline_error) or self.baseline_error < 0:
            raise ValueError(f"baseline_error must be finite and >= 0, got {self.baseline_error}")
        mean, std = _summarize(self.results, self.include_failures)
        for stored, computed, name in (
            (self.mean_error, mean, "mean_error"),
            (self.std_error, std, "std_error"),
        ):
            if math.isnan(stored) and math.isnan(computed):
                continue
            if not math.isclose(stored, computed, rel_tol=1e-9, abs_tol=1e-9):
                raise ValueError(
                    f"{name}={stored} is not recomputable from the rows (expected {computed})"
                )

    @classmethod
    def from_results(
        cls,
        results: Sequence[ScanTrialResult],
        baseline_error: float,
        include_failures: bool = True,
    ) -> "EvalReport":
        mean, std = _summarize(results, include_failures)
        return cls(tuple(results), mean, std, baseline_error, include_failures)

    def to_dict(self) -> dict:
        return {
            "mean_error_cm": _float_to_json(self.mean_error),
            "std_error_cm": _float_to_json(self.std_error),
            "baseline_error_cm": self.baseline_error,
            "include_failures": self.include_failures,
            "scans": [
                {
                    "scan_index": r.scan_index,
                    "rect": {
                        "cx": r.region.cx,
                        "cy": r.region.cy,
                        "w": r.region.w,
                        "h": r.region.h,
                        "theta": r.region.theta,
                    },
                    "pose_error_cm": r.pose_error,
                    "percent_scanned": r.percent_scanned,
                    "converged": r.converged,
                }
                for r in self.results
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        rows = []
        for row in doc["scans"]:
            r = row["rect"]
            rows.append(
                ScanTrialResult(
                    scan_index=int(row["scan_index"]),
                    region=RotatedRect(r["cx"], r["cy"], r["w"], r["h"], r["theta"]),
                    pose_error=float(row["pose_error_cm"]),
                    percent_scanned=float(row["percent_scanned"]),
                    converged=bool(row["converged"]),
                )
            )
        return cls(
            results=tuple(rows),
            mean_error=float(doc["mean_error_cm"]),
            std_error=float(doc["std_error_cm"]),
            baseline_error=float(doc["baseline_error_cm"]),
            include_failures=bool(doc["include_failures"]),
        )


def _summarize(results: Sequence[ScanTrialResult], include_failures: bool) -> tuple[float, float]:
    errors = [r.pose_error for r in results if include_failures or r.converged]
    if not errors:
        return float("nan"), float("nan")
    arr = np.asarray(errors)
    return float(arr.mean()), float(arr.std())


def pose_error(
    estimated: RigidTransform, truth: RigidTransform, reference: PointCloud
) -> float:
    """Mean distance (cm) between the two placements of the reference cloud.

    Evaluates both transforms on every reference point and averages the
    Euclidean gap, so rotation errors are weighted by the cloud's actual
    extent rather than collapsed to an angle.
    """
    if len(reference) == 0:
        raise ValueError("pose_error requires a nonempty reference cloud")
    gap = estimated.apply_points(reference.points) - truth.apply_points(reference.points)
    return float(np.mean(np.linalg.norm(gap, axis=1)))


def _register(
    source: PointCloud, target: PointCloud, params: IcpParams
) -> tuple[RigidTransform, bool]:
    """Align source to target; (identity, False) when no usable estimate exists."""
    # icp_align itself needs >= 3 points per side to gate any correspondence
    if len(source) < 3 or len(target) < 3:
        return RigidTransform.identity(), False
    result = icp_align(source, target, params)
    if result.failed:
        return RigidTransform.identity(), False
    return result.transform, True


def _ground_truth(
    obj: PointCloud,
    k_off: PointCloud,
    offset: RigidTransform,
    cfg: EvalConfig,
    rng: np.random.Generator,
) -> RigidTransform:
    if not cfg.truth_from_full_scan:
        return offset.inverse()
    full_scan = add_gaussian_noise(k_off, cfg.scan.noise_sigma, rng)
    estimate, usable = _register(full_scan, obj, cfg.icp)
    if not usable:
        raise ValueError("full-object truth scan failed to register")
    return estimate


def single_scan_eval(
    obj: PointCloud,
    cam: CameraModel,
    proposals: Sequence[RegionProposal],
    offset: RigidTransform,
    cfg: EvalConfig,
    rng: np.random.Generator,
) -> EvalReport:
    """Evaluate each proposed region as an independent single scan.

    For every proposal: simulate a noised scan of the offset object along the
    region perimeter, register it against the reference points near that same
    perimeter, and measure the pose error on the scan's own points — the
    aligned cloud is the scan, so that is where alignment error is defined.
    percent_scanned in each row covers that row's scan alone.

    An unusable scan (empty band, degenerate registration) keeps its pre-scan
    error: what the raw offset already cost on those points, or the full-cloud
    baseline when the scan is empty.
    """
    if not proposals:
        raise ValueError("single_scan_eval requires at least one proposal")
    if len(obj) == 0:
        raise ValueError("single_scan_eval requires a nonempty object cloud")
    k_off = apply_transform(obj, offset)
    truth = _ground_truth(obj, k_off, offset, cfg, rng)
    baseline = pose_error(RigidTransform.identity(), truth, k_off)
    uv_off, _ = project(k_off, cam)
    uv_ref, _ = project(obj, cam)

    rows = []
    for i, prop in enumerate(proposals):
        src_idx = band_indices(uv_off, prop.rect, cfg.scan.on_band)
        tgt_idx = band_indices(uv_ref, prop.rect, cfg.scan.near_band)
        source = add_gaussian_noise(k_off.select(src_idx), cfg.scan.noise_sigma, rng)
        estimate, usable = _register(source, obj.select(tgt_idx), cfg.icp)
        if usable:
            err = pose_error(estimate, truth, source)
        elif len(source) > 0:
            err = pose_error(RigidTransform.identity(), truth, source)
        else:
            err = baseline
        rows.append(
            ScanTrialResult(
                scan_index=i,
                region=prop.rect,
                pose_error=err,
                percent_scanned=len(src_idx) / len(obj),
                converged=usable,
            )
        )
    return EvalReport.from_results(rows, baseline, cfg.include_failures)


def sequential_scan_eval(
    obj: PointCloud,
    cam: CameraModel,
    proposals: Sequence[RegionProposal],
    offset: RigidTransform,
    cfg: EvalConfig,
    rng: np.random.Generator,
) -> EvalReport:
    """Scan regions best-first, concatenating scans before each registration.

    Scan k's source is every scan so far (noised once, reused); its target is
    the union of the reference bands of the regions so far; its pose error is
    measured on the concatenated points. Rows trace the error curve as
    coverage grows; percent_scanned counts unique object points covered by
    any scan yet, so it never decreases.

    Proposals must already be sorted by confidence, best first.
    """
    if not proposals:
        raise ValueError("sequential_scan_eval requires at least one proposal")
    if len(obj) == 0:
        raise ValueError("sequential_scan_eval requires a nonempty object cloud")
    for a, b in pairwise(proposals):
        if a.confidence < b.confidence:
            raise ValueError("proposals must be sorted by confidence, best first")
    k_off = apply_transform(obj, offset)
    truth = _ground_truth(obj, k_off, offset, cfg, rng)
    baseline = pose_error(RigidTransform.identity(), truth, k_off)
    uv_off, _ = project(k_off, cam)
    uv_ref, _ = project(obj, cam)

    rows = []
    source_parts: list[np.ndarray] = []
    covered = np.empty(0, dtype=np.intp)
    target_covered = np.empty(0, dtype=np.intp)
    for k, prop in enumerate(proposals):
        src_idx = band_indices(uv_off, prop.rect, cfg.scan.on_band)
        tgt_idx = band_indices(uv_ref, prop.rect, cfg.scan.near_band)
        scan = add_gaussian_noise(k_off.select(src_idx), cfg.scan.noise_sigma, rng)
        source_parts.append(scan.points)
        covered = np.union1d(covered, src_idx)
        target_covered = np.union1d(target_covered, tgt_idx)
        source = PointCloud(np.concatenate(source_parts, axis=0))
        estimate, usable = _register(source, obj.select(target_covered), cfg.icp)
        if usable:
            err = pose_error(estimate, truth, source)
        elif len(source) > 0:
            err = pose_error(RigidTransform.identity(), truth, source)
        else:
            err = baseline
        rows.append(
            ScanTrialResult(
                scan_index=k,
                region=prop.rect,
                pose_error=err,
                percent_scanned=len(covered) / len(obj),
                converged=usable,
            )
        )
    return EvalReport.from_results(rows, baseline, cfg.include_failures)


_CSV_FIELDS = (
    "object_id",
    "proposer",
    "scan_index",
    "percent_scanned",
    "pose_error_cm",
    "converged",
)


def write_scan_rows(f: IO[str] | str, entries: Iterable[tuple[str, str, EvalReport]]) -> None:
    """Write one CSV row per evaluated scan.

    entries: (object_id, proposer name, report) triples. Floats are written
    with full round-trip precision; converged as true/false.
    """
    if isinstance(f, str):
        with open(f, "w", newline="") as fh:
            write_scan_rows(fh, entries)
        return
    writer = csv.writer(f)
    writer.writerow(_CSV_FIELDS)
    for object_id, proposer, report in entries:
        for r in report.results:
            writer.writerow(
                [
                    object_id,
                    proposer,
                    r.scan_index,
                    repr(r.percent_scanned),
                    repr(r.pose_error),
                    "true" if r.converged else "false",
                ]
            )


def summary_dict(entries: Iterable[tuple[str, str, EvalReport]]) -> dict:
    """Nested summary mapping object_id -> proposer -> mean/std/baseline (cm)."""
    out: dict[str, dict] = {}
    for object_id, proposer, report in entries:
        out.setdefault(object_id, {})[proposer] = {
            "mean_cm": _float_to_json(report.mean_error),
            "std_cm": _float_to_json(report.std_error),
            "baseline_cm": report.baseline_error,
        }
    return out
