"""Pose re-estimation from sparse pre-touch scans.

A prior depth-camera cloud of a tabletop object is assumed to be offset from
the object's true pose by a few centimeters and degrees. The package picks
rotated-rectangle scan regions in the image plane, simulates sparse
perimeter scans inside them, registers each scan back onto the prior cloud
with trimmed ICP, and measures how far the re-estimated pose is from the
injected ground truth.

Modules:
    geometry    rotated rectangles, IoU, perimeter distances, angle encoding
    pointcloud  clouds, rigid transforms, camera models, PCD and depth-image io
    icp         trimmed ICP with a fractional-RMSD objective
    scan_sim    pose offsets and simulated perimeter scans
    synthetic   procedural test fixtures (plates, disks, rings, blobs)
    labelgen    Monte-Carlo worst-case scoring of candidate scan regions
    baselines   random, surface-change-keypoint, and oracle region proposers
    evaluation  single and sequential scan evaluation, CSV and summary output
    report      error-curve figures rendered to files
    cli         command line entry points over all of the above
"""

from pretouch.baselines import (
    Keypoint,
    NarfParams,
    RangeImage,
    RegionProposal,
    narf_variant_proposals,
    oracle_proposals,
    proposal_dicts,
    proposals_from_dicts,
    random_proposals,
)
from pretouch.evaluation import (
    EvalConfig,
    EvalReport,
    ScanTrialResult,
    pose_error,
    sequential_scan_eval,
    single_scan_eval,
    summary_dict,
    write_scan_rows,
)
from pretouch.geometry import (
    AngleEncoding,
    RotatedRect,
    angle_decode,
    angle_encode,
    perimeter_distance,
    perimeter_distances,
    rect_contains,
    rect_corners,
    rect_iou,
)
from pretouch.icp import IcpParams, IcpResult, estimate_rigid, icp_align
from pretouch.labelgen import (
    CandidateConstraints,
    InfeasibleConstraintsError,
    LabelGenConfig,
    LabelRecord,
    NoViableRegionError,
    generate_candidates,
    label_generation,
    labels_document,
    projected_bbox,
    records_from_document,
)
from pretouch.pointcloud import (
    CameraModel,
    PcdFormatError,
    PointCloud,
    RigidTransform,
    add_gaussian_noise,
    apply_transform,
    depth_image_to_cloud,
    load_pcd,
    project,
    save_pcd,
)
from pretouch.scan_sim import (
    OffsetSpec,
    ScanConfig,
    band_indices,
    random_offset,
    rotation_zyx,
    simulate_scan,
)
from pretouch.synthetic import KINDS, FixtureSpec, fixture_truth, make_fixture

__version__ = "0.1.0"

__all__ = [
    "AngleEncoding",
    "CameraModel",
    "CandidateConstraints",
    "EvalConfig",
    "EvalReport",
    "FixtureSpec",
    "IcpParams",
    "IcpResult",
    "InfeasibleConstraintsError",
    "KINDS",
    "Keypoint",
    "LabelGenConfig",
    "LabelRecord",
    "NarfParams",
    "NoViableRegionError",
    "OffsetSpec",
    "PcdFormatError",
    "PointCloud",
    "RangeImage",
    "RegionProposal",
    "RigidTransform",
    "RotatedRect",
    "ScanConfig",
    "ScanTrialResult",
    "add_gaussian_noise",
    "angle_decode",
    "angle_encode",
    "apply_transform",
    "band_indices",
    "depth_image_to_cloud",
    "estimate_rigid",
    "fixture_truth",
    "generate_candidates",
    "icp_align",
    "label_generation",
    "labels_document",
    "load_pcd",
    "make_fixture",
    "narf_variant_proposals",
    "oracle_proposals",
    "perimeter_distance",
    "perimeter_distances",
    "pose_error",
    "project",
    "projected_bbox",
    "proposal_dicts",
    "proposals_from_dicts",
    "random_offset",
    "random_proposals",
    "records_from_document",
    "rect_contains",
    "rect_corners",
    "rect_iou",
    "rotation_zyx",
    "save_pcd",
    "sequential_scan_eval",
    "simulate_scan",
    "single_scan_eval",
    "summary_dict",
    "write_scan_rows",
]
