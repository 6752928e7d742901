"""Command-line pipeline: synthesize or ingest clouds, generate scan labels,
propose regions, align clouds, and evaluate proposers.

Outputs are plain files: PCD for clouds, JSON for structured results, CSV for
per-scan tables, PNG for evaluation figures. Every structured output embeds
the fully resolved configuration and seed; PCD outputs carry the same
provenance in a sidecar <name>.meta.json, since the format has no room for
it. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .baselines import (
    NarfParams,
    RangeImage,
    RegionProposal,
    narf_variant_proposals,
    oracle_proposals,
    proposal_dicts,
    random_proposals,
)
from .evaluation import (
    EvalConfig,
    _float_to_json,
    sequential_scan_eval,
    single_scan_eval,
    summary_dict,
    write_scan_rows,
)
from .icp import IcpParams, icp_align
from .labelgen import (
    CandidateConstraints,
    LabelGenConfig,
    NoViableRegionError,
    label_generation,
    labels_document,
    projected_bbox,
)
from .pointcloud import CameraModel, PointCloud, depth_image_to_cloud, load_pcd, save_pcd
from .report import render_error_curves
from .scan_sim import OffsetSpec, ScanConfig, random_offset
from .synthetic import KINDS, FixtureSpec, make_fixture

_SECTION_TYPES = {
    "camera": CameraModel,
    "constraints": CandidateConstraints,
    "offsets": OffsetSpec,
    "scan": ScanConfig,
    "icp": IcpParams,
    "narf": NarfParams,
}
_SCALAR_KEYS = ("n_trials", "top_k", "seed")


@dataclass(frozen=True)
class RunConfig:
    """Resolved defaults for every pipeline stage.

    Loaded from a single JSON document with one optional object per stage
    (camera, constraints, offsets, scan, icp, narf) plus scalar n_trials,
    top_k, and seed; omitted entries keep these defaults. The resolved config
    is echoed into every output file, so a result names the exact parameters
    that produced it.
    """

    camera: CameraModel = CameraModel.orthographic()
    constraints: CandidateConstraints = CandidateConstraints()
    offsets: OffsetSpec = OffsetSpec()
    scan: ScanConfig = ScanConfig()
    icp: IcpParams = IcpParams()
    narf: NarfParams = NarfParams()
    n_trials: int = 10
    top_k: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        unknown = set(doc) - set(_SECTION_TYPES) - set(_SCALAR_KEYS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict = {}
        for name, typ in _SECTION_TYPES.items():
            if name in doc:
                if not isinstance(doc[name], dict):
                    raise ValueError(f"config section {name!r} must be a JSON object")
                try:
                    kwargs[name] = typ(**doc[name])
                except TypeError as e:
                    raise ValueError(f"config section {name!r}: {e}") from None
        for name in _SCALAR_KEYS:
            if name in doc:
                kwargs[name] = int(doc[name])
        return cls(**kwargs)


def _load_config(path: str | None, seed: int | None) -> RunConfig:
    if path is None:
        rc = RunConfig()
    else:
        rc = RunConfig.from_dict(json.loads(Path(path).read_text()))
    if seed is not None:
        rc = replace(rc, seed=seed)
    return rc


def _write_json(path: str, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _write_meta(data_path: str, doc: dict) -> None:
    _write_json(str(data_path) + ".meta.json", doc)


def _load_cloud(path: str) -> PointCloud:
    cloud = load_pcd(path)
    if len(cloud) == 0:
        raise ValueError(f"{path} holds an empty cloud")
    return cloud


def _labelgen_config(rc: RunConfig, top_k: int) -> LabelGenConfig:
    return LabelGenConfig(
        constraints=rc.constraints,
        n_trials=rc.n_trials,
        offsets=rc.offsets,
        scan=rc.scan,
        icp=rc.icp,
        top_k=top_k,
    )


def _make_proposals(
    cloud: PointCloud, method: str, n: int, rc: RunConfig, rng: np.random.Generator
) -> list[RegionProposal]:
    if n < 0:
        raise ValueError(f"proposal count must be >= 0, got {n}")
    if n == 0:
        return []
    bbox = projected_bbox(cloud, rc.camera)
    if method == "random":
        return random_proposals(bbox, rc.constraints, n, rng)
    if method == "narf":
        img = RangeImage.from_cloud(cloud, rc.camera)
        return narf_variant_proposals(img, bbox, replace(rc.narf, top_m=n))[:n]
    return oracle_proposals(cloud, rc.camera, _labelgen_config(rc, rc.top_k), n, rng)


def cmd_synth(args: argparse.Namespace) -> int:
    rc = _load_config(args.config, args.seed)
    dims = tuple(float(x) for x in args.dims.split(",")) if args.dims else None
    spec = FixtureSpec(
        kind=args.kind, dimensions=dims, sample_density=args.density, seed=rc.seed
    )
    cloud = make_fixture(spec)
    save_pcd(cloud, args.out)
    _write_meta(
        args.out,
        {
            "command": "synth",
            "seed": rc.seed,
            "fixture": asdict(spec),
            "points": len(cloud),
            "config": asdict(rc),
        },
    )
    print(f"wrote {args.out} ({len(cloud)} points)")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    rc = _load_config(args.config, args.seed)
    try:
        image = Image.open(args.depth)
    except UnidentifiedImageError as e:
        raise ValueError(f"cannot read depth image {args.depth}: {e}") from None
    depth = np.asarray(image, dtype=np.float64)
    if depth.ndim != 2:
        raise ValueError(
            f"depth image must be single-channel, got shape {depth.shape}"
        )
    cam = CameraModel.pinhole(
        fx=args.fx, fy=args.fy, cx=args.cx, cy=args.cy,
        width=image.width, height=image.height,
    )
    cloud = depth_image_to_cloud(depth, cam)
    if len(cloud) == 0:
        raise ValueError(f"{args.depth} holds no valid depth pixels")
    save_pcd(cloud, args.out)
    _write_meta(
        args.out,
        {
            "command": "ingest",
            "seed": rc.seed,
            "source": str(args.depth),
            "camera": asdict(cam),
            "points": len(cloud),
            "config": asdict(rc),
        },
    )
    print(f"wrote {args.out} ({len(cloud)} points)")
    return 0


def cmd_labelgen(args: argparse.Namespace) -> int:
    rc = _load_config(args.config, args.seed)
    if args.n_candidates is not None:
        rc = replace(rc, constraints=replace(rc.constraints, n_candidates=args.n_candidates))
    if args.n_trials is not None:
        rc = replace(rc, n_trials=args.n_trials)
    if args.top_k is not None:
        rc = replace(rc, top_k=args.top_k)
    cloud = _load_cloud(args.infile)
    cfg = _labelgen_config(rc, rc.top_k)
    records = label_generation(cloud, rc.camera, cfg, np.random.default_rng(rc.seed))
    doc = labels_document(
        object_id=Path(args.infile).stem,
        camera_dict=asdict(rc.camera),
        cfg=cfg,
        records=records,
        seed=rc.seed,
    )
    _write_json(args.out, doc)
    print(f"wrote {args.out} ({len(records)} records)")
    return 0


def cmd_propose(args: argparse.Namespace) -> int:
    rc = _load_config(args.config, args.seed)
    cloud = _load_cloud(args.infile)
    proposals = _make_proposals(cloud, args.method, args.n, rc, np.random.default_rng(rc.seed))
    doc = {
        "command": "propose",
        "object_id": Path(args.infile).stem,
        "method": args.method,
        "seed": rc.seed,
        "config": asdict(rc),
        "proposals": proposal_dicts(proposals),
    }
    _write_json(args.out, doc)
    print(f"wrote {args.out} ({len(proposals)} proposals)")
    return 0


def cmd_align(args: argparse.Namespace) -> int:
    rc = _load_config(args.config, args.seed)
    source = _load_cloud(args.source)
    target = _load_cloud(args.target)
    result = icp_align(source, target, rc.icp)
    doc = {
        "command": "align",
        "seed": rc.seed,
        "config": asdict(rc),
        "matrix": result.transform.as_matrix().tolist(),
        "fitness": _float_to_json(result.fitness),
        "converged": result.converged,
        "failed": result.failed,
        "iterations": result.iterations,
        "inlier_fraction": result.inlier_fraction,
    }
    if args.out:
        _write_json(args.out, doc)
    for row in doc["matrix"]:
        print(" ".join(f"{v: .9f}" for v in row))
    print(f"fitness {result.fitness:.6g} converged {result.converged}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    rc = _load_config(args.config, args.seed)
    cloud = _load_cloud(args.object)
    rng = np.random.default_rng(rc.seed)
    proposals = _make_proposals(cloud, args.method, args.n, rc, rng)
    if not proposals:
        raise ValueError(f"proposer {args.method!r} produced no regions to evaluate")
    offset = random_offset(rc.offsets, rng)
    cfg = EvalConfig(scan=rc.scan, icp=rc.icp, include_failures=not args.exclude_failures)
    runner = single_scan_eval if args.mode == "single" else sequential_scan_eval
    report = runner(cloud, rc.camera, proposals, offset, cfg, rng)
    object_id = Path(args.object).stem
    entries = [(object_id, args.method, report)]
    write_scan_rows(args.out_csv, entries)
    _write_json(
        args.out_json,
        {
            "command": "evaluate",
            "object_id": object_id,
            "method": args.method,
            "mode": args.mode,
            "seed": rc.seed,
            "config": asdict(rc),
            "summary": summary_dict(entries),
            "report": report.to_dict(),
        },
    )
    fig_path = args.out_fig or str(Path(args.out_csv).with_suffix(".png"))
    render_error_curves(entries, args.mode, fig_path)
    print(
        f"wrote {args.out_csv}, {args.out_json}, {fig_path}"
        f" (mean {report.mean_error:.4f} cm over {len(report.results)} scans)"
    )
    return 0


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--seed", type=int, default=None, help="override the config seed")
    sp.add_argument("--config", default=None, help="JSON config file")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pretouch",
        description="Pre-touch scan-region pipeline: synthesize, label, propose, align, evaluate.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic fixture cloud as PCD")
    synth.add_argument("--kind", required=True, choices=KINDS)
    synth.add_argument("--dims", default=None, help="comma-separated dimensions in cm")
    synth.add_argument("--density", type=float, default=25.0, help="points per cm^2")
    synth.add_argument("--out", required=True)
    _add_common(synth)
    synth.set_defaults(func=cmd_synth)

    ingest = sub.add_parser("ingest", help="back-project a 16-bit depth PNG (mm) to PCD")
    ingest.add_argument("--depth", required=True, help="single-channel 16-bit PNG, 0 = missing")
    ingest.add_argument("--out", required=True)
    ingest.add_argument("--fx", type=float, default=525.0)
    ingest.add_argument("--fy", type=float, default=525.0)
    ingest.add_argument("--cx", type=float, default=319.5)
    ingest.add_argument("--cy", type=float, default=239.5)
    _add_common(ingest)
    ingest.set_defaults(func=cmd_ingest)

    labelgen = sub.add_parser("labelgen", help="score candidate regions by simulated scanning")
    labelgen.add_argument("--in", dest="infile", required=True, help="object cloud PCD")
    labelgen.add_argument("--out", required=True, help="label JSON path")
    labelgen.add_argument("--n-candidates", type=int, default=None)
    labelgen.add_argument("--n-trials", type=int, default=None)
    labelgen.add_argument("--top-k", type=int, default=None)
    _add_common(labelgen)
    labelgen.set_defaults(func=cmd_labelgen)

    propose = sub.add_parser("propose", help="emit scan-region proposals sorted by confidence")
    propose.add_argument("--in", dest="infile", required=True, help="object cloud PCD")
    propose.add_argument("--method", required=True, choices=("random", "narf", "oracle"))
    propose.add_argument("--n", type=int, default=10)
    propose.add_argument("--out", required=True)
    _add_common(propose)
    propose.set_defaults(func=cmd_propose)

    align = sub.add_parser("align", help="register a source cloud onto a target cloud")
    align.add_argument("--source", required=True)
    align.add_argument("--target", required=True)
    align.add_argument("--out", default=None, help="optional result JSON path")
    _add_common(align)
    align.set_defaults(func=cmd_align)

    evaluate = sub.add_parser("evaluate", help="measure proposer pose error; writes CSV+JSON+PNG")
    evaluate.add_argument("--object", required=True, help="object cloud PCD")
    evaluate.add_argument("--method", required=True, choices=("random", "narf", "oracle"))
    evaluate.add_argument("--mode", required=True, choices=("single", "sequential"))
    evaluate.add_argument("--n", type=int, default=10, help="number of proposals to evaluate")
    evaluate.add_argument("--out-csv", required=True)
    evaluate.add_argument("--out-json", required=True)
    evaluate.add_argument("--out-fig", default=None, help="figure path (default: CSV path as .png)")
    evaluate.add_argument(
        "--exclude-failures",
        action="store_true",
        help="drop non-converged scans from summary statistics",
    )
    _add_common(evaluate)
    evaluate.set_defaults(func=cmd_evaluate)

    return p


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, NoViableRegionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
