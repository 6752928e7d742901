"""Acceptance suite: one test per numbered criterion of the package contract.

Each test measures its property end to end, prints a single verdict line,
and then asserts it; the conftest hook echoes all verdict lines after the
run summary so per-criterion pass/fail is visible without -s. The expensive
proposer-comparison data shared by criteria 5 through 7 is computed once in
a module-scoped fixture. Where the contract states a runtime budget the
elapsed time is asserted too. The criteria are listed in the README.
"""

import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from conftest import record_verdict
from oracles import raster_iou
from pretouch.baselines import (
    NarfParams,
    RangeImage,
    narf_variant_proposals,
    oracle_proposals,
    random_proposals,
)
from pretouch.evaluation import (
    EvalConfig,
    pose_error,
    sequential_scan_eval,
    single_scan_eval,
)
from pretouch.geometry import RotatedRect, rect_contains, rect_iou
from pretouch.icp import IcpParams, icp_align
from pretouch.labelgen import (
    CandidateConstraints,
    LabelGenConfig,
    label_generation,
    projected_bbox,
)
from pretouch.pointcloud import (
    CameraModel,
    PcdFormatError,
    PointCloud,
    add_gaussian_noise,
    apply_transform,
    load_pcd,
    save_pcd,
)
from pretouch.scan_sim import OffsetSpec, ScanConfig, random_offset
from pretouch.synthetic import FixtureSpec, fixture_truth, make_fixture

BLOB_SEEDS = (11, 12, 13, 14, 15)
N_OFFSETS = 10

# Shared regime for the proposer comparisons: one camera frame for labelgen,
# the baseline proposers, and evaluation. The fine scale keeps the range
# image dense enough for keypoints; the wide near band tolerates the full
# +-2 cm / +-5 deg offset range on 8 cm fixtures.
EV_CAM = CameraModel.orthographic(scale=5.0)
EV_SCAN = ScanConfig(on_band=1.0, near_band=20.0, noise_sigma=0.15)
EV_ICP = IcpParams(max_iterations=150, outlier_lambda=50.0, transform_epsilon=1e-8)
EV_CFG = EvalConfig(scan=EV_SCAN, icp=EV_ICP)
EV_OFFSETS = OffsetSpec(2.0, 5.0)


def _verdict(num: int, name: str, ok: bool, detail: str) -> None:
    line = f"[criterion {num}] {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    record_verdict(line)
    assert ok, line


def test_criterion_1_rect_iou_matches_rasterization():
    rng = np.random.default_rng(2024)

    def draw() -> RotatedRect:
        cx, cy = rng.uniform(-10.0, 10.0, size=2)
        w, h = rng.uniform(0.5, 12.0, size=2)
        return RotatedRect(cx, cy, w, h, rng.uniform(-np.pi / 2, np.pi / 2))

    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        a, b = draw(), draw()
        raster = raster_iou((a.cx, a.cy, a.w, a.h, a.theta), (b.cx, b.cy, b.w, b.h, b.theta))
        worst = max(worst, abs(rect_iou(a, b) - raster))
    elapsed = time.perf_counter() - t0
    _verdict(
        1,
        "analytic rect IoU matches 1024^2 rasterization",
        worst <= 0.01 and elapsed < 30.0,
        f"max deviation {worst:.2e} over 1000 pairs, {elapsed:.1f}s (budget 30s)",
    )


def test_criterion_2_icp_recovers_seeded_offsets():
    params = IcpParams(max_iterations=150)
    t0 = time.perf_counter()
    within = {}
    for sigma, tol in ((0.0, 0.05), (0.15, 0.3)):
        good = 0
        for seed in BLOB_SEEDS:
            cloud = make_fixture(FixtureSpec(kind="asym_blob", dimensions=(8.0, 8.0), seed=seed))
            for j in range(20):
                rng = np.random.default_rng(3000 + seed * 100 + j)
                offset = random_offset(EV_OFFSETS, rng)
                source = add_gaussian_noise(apply_transform(cloud, offset), sigma, rng)
                res = icp_align(source, cloud, params)
                err = math.inf if res.failed else pose_error(res.transform, offset.inverse(), source)
                good += err <= tol
        within[sigma] = good
    elapsed = time.perf_counter() - t0
    _verdict(
        2,
        "registration recovers +-2 cm / +-5 deg offsets",
        within[0.0] >= 95 and within[0.15] >= 90 and elapsed < 120.0,
        f"noiseless {within[0.0]}/100 within 0.05 cm, sigma 0.15 {within[0.15]}/100 "
        f"within 0.3 cm, {elapsed:.0f}s (budget 120s)",
    )


def test_criterion_3_zero_offset_scores_vanish():
    cloud = make_fixture(FixtureSpec(kind="l_plate", dimensions=(10.0, 4.0)))
    cfg = LabelGenConfig(
        constraints=CandidateConstraints(n_candidates=60),
        n_trials=3,
        offsets=OffsetSpec(0.0, 0.0),
        scan=ScanConfig(on_band=1.0, near_band=3.0, noise_sigma=0.0),
        icp=IcpParams(),
        top_k=60,
    )
    records = label_generation(cloud, CameraModel.orthographic(), cfg, np.random.default_rng(77))
    finite = [r.worst_score for r in records if math.isfinite(r.worst_score)]
    agree = all(r.worst_score == max(r.trial_scores) for r in records)
    _verdict(
        3,
        "zero offset and zero noise score zero; worst equals max trial",
        bool(finite) and max(finite) <= 1e-6 and agree,
        f"{len(finite)}/{len(records)} finite, max score {max(finite):.2e} cm, "
        f"worst==max in all records: {agree}",
    )


def test_criterion_4_corner_regions_outscore_edges():
    spec = FixtureSpec(kind="l_plate", dimensions=(20.0, 8.0))
    cloud = make_fixture(spec)
    truth = fixture_truth(spec)
    cam = CameraModel.orthographic()
    corner_px = cam.scale * truth.concave_corner
    all_px = cam.scale * truth.corners
    cfg = LabelGenConfig(
        constraints=CandidateConstraints(n_candidates=200),
        n_trials=5,
        scan=ScanConfig(on_band=2.0, near_band=60.0, noise_sigma=0.15),
        icp=IcpParams(max_iterations=150, outlier_lambda=50.0, transform_epsilon=1e-8),
        top_k=200,
    )
    t0 = time.perf_counter()
    wins = 0
    for seed in range(4000, 4020):
        records = label_generation(cloud, cam, cfg, np.random.default_rng(seed))
        corner, edge = [], []
        for r in records:
            if not math.isfinite(r.worst_score):
                continue
            if rect_contains(r.rect, corner_px[None, :])[0]:
                corner.append(r.worst_score)
            elif not rect_contains(r.rect, all_px).any():
                edge.append(r.worst_score)
        wins += bool(corner) and bool(edge) and np.mean(corner) < np.mean(edge)
    elapsed = time.perf_counter() - t0
    _verdict(
        4,
        "concave-corner regions score better than edge-only regions",
        wins >= 18 and elapsed < 600.0,
        f"{wins}/20 seeded runs, {elapsed:.0f}s (budget 600s)",
    )


@pytest.fixture(scope="module")
def blob_runs():
    """Per-fixture eval reports: 10 single-scan offsets x 3 proposers, plus
    one sequential run of the oracle proposer."""
    lg = LabelGenConfig(
        constraints=CandidateConstraints(n_candidates=120),
        n_trials=10,
        offsets=EV_OFFSETS,
        scan=EV_SCAN,
        icp=EV_ICP,
        top_k=10,
    )
    runs = {}
    for seed in BLOB_SEEDS:
        cloud = make_fixture(FixtureSpec(kind="asym_blob", dimensions=(8.0, 8.0), seed=seed))
        bbox = projected_bbox(cloud, EV_CAM)
        proposers = {
            "oracle": oracle_proposals(cloud, EV_CAM, lg, 10, np.random.default_rng(800 + seed)),
            "random": random_proposals(bbox, CandidateConstraints(), 10, np.random.default_rng(900 + seed)),
            "narf": narf_variant_proposals(
                RangeImage.from_cloud(cloud, EV_CAM), bbox, NarfParams(top_m=10)
            )[:10],
        }
        singles = {name: [] for name in proposers}
        for j in range(N_OFFSETS):
            offset = random_offset(EV_OFFSETS, np.random.default_rng(700 + seed * 100 + j))
            for name, props in proposers.items():
                singles[name].append(
                    single_scan_eval(
                        cloud, EV_CAM, props, offset, EV_CFG,
                        np.random.default_rng(1000 + seed * 100 + j),
                    )
                )
        sequential = sequential_scan_eval(
            cloud, EV_CAM, proposers["oracle"],
            random_offset(EV_OFFSETS, np.random.default_rng(700 + seed * 100)),
            EV_CFG, np.random.default_rng(2000 + seed * 100),
        )
        runs[seed] = {"singles": singles, "sequential": sequential}
    return runs


def test_criterion_5_oracle_orders_ahead_of_baselines(blob_runs):
    beats_random = beats_narf = 0
    for seed in BLOB_SEEDS:
        singles = blob_runs[seed]["singles"]
        means = {
            name: float(np.mean([rep.mean_error for rep in reps]))
            for name, reps in singles.items()
        }
        beats_random += means["oracle"] < means["random"]
        beats_narf += means["oracle"] <= means["narf"]
        print(
            f"  fixture {seed}: oracle {means['oracle']:.3f}  "
            f"random {means['random']:.3f}  narf {means['narf']:.3f}"
        )
    _verdict(
        5,
        "oracle proposer orders ahead of random and narf baselines",
        beats_random >= 4 and beats_narf >= 3,
        f"beats random on {beats_random}/5 fixtures (need >=4), "
        f"ties-or-beats narf on {beats_narf}/5 (need >=3)",
    )


def test_criterion_6_sequential_reaches_half_cm_early(blob_runs):
    hits = 0
    for seed in BLOB_SEEDS:
        report = blob_runs[seed]["sequential"]
        hit = next(
            (
                (r.percent_scanned, r.pose_error)
                for r in report.results
                if r.percent_scanned <= 0.20 and r.pose_error <= 0.5
            ),
            None,
        )
        hits += hit is not None
        print(f"  fixture {seed}: first qualifying row {hit}")
    _verdict(
        6,
        "sequential scanning reaches <=0.5 cm by 20% coverage",
        hits >= 4,
        f"{hits}/5 fixtures (need >=4)",
    )


def test_criterion_7_first_scan_improves_on_baseline(blob_runs):
    improved = 0
    for seed in BLOB_SEEDS:
        reports = blob_runs[seed]["singles"]["oracle"]
        first = float(np.mean([rep.results[0].pose_error for rep in reports]))
        base = float(np.mean([rep.baseline_error for rep in reports]))
        improved += first < base
        print(f"  fixture {seed}: first scan {first:.3f} vs baseline {base:.3f}")
    _verdict(
        7,
        "a single oracle scan reduces error below the injected offset",
        improved >= 4,
        f"{improved}/5 fixtures (need >=4)",
    )


_CLI_CONFIG = {
    "camera": {"mode": "orthographic", "scale": 5.0},
    "constraints": {"n_candidates": 40},
    "scan": {"on_band": 1.0, "near_band": 20.0, "noise_sigma": 0.15},
    "icp": {
        "max_iterations": 150,
        "transform_epsilon": 1e-8,
        "max_corr_dist": 5.0,
        "outlier_lambda": 50.0,
    },
    "n_trials": 6,
    "top_k": 5,
}


def _run_cli(args: list[str]) -> None:
    proc = subprocess.run(
        [sys.executable, "-m", "pretouch.cli", *args], capture_output=True, text=True
    )
    assert proc.returncode == 0, f"{args[0]} failed: {proc.stderr}"


def test_criterion_8_cli_outputs_are_byte_identical(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(_CLI_CONFIG))
    depth = np.full((48, 64), 800, dtype=np.uint16)
    depth[16:32, 24:44] = 750
    depth[8:12, 8:58] = 770
    depth_path = tmp_path / "depth.png"
    Image.fromarray(depth).save(depth_path)

    def run_all(d: Path) -> None:
        d.mkdir()
        plate = d / "plate.pcd"
        _run_cli(["synth", "--kind", "l_plate", "--dims", "10,4", "--seed", "7",
                  "--out", str(plate)])
        _run_cli(["ingest", "--depth", str(depth_path), "--fx", "50", "--fy", "50",
                  "--cx", "31.5", "--cy", "23.5", "--out", str(d / "scene.pcd")])
        _run_cli(["labelgen", "--in", str(plate), "--out", str(d / "labels.json"),
                  "--config", str(config), "--seed", "3"])
        _run_cli(["propose", "--in", str(plate), "--method", "oracle", "--n", "5",
                  "--out", str(d / "proposals.json"), "--config", str(config), "--seed", "3"])
        _run_cli(["align", "--source", str(plate), "--target", str(plate),
                  "--out", str(d / "align.json")])
        _run_cli(["evaluate", "--object", str(plate), "--method", "oracle",
                  "--mode", "sequential", "--n", "6", "--out-csv", str(d / "eval.csv"),
                  "--out-json", str(d / "eval.json"), "--out-fig", str(d / "eval.png"),
                  "--config", str(config), "--seed", "9"])

    for name in ("a", "b"):
        run_all(tmp_path / name)
    names_a = sorted(p.name for p in (tmp_path / "a").iterdir())
    names_b = sorted(p.name for p in (tmp_path / "b").iterdir())
    assert names_a == names_b and names_a
    differing = [
        n for n in names_a
        if (tmp_path / "a" / n).read_bytes() != (tmp_path / "b" / n).read_bytes()
    ]
    _verdict(
        8,
        "fixed-seed CLI runs produce byte-identical files",
        not differing,
        f"{len(names_a)} files per run compared"
        + (f", differ: {differing}" if differing else ""),
    )


def test_criterion_9_pcd_round_trip_and_rejection(tmp_path):
    rng = np.random.default_rng(5)
    worst = 0.0
    for name, cloud in (
        ("random", PointCloud(rng.uniform(-50.0, 50.0, size=(500, 3)))),
        ("plate", make_fixture(FixtureSpec(kind="l_plate", dimensions=(10.0, 4.0)))),
    ):
        path = tmp_path / f"{name}.pcd"
        save_pcd(cloud, path)
        worst = max(worst, float(np.max(np.abs(load_pcd(path).points - cloud.points))))

    good = tmp_path / "good.pcd"
    save_pcd(PointCloud(np.array([[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]])), good)
    text = good.read_text()
    variants = {
        "extra field": text.replace("FIELDS x y z", "FIELDS x y z rgb"),
        "integer type": text.replace("TYPE F F F", "TYPE F F I"),
        "binary data": text.replace("DATA ascii", "DATA binary"),
        "count mismatch": text.replace("POINTS 2", "POINTS 3"),
        "truncated header": "\n".join(text.splitlines()[:4]) + "\n",
        "malformed row": text.replace("3.000000 4.000000 5.000000", "3.0 4.0 oops"),
        "unknown header key": text.replace("VERSION 0.7", "XVERSION 0.7"),
    }
    rejected = 0
    for label, payload in variants.items():
        bad = tmp_path / "bad.pcd"
        bad.write_text(payload)
        with pytest.raises(PcdFormatError) as exc:
            load_pcd(bad)
        assert str(exc.value), f"{label}: rejection carries no message"
        rejected += 1
    _verdict(
        9,
        "PCD round-trip within 1e-4 cm; unsupported variants rejected",
        worst <= 1e-4 and rejected == len(variants),
        f"max round-trip error {worst:.2e} cm, {rejected}/{len(variants)} "
        f"unsupported variants rejected with explicit errors",
    )
