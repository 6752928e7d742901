"""Point-to-point ICP with fractional-RMSD outlier rejection.

The registration problem here is small and local: a sparse scan a few
centimeters off a denser prior cloud, similar orientation. Point-to-point
correspondences with an inlier fraction chosen per iteration by minimizing
FRMSD(f) = RMSD(inliers) / f^lambda keep stray correspondences from dragging
the fit, without needing surface normals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import cKDTree

from .pointcloud import PointCloud, RigidTransform


@dataclass(frozen=True, slots=True)
class IcpParams:
    max_iterations: int = 50
    transform_epsilon: float = 1e-6
    max_corr_dist: float = 5.0
    outlier_lambda: float = 1.3

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.transform_epsilon > 0 and self.max_corr_dist > 0 and self.outlier_lambda > 0):
            raise ValueError("transform_epsilon, max_corr_dist and outlier_lambda must be > 0")


@dataclass(frozen=True)
class IcpResult:
    """Outcome of one alignment.

    transform maps source frame -> target frame. fitness is the RMS residual
    over the final inlier set (cm); +inf marks the no-correspondence failure
    case, where inlier_fraction is vacuously 1. frmsd_history records the
    per-iteration objective for monotonicity checks.
    """

    transform: RigidTransform
    converged: bool
    iterations: int
    fitness: float
    inlier_fraction: float
    frmsd_history: tuple[float, ...] = field(default=())

    @property
    def failed(self) -> bool:
        return math.isinf(self.fitness)


def build_nn_index(c: PointCloud) -> cKDTree:
    """Exact nearest-neighbor index over the cloud's points."""
    if len(c) == 0:
        raise ValueError("cannot build an index over an empty cloud")
    return cKDTree(c.points)


def nearest(index: cKDTree, q: NDArray[np.float64]) -> tuple[int, float]:
    """Exact nearest neighbor of q; ties resolved to the lowest point index."""
    d, i = index.query(np.asarray(q, dtype=np.float64))
    ties = index.query_ball_point(np.asarray(q, dtype=np.float64), r=float(d))
    if ties:
        i = min(ties)
    return int(i), float(d)


def estimate_rigid(src: NDArray[np.float64], dst: NDArray[np.float64]) -> RigidTransform:
    """Least-squares rigid fit R @ src + t ~= dst (Kabsch, reflection-safe).

    Requires >= 3 paired points that are not all collinear; rank-deficient
    covariance (both clouds degenerate to a line or point) is rejected since
    the rotation is then underdetermined.
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if len(src) != len(dst):
        raise ValueError(f"src and dst lengths differ: {len(src)} vs {len(dst)}")
    if len(src) < 3:
        raise ValueError(f"need at least 3 correspondences, got {len(src)}")

    c_src = src.mean(axis=0)
    c_dst = dst.mean(axis=0)
    h = (src - c_src).T @ (dst - c_dst)
    u, s, vt = np.linalg.svd(h)
    if s[1] <= 1e-9 * max(s[0], 1e-30):
        raise ValueError("degenerate correspondence geometry: rotation underdetermined")
    v = vt.T
    d = np.sign(np.linalg.det(v @ u.T))
    rot = v @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rot, c_dst - rot @ c_src)


def _select_inliers(
    dists: NDArray[np.float64], n_source: int, lam: float
) -> tuple[NDArray[np.intp], float, float]:
    """Pick the prefix of sorted residuals minimizing FRMSD(f) = RMSD / f^lam.

    f is measured against the full source size, so gating only truncates the
    search range. Returns (order of chosen residuals, frmsd, rms). Ties take
    the largest prefix, i.e. the most inclusive inlier set.
    """
    order = np.argsort(dists, kind="stable")
    sq = np.cumsum(dists[order] ** 2)
    k = np.arange(1, len(dists) + 1)
    rms = np.sqrt(sq / k)
    frmsd = rms / (k / n_source) ** lam
    lo = min(3, len(dists)) - 1
    best = len(frmsd) - 1 - int(np.argmin(frmsd[lo:][::-1]))
    return order[: best + 1], float(frmsd[best]), float(rms[best])


def icp_align(source: PointCloud, target: PointCloud, params: IcpParams = IcpParams()) -> IcpResult:
    """Iterate NN correspondence, inlier selection, rigid fit until the total
    transform stops changing (sum of squared 4x4 entry differences below
    transform_epsilon) or max_iterations is hit."""
    if len(source) == 0 or len(target) == 0:
        raise ValueError("icp_align requires nonempty source and target clouds")

    tree = cKDTree(target.points)
    src0 = source.points
    n = len(src0)
    transform = RigidTransform.identity()
    current = src0
    frmsd_history: list[float] = []
    fitness = math.inf
    inlier_fraction = 1.0
    converged = False
    iterations = 0

    for it in range(params.max_iterations):
        dists, nbr = tree.query(current)
        gated = np.nonzero(dists <= params.max_corr_dist)[0]
        if len(gated) < 3:
            if it == 0:
                return IcpResult(RigidTransform.identity(), False, 0, math.inf, 1.0, ())
            break

        chosen, frmsd, rms = _select_inliers(dists[gated], n, params.outlier_lambda)
        sel = gated[chosen]
        frmsd_history.append(frmsd)
        fitness = rms
        inlier_fraction = len(sel) / n
        iterations = it + 1

        try:
            step = estimate_rigid(current[sel], target.points[nbr[sel]])
        except ValueError:
            # Inlier geometry collapsed (e.g. collinear band); keep the last pose.
            break
        new_transform = step.compose(transform)
        delta = float(np.sum((new_transform.as_matrix() - transform.as_matrix()) ** 2))
        transform = new_transform
        current = transform.apply_points(src0)
        if delta < params.transform_epsilon:
            converged = True
            break

    return IcpResult(
        transform, converged, iterations, fitness, inlier_fraction, tuple(frmsd_history)
    )
