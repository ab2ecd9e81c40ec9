"""Point-to-point ICP and the validation metrics.

Fitness is the fraction of *source* points that have a target point within
the correspondence threshold; inlier RMSE is taken over those pairs; the
Hausdorff distance is directed from the transformed source to the target.
All nearest-neighbour queries are exact (k-d tree).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

from .geometry import Points, Transform, apply_transform, as_points, identity, make_transform
from .io import transform_from_list, transform_to_list


class DegenerateCorrespondences(ValueError):
    pass


@dataclass(frozen=True)
class RegistrationConfig:
    max_iter: int = 50
    eps: float = 1e-6
    symmetric_hausdorff: bool = False
    voxel_size: float = 0.0  # 0 keeps full clouds
    sample_size: int = 10000  # source points used while iterating; 0 uses all


@dataclass
class RegistrationReport:
    fitness: float
    inlier_rmse: float
    hausdorff: float
    transform: Transform
    threshold: float
    iterations: int
    converged: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["transform"] = transform_to_list(self.transform)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RegistrationReport":
        d = dict(d)
        d["transform"] = transform_from_list(d["transform"])
        return cls(**d)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "RegistrationReport":
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_index(target: ArrayLike) -> cKDTree:
    target = as_points(target)
    if len(target) == 0:
        raise ValueError("target cloud is empty")
    return cKDTree(target, leafsize=32, balanced_tree=False)


def nearest_neighbors(query: ArrayLike, target: ArrayLike | cKDTree) -> tuple[NDArray[np.intp], NDArray[np.float64]]:
    """Exact nearest target point for each query point: ``(indices, distances)``."""
    tree = target if isinstance(target, cKDTree) else build_index(target)
    dist, idx = tree.query(as_points(query), k=1)
    return idx, dist


def hausdorff_directed(a: ArrayLike, b: ArrayLike | cKDTree) -> float:
    """``max_{p in a} min_{q in b} |p - q|``."""
    a = as_points(a)
    if len(a) == 0:
        raise ValueError("source cloud is empty")
    _, dist = nearest_neighbors(a, b)
    return float(dist.max())


def hausdorff(a: ArrayLike, b: ArrayLike) -> float:
    """Symmetric Hausdorff distance."""
    return max(hausdorff_directed(a, b), hausdorff_directed(b, a))


def best_fit_transform(source: ArrayLike, target: ArrayLike) -> Transform:
    """Least-squares rigid transform taking paired ``source`` points onto ``target``.

    Closed form from the SVD of the cross-covariance, with the reflection
    case corrected so the rotation has determinant +1.
    """
    A, B = as_points(source), as_points(target)
    if A.shape != B.shape:
        raise ValueError(f"paired point sets differ in shape: {A.shape} vs {B.shape}")
    if len(A) < 3:
        raise DegenerateCorrespondences("need at least three point pairs")
    ca, cb = A.mean(axis=0), B.mean(axis=0)
    A0, B0 = A - ca, B - cb
    sv = np.linalg.svd(A0, compute_uv=False)
    if sv[0] == 0 or sv[1] <= 1e-12 * sv[0]:
        raise DegenerateCorrespondences("source points are coincident or collinear")
    H = A0.T @ B0
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return make_transform(R, cb - R @ ca)


def evaluate(source: ArrayLike, target: ArrayLike | cKDTree, threshold: float, T: Transform | None = None) -> tuple[float, float]:
    """Fitness and inlier RMSE of ``source`` (moved by ``T``) against ``target``."""
    src = as_points(source) if T is None else apply_transform(T, source)
    tree = target if isinstance(target, cKDTree) else build_index(target)
    dist, _ = tree.query(src, k=1, distance_upper_bound=threshold)
    return _scores(dist, len(src))


def _scores(dist: NDArray, n: int) -> tuple[float, float]:
    inl = np.isfinite(dist)
    m = int(inl.sum())
    if m == 0:
        return 0.0, 0.0
    return m / n, float(np.sqrt(np.mean(dist[inl] ** 2)))


def voxel_downsample(pts: ArrayLike, voxel: float) -> Points:
    """Centroid of the points in each occupied voxel."""
    pts = as_points(pts)
    keys = np.floor(pts / voxel).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((len(counts), 3))
    np.add.at(sums, inverse, pts)
    return sums / counts[:, None]


def icp(
    source: ArrayLike,
    target: ArrayLike | cKDTree,
    threshold: float,
    max_iter: int = 50,
    eps: float = 1e-6,
    init: Transform | None = None,
    symmetric_hausdorff: bool = False,
    sample_size: int = 0,
) -> RegistrationReport:
    """Point-to-point ICP from the identity (or ``init``).

    Each iteration pairs every source point with its nearest target point,
    keeps pairs closer than ``threshold``, and applies the best rigid fit.
    Iteration stops when fitness and RMSE both change by less than ``eps``,
    or after ``max_iter`` updates. Losing all inliers ends the run with
    ``converged=False``.

    With ``sample_size > 0`` the iterations run on an evenly strided subset
    of at most that many source points; the reported fitness, RMSE and
    Hausdorff distance are always measured on the full source at the final
    transform.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if sample_size < 0:
        raise ValueError("sample_size must be non-negative")
    full = as_points(source)
    if len(full) == 0:
        raise ValueError("source cloud is empty")
    tree = target if isinstance(target, cKDTree) else build_index(target)
    tgt = tree.data
    stride = -(-len(full) // sample_size) if sample_size else 1
    src = full[::stride]

    T = identity() if init is None else np.array(init, dtype=np.float64)
    moved = apply_transform(T, src)
    dist, idx = tree.query(moved, k=1, distance_upper_bound=threshold)
    fitness, rmse = _scores(dist, len(src))
    converged = False
    iterations = 0
    while True:
        inl = np.isfinite(dist)
        if not inl.any():
            hd = _hd(apply_transform(T, full), tree, symmetric_hausdorff)
            return RegistrationReport(0.0, 0.0, hd, T, threshold, iterations, False, {"sample_stride": stride})
        if fitness == 1.0 and rmse == 0.0:
            converged = True
            break
        if iterations >= max_iter:
            break
        try:
            step = best_fit_transform(moved[inl], tgt[idx[inl]])
        except DegenerateCorrespondences:
            break
        T = step @ T
        moved = apply_transform(T, src)
        dist, idx = tree.query(moved, k=1, distance_upper_bound=threshold)
        iterations += 1
        new_fitness, new_rmse = _scores(dist, len(src))
        done = abs(new_fitness - fitness) < eps and abs(new_rmse - rmse) < eps
        fitness, rmse = new_fitness, new_rmse
        if done:
            converged = True
            break

    if stride > 1:
        moved = apply_transform(T, full)
        dist, _ = tree.query(moved, k=1, distance_upper_bound=threshold)
        fitness, rmse = _scores(dist, len(full))
    if fitness == 0.0:
        converged = False
    hd = _hd(moved, tree, symmetric_hausdorff, dist)
    return RegistrationReport(fitness, rmse, hd, T, threshold, iterations, converged, {"sample_stride": stride})


def _hd(moved: Points, tree: cKDTree, symmetric: bool, bounded: NDArray | None = None) -> float:
    if bounded is not None:
        # inlier distances are already exact; only the rest need a full search
        out = ~np.isfinite(bounded)
        d_max = bounded[~out].max() if (~out).any() else 0.0
        if out.any():
            d, _ = tree.query(moved[out], k=1)
            d_max = max(d_max, d.max())
        d_max = float(d_max)
    else:
        d_max = float(tree.query(moved, k=1)[0].max())
    if symmetric:
        d_max = max(d_max, hausdorff_directed(tree.data, moved))
    return d_max
