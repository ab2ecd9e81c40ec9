"""Rigid-body helpers and the rotational slice-to-volume transform.

Transforms are plain 4x4 ``float64`` arrays and point clouds are ``(N, 3)``
arrays in millimetres. Angles are radians.
"""
from __future__ import annotations

from typing import TypeAlias

import numpy as np
from numpy.typing import ArrayLike, NDArray

Transform: TypeAlias = NDArray[np.float64]  # (4, 4)
Points: TypeAlias = NDArray[np.float64]  # (N, 3)

RIGID_TOL = 1e-9


def as_points(pts: ArrayLike) -> Points:
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim == 1 and pts.size == 3:
        pts = pts.reshape(1, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an (N, 3) point array, got shape {pts.shape}")
    return pts


def make_transform(R: ArrayLike | None = None, t: ArrayLike | None = None) -> Transform:
    T = np.eye(4)
    if R is not None:
        T[:3, :3] = np.asarray(R, dtype=np.float64)
    if t is not None:
        T[:3, 3] = np.asarray(t, dtype=np.float64).reshape(3)
    return T


def identity() -> Transform:
    return np.eye(4)


def translation(x: float, y: float = 0.0, z: float = 0.0) -> Transform:
    return make_transform(t=(x, y, z))


def rotation_x(phi: float) -> NDArray[np.float64]:
    """3x3 rotation about the x-axis."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def slice_transform(phi: float, r: float) -> Transform:
    """Pose of the image plane for a probe rolled by ``phi`` about its axis.

    Image points ``(u, v)`` are embedded as ``(u, v, 0)``. The x coordinate
    (along the probe) is kept, and the depth ``v`` is pushed out radially by
    the probe radius ``r`` and rotated in the y-z plane, so a point lands at
    ``(u, (v + r) cos phi, (v + r) sin phi)``.
    """
    if not (np.isfinite(phi) and np.isfinite(r)):
        raise ValueError(f"slice_transform needs finite inputs, got phi={phi}, r={r}")
    if r < 0:
        raise ValueError(f"probe radius must be non-negative, got {r}")
    c, s = np.cos(phi), np.sin(phi)
    return np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, c, -s, r * c],
            [0.0, s, c, r * s],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def is_rigid(T: ArrayLike, tol: float = RIGID_TOL) -> bool:
    T = np.asarray(T, dtype=np.float64)
    if T.shape != (4, 4) or not np.all(np.isfinite(T)):
        return False
    R = T[:3, :3]
    if not np.allclose(R.T @ R, np.eye(3), atol=tol, rtol=0):
        return False
    if abs(np.linalg.det(R) - 1.0) > tol:
        return False
    return bool(np.array_equal(T[3], [0.0, 0.0, 0.0, 1.0]))


def check_rigid(T: ArrayLike) -> Transform:
    T = np.asarray(T, dtype=np.float64)
    if not is_rigid(T):
        raise ValueError("not a valid rigid transform (orthonormal R, det +1, bottom row [0 0 0 1])")
    return T


def apply_transform(T: Transform, pts: ArrayLike) -> Points:
    """Map every point by ``T``; order and length are preserved."""
    pts = as_points(pts)
    return pts @ T[:3, :3].T + T[:3, 3]


def compose(A: Transform, B: Transform) -> Transform:
    """Transform that applies ``B`` first, then ``A``."""
    return A @ B


def invert(T: Transform) -> Transform:
    R = T[:3, :3]
    return make_transform(R.T, -R.T @ T[:3, 3])


def rotation_angle(T: Transform) -> float:
    """Magnitude (rad) of the rotation block.

    Uses atan2 of the sine (from the skew part) and cosine (from the trace),
    which stays accurate for tiny angles where arccos of the trace does not.
    """
    R = T[:3, :3]
    c = (np.trace(R) - 1.0) / 2.0
    s = 0.5 * np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return float(np.arctan2(s, c))


def random_rigid(rng: np.random.Generator, max_angle: float = np.pi, max_shift: float = 10.0) -> Transform:
    """Random rigid transform, used by tests and demos."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-max_angle, max_angle)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    R = np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K
    return make_transform(R, rng.uniform(-max_shift, max_shift, size=3))
