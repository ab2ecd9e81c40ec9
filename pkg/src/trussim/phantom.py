"""Synthetic prostate phantom.

The gland is a tapered ellipsoid: the (y, z) cross-section is scaled linearly
along the probe axis so that one end is larger than the other. Contact with
the probe is a pair of decoupled linear springs (plus viscous damping) acting
in the probe frame.

Frames
------
World: x along the probe axis, y horizontal, z vertical.
TCP (probe holder, without the imaging roll): x along the probe, y pointing
into the tissue (the imaging depth direction at zero roll, world +z) and
z = world -y. Forces and velocity commands live in this frame.
Phantom: centred on the gland, axes parallel to the world axes unless the
model's ``pose`` says otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .geometry import Transform, apply_transform, compose, identity, invert, make_transform, rotation_x, slice_transform
from .segmentation import ImageSpec

#: orientation of the TCP frame in world coordinates (columns are TCP axes)
TCP_ROTATION = rotation_x(np.pi / 2)

FORCE_SATURATION = 50.0


@dataclass(frozen=True)
class PhantomModel:
    """Tapered-ellipsoid gland with spring contact.

    ``semi_axes`` are (along probe, horizontal, vertical) in mm. ``stiffness``
    and ``damping`` act on the TCP y (pressing) and z (lateral) axes.
    ``zero_force_depth`` is the distance from the probe axis to the gland
    centre at which the probe just touches without load; pressing deeper
    indents the tissue. ``backlash`` is the total lateral play of the loose
    probe fit, inside which no lateral force builds up.
    """

    semi_axes: tuple[float, float, float] = (22.0, 18.0, 16.0)
    taper: float = 0.3
    stiffness: tuple[float, float] = (2.0, 2.0)
    damping: tuple[float, float] = (0.05, 0.05)
    backlash: float = 0.5
    zero_force_depth: float = 30.5
    pose: Transform = field(default_factory=identity)

    def __post_init__(self):
        if len(self.semi_axes) != 3 or min(self.semi_axes) <= 0:
            raise ValueError(f"semi-axes must be three positive lengths, got {self.semi_axes}")
        if not 0.0 <= self.taper < 1.0:
            raise ValueError(f"taper must lie in [0, 1), got {self.taper}")
        if len(self.stiffness) != 2 or len(self.damping) != 2:
            raise ValueError("stiffness and damping need one value per contact axis (y, z)")
        if min(self.stiffness) < 0 or min(self.damping) < 0 or self.backlash < 0:
            raise ValueError("stiffness, damping and backlash must be non-negative")
        for name in ("semi_axes", "stiffness", "damping"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        object.__setattr__(self, "pose", np.asarray(self.pose, dtype=np.float64))

    def _key(self):
        return (self.semi_axes, self.taper, self.stiffness, self.damping, self.backlash, self.zero_force_depth, self.pose.tobytes())

    def __eq__(self, other):
        return isinstance(other, PhantomModel) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


def taper_scale(model: PhantomModel, x: NDArray) -> NDArray:
    a = model.semi_axes[0]
    return np.maximum(1.0 + model.taper * (np.asarray(x) / a), 1e-9)


def implicit(model: PhantomModel, p_local: ArrayLike) -> NDArray:
    """Implicit function of the gland surface: negative inside, zero on it."""
    p = np.asarray(p_local, dtype=np.float64)
    a, b, c = model.semi_axes
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    s = taper_scale(model, x)
    return x**2 / a**2 + (y**2 / b**2 + z**2 / c**2) / s**2 - 1.0


def contains(model: PhantomModel, p_local: ArrayLike) -> bool | NDArray:
    inside = implicit(model, p_local) <= 0.0
    return bool(inside) if np.ndim(inside) == 0 else inside


def probe_pose_in_phantom(model: PhantomModel, probe_pos: ArrayLike, phantom_pos: ArrayLike) -> Transform:
    """Pose of the (unrolled) TCP frame expressed in the phantom frame.

    ``phantom_pos`` is the world position of the gland centre; the model's
    ``pose`` contributes only its orientation.
    """
    phantom_world = make_transform(model.pose[:3, :3], phantom_pos)
    probe_world = make_transform(TCP_ROTATION, probe_pos)
    return compose(invert(phantom_world), probe_world)


def image_plane(probe_pose: Transform, phi: float, r: float, image: ImageSpec) -> Transform:
    """Map from embedded image coordinates ``(u, v, 0)`` to the phantom frame."""
    centre_shift = make_transform(t=(-image.center_u, 0.0, 0.0))
    return probe_pose @ centre_shift @ slice_transform(phi, r)


def slice_contour(
    model: PhantomModel,
    probe_pose: Transform,
    phi: float,
    n_samples: int = 1600,
    r: float = 9.0,
    image: ImageSpec = ImageSpec(),
    grid_step: float = 0.5,
) -> NDArray[np.float64]:
    """Intersection of the gland surface with the image plane at roll ``phi``.

    Returns an ``(n, 2)`` array of image coordinates ``(u, v)`` with ``n <=
    n_samples``; empty when the plane misses the gland or the section lies
    outside the image window. Boundary points are found by bisection along
    rays cast from the deepest interior grid point, which is exact for the
    convex sections produced by tapers up to about 0.7.
    """
    if n_samples < 8:
        raise ValueError("n_samples must be at least 8")
    M = image_plane(probe_pose, phi, r, image)
    origin, eu, ev = M[:3, 3], M[:3, 0], M[:3, 1]

    def f(u, v):
        p = origin + u[..., None] * eu + v[..., None] * ev
        return implicit(model, p)

    us = np.arange(0.0, image.width + 1e-9, grid_step)
    vs = np.arange(0.0, image.depth + 1e-9, grid_step)
    U, V = np.meshgrid(us, vs)
    F = f(U, V)
    k = np.argmin(F)
    if F.flat[k] > 0.0:
        return np.empty((0, 2))
    u0, v0 = U.flat[k], V.flat[k]

    theta = 2 * np.pi * np.arange(n_samples) / n_samples
    du, dv = np.cos(theta), np.sin(theta)
    t_hi = np.full(n_samples, np.hypot(image.width, image.depth) + 2 * max(model.semi_axes))
    t_lo = np.zeros(n_samples)
    closed = f(u0 + t_hi * du, v0 + t_hi * dv) > 0.0
    for _ in range(52):
        mid = 0.5 * (t_lo + t_hi)
        outside = f(u0 + mid * du, v0 + mid * dv) > 0.0
        t_hi = np.where(outside, mid, t_hi)
        t_lo = np.where(outside, t_lo, mid)
    t = 0.5 * (t_lo + t_hi)
    pts = np.column_stack([u0 + t * du, v0 + t * dv])[closed]
    keep = (pts[:, 0] >= 0) & (pts[:, 0] <= image.width) & (pts[:, 1] >= 0) & (pts[:, 1] <= image.depth)
    return pts[keep]


def contour_to_phantom(contour: NDArray, probe_pose: Transform, phi: float, r: float, image: ImageSpec) -> NDArray:
    """Lift image contour points back into the phantom frame."""
    pts = np.column_stack([contour, np.zeros(len(contour))])
    return apply_transform(image_plane(probe_pose, phi, r, image), pts)


def _backlash(d: NDArray, gap: float) -> NDArray:
    half = gap / 2.0
    return np.sign(d) * np.maximum(np.abs(d) - half, 0.0)


def contact_offset(model: PhantomModel, probe_pos: ArrayLike, phantom_pos: ArrayLike) -> NDArray:
    """Probe offset from the zero-force pose, TCP frame (mm).

    Positive y is indentation into the tissue.
    """
    rel = TCP_ROTATION.T @ (np.asarray(probe_pos, float) - np.asarray(phantom_pos, float))
    return rel + np.array([0.0, model.zero_force_depth, 0.0])


def contact_force(
    model: PhantomModel,
    probe_pos: ArrayLike,
    probe_vel: ArrayLike,
    phantom_pos: ArrayLike,
    phantom_vel: ArrayLike = (0.0, 0.0, 0.0),
) -> NDArray[np.float64]:
    """Load the probe applies to the tissue, in the TCP frame (N).

    ``F_y`` is the pressing force. When the phantom moves relative to the
    probe, ``F_z`` changes sign opposite to the motion (the probe is left
    behind and pushes back). Friction along the probe axis is not modelled,
    so ``F_x`` is always zero.
    """
    d = contact_offset(model, probe_pos, phantom_pos)
    if d[1] <= 0.0:
        return np.zeros(3)
    d_rate = TCP_ROTATION.T @ (np.asarray(probe_vel, float) - np.asarray(phantom_vel, float))
    ky, kz = model.stiffness
    cy, cz = model.damping
    fy = max(ky * d[1] + cy * d_rate[1], 0.0)
    fz = kz * _backlash(d[2], model.backlash) + cz * d_rate[2]
    f = np.array([0.0, fy, fz])
    return np.clip(f, -FORCE_SATURATION, FORCE_SATURATION)


def equilibrium_probe_position(
    model: PhantomModel, phantom_pos: ArrayLike, f_ref: float = 7.0, axial: float = 0.0
) -> NDArray[np.float64]:
    """World probe position that produces ``f_ref`` of pressing force at rest."""
    ky = model.stiffness[0]
    if ky <= 0:
        raise ValueError("pressing stiffness must be positive to reach a reference force")
    indentation = f_ref / ky
    rel_tcp = np.array([axial, indentation - model.zero_force_depth, 0.0])
    return np.asarray(phantom_pos, float) + TCP_ROTATION @ rel_tcp
