"""Stack segmented slice contours into a 3D point cloud."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import Points, apply_transform, slice_transform
from .io import write_cloud
from .sweep import SweepRecord


def reconstruct(record: SweepRecord, r: float | None = None, phi_center: float = 0.0) -> Points:
    """Point cloud of every present slice's contour, in sweep order.

    Contour points ``(u, v)`` are embedded as ``(u, v, 0)`` and mapped with
    the slice transform at the slice's roll relative to ``phi_center`` (the
    initial, central slice). The probe's translation during compensation is
    deliberately ignored: the cloud lives in the probe-relative frame.
    """
    if r is None:
        r = record.config.probe_radius
    slices = record.present_slices
    if len(slices) < 2:
        raise ValueError("reconstruction needs at least two slices showing the prostate")
    parts = []
    for s in slices:
        c = s.seg.contour
        embedded = np.column_stack([c, np.zeros(len(c))])
        parts.append(apply_transform(slice_transform(s.phi - phi_center, r), embedded))
    return np.concatenate(parts)


def export_cloud(pc: Points, path: str | Path, fmt: str | None = None) -> None:
    """Write a cloud as PLY or XYZ (inferred from the suffix when ``fmt`` is None)."""
    if len(pc) == 0:
        raise ValueError("refusing to export an empty point cloud")
    write_cloud(path, pc, fmt)
