"""Point-cloud and transform serialization.

Clouds are written as ASCII PLY (``double x y z``) or plain XYZ text using
``%.17g`` so that float64 coordinates survive a round trip bit-for-bit.
Transforms are stored as 16 numbers in row-major order.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geometry import Points, Transform, as_points, check_rigid

_FMT = "%.17g"


def write_ply(path: str | Path, pts: Points) -> None:
    pts = as_points(pts)
    path = Path(path)
    header = (
        "ply\n"
        "format ascii 1.0\n"
        f"element vertex {len(pts)}\n"
        "property double x\n"
        "property double y\n"
        "property double z\n"
        "end_header"
    )
    try:
        np.savetxt(path, pts, fmt=_FMT, header=header, comments="")
    except OSError as exc:
        raise OSError(f"cannot write PLY file {path}: {exc}") from exc


def read_ply(path: str | Path) -> Points:
    path = Path(path)
    try:
        with open(path) as fh:
            if fh.readline().strip() != "ply":
                raise ValueError(f"{path}: not a PLY file")
            n_vertex = None
            props: list[str] = []
            n_header = 1
            for line in fh:
                n_header += 1
                words = line.split()
                if not words:
                    continue
                if words[0] == "format" and words[1] != "ascii":
                    raise ValueError(f"{path}: only ASCII PLY is supported")
                if words[0] == "element":
                    if words[1] == "vertex":
                        n_vertex = int(words[2])
                    elif n_vertex is not None and int(words[2]) > 0:
                        raise ValueError(f"{path}: only vertex elements are supported")
                elif words[0] == "property" and n_vertex is not None:
                    props.append(words[-1])
                elif words[0] == "end_header":
                    break
    except OSError as exc:
        raise OSError(f"cannot read PLY file {path}: {exc}") from exc
    if n_vertex is None or props[:3] != ["x", "y", "z"]:
        raise ValueError(f"{path}: expected a vertex element with x y z properties")
    if n_vertex == 0:
        return np.empty((0, 3))
    data = np.loadtxt(path, skiprows=n_header, max_rows=n_vertex, ndmin=2, dtype=np.float64)
    if data.shape[0] != n_vertex:
        raise ValueError(f"{path}: header announces {n_vertex} vertices, found {data.shape[0]}")
    return np.ascontiguousarray(data[:, :3])


def write_xyz(path: str | Path, pts: Points) -> None:
    pts = as_points(pts)
    try:
        np.savetxt(path, pts, fmt=_FMT)
    except OSError as exc:
        raise OSError(f"cannot write XYZ file {path}: {exc}") from exc


def read_xyz(path: str | Path) -> Points:
    try:
        data = np.loadtxt(path, ndmin=2, dtype=np.float64)
    except OSError as exc:
        raise OSError(f"cannot read XYZ file {path}: {exc}") from exc
    return as_points(data.reshape(-1, 3)) if data.size else np.empty((0, 3))


def write_cloud(path: str | Path, pts: Points, fmt: str | None = None) -> None:
    """Write a cloud; the format defaults to the file suffix (``.ply``/``.xyz``)."""
    fmt = (fmt or Path(path).suffix.lstrip(".")).lower()
    if fmt == "ply":
        write_ply(path, pts)
    elif fmt == "xyz":
        write_xyz(path, pts)
    else:
        raise ValueError(f"unknown point-cloud format {fmt!r}")


def read_cloud(path: str | Path, fmt: str | None = None) -> Points:
    fmt = (fmt or Path(path).suffix.lstrip(".")).lower()
    if fmt == "ply":
        return read_ply(path)
    if fmt == "xyz":
        return read_xyz(path)
    raise ValueError(f"unknown point-cloud format {fmt!r}")


def transform_to_list(T: Transform) -> list[float]:
    return [float(x) for x in np.asarray(T, dtype=np.float64).reshape(16)]


def transform_from_list(values) -> Transform:
    T = np.asarray(values, dtype=np.float64)
    if T.size != 16:
        raise ValueError(f"a transform needs 16 numbers, got {T.size}")
    return check_rigid(T.reshape(4, 4))


def dump_transform(path: str | Path, T: Transform) -> None:
    Path(path).write_text(json.dumps(transform_to_list(T)))


def load_transform(path: str | Path) -> Transform:
    return transform_from_list(json.loads(Path(path).read_text()))
