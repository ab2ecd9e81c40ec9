"""Geometric stand-in for the prostate segmentation network.

The network's contract is kept: a presence flag (the classification head),
a binary mask, the contour and the mask's centre of mass. Frames without a
visible gland come back as background with an empty mask.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

DEFAULT_MIN_AREA = 10.0  # mm^2


class NoProstateInView(ValueError):
    pass


@dataclass(frozen=True)
class ImageSpec:
    """Extent and pixel size of a B-mode frame, all in mm."""

    width: float = 60.0
    depth: float = 50.0
    resolution: float = 0.1

    @property
    def shape(self) -> tuple[int, int]:
        """Mask shape as (rows along depth, columns along width)."""
        return int(round(self.depth / self.resolution)), int(round(self.width / self.resolution))

    @property
    def center_u(self) -> float:
        return self.width / 2.0


@dataclass(frozen=True)
class SegmentationResult:
    present: bool
    mask: NDArray[np.bool_] | None
    contour: NDArray[np.float64]
    centroid: tuple[float, float] | None
    area: float = 0.0

    def without_mask(self) -> "SegmentationResult":
        """Copy without the pixel mask, for compact storage."""
        return replace(self, mask=None)


def background(image: ImageSpec, keep_mask: bool = True) -> SegmentationResult:
    mask = np.zeros(image.shape, dtype=bool) if keep_mask else None
    return SegmentationResult(False, mask, np.empty((0, 2)), None, 0.0)


def rasterize(contour: ArrayLike, image: ImageSpec) -> NDArray[np.bool_]:
    """Fill a closed contour; a pixel is set when its centre lies inside.

    Even-odd scanline fill over pixel-centre rows, linear in the number of
    polygon edges plus pixels.
    """
    pts = np.asarray(contour, dtype=np.float64).reshape(-1, 2)
    rows, cols = image.shape
    mask = np.zeros((rows, cols), dtype=bool)
    if len(pts) < 3:
        return mask
    res = image.resolution
    # continuous pixel coordinates: pixel k has its centre at k
    x0, y0 = pts[:, 0] / res - 0.5, pts[:, 1] / res - 0.5
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    lo, hi = np.minimum(y0, y1), np.maximum(y0, y1)
    # rows whose centre y satisfies lo <= y < hi (half-open avoids double counting vertices)
    r_start = np.clip(np.ceil(lo), 0, rows).astype(np.int64)
    r_stop = np.clip(np.ceil(hi), 0, rows).astype(np.int64)
    counts = np.maximum(r_stop - r_start, 0)
    if counts.sum() == 0:
        return mask
    edge = np.repeat(np.arange(len(pts)), counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    r = r_start[edge] + offsets
    t = (r - y0[edge]) / (y1[edge] - y0[edge])
    x = x0[edge] + t * (x1[edge] - x0[edge])
    order = np.lexsort((x, r))
    r, x = r[order], x[order]
    # crossings pair up within each row: [enter, leave)
    r_in, x_in, x_out = r[0::2], x[0::2], x[1::2]
    c_in = np.clip(np.ceil(x_in), 0, cols).astype(np.int64)
    c_out = np.clip(np.ceil(x_out), 0, cols).astype(np.int64)
    diff = np.zeros((rows, cols + 1), dtype=np.int32)
    np.add.at(diff, (r_in, c_in), 1)
    np.add.at(diff, (r_in, c_out), -1)
    mask[:] = np.cumsum(diff, axis=1)[:, :cols] > 0
    return mask


def mask_centroid(mask: NDArray[np.bool_], image: ImageSpec) -> tuple[float, float] | None:
    rr, cc = np.nonzero(mask)
    if rr.size == 0:
        return None
    res = image.resolution
    return float((cc.mean() + 0.5) * res), float((rr.mean() + 0.5) * res)


def segment(
    contour_gt: ArrayLike,
    image: ImageSpec = ImageSpec(),
    min_area: float = DEFAULT_MIN_AREA,
    jitter: float = 0.0,
    rng: np.random.Generator | None = None,
) -> SegmentationResult:
    """Classify and segment one frame from its ground-truth section contour.

    The frame counts as showing the gland when the filled region covers at
    least ``min_area`` mm^2. ``jitter`` adds Gaussian noise (mm) to the
    contour before filling, to emulate an imperfect network.
    """
    contour = np.asarray(contour_gt, dtype=np.float64).reshape(-1, 2)
    if len(contour) < 3:
        return background(image)
    if jitter > 0:
        if rng is None:
            raise ValueError("a random generator is required for contour jitter")
        contour = contour + rng.normal(0.0, jitter, size=contour.shape)
        contour[:, 0] = np.clip(contour[:, 0], 0.0, image.width)
        contour[:, 1] = np.clip(contour[:, 1], 0.0, image.depth)
    mask = rasterize(contour, image)
    area = float(mask.sum()) * image.resolution**2
    if area < min_area:
        return background(image)
    return SegmentationResult(True, mask, contour, mask_centroid(mask, image), area)


def visual_offset(seg: SegmentationResult, image: ImageSpec = ImageSpec()) -> float:
    """Signed distance (mm, along the probe) from the image centre to the mask centroid."""
    if not seg.present or seg.centroid is None:
        raise NoProstateInView("no prostate in view")
    return seg.centroid[0] - image.center_u


def write_pgm(path: str | Path, mask: NDArray[np.bool_]) -> None:
    """Binary PGM (P5), white where the mask is set."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write((mask.astype(np.uint8) * 255).tobytes())


def read_pgm(path: str | Path) -> NDArray[np.bool_]:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    pixels = np.frombuffer(parts[4][: w * h], dtype=np.uint8)
    return pixels.reshape(h, w) > 127


def write_contour_csv(path: str | Path, contour: ArrayLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v"])
        for u, v in np.asarray(contour, dtype=np.float64).reshape(-1, 2):
            w.writerow([repr(float(u)), repr(float(v))])


def read_contour_csv(path: str | Path) -> NDArray[np.float64]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    return data.reshape(-1, 2)
