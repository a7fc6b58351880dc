"""Run-length codec for binary masks.

Encoding is column-major (Fortran order) with the first run counting zeros,
so ``counts[0]`` may be 0 when the mask starts with a foreground pixel.
``sum(counts)`` always equals ``height * width``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SumMismatch


@dataclass(frozen=True)
class RleMask:
    size: tuple[int, int]  # (height, width)
    counts: tuple[int, ...]

    @property
    def area(self) -> int:
        return int(sum(self.counts[1::2]))


def rle_encode(bitmap: np.ndarray) -> RleMask:
    """Encode an H×W binary raster; inverse of :func:`rle_decode`."""
    arr = np.asarray(bitmap, dtype=bool)
    if arr.ndim != 2 or arr.size == 0:
        raise SumMismatch(f"expected non-empty 2-D bitmap, got shape {arr.shape}")
    flat = arr.ravel(order="F")
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return RleMask(size=(arr.shape[0], arr.shape[1]), counts=tuple(int(r) for r in runs))


def rle_decode(rle: RleMask) -> np.ndarray:
    """Decode to an H×W uint8 raster; raises SUM_MISMATCH on inconsistent counts."""
    h, w = rle.size
    counts = np.asarray(rle.counts, dtype=np.int64)
    if counts.size and counts.min() < 0:
        raise SumMismatch("negative run length")
    total = int(counts.sum())
    if total != h * w:
        raise SumMismatch(f"counts sum to {total}, expected {h}*{w}={h * w}")
    values = np.zeros(counts.size, dtype=np.uint8)
    values[1::2] = 1
    flat = np.repeat(values, counts)
    return flat.reshape((h, w), order="F")


def rle_bbox(rle: RleMask) -> tuple[int, int, int, int]:
    """Tight (x, y, w, h) bounds of the foreground; (0, 0, 0, 0) if empty."""
    bitmap = rle_decode(rle)
    rows, cols = np.nonzero(bitmap)
    if rows.size == 0:
        return (0, 0, 0, 0)
    y0, y1 = int(rows.min()), int(rows.max())
    x0, x1 = int(cols.min()), int(cols.max())
    return (x0, y0, x1 - x0 + 1, y1 - y0 + 1)
