"""Appearance-based mask generation: SLIC superpixels over RGB images.

Produces a disjoint, full-coverage partition so the engine has an end-to-end
path that needs no neural model. Works directly in RGB (no color-space
conversion); the default compactness of 10 compensates. Deterministic: there
is no RNG anywhere in this module. Equal-distance assignment ties go to the
center with the higher index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, FormatError, IoError, ParamError
from .rle import RleMask, rle_decode, rle_encode

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])  # 4-connectivity


@dataclass(frozen=True)
class SlicParams:
    n_segments: int
    compactness: float = 10.0
    max_iters: int = 10
    seed_perturb: bool = True  # move seeds to the lowest-gradient 3x3 neighbor

    def __post_init__(self):
        if self.n_segments < 1:
            raise ParamError(f"n_segments must be >= 1, got {self.n_segments}")
        if self.compactness <= 0:
            raise ParamError(f"compactness must be > 0, got {self.compactness}")
        if self.max_iters < 1:
            raise ParamError(f"max_iters must be >= 1, got {self.max_iters}")


def _seed_grid(h: int, w: int, n_segments: int) -> list[tuple[int, int]]:
    # per-axis seed counts proportional to the aspect ratio; the product
    # stays within [1, 2 * n_segments] and every position is a distinct pixel
    nx = min(n_segments, max(1, math.ceil(math.sqrt(n_segments * w / h))))
    ny = min(n_segments, max(1, math.ceil(n_segments / nx)))
    rows = [int((j + 0.5) * h / ny) for j in range(ny)]
    cols = [int((i + 0.5) * w / nx) for i in range(nx)]
    return [(r, c) for r in rows for c in cols]


def _gradient(image: np.ndarray) -> np.ndarray:
    img = image.astype(np.float64)
    up = np.roll(img, 1, axis=0)
    up[0] = img[0]
    down = np.roll(img, -1, axis=0)
    down[-1] = img[-1]
    left = np.roll(img, 1, axis=1)
    left[:, 0] = img[:, 0]
    right = np.roll(img, -1, axis=1)
    right[:, -1] = img[:, -1]
    return ((right - left) ** 2).sum(axis=2) + ((down - up) ** 2).sum(axis=2)


def _perturb(seeds: list[tuple[int, int]], grad: np.ndarray) -> list[tuple[int, int]]:
    # strict < keeps the original seed on gradient ties
    h, w = grad.shape
    out = []
    for r, c in seeds:
        best_r, best_c, best_g = r, c, grad[r, c]
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                rr, cc = r + dr, c + dc
                if 0 <= rr < h and 0 <= cc < w and grad[rr, cc] < best_g:
                    best_r, best_c, best_g = rr, cc, grad[rr, cc]
        out.append((best_r, best_c))
    return out


def _slic_core(image: np.ndarray, params: SlicParams) -> tuple[np.ndarray, list[float]]:
    """Raw SLIC label map before connectivity enforcement, plus the energy
    after each iteration (sum over pixels of color^2 + (m/S)^2 * spatial^2 to
    the assigned center), which is non-increasing across iterations."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape[:2]
    s = max(1, round(math.sqrt(h * w / params.n_segments)))
    ratio = (params.compactness / s) ** 2

    seeds = _seed_grid(h, w, params.n_segments)
    if params.seed_perturb:
        seeds = _perturb(seeds, _gradient(img))
    centers = np.array([[*img[r, c], r, c] for r, c in seeds], dtype=np.float64)

    rows = np.arange(h, dtype=np.float64)
    cols = np.arange(w, dtype=np.float64)
    labels = np.full((h, w), -1, dtype=np.int64)
    energies: list[float] = []

    def _energy(lab: np.ndarray) -> float:
        d = img - centers[lab][..., :3]
        return float(np.einsum("hwc,hwc->hw", d, d).sum()
                     + ratio * (((rows[:, None] - centers[lab][..., 3]) ** 2).sum()
                                + ((cols[None, :] - centers[lab][..., 4]) ** 2).sum()))

    for _ in range(params.max_iters):
        if labels.min() >= 0:
            # the previous assignment stays the incumbent so energy cannot rise
            d = img - centers[labels][..., :3]
            dist = np.einsum("hwc,hwc->hw", d, d) + ratio * (
                (rows[:, None] - centers[labels][..., 3]) ** 2
                + (cols[None, :] - centers[labels][..., 4]) ** 2)
            new_labels = labels.copy()
        else:
            dist = np.full((h, w), np.inf)
            new_labels = np.full((h, w), -1, dtype=np.int64)

        for ci in range(len(centers)):
            color = centers[ci, :3]
            cr, cc = centers[ci, 3], centers[ci, 4]
            r0, r1 = max(0, int(cr) - 2 * s), min(h, int(cr) + 2 * s + 1)
            c0, c1 = max(0, int(cc) - 2 * s), min(w, int(cc) + 2 * s + 1)
            patch = img[r0:r1, c0:c1]
            d = ((patch - color) ** 2).sum(axis=2) + ratio * (
                (rows[r0:r1, None] - cr) ** 2 + (cols[None, c0:c1] - cc) ** 2)
            better = d <= dist[r0:r1, c0:c1]
            dist[r0:r1, c0:c1] = np.where(better, d, dist[r0:r1, c0:c1])
            new_labels[r0:r1, c0:c1] = np.where(better, ci, new_labels[r0:r1, c0:c1])

        if (new_labels < 0).any():
            # pixels outside every search window: assign by full scan
            for r, c in np.argwhere(new_labels < 0):
                d = ((centers[:, :3] - img[r, c]) ** 2).sum(axis=1) + ratio * (
                    (centers[:, 3] - r) ** 2 + (centers[:, 4] - c) ** 2)
                new_labels[r, c] = int(np.flatnonzero(d == d.min())[-1])
                dist[r, c] = d.min()

        changed = not np.array_equal(new_labels, labels)
        labels = new_labels

        for ci in range(len(centers)):
            members = labels == ci
            if members.any():
                rr, cc = np.nonzero(members)
                centers[ci, :3] = img[members].mean(axis=0)
                centers[ci, 3] = rr.mean()
                centers[ci, 4] = cc.mean()

        energies.append(_energy(labels))
        if not changed:
            break
    return labels, energies


def _enforce_connectivity(labels: np.ndarray) -> np.ndarray:
    """Keep the largest 4-connected component of each cluster; merge every
    other component into the largest adjacent kept region (ties: lowest id)."""
    h, w = labels.shape
    final = np.full((h, w), -1, dtype=np.int64)
    orphans: list[np.ndarray] = []

    next_id = 0
    for value in np.unique(labels):
        comp, n_comp = ndimage.label(labels == value, structure=_CROSS)
        if n_comp == 0:
            continue
        sizes = ndimage.sum_labels(np.ones((h, w)), comp, index=range(1, n_comp + 1))
        keep = int(np.argmax(sizes)) + 1
        final[comp == keep] = next_id
        next_id += 1
        for ci in range(1, n_comp + 1):
            if ci != keep:
                orphans.append(comp == ci)

    while orphans:
        remaining = []
        merged_any = False
        for region in orphans:
            grown = ndimage.binary_dilation(region, structure=_CROSS)
            vals = final[grown & ~region]
            neighbor_labels = np.unique(vals[vals >= 0])
            if neighbor_labels.size == 0:
                remaining.append(region)  # enclosed by other orphans for now
                continue
            areas = np.bincount(final[final >= 0], minlength=next_id)
            target = int(neighbor_labels[np.argmax(areas[neighbor_labels])])
            final[region] = target
            merged_any = True
        if not merged_any:
            break  # cannot happen on a fully labeled map; guard anyway
        orphans = remaining

    # compact ids in order of first (row-major) appearance
    vals, first_idx = np.unique(final, return_index=True)
    rank = np.empty(vals.size, dtype=np.int64)
    rank[np.argsort(first_idx, kind="stable")] = np.arange(vals.size)
    lut = np.zeros(int(vals.max()) + 1, dtype=np.int64)
    lut[vals] = rank
    return lut[final]


def slic_segment(image: np.ndarray, params: SlicParams) -> list[RleMask]:
    """Partition an H×W×3 image into superpixel masks.

    The returned masks are pairwise disjoint, cover every pixel, and are each
    4-connected; their count is within [1, 2 * n_segments].
    """
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ParamError(f"expected H×W×3 image, got shape {img.shape}")
    h, w = img.shape[:2]
    if params.n_segments > h * w:
        raise ParamError(f"n_segments={params.n_segments} exceeds pixel count {h * w}")

    labels, _ = _slic_core(img, params)
    labels = _enforce_connectivity(labels)
    return [rle_encode(labels == v) for v in range(int(labels.max()) + 1)]


def centroid_features(image: np.ndarray, masks: list[RleMask]) -> np.ndarray:
    """Naive per-mask descriptor: mean R,G,B in [0,1] plus the centroid
    position as (x/W, y/H). D=5, float32."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape[:2]
    out = np.empty((len(masks), 5), dtype=np.float64)
    for i, rle in enumerate(masks):
        bitmap = rle_decode(rle).astype(bool)
        rr, cc = np.nonzero(bitmap)
        out[i, :3] = img[bitmap].mean(axis=0) / 255.0
        out[i, 3] = cc.mean() / w
        out[i, 4] = rr.mean() / h
    return out.astype(np.float32)


def read_ppm(path: Path) -> np.ndarray:
    """Binary PPM (P6, maxval 255) reader returning an H×W×3 uint8 array."""
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e

    if raw[:2] != b"P6":
        raise FormatError(f"{path}: not a binary PPM (missing P6 magic)")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        token = raw[start:pos]
        if not token.isdigit():
            raise FormatError(f"{path}: bad header token {token!r}")
        fields.append(int(token))
    pos += 1  # exactly one whitespace byte after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 supported, got {maxval}")
    expected = h * w * 3
    data = raw[pos : pos + expected]
    if len(data) != expected:
        raise DimensionMismatch(f"{path}: {len(data)} payload bytes, expected {expected}")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).copy()


def write_ppm(image: np.ndarray, path: Path) -> None:
    img = np.ascontiguousarray(image, dtype=np.uint8)
    h, w = img.shape[:2]
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + img.tobytes())
