"""Shared domain types and structural validation.

A problem instance is a flat list of mask proposals plus one feature row per
mask. Masks from the labeled split carry a trusted base-class label; all other
masks start unlabeled and are either claimed by a base class or grouped into a
discovered novel class downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rle import RleMask, rle_bbox, rle_decode

# Raster value for pixels excluded from evaluation (fits u16 map files).
VOID = 65535

# Sentinel label for masks not (yet) claimed by any class.
NOVEL_PENDING = -1

LABELED = "labeled"
UNLABELED = "unlabeled"


@dataclass(frozen=True)
class MaskRecord:
    mask_id: int
    image_id: int
    area: int
    bbox: tuple[int, int, int, int]  # (x, y, w, h) in pixels
    label: int | None
    split: str  # LABELED | UNLABELED


@dataclass
class DiscoveryInstance:
    """Masks + features + class inventory for one discovery problem.

    ``features`` is an (N, D) float32 matrix; row i belongs to ``masks[i]``.
    ``geometries`` maps mask_id to its RLE geometry and may be empty when only
    feature-level processing is needed.
    """

    masks: list[MaskRecord]
    features: np.ndarray
    k_base: int
    k_novel: int
    images: list[tuple[int, int, int]]  # (image_id, height, width)
    geometries: dict[int, RleMask] = field(default_factory=dict)

    @property
    def n_masks(self) -> int:
        return len(self.masks)

    def areas(self) -> np.ndarray:
        return np.asarray([m.area for m in self.masks], dtype=np.float64)


@dataclass
class LabelState:
    """Per-mask evolving label and confidence.

    ``labels[i]`` is a class index or NOVEL_PENDING; ``confidence[i]`` is in
    [0, 1]. ``fixed[i]`` marks labeled-split masks, whose label and confidence
    never change.
    """

    labels: np.ndarray  # int64
    confidence: np.ndarray  # float64
    fixed: np.ndarray  # bool
    k_base: int

    def copy(self) -> "LabelState":
        return LabelState(
            labels=self.labels.copy(),
            confidence=self.confidence.copy(),
            fixed=self.fixed.copy(),
            k_base=self.k_base,
        )


def init_label_state(instance: DiscoveryInstance) -> LabelState:
    """Labeled-split masks start at their ground truth with confidence 1;
    everything else starts NOVEL_PENDING with confidence 0."""
    n = instance.n_masks
    labels = np.full(n, NOVEL_PENDING, dtype=np.int64)
    confidence = np.zeros(n, dtype=np.float64)
    fixed = np.zeros(n, dtype=bool)
    for i, m in enumerate(instance.masks):
        if m.split == LABELED:
            labels[i] = m.label
            confidence[i] = 1.0
            fixed[i] = True
    return LabelState(labels=labels, confidence=confidence, fixed=fixed, k_base=instance.k_base)


@dataclass
class SegmentationMap:
    image_id: int
    labels: np.ndarray  # (H, W) uint16, VOID where excluded

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    mask_ids: tuple[int, ...] = ()
    image_id: int | None = None


@dataclass
class ValidationReport:
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_instance(instance: DiscoveryInstance) -> ValidationReport:
    """Collect invariant violations; an empty report means the instance is valid.

    Violations are data, not exceptions: callers decide whether to abort.
    Geometry checks (area, bbox, disjointness, coverage) apply only where
    geometries are provided; per-image coverage is checked for images whose
    masks all carry geometry.
    """
    v: list[Violation] = []
    masks = instance.masks
    feats = instance.features

    if feats.ndim != 2 or feats.shape[0] != len(masks):
        v.append(Violation("FEATURE_COUNT", f"feature matrix has shape {feats.shape}, expected ({len(masks)}, D)"))
    elif feats.size and not np.all(np.isfinite(feats)):
        bad = int(np.flatnonzero(~np.isfinite(feats).all(axis=1))[0])
        v.append(Violation("FEATURES_NOT_FINITE", f"non-finite feature value in row {bad}", mask_ids=(masks[bad].mask_id,)))

    if instance.k_base < 0 or instance.k_novel < 0:
        v.append(Violation("BAD_CLASS_COUNT", f"k_base={instance.k_base}, k_novel={instance.k_novel} must be non-negative"))

    image_shapes: dict[int, tuple[int, int]] = {}
    for image_id, h, w in instance.images:
        if image_id in image_shapes:
            v.append(Violation("DUPLICATE_IMAGE_ID", f"image {image_id} listed twice", image_id=image_id))
        image_shapes[image_id] = (h, w)

    seen_ids: set[int] = set()
    for m in masks:
        if m.mask_id in seen_ids:
            v.append(Violation("DUPLICATE_MASK_ID", f"mask_id {m.mask_id} appears more than once", mask_ids=(m.mask_id,)))
        seen_ids.add(m.mask_id)
        if m.image_id not in image_shapes:
            v.append(Violation("UNKNOWN_IMAGE", f"mask {m.mask_id} references unknown image {m.image_id}", mask_ids=(m.mask_id,), image_id=m.image_id))
        if m.area < 1:
            v.append(Violation("BAD_AREA", f"mask {m.mask_id} has area {m.area} < 1", mask_ids=(m.mask_id,)))
        if m.split == LABELED and m.label is None:
            v.append(Violation("SPLIT_LABEL_MISMATCH", f"labeled mask {m.mask_id} has no label", mask_ids=(m.mask_id,)))
        if m.split == UNLABELED and m.label is not None:
            v.append(Violation("SPLIT_LABEL_MISMATCH", f"unlabeled mask {m.mask_id} carries label {m.label}", mask_ids=(m.mask_id,)))
        if m.split not in (LABELED, UNLABELED):
            v.append(Violation("BAD_SPLIT", f"mask {m.mask_id} has split {m.split!r}", mask_ids=(m.mask_id,)))
        if m.label is not None and not (0 <= m.label < instance.k_base):
            v.append(Violation("LABEL_OUT_OF_RANGE", f"mask {m.mask_id} label {m.label} outside [0, {instance.k_base})", mask_ids=(m.mask_id,)))

    if instance.geometries:
        v.extend(_geometry_violations(instance, image_shapes))
    return ValidationReport(violations=v)


def _geometry_violations(instance: DiscoveryInstance, image_shapes: dict[int, tuple[int, int]]) -> list[Violation]:
    v: list[Violation] = []
    by_image: dict[int, list[MaskRecord]] = {}
    for m in instance.masks:
        by_image.setdefault(m.image_id, []).append(m)

    for image_id, members in by_image.items():
        shape = image_shapes.get(image_id)
        if shape is None:
            continue
        h, w = shape
        missing = [m for m in members if m.mask_id not in instance.geometries]
        if missing and len(missing) < len(members):
            for m in missing:
                v.append(Violation("MISSING_GEOMETRY", f"mask {m.mask_id} of image {image_id} has no geometry", mask_ids=(m.mask_id,), image_id=image_id))
        if missing:
            continue  # coverage can only be judged with full geometry

        owner = np.full((h, w), -1, dtype=np.int64)
        for m in members:
            rle = instance.geometries[m.mask_id]
            if rle.size != (h, w):
                v.append(Violation("GEOMETRY_SIZE_MISMATCH", f"mask {m.mask_id} geometry size {rle.size} != image {image_id} size {(h, w)}", mask_ids=(m.mask_id,), image_id=image_id))
                continue
            bitmap = rle_decode(rle).astype(bool)
            set_pixels = int(bitmap.sum())
            if set_pixels != m.area:
                v.append(Violation("AREA_MISMATCH", f"mask {m.mask_id} area {m.area} != {set_pixels} set pixels", mask_ids=(m.mask_id,), image_id=image_id))
            if set_pixels and rle_bbox(rle) != tuple(m.bbox):
                v.append(Violation("BBOX_NOT_TIGHT", f"mask {m.mask_id} bbox {tuple(m.bbox)} != tight bounds {rle_bbox(rle)}", mask_ids=(m.mask_id,), image_id=image_id))
            clash = bitmap & (owner >= 0)
            if clash.any():
                r, c = np.argwhere(clash)[0]
                other = int(owner[r, c])
                v.append(Violation("OVERLAP", f"masks {other} and {m.mask_id} overlap at pixel ({int(r)}, {int(c)}) in image {image_id}", mask_ids=(other, m.mask_id), image_id=image_id))
            owner[bitmap] = m.mask_id

        gap = owner < 0
        if gap.any():
            r, c = np.argwhere(gap)[0]
            v.append(Violation("COVERAGE_GAP", f"image {image_id} has {int(gap.sum())} uncovered pixels, first at ({int(r)}, {int(c)})", image_id=image_id))
    return v
