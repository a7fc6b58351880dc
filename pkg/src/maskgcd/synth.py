"""Synthetic discovery instances with known ground truth.

Feature geometry: one Gaussian blob per class, centers pairwise separated by
at least ``center_separation``. Labeled-split masks are clean draws around
their class center; unlabeled-split masks are fragmented: a concept mean is
drawn around the center, then ``fragmentation`` masks scatter around the
concept. A small fraction of novel concepts is pulled toward a base class
center, which makes them claimable by propagation yet recoverable by the
completion pass - the failure mode the pipeline exists to fix.

Mask geometry is a strip tiling: every image is 1 pixel high, every mask a
contiguous [x, x+w) segment, so disjointness and exact coverage hold by
construction and maps assemble exactly. Areas are drawn so novel pixels hit
the configured fraction of the unlabeled split.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import LABELED, UNLABELED, DiscoveryInstance, MaskRecord
from .errors import ParamError
from .evaluation import assemble_map, hungarian_match
from .mask_io import map_filename, write_features, write_geometries, write_labels, write_map, write_records
from .rle import RleMask


@dataclass(frozen=True)
class SynthSpec:
    k_base: int
    k_novel: int
    masks_per_class: int  # per class per split
    feature_dim: int
    intra_std: float
    center_separation: float
    novel_pixel_fraction: float
    fragmentation: int = 1  # masks per unlabeled concept
    fragment_std: float | None = None  # defaults to intra_std
    boundary_fraction: float = 0.12  # novel concepts pulled toward a base class
    boundary_pull: float = 0.35
    base_mask_area: int = 4096
    masks_per_image: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.center_separation <= 0 or self.intra_std <= 0:
            raise ParamError("center_separation and intra_std must be > 0")
        if not 0.0 < self.novel_pixel_fraction < 1.0:
            raise ParamError(f"novel_pixel_fraction must be in (0, 1), got {self.novel_pixel_fraction}")
        if self.fragmentation < 1:
            raise ParamError(f"fragmentation must be >= 1, got {self.fragmentation}")
        if self.k_base < 1 or self.k_novel < 0 or self.masks_per_class < 1:
            raise ParamError("k_base >= 1, k_novel >= 0, masks_per_class >= 1 required")
        if not 0.0 <= self.boundary_fraction <= 1.0 or not 0.0 <= self.boundary_pull < 1.0:
            raise ParamError("boundary_fraction in [0,1] and boundary_pull in [0,1) required")


@dataclass
class SynthResult:
    spec: SynthSpec
    instance: DiscoveryInstance
    gt_labels: np.ndarray  # per-mask class id in [0, k_base + k_novel)
    true_centers: np.ndarray  # (k_base + k_novel, D), row i = class i
    unlabeled_image_ids: list[int]


def _place_centers(rng: np.random.Generator, k: int, dim: int, separation: float) -> np.ndarray:
    # keep typical pairwise distances near the separation floor (about 1.3x),
    # so pulled concepts actually sit between two classes instead of in a void
    centers = np.empty((k, dim))
    scale = 1.3 * separation / math.sqrt(2.0 * dim)
    placed = 0
    attempts = 0
    while placed < k:
        cand = rng.normal(0.0, scale, size=dim)
        if placed == 0 or np.linalg.norm(centers[:placed] - cand, axis=1).min() >= separation:
            centers[placed] = cand
            placed += 1
            attempts = 0
        else:
            attempts += 1
            if attempts > 2000:
                scale *= 1.25  # widen until the separation constraint is easy
                attempts = 0
    return centers


def _concept_features(rng, center, n_masks, fragmentation, sigma, tau):
    """Fragmented draws: ceil(n/fragmentation) concepts around the center,
    each emitting up to ``fragmentation`` masks around its own mean."""
    feats = np.empty((n_masks, center.shape[0]))
    i = 0
    while i < n_masks:
        concept = center + sigma * rng.normal(size=center.shape[0])
        for _ in range(min(fragmentation, n_masks - i)):
            feats[i] = concept + tau * rng.normal(size=center.shape[0])
            i += 1
    return feats


def generate(spec: SynthSpec) -> SynthResult:
    rng = np.random.default_rng(spec.rng_seed)
    k_total = spec.k_base + spec.k_novel
    centers = _place_centers(rng, k_total, spec.feature_dim, spec.center_separation)
    sigma = spec.intra_std
    tau = spec.fragment_std if spec.fragment_std is not None else sigma
    m = spec.masks_per_class

    feats_parts: list[np.ndarray] = []
    gt_parts: list[np.ndarray] = []
    split_parts: list[str] = []

    # labeled split: clean single-level draws, base classes only
    for c in range(spec.k_base):
        feats_parts.append(centers[c] + sigma * rng.normal(size=(m, spec.feature_dim)))
        gt_parts.append(np.full(m, c))
        split_parts.extend([LABELED] * m)

    # unlabeled split, base classes: fragmented concepts
    for c in range(spec.k_base):
        feats_parts.append(_concept_features(rng, centers[c], m, spec.fragmentation, sigma, tau))
        gt_parts.append(np.full(m, c))
        split_parts.extend([UNLABELED] * m)

    # unlabeled split, novel classes: fragmented, some concepts pulled toward
    # a base class center
    for j in range(spec.k_novel):
        c = spec.k_base + j
        feats = np.empty((m, spec.feature_dim))
        i = 0
        while i < m:
            mean = centers[c]
            if rng.random() < spec.boundary_fraction:
                toward = centers[int(rng.integers(spec.k_base))]
                mean = mean + spec.boundary_pull * (toward - mean)
            concept = mean + sigma * rng.normal(size=spec.feature_dim)
            for _ in range(min(spec.fragmentation, m - i)):
                feats[i] = concept + tau * rng.normal(size=spec.feature_dim)
                i += 1
        feats_parts.append(feats)
        gt_parts.append(np.full(m, c))
        split_parts.extend([UNLABELED] * m)

    features = np.vstack(feats_parts).astype(np.float32)
    gt_labels = np.concatenate(gt_parts).astype(np.int64)
    splits = np.array(split_parts)
    n = features.shape[0]

    # areas: base masks around base_mask_area; novel masks sized so the novel
    # share of unlabeled pixels hits novel_pixel_fraction
    areas = np.zeros(n, dtype=np.int64)
    is_novel = gt_labels >= spec.k_base
    base_jitter = rng.uniform(0.95, 1.05, size=int((~is_novel).sum()))
    areas[~is_novel] = np.maximum(1, np.round(spec.base_mask_area * base_jitter)).astype(np.int64)
    n_novel = int(is_novel.sum())
    if n_novel:
        unl_base_area = areas[(~is_novel) & (splits == UNLABELED)].sum()
        f = spec.novel_pixel_fraction
        target = f / (1.0 - f) * unl_base_area / n_novel
        novel_jitter = rng.uniform(0.95, 1.05, size=n_novel)
        areas[is_novel] = np.maximum(1, np.round(target * novel_jitter)).astype(np.int64)

    # group masks into 1-pixel-high strip images; labeled and unlabeled masks
    # never share an image, unlabeled images mix base and novel
    labeled_idx = np.flatnonzero(splits == LABELED)
    unlabeled_idx = rng.permutation(np.flatnonzero(splits == UNLABELED))
    records: list[MaskRecord] = [None] * n  # type: ignore[list-item]
    geometries: dict[int, RleMask] = {}
    images: list[tuple[int, int, int]] = []
    unlabeled_image_ids: list[int] = []

    def _tile(indices: np.ndarray, image_id: int, unlabeled_image: bool) -> int:
        for start in range(0, indices.size, spec.masks_per_image):
            members = indices[start : start + spec.masks_per_image]
            width = int(areas[members].sum())
            images.append((image_id, 1, width))
            if unlabeled_image:
                unlabeled_image_ids.append(image_id)
            x = 0
            for i in members:
                w = int(areas[i])
                counts = [x, w] if x + w == width else [x, w, width - x - w]
                geometries[int(i)] = RleMask(size=(1, width), counts=tuple(counts))
                records[int(i)] = MaskRecord(
                    mask_id=int(i), image_id=image_id, area=w, bbox=(x, 0, w, 1),
                    label=int(gt_labels[i]) if splits[i] == LABELED else None,
                    split=str(splits[i]))
                x += w
            image_id += 1
        return image_id

    next_image = _tile(labeled_idx, 0, unlabeled_image=False)
    _tile(unlabeled_idx, next_image, unlabeled_image=True)

    instance = DiscoveryInstance(masks=records, features=features, k_base=spec.k_base,
                                 k_novel=spec.k_novel, images=images, geometries=geometries)
    return SynthResult(spec=spec, instance=instance, gt_labels=gt_labels,
                       true_centers=centers, unlabeled_image_ids=unlabeled_image_ids)


def oracle_assign(instance_or_features, true_centers: np.ndarray) -> np.ndarray:
    """Nearest-true-center assignment; distance ties go to the lowest class."""
    feats = getattr(instance_or_features, "features", instance_or_features)
    feats = np.asarray(feats, dtype=np.float64)
    diff = feats[:, None, :] - np.asarray(true_centers, dtype=np.float64)[None, :, :]
    return np.argmin(np.einsum("nkd,nkd->nk", diff, diff), axis=1).astype(np.int64)


def novel_clustering_accuracy(gt_labels: np.ndarray, pred_labels: np.ndarray, k_base: int) -> float:
    """Fraction of ground-truth-novel masks in the correct cluster after the
    optimal cluster-to-class matching. Masks predicted as base classes count
    as wrong; they can never be matched."""
    gt = np.asarray(gt_labels)
    pred = np.asarray(pred_labels)
    novel = gt >= k_base
    total = int(novel.sum())
    if total == 0:
        return float("nan")
    gt_ids = np.unique(gt[novel])
    pred_ids = np.unique(pred[novel & (pred >= k_base)])
    if pred_ids.size == 0:
        return 0.0
    contingency = np.zeros((gt_ids.size, pred_ids.size), dtype=np.float64)
    for i, g in enumerate(gt_ids):
        for j, p in enumerate(pred_ids):
            contingency[i, j] = int(((gt == g) & (pred == p) & novel).sum())
    matched = sum(contingency[i, j] for i, j in hungarian_match(contingency))
    return float(matched / total)


def ground_truth_maps(result: SynthResult) -> dict[int, np.ndarray]:
    """Dense GT rasters for the unlabeled images (the evaluated split)."""
    shapes = {img_id: (h, w) for img_id, h, w in result.instance.images}
    by_image: dict[int, list[tuple[RleMask, int]]] = {}
    for i, mask in enumerate(result.instance.masks):
        if mask.image_id in result.unlabeled_image_ids:
            by_image.setdefault(mask.image_id, []).append(
                (result.instance.geometries[mask.mask_id], int(result.gt_labels[i])))
    return {img_id: assemble_map(img_id, *shapes[img_id], entries).labels
            for img_id, entries in sorted(by_image.items())}


def write_dataset(result: SynthResult, out_dir: Path) -> dict[str, str]:
    """Emit the interchange files plus ground truth, making synthetic data
    indistinguishable from real exports to the engine."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "records": out / "records.ndjson",
        "features_meta": out / "features.meta.json",
        "features_bin": out / "features.f32",
        "geometries": out / "geometries.ndjson",
        "gt_labels": out / "gt_labels.ndjson",
        "gt_maps": out / "gt_maps",
        "manifest": out / "synth_manifest.json",
    }
    write_records(result.instance.masks, paths["records"])
    write_features(result.instance.features, paths["features_meta"], paths["features_bin"])
    write_geometries(result.instance.geometries, paths["geometries"])
    write_labels([(m.mask_id, int(result.gt_labels[i]), 1.0)
                  for i, m in enumerate(result.instance.masks)], paths["gt_labels"])
    paths["gt_maps"].mkdir(exist_ok=True)
    from .core import SegmentationMap

    for img_id, raster in ground_truth_maps(result).items():
        write_map(SegmentationMap(image_id=img_id, labels=raster), paths["gt_maps"] / map_filename(img_id))
    manifest = {"spec": asdict(result.spec), "n_masks": result.instance.n_masks,
                "k_base": result.spec.k_base, "k_novel": result.spec.k_novel,
                "unlabeled_image_ids": result.unlabeled_image_ids}
    paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}
