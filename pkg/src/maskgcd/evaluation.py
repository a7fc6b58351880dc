"""Small-mask filling, segmentation-map assembly, and the matching-based
mIoU metric.

Base classes are scored by identity; novel ground-truth classes are matched
to predicted clusters by an optimal assignment on the dataset-level IoU
matrix. Predicted clusters left unmatched count as incorrect predictions:
their pixels belong to no class's prediction set and depress the IoU of the
classes they cover.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import VOID, DiscoveryInstance, SegmentationMap
from .errors import CoverageGap, FormatError, OverlapError, ParamError, ShapeMismatch
from .rle import RleMask, rle_decode


@dataclass
class EvalReport:
    per_class_iou: dict[int, float]
    miou_base: float
    miou_novel: float
    miou_avg: float
    matching: list[tuple[int, int]]  # (predicted cluster id, gt class id)
    unmatched_predicted: list[int]
    excluded_classes: list[int]  # GT classes with no GT pixels anywhere

    def to_json_dict(self) -> dict:
        def _f(x: float):
            return None if np.isnan(x) else float(x)

        return {
            "per_class_iou": {str(c): float(v) for c, v in sorted(self.per_class_iou.items())},
            "miou_base": _f(self.miou_base),
            "miou_novel": _f(self.miou_novel),
            "miou_avg": _f(self.miou_avg),
            "matching": [[int(p), int(g)] for p, g in self.matching],
            "unmatched_predicted": [int(p) for p in self.unmatched_predicted],
            "excluded_classes": [int(c) for c in self.excluded_classes],
        }


def fill_small_masks(instance: DiscoveryInstance, labels: np.ndarray,
                     confidence: np.ndarray, area_threshold: int) -> tuple[np.ndarray, np.ndarray]:
    """Give every small unlabeled-split mask the label (and confidence) of its
    nearest non-small mask in feature space, preferring masks from the same
    image, falling back to the whole dataset. Labeled-split masks keep their
    ground truth. Returns new arrays; inputs are not modified."""
    areas = np.asarray([m.area for m in instance.masks])
    small = areas < area_threshold
    out_labels = np.asarray(labels).copy()
    out_conf = np.asarray(confidence).copy()
    large_idx = np.flatnonzero(~small)
    if large_idx.size == 0:
        return out_labels, out_conf  # nothing to copy labels from

    feats = np.asarray(instance.features, dtype=np.float64)
    image_ids = np.asarray([m.image_id for m in instance.masks])
    fixed = np.asarray([m.split == "labeled" for m in instance.masks])
    for i in np.flatnonzero(small & ~fixed):
        pool = large_idx[image_ids[large_idx] == image_ids[i]]
        if pool.size == 0:
            pool = large_idx
        d = feats[pool] - feats[i]
        src = int(pool[np.argmin(np.einsum("pd,pd->p", d, d))])
        out_labels[i] = out_labels[src]
        out_conf[i] = out_conf[src]
    return out_labels, out_conf


def assemble_map(image_id: int, height: int, width: int,
                 entries: list[tuple[RleMask, int]]) -> SegmentationMap:
    """Paint each mask's label into a dense raster. The masks must tile the
    image exactly: any overlap or uncovered pixel is an error naming the
    offending pixel."""
    raster = np.zeros((height, width), dtype=np.uint16)
    covered = np.zeros((height, width), dtype=bool)
    for rle, label in entries:
        if label is None or label < 0:
            raise ParamError(f"image {image_id}: mask without a final label (label={label})")
        if label >= VOID:
            raise ParamError(f"image {image_id}: label {label} does not fit u16 below VOID={VOID}")
        if rle.size != (height, width):
            raise ShapeMismatch(f"image {image_id}: geometry size {rle.size} != ({height}, {width})")
        bitmap = rle_decode(rle).astype(bool)
        clash = bitmap & covered
        if clash.any():
            r, c = np.argwhere(clash)[0]
            raise OverlapError(f"image {image_id}: overlapping masks at pixel ({int(r)}, {int(c)})")
        raster[bitmap] = label
        covered |= bitmap
    if not covered.all():
        r, c = np.argwhere(~covered)[0]
        raise CoverageGap(f"image {image_id}: uncovered pixel ({int(r)}, {int(c)})")
    return SegmentationMap(image_id=image_id, labels=raster)


def assemble_all(instance: DiscoveryInstance, labels: np.ndarray) -> list[SegmentationMap]:
    """Assemble one map per instance image from per-mask labels."""
    by_image: dict[int, list[tuple[RleMask, int]]] = {}
    for i, m in enumerate(instance.masks):
        if m.mask_id not in instance.geometries:
            raise CoverageGap(f"mask {m.mask_id} has no geometry; cannot assemble image {m.image_id}")
        by_image.setdefault(m.image_id, []).append((instance.geometries[m.mask_id], int(labels[i])))
    shapes = {img_id: (h, w) for img_id, h, w in instance.images}
    return [assemble_map(img_id, *shapes[img_id], entries) for img_id, entries in sorted(by_image.items())]


def hungarian_match(score_matrix: np.ndarray) -> list[tuple[int, int]]:
    """Injective partial assignment of min(R, C) pairs maximizing the total
    score. Among maximizing assignments, returns the one whose per-row column
    sequence is lexicographically smallest (rows in ascending order; an
    assigned column sorts before leaving the row unassigned)."""
    m = np.asarray(score_matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ParamError(f"score matrix must be 2-D, got shape {m.shape}")
    if m.size == 0:
        return []
    if not np.all(np.isfinite(m)):
        raise ParamError("score matrix contains non-finite values")
    n_rows, n_cols = m.shape

    def opt_total(row_idx: list[int], col_idx: list[int]) -> float:
        if not row_idx or not col_idx:
            return 0.0
        sub = m[np.ix_(row_idx, col_idx)]
        ri, ci = linear_sum_assignment(sub, maximize=True)
        return float(sub[ri, ci].sum())

    best = opt_total(list(range(n_rows)), list(range(n_cols)))
    tol = 1e-12 * max(1.0, abs(best))

    pairs: list[tuple[int, int]] = []
    free_cols = list(range(n_cols))
    fixed_sum = 0.0
    for r in range(n_rows):
        rest_rows = list(range(r + 1, n_rows))
        chosen = None
        for c in free_cols:
            rest = opt_total(rest_rows, [x for x in free_cols if x != c])
            if fixed_sum + m[r, c] + rest >= best - tol:
                chosen = c
                break
        if chosen is None:
            continue  # row r stays unassigned (possible only when R > C)
        pairs.append((r, chosen))
        free_cols.remove(chosen)
        fixed_sum += m[r, chosen]
    return pairs


def greedy_match(score_matrix: np.ndarray) -> list[tuple[int, int]]:
    """Repeatedly take the globally largest remaining entry (ties: lowest row,
    then lowest column). Comparison alternative to hungarian_match only."""
    m = np.asarray(score_matrix, dtype=np.float64).copy()
    if m.ndim != 2:
        raise ParamError(f"score matrix must be 2-D, got shape {m.shape}")
    if m.size == 0:
        return []
    pairs: list[tuple[int, int]] = []
    for _ in range(min(m.shape)):
        flat = np.argmax(m)  # first occurrence wins ties: lowest row, then col
        r, c = np.unravel_index(flat, m.shape)
        pairs.append((int(r), int(c)))
        m[r, :] = -np.inf
        m[:, c] = -np.inf
    return sorted(pairs)


class IouAccumulator:
    """Dataset-wide intersection/union counts as one (gt, pred) confusion
    matrix; merging accumulators is plain matrix addition, so evaluation is
    additive over image subsets."""

    OTHER = -1  # synthetic column for predicted ids outside the known set

    def __init__(self, k_base: int, gt_novel_ids: list[int], pred_novel_ids: list[int]):
        if len(set(gt_novel_ids)) != len(gt_novel_ids) or any(g < k_base for g in gt_novel_ids):
            raise ParamError(f"gt_novel_ids must be unique and >= k_base, got {gt_novel_ids}")
        if len(set(pred_novel_ids)) != len(pred_novel_ids) or any(p < k_base for p in pred_novel_ids):
            raise ParamError(f"pred_novel_ids must be unique and >= k_base, got {pred_novel_ids}")
        self.k_base = k_base
        self.gt_ids = list(range(k_base)) + list(gt_novel_ids)
        self.pred_ids = list(range(k_base)) + list(pred_novel_ids)
        self._gt_index = {g: i for i, g in enumerate(self.gt_ids)}
        self._pred_index = {p: i for i, p in enumerate(self.pred_ids)}
        # last pred column collects ids outside the known prediction set
        self.counts = np.zeros((len(self.gt_ids), len(self.pred_ids) + 1), dtype=np.int64)

    def add(self, gt: np.ndarray, pred: np.ndarray) -> None:
        if gt.shape != pred.shape:
            raise ShapeMismatch(f"gt shape {gt.shape} != pred shape {pred.shape}")
        keep = gt.ravel() != VOID
        g = gt.ravel()[keep].astype(np.int64)
        p = pred.ravel()[keep].astype(np.int64)
        gt_idx = np.full(g.shape, -1, dtype=np.int64)
        for gid, i in self._gt_index.items():
            gt_idx[g == gid] = i
        if (gt_idx < 0).any():
            bad = int(g[gt_idx < 0][0])
            raise FormatError(f"ground-truth map contains unknown class id {bad}")
        n_pred = len(self.pred_ids)
        pred_idx = np.full(p.shape, n_pred, dtype=np.int64)
        for pid, i in self._pred_index.items():
            pred_idx[p == pid] = i
        flat = gt_idx * (n_pred + 1) + pred_idx
        self.counts += np.bincount(flat, minlength=self.counts.size).reshape(self.counts.shape)

    def merge(self, other: "IouAccumulator") -> None:
        if self.gt_ids != other.gt_ids or self.pred_ids != other.pred_ids:
            raise ParamError("cannot merge accumulators with different class inventories")
        self.counts += other.counts

    def report(self, matching: str = "hungarian") -> EvalReport:
        counts = self.counts[:, :-1]  # the OTHER column never joins any class
        gt_count = self.counts.sum(axis=1)  # includes pixels predicted OTHER
        pred_count = counts.sum(axis=0)
        k_base = self.k_base

        per_class: dict[int, float] = {}
        excluded: list[int] = []
        for c in range(k_base):
            union = gt_count[c] + pred_count[c] - counts[c, c]
            if union == 0:
                excluded.append(self.gt_ids[c])
            else:
                per_class[self.gt_ids[c]] = float(counts[c, c] / union)

        gt_novel_rows = list(range(k_base, len(self.gt_ids)))
        pred_novel_cols = list(range(k_base, len(self.pred_ids)))
        eligible_rows = [r for r in gt_novel_rows if gt_count[r] > 0]
        excluded.extend(self.gt_ids[r] for r in gt_novel_rows if gt_count[r] == 0)

        iou = np.zeros((len(eligible_rows), len(pred_novel_cols)), dtype=np.float64)
        for i, r in enumerate(eligible_rows):
            for j, q in enumerate(pred_novel_cols):
                union = gt_count[r] + pred_count[q] - counts[r, q]
                iou[i, j] = counts[r, q] / union if union > 0 else 0.0

        match_fn = hungarian_match if matching == "hungarian" else greedy_match
        pairs = match_fn(iou) if iou.size else []

        matched_cols: set[int] = set()
        match_out: list[tuple[int, int]] = []
        for i, j in pairs:
            r, q = eligible_rows[i], pred_novel_cols[j]
            per_class[self.gt_ids[r]] = float(iou[i, j])
            match_out.append((self.pred_ids[q], self.gt_ids[r]))
            matched_cols.add(j)
        for i, r in enumerate(eligible_rows):
            if self.gt_ids[r] not in per_class:
                per_class[self.gt_ids[r]] = 0.0
        unmatched = [self.pred_ids[pred_novel_cols[j]] for j in range(len(pred_novel_cols))
                     if j not in matched_cols]

        base_vals = [per_class[g] for g in self.gt_ids[:k_base] if g in per_class]
        novel_vals = [per_class[self.gt_ids[r]] for r in gt_novel_rows if self.gt_ids[r] in per_class]
        all_vals = base_vals + novel_vals
        return EvalReport(
            per_class_iou=per_class,
            miou_base=float(np.mean(base_vals)) if base_vals else float("nan"),
            miou_novel=float(np.mean(novel_vals)) if novel_vals else float("nan"),
            miou_avg=float(np.mean(all_vals)) if all_vals else float("nan"),
            matching=sorted(match_out),
            unmatched_predicted=sorted(unmatched),
            excluded_classes=sorted(excluded),
        )


def evaluate(pred_maps: dict[int, np.ndarray], gt_maps: dict[int, np.ndarray],
             k_base: int, gt_novel_ids: list[int], pred_novel_ids: list[int],
             matching: str = "hungarian") -> EvalReport:
    """Score predictions against ground truth over a whole dataset.

    Maps are keyed by image id; the two sets of ids must coincide and shapes
    must match per image. VOID pixels in the ground truth are excluded
    everywhere.
    """
    if set(pred_maps) != set(gt_maps):
        missing = sorted(set(gt_maps) ^ set(pred_maps))
        raise ShapeMismatch(f"prediction/ground-truth image sets differ, e.g. ids {missing[:5]}")
    acc = IouAccumulator(k_base, list(gt_novel_ids), list(pred_novel_ids))
    for image_id in sorted(gt_maps):
        gt, pred = np.asarray(gt_maps[image_id]), np.asarray(pred_maps[image_id])
        if gt.shape != pred.shape:
            raise ShapeMismatch(f"image {image_id}: gt shape {gt.shape} != pred shape {pred.shape}")
        acc.add(gt, pred)
    return acc.report(matching=matching)
