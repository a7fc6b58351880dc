"""Readers/writers for the interchange files connecting the engine to any
feature producer.

Formats:
  records.ndjson      {"mask_id":int,"image_id":int,"area":int,"bbox":[x,y,w,h],
                       "label":int|null,"split":"labeled"|"unlabeled"} per line
  features.meta.json  {"n":int,"d":int}
  features.f32        n*d little-endian float32, row-major
  geometries.ndjson   {"mask_id":int,"size":[h,w],"counts":[int,...]} per line
  labels.ndjson       {"mask_id":int,"label":int,"confidence":float} per line
  map_<id>.u16        16-byte header (magic "GCDM", u16 version=1, u16 pad,
                      u32 height, u32 width) then row-major little-endian u16

Mask order in the records file is the canonical index order everywhere
downstream; feature row i belongs to record i.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .core import LABELED, UNLABELED, DiscoveryInstance, MaskRecord, SegmentationMap
from .errors import DanglingGeometry, DimensionMismatch, FormatError, IoError
from .rle import RleMask

MAP_MAGIC = b"GCDM"
MAP_VERSION = 1


def _json_lines(path: Path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}:{lineno}: malformed JSON ({e.msg})") from e


def read_records(path: Path) -> list[MaskRecord]:
    records: list[MaskRecord] = []
    for lineno, obj in _json_lines(path):
        try:
            mask_id = int(obj["mask_id"])
            image_id = int(obj["image_id"])
            area = int(obj["area"])
            bbox = tuple(int(x) for x in obj["bbox"])
            label = obj["label"]
            split = obj["split"]
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"{path}:{lineno}: bad record field ({e})") from e
        if len(bbox) != 4:
            raise FormatError(f"{path}:{lineno}: bbox must have 4 entries, got {len(bbox)}")
        if split not in (LABELED, UNLABELED):
            raise FormatError(f"{path}:{lineno}: split must be 'labeled' or 'unlabeled', got {split!r}")
        if split == LABELED and label is None:
            raise FormatError(f"{path}:{lineno}: labeled record mask_id={mask_id} has null label")
        if split == UNLABELED and label is not None:
            raise FormatError(f"{path}:{lineno}: unlabeled record mask_id={mask_id} carries label {label}")
        records.append(MaskRecord(mask_id=mask_id, image_id=image_id, area=area, bbox=bbox,
                                  label=None if label is None else int(label), split=split))
    return records


def write_records(records: list[MaskRecord], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for m in records:
            f.write(json.dumps({
                "mask_id": m.mask_id, "image_id": m.image_id, "area": m.area,
                "bbox": list(m.bbox), "label": m.label, "split": m.split,
            }) + "\n")


def read_features(meta_path: Path, bin_path: Path) -> np.ndarray:
    try:
        meta = json.loads(Path(meta_path).read_text(encoding="utf-8"))
    except OSError as e:
        raise IoError(f"cannot read {meta_path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{meta_path}: malformed JSON ({e.msg})") from e
    try:
        n, d = int(meta["n"]), int(meta["d"])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{meta_path}: expected keys n, d ({e})") from e
    try:
        raw = Path(bin_path).read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {bin_path}: {e}") from e
    if len(raw) != n * d * 4:
        raise DimensionMismatch(f"{bin_path}: {len(raw)} bytes, expected n*d*4 = {n * d * 4}")
    return np.frombuffer(raw, dtype="<f4").reshape(n, d).copy()


def write_features(features: np.ndarray, meta_path: Path, bin_path: Path) -> None:
    arr = np.ascontiguousarray(features, dtype="<f4")
    Path(meta_path).write_text(json.dumps({"n": int(arr.shape[0]), "d": int(arr.shape[1])}) + "\n", encoding="utf-8")
    Path(bin_path).write_bytes(arr.tobytes())


def read_geometries(path: Path, known_ids: set[int]) -> dict[int, RleMask]:
    geoms: dict[int, RleMask] = {}
    for lineno, obj in _json_lines(path):
        try:
            mask_id = int(obj["mask_id"])
            h, w = (int(x) for x in obj["size"])
            counts = tuple(int(c) for c in obj["counts"])
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"{path}:{lineno}: bad geometry field ({e})") from e
        if mask_id not in known_ids:
            raise DanglingGeometry(f"{path}:{lineno}: geometry for unknown mask_id {mask_id}")
        if mask_id in geoms:
            raise FormatError(f"{path}:{lineno}: duplicate geometry for mask_id {mask_id}")
        geoms[mask_id] = RleMask(size=(h, w), counts=counts)
    return geoms


def write_geometries(geometries: dict[int, RleMask], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for mask_id in sorted(geometries):
            g = geometries[mask_id]
            f.write(json.dumps({"mask_id": mask_id, "size": list(g.size), "counts": list(g.counts)}) + "\n")


def read_instance(records: Path, features_meta: Path, features_bin: Path,
                  geometries: Path | None = None,
                  k_base: int | None = None, k_novel: int = 0) -> DiscoveryInstance:
    """Assemble an instance from interchange files.

    Masks keep file order; feature row i belongs to record i. k_base defaults
    to max(label)+1 over the records (the format does not carry it).
    """
    recs = read_records(records)
    feats = read_features(features_meta, features_bin)
    if feats.shape[0] != len(recs):
        raise DimensionMismatch(f"{features_meta}: n={feats.shape[0]} but {records} has {len(recs)} records")
    geoms: dict[int, RleMask] = {}
    if geometries is not None:
        geoms = read_geometries(geometries, {m.mask_id for m in recs})

    if k_base is None:
        labels = [m.label for m in recs if m.label is not None]
        k_base = max(labels) + 1 if labels else 0

    images: dict[int, tuple[int, int]] = {}
    for m in recs:
        if m.mask_id in geoms:
            h, w = geoms[m.mask_id].size
            images.setdefault(m.image_id, (h, w))
        else:
            images.setdefault(m.image_id, (0, 0))
    image_list = [(image_id, hw[0], hw[1]) for image_id, hw in sorted(images.items())]
    return DiscoveryInstance(masks=recs, features=feats, k_base=k_base, k_novel=k_novel,
                             images=image_list, geometries=geoms)


def write_labels(assignments: list[tuple[int, int, float]], path: Path, stage: str | None = None) -> None:
    """Write (mask_id, label, confidence) triples, one JSON object per line,
    in stable mask_id order. ``stage`` adds a provenance field to every line
    for intermediate-state dumps."""
    ids = [a[0] for a in assignments]
    if len(set(ids)) != len(ids):
        raise FormatError("duplicate mask_id in label assignments")
    try:
        with open(path, "w", encoding="utf-8") as f:
            for mask_id, label, confidence in sorted(assignments, key=lambda a: a[0]):
                obj = {"mask_id": int(mask_id), "label": int(label), "confidence": float(confidence)}
                if stage is not None:
                    obj["stage"] = stage
                f.write(json.dumps(obj) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def read_labels(path: Path) -> list[tuple[int, int, float]]:
    out: list[tuple[int, int, float]] = []
    for lineno, obj in _json_lines(path):
        try:
            out.append((int(obj["mask_id"]), int(obj["label"]), float(obj["confidence"])))
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"{path}:{lineno}: bad label record ({e})") from e
    return out


def write_map(seg: SegmentationMap, path: Path) -> None:
    arr = np.ascontiguousarray(seg.labels, dtype="<u2")
    header = struct.pack("<4sHHII", MAP_MAGIC, MAP_VERSION, 0, arr.shape[0], arr.shape[1])
    try:
        Path(path).write_bytes(header + arr.tobytes())
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def read_map(path: Path, image_id: int | None = None) -> SegmentationMap:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    if len(raw) < 16:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, _pad, h, w = struct.unpack("<4sHHII", raw[:16])
    if magic != MAP_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != MAP_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if len(raw) != 16 + h * w * 2:
        raise DimensionMismatch(f"{path}: {len(raw) - 16} payload bytes, expected {h * w * 2}")
    labels = np.frombuffer(raw, dtype="<u2", offset=16).reshape(h, w).copy()
    if image_id is None:
        image_id = _image_id_from_name(Path(path).name)
    return SegmentationMap(image_id=image_id, labels=labels)


def _image_id_from_name(name: str) -> int:
    # map_<image_id>.u16
    stem = name
    if stem.endswith(".u16"):
        stem = stem[: -len(".u16")]
    if stem.startswith("map_"):
        stem = stem[len("map_"):]
    try:
        return int(stem)
    except ValueError as e:
        raise FormatError(f"cannot derive image_id from file name {name!r}") from e


def map_filename(image_id: int) -> str:
    return f"map_{image_id}.u16"
