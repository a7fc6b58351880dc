"""Pipeline stages over interchange files, composable one subcommand at a
time or end to end.

Every stage reads its inputs from disk and writes its outputs under the
configured out_dir with fixed names, so running the stages individually is
byte-identical to one `run` invocation:

    knn.cache                 frozen neighbor table (eligible masks only)
    labels_propagated.ndjson  state after propagation (stage field set)
    labels_completed.ndjson   state after structural completion
    labels.ndjson             final per-mask labels
    maps/map_<id>.u16         assembled segmentation rasters
    eval_report.json          metric report with config echo
    run_manifest.json         run_id + config + config hash
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .clustering import BASELINE, NOVEL_ONLY, base_prototypes, constrained_kmeans, seed_novel_centroids
from .core import LABELED, NOVEL_PENDING, DiscoveryInstance, LabelState, init_label_state, validate_instance
from .errors import ConfigError, CoverageGap, EngineError, FormatError, StageError
from .evaluation import assemble_all, evaluate, fill_small_masks
from .knn import NeighborTable, knn_table, read_neighbor_cache, write_neighbor_cache
from .mask_io import map_filename, read_instance, read_labels, read_map, write_labels, write_map
from .propagation import PropagationConfig, propagate, structural_completion

MODES = ("baseline", "nerg")
MATCHINGS = ("hungarian", "greedy")

_CONFIG_KEYS = {
    "paths", "run_id", "mode", "theta", "k", "k_novel", "k_base", "area_threshold",
    "score_norm", "rng_seed", "max_iterations", "convergence_eps", "max_lloyd_iters",
    "normalize_features", "freeze_base_centroids", "structural_completion",
    "matching", "gt_novel_ids", "threads",
}
_PATH_KEYS = {"records", "features_meta", "features_bin", "geometries", "gt_maps", "out_dir"}


@dataclass
class RunConfig:
    records: Path
    features_meta: Path
    features_bin: Path
    out_dir: Path
    geometries: Path | None = None
    gt_maps: Path | None = None
    run_id: str = "run"
    mode: str = "nerg"
    k_novel: int = 1
    k_base: int | None = None
    theta: float = 0.1
    k: int = 10
    area_threshold: int = 1024
    score_norm: str = "k"
    rng_seed: int = 0
    max_iterations: int = 10
    convergence_eps: float = 1e-6
    max_lloyd_iters: int = 300
    normalize_features: bool = False
    freeze_base_centroids: bool = False
    structural_completion: bool = True
    matching: str = "hungarian"
    gt_novel_ids: list[int] | None = None
    threads: int = 1  # reserved; the engine is sequential
    raw: dict | None = None  # verbatim config for echo + hashing

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.matching not in MATCHINGS:
            raise ConfigError(f"matching must be one of {MATCHINGS}, got {self.matching!r}")
        if self.k_novel < 1:
            raise ConfigError(f"k_novel must be >= 1, got {self.k_novel}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.theta < 1.0:
            raise ConfigError(f"theta must be in (0, 1), got {self.theta}")
        if self.area_threshold < 0:
            raise ConfigError(f"area_threshold must be >= 0, got {self.area_threshold}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.raw is None:
            self.raw = self.to_raw()

    def to_raw(self) -> dict:
        paths = {"records": str(self.records), "features_meta": str(self.features_meta),
                 "features_bin": str(self.features_bin), "out_dir": str(self.out_dir)}
        if self.geometries is not None:
            paths["geometries"] = str(self.geometries)
        if self.gt_maps is not None:
            paths["gt_maps"] = str(self.gt_maps)
        raw = {"paths": paths, "run_id": self.run_id, "mode": self.mode, "theta": self.theta,
               "k": self.k, "k_novel": self.k_novel, "area_threshold": self.area_threshold,
               "score_norm": self.score_norm, "rng_seed": self.rng_seed,
               "max_iterations": self.max_iterations, "convergence_eps": self.convergence_eps,
               "max_lloyd_iters": self.max_lloyd_iters, "normalize_features": self.normalize_features,
               "freeze_base_centroids": self.freeze_base_centroids,
               "structural_completion": self.structural_completion, "matching": self.matching,
               "threads": self.threads}
        if self.k_base is not None:
            raw["k_base"] = self.k_base
        if self.gt_novel_ids is not None:
            raw["gt_novel_ids"] = list(self.gt_novel_ids)
        return raw


def load_config(path: Path, out_override: Path | None = None, threads: int | None = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: malformed JSON ({e.msg})") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    paths = raw.get("paths")
    if not isinstance(paths, dict):
        raise ConfigError(f"{path}: missing 'paths' object")
    unknown_paths = set(paths) - _PATH_KEYS
    if unknown_paths:
        raise ConfigError(f"{path}: unknown path keys {sorted(unknown_paths)}")
    for key in ("records", "features_meta", "features_bin", "out_dir"):
        if key not in paths:
            raise ConfigError(f"{path}: paths.{key} is required")

    base = Path(path).resolve().parent

    def _p(key: str) -> Path | None:
        value = paths.get(key)
        return None if value is None else (base / value if not Path(value).is_absolute() else Path(value))

    kwargs = {k: raw[k] for k in raw if k != "paths"}
    try:
        cfg = RunConfig(records=_p("records"), features_meta=_p("features_meta"),
                        features_bin=_p("features_bin"), out_dir=_p("out_dir"),
                        geometries=_p("geometries"), gt_maps=_p("gt_maps"),
                        raw=raw, **kwargs)
    except TypeError as e:
        raise ConfigError(f"{path}: {e}") from e
    if out_override is not None:
        cfg = replace(cfg, out_dir=Path(out_override), raw=None)
        cfg.raw = cfg.to_raw()
    if threads is not None:
        cfg = replace(cfg, threads=threads, raw=None)
        cfg.raw = cfg.to_raw()
    for key, p in (("records", cfg.records), ("features_meta", cfg.features_meta),
                   ("features_bin", cfg.features_bin), ("geometries", cfg.geometries),
                   ("gt_maps", cfg.gt_maps)):
        if p is not None and not Path(p).exists():
            raise ConfigError(f"paths.{key} does not exist: {p}")
    return cfg


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# shared loading
# ---------------------------------------------------------------------------


def _load(cfg: RunConfig) -> tuple[DiscoveryInstance, np.ndarray]:
    """Read and validate the instance; returns it with processed features
    (normalized if configured) and the indices of clustering-eligible masks."""
    try:
        instance = read_instance(cfg.records, cfg.features_meta, cfg.features_bin,
                                 geometries=cfg.geometries, k_base=cfg.k_base, k_novel=cfg.k_novel)
    except EngineError as e:
        raise StageError("ingest", e) from e
    report = validate_instance(instance)
    if not report.ok:
        head = "; ".join(v.message for v in report.violations[:5])
        more = "" if len(report.violations) <= 5 else f" (+{len(report.violations) - 5} more)"
        raise StageError("validate", FormatError(f"{len(report.violations)} violations: {head}{more}"))

    feats = instance.features.astype(np.float64)
    if cfg.normalize_features:
        norms = np.linalg.norm(feats, axis=1, keepdims=True)
        feats = np.where(norms > 0, feats / np.where(norms > 0, norms, 1.0), feats)
    instance = replace(instance, features=feats)
    eligible = np.flatnonzero(instance.areas() >= cfg.area_threshold)
    return instance, eligible


def _sub_instance(instance: DiscoveryInstance, eligible: np.ndarray) -> DiscoveryInstance:
    return DiscoveryInstance(masks=[instance.masks[i] for i in eligible],
                             features=instance.features[eligible],
                             k_base=instance.k_base, k_novel=instance.k_novel,
                             images=instance.images, geometries={})


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(cfg: RunConfig) -> None:
    manifest = {"run_id": cfg.run_id, "config_hash": config_hash(cfg), "config": cfg.raw}
    (_out(cfg) / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _neighbor_table(cfg: RunConfig, sub: DiscoveryInstance) -> NeighborTable:
    cache = _out(cfg) / "knn.cache"
    if cache.exists():
        table = read_neighbor_cache(cache)
        if table.n == sub.n_masks and table.k == cfg.k:
            return table
    try:
        return knn_table(sub.features, cfg.k)
    except EngineError as e:
        raise StageError("knn", e) from e


def _prop_config(cfg: RunConfig) -> PropagationConfig:
    return PropagationConfig(theta=cfg.theta, max_iterations=cfg.max_iterations,
                             convergence_eps=cfg.convergence_eps, score_norm=cfg.score_norm)


def _state_rows(state: LabelState, sub: DiscoveryInstance) -> list[tuple[int, int, float]]:
    return [(m.mask_id, int(state.labels[i]), float(state.confidence[i]))
            for i, m in enumerate(sub.masks)]


def _read_state(path: Path, sub: DiscoveryInstance) -> LabelState:
    rows = {mask_id: (label, conf) for mask_id, label, conf in read_labels(path)}
    state = init_label_state(sub)
    for i, m in enumerate(sub.masks):
        if m.mask_id not in rows:
            raise FormatError(f"{path}: no entry for mask {m.mask_id}")
        label, conf = rows[m.mask_id]
        if not state.fixed[i]:
            state.labels[i] = label
            state.confidence[i] = conf
    return state


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def stage_knn(cfg: RunConfig) -> Path:
    instance, eligible = _load(cfg)
    sub = _sub_instance(instance, eligible)
    try:
        table = knn_table(sub.features, cfg.k)
    except EngineError as e:
        raise StageError("knn", e) from e
    out = _out(cfg)
    write_neighbor_cache(table, out / "knn.cache")
    _write_manifest(cfg)
    return out / "knn.cache"


def stage_propagate(cfg: RunConfig) -> Path:
    instance, eligible = _load(cfg)
    sub = _sub_instance(instance, eligible)
    table = _neighbor_table(cfg, sub)
    state = propagate(init_label_state(sub), table, _prop_config(cfg))
    out = _out(cfg)
    write_labels(_state_rows(state, sub), out / "labels_propagated.ndjson", stage="propagate")
    _write_manifest(cfg)
    return out / "labels_propagated.ndjson"


def stage_complete(cfg: RunConfig) -> Path:
    instance, eligible = _load(cfg)
    sub = _sub_instance(instance, eligible)
    table = _neighbor_table(cfg, sub)
    state = _read_state(_out(cfg) / "labels_propagated.ndjson", sub)
    state = structural_completion(state, table, _prop_config(cfg))
    out = _out(cfg)
    write_labels(_state_rows(state, sub), out / "labels_completed.ndjson", stage="complete")
    _write_manifest(cfg)
    return out / "labels_completed.ndjson"


def stage_cluster(cfg: RunConfig) -> Path:
    instance, eligible = _load(cfg)
    sub = _sub_instance(instance, eligible)
    out = _out(cfg)

    if cfg.mode == "baseline":
        state = init_label_state(sub)
    else:
        source = "labels_completed.ndjson" if cfg.structural_completion else "labels_propagated.ndjson"
        state = _read_state(out / source, sub)

    try:
        final_labels, final_conf = _cluster_sub(cfg, sub, state)
    except EngineError as e:
        raise StageError("cluster", e) from e

    # expand to the full mask set; labeled masks always keep ground truth
    n = instance.n_masks
    full_labels = np.full(n, NOVEL_PENDING, dtype=np.int64)
    full_conf = np.zeros(n, dtype=np.float64)
    for i, m in enumerate(instance.masks):
        if m.split == LABELED:
            full_labels[i] = m.label
            full_conf[i] = 1.0
    full_labels[eligible] = final_labels
    full_conf[eligible] = final_conf
    full_labels, full_conf = fill_small_masks(instance, full_labels, full_conf, cfg.area_threshold)

    write_labels([(m.mask_id, int(full_labels[i]), float(full_conf[i]))
                  for i, m in enumerate(instance.masks)], out / "labels.ndjson")
    _write_manifest(cfg)
    return out / "labels.ndjson"


def _cluster_sub(cfg: RunConfig, sub: DiscoveryInstance, state: LabelState) -> tuple[np.ndarray, np.ndarray]:
    protos = base_prototypes(sub, state)
    pending = (state.labels == NOVEL_PENDING) & ~state.fixed
    weights = sub.areas()

    if cfg.mode == "baseline":
        seeds = seed_novel_centroids(sub.features[pending], weights[pending], protos,
                                     sub.k_novel, cfg.rng_seed)
        model = constrained_kmeans(sub, state, np.vstack([protos, seeds]), BASELINE,
                                   cfg.rng_seed, max_iters=cfg.max_lloyd_iters,
                                   freeze_base_centroids=cfg.freeze_base_centroids)
        return model.assignment.copy(), state.confidence.copy()

    final = state.labels.copy()
    n_pending = int(pending.sum())
    k_eff = min(sub.k_novel, n_pending)
    if k_eff > 0:
        seeds = seed_novel_centroids(sub.features[pending], weights[pending], protos,
                                     k_eff, cfg.rng_seed)
        model = constrained_kmeans(sub, state, seeds, NOVEL_ONLY, cfg.rng_seed,
                                   max_iters=cfg.max_lloyd_iters)
        final[pending] = sub.k_base + model.assignment[pending]
    return final, state.confidence.copy()


def stage_assemble(cfg: RunConfig) -> Path:
    instance, _ = _load(cfg)
    if not instance.geometries:
        raise StageError("assemble", CoverageGap("no geometries available; configure paths.geometries"))
    out = _out(cfg)
    rows = {mask_id: label for mask_id, label, _ in read_labels(out / "labels.ndjson")}
    labels = np.empty(instance.n_masks, dtype=np.int64)
    for i, m in enumerate(instance.masks):
        if m.mask_id not in rows:
            raise StageError("assemble", FormatError(f"labels.ndjson has no entry for mask {m.mask_id}"))
        labels[i] = rows[m.mask_id]
    try:
        maps = assemble_all(instance, labels)
    except EngineError as e:
        raise StageError("assemble", e) from e
    maps_dir = out / "maps"
    maps_dir.mkdir(exist_ok=True)
    for seg in maps:
        write_map(seg, maps_dir / map_filename(seg.image_id))
    _write_manifest(cfg)
    return maps_dir


def stage_eval(cfg: RunConfig) -> Path:
    if cfg.gt_maps is None:
        raise StageError("eval", ConfigError("paths.gt_maps is required for evaluation"))
    instance, _ = _load(cfg)
    out = _out(cfg)
    gt_dir = Path(cfg.gt_maps)
    gt_maps: dict[int, np.ndarray] = {}
    for path in sorted(gt_dir.glob("map_*.u16")):
        seg = read_map(path)
        gt_maps[seg.image_id] = seg.labels
    if not gt_maps:
        raise StageError("eval", FormatError(f"no map_*.u16 files under {gt_dir}"))
    pred_maps: dict[int, np.ndarray] = {}
    for image_id in gt_maps:
        pred_path = out / "maps" / map_filename(image_id)
        if not pred_path.exists():
            raise StageError("eval", FormatError(f"missing predicted map {pred_path}"))
        pred_maps[image_id] = read_map(pred_path).labels

    k_base = instance.k_base
    gt_novel = cfg.gt_novel_ids if cfg.gt_novel_ids is not None else list(range(k_base, k_base + cfg.k_novel))
    pred_novel = list(range(k_base, k_base + cfg.k_novel))
    try:
        report = evaluate(pred_maps, gt_maps, k_base, gt_novel, pred_novel, matching=cfg.matching)
    except EngineError as e:
        raise StageError("eval", e) from e

    payload = {"run_id": cfg.run_id, "config_hash": config_hash(cfg), "config": cfg.raw}
    payload.update(report.to_json_dict())
    report_path = out / "eval_report.json"
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _write_manifest(cfg)
    return report_path


def run_pipeline(cfg: RunConfig) -> dict[str, str]:
    """validate -> knn -> (baseline: cluster | nerg: propagate -> [complete]
    -> cluster) -> fill+labels -> assemble -> eval (when ground truth given)."""
    artifacts: dict[str, str] = {}
    _write_manifest(cfg)
    artifacts["knn_cache"] = str(stage_knn(cfg))
    if cfg.mode == "nerg":
        artifacts["propagated"] = str(stage_propagate(cfg))
        if cfg.structural_completion:
            artifacts["completed"] = str(stage_complete(cfg))
    artifacts["labels"] = str(stage_cluster(cfg))
    if cfg.geometries is not None:
        artifacts["maps"] = str(stage_assemble(cfg))
        if cfg.gt_maps is not None:
            artifacts["eval_report"] = str(stage_eval(cfg))
    artifacts["manifest"] = str(_out(cfg) / "run_manifest.json")
    return artifacts
