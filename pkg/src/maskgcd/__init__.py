"""Category-discovery engine for mask-based semantic segmentation.

Given mask proposals and feature vectors from a partially labeled corpus, the
engine assigns every mask either a known base-class label or a discovered
novel-class label, assembles per-image segmentation maps, and scores them
with a matching-based mIoU metric.
"""

from .clustering import BASELINE, NOVEL_ONLY, ClusterModel, base_prototypes, constrained_kmeans, seed_novel_centroids
from .core import (
    LABELED,
    NOVEL_PENDING,
    UNLABELED,
    VOID,
    DiscoveryInstance,
    LabelState,
    MaskRecord,
    SegmentationMap,
    ValidationReport,
    init_label_state,
    validate_instance,
)
from .evaluation import EvalReport, assemble_map, evaluate, fill_small_masks, greedy_match, hungarian_match
from .knn import NeighborTable, build_neighbor_table, knn_table, neighbors_of
from .mask_io import read_instance, read_labels, read_map, write_labels, write_map
from .pipeline import RunConfig, run_pipeline
from .propagation import PropagationConfig, class_scores, propagate, structural_completion
from .rle import RleMask, rle_decode, rle_encode
from .slic import SlicParams, centroid_features, slic_segment
from .synth import SynthSpec, generate, novel_clustering_accuracy, oracle_assign

__version__ = "0.1.0"

__all__ = [
    "BASELINE", "NOVEL_ONLY", "ClusterModel", "base_prototypes", "constrained_kmeans",
    "seed_novel_centroids", "LABELED", "NOVEL_PENDING", "UNLABELED", "VOID",
    "DiscoveryInstance", "LabelState", "MaskRecord", "SegmentationMap", "ValidationReport",
    "init_label_state", "validate_instance", "EvalReport", "assemble_map", "evaluate",
    "fill_small_masks", "greedy_match", "hungarian_match", "NeighborTable",
    "build_neighbor_table", "knn_table", "neighbors_of", "read_instance", "read_labels",
    "read_map", "write_labels", "write_map", "RunConfig", "run_pipeline",
    "PropagationConfig", "class_scores", "propagate", "structural_completion", "RleMask",
    "rle_decode", "rle_encode", "SlicParams", "centroid_features", "slic_segment",
    "SynthSpec", "generate", "novel_clustering_accuracy", "oracle_assign",
]
