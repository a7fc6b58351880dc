import numpy as np

from maskgcd.core import NOVEL_PENDING, UNLABELED, init_label_state, validate_instance
from maskgcd.clustering import base_prototypes
from maskgcd.knn import knn_table
from maskgcd.mask_io import read_instance
from maskgcd.propagation import PropagationConfig, propagate, structural_completion
from maskgcd.synth import (
    SynthSpec,
    generate,
    ground_truth_maps,
    novel_clustering_accuracy,
    oracle_assign,
    write_dataset,
)


def _small_spec(**overrides):
    params = dict(k_base=3, k_novel=2, masks_per_class=12, feature_dim=8,
                  intra_std=0.5, center_separation=10.0, novel_pixel_fraction=0.05,
                  fragmentation=2, rng_seed=1)
    params.update(overrides)
    return SynthSpec(**params)


def test_generated_instance_validates():
    res = generate(_small_spec())
    assert validate_instance(res.instance).ok


def test_novel_pixel_fraction_within_ten_percent():
    res = generate(_small_spec(novel_pixel_fraction=0.02, masks_per_class=40))
    inst = res.instance
    areas = inst.areas()
    unl = np.array([m.split == UNLABELED for m in inst.masks])
    novel = res.gt_labels >= res.spec.k_base
    frac = areas[novel].sum() / areas[unl].sum()
    assert abs(frac - 0.02) <= 0.002


def test_same_seed_bit_identical():
    a = generate(_small_spec())
    b = generate(_small_spec())
    assert a.instance.features.tobytes() == b.instance.features.tobytes()
    assert a.instance.masks == b.instance.masks
    assert a.instance.geometries == b.instance.geometries
    assert (a.gt_labels == b.gt_labels).all()


def test_novel_masks_nearer_own_kind_than_base_prototypes():
    res = generate(_small_spec(k_base=2, k_novel=1, intra_std=0.01))
    inst = res.instance
    feats = inst.features.astype(np.float64)
    protos = base_prototypes(inst, init_label_state(inst))
    novel_idx = np.flatnonzero(res.gt_labels >= 2)
    for i in novel_idx:
        others = novel_idx[novel_idx != i]
        d_novel = np.linalg.norm(feats[others] - feats[i], axis=1).min()
        d_proto = np.linalg.norm(protos - feats[i], axis=1).min()
        assert d_novel < d_proto


def test_oracle_assign_basics():
    centers = np.array([[0.0, 0.0], [10.0, 0.0]])
    labels = oracle_assign(np.array([[0.1, 0.0], [9.5, 0.2], [5.0, 0.0]]), centers)
    assert labels.tolist() == [0, 1, 0]  # equidistant point takes class 0


def test_oracle_matches_ground_truth_when_sigma_small():
    res = generate(_small_spec(intra_std=0.01, boundary_fraction=0.0))
    labels = oracle_assign(res.instance, res.true_centers)
    assert (labels == res.gt_labels).all()


def test_oracle_matches_ground_truth_with_boundary_pull_below_half():
    # pulled concepts stay nearer their own center while boundary_pull < 0.5
    res = generate(_small_spec(intra_std=0.01, boundary_fraction=0.3, boundary_pull=0.4))
    labels = oracle_assign(res.instance, res.true_centers)
    assert (labels == res.gt_labels).all()


def test_end_to_end_tiny_sigma_recovers_ground_truth():
    res = generate(_small_spec(intra_std=0.02, fragmentation=1, boundary_fraction=0.0))
    inst = res.instance
    table = knn_table(inst.features.astype(np.float64), 5)
    cfg = PropagationConfig(theta=0.1)
    state = structural_completion(propagate(init_label_state(inst), table, cfg), table, cfg)
    base_part = res.gt_labels < inst.k_base
    assert (state.labels[base_part] == res.gt_labels[base_part]).all()
    assert (state.labels[~base_part] == NOVEL_PENDING).all()


def test_full_pipeline_tiny_sigma_exact_up_to_permutation(tmp_path):
    from maskgcd.pipeline import RunConfig, run_pipeline
    from maskgcd.mask_io import read_labels

    res = generate(_small_spec(intra_std=0.02, boundary_fraction=0.0))
    paths = write_dataset(res, tmp_path / "data")
    cfg = RunConfig(records=paths["records"], features_meta=paths["features_meta"],
                    features_bin=paths["features_bin"], geometries=paths["geometries"],
                    gt_maps=paths["gt_maps"], out_dir=tmp_path / "out",
                    mode="nerg", theta=0.1, k=5, k_novel=res.spec.k_novel,
                    area_threshold=1, rng_seed=0)
    run_pipeline(cfg)
    pred = {mid: lab for mid, lab, _ in read_labels(tmp_path / "out" / "labels.ndjson")}
    labels = np.array([pred[m.mask_id] for m in res.instance.masks])
    base_part = res.gt_labels < res.spec.k_base
    assert (labels[base_part] == res.gt_labels[base_part]).all()
    # the novel clusters match ground truth exactly up to relabeling
    assert novel_clustering_accuracy(res.gt_labels, labels, res.spec.k_base) == 1.0


def test_novel_clustering_accuracy_metric():
    gt = np.array([0, 1, 2, 2, 3, 3])
    pred = np.array([0, 1, 7, 7, 9, 0])  # one novel mask predicted base
    assert novel_clustering_accuracy(gt, pred, k_base=2) == 0.75
    assert novel_clustering_accuracy(gt, gt, k_base=2) == 1.0
    # cluster ids permuted: accuracy unchanged
    permuted = np.array([0, 1, 9, 9, 7, 7])
    assert novel_clustering_accuracy(gt, permuted, k_base=2) == 1.0


def test_ground_truth_maps_cover_unlabeled_images():
    res = generate(_small_spec())
    maps = ground_truth_maps(res)
    assert sorted(maps) == sorted(res.unlabeled_image_ids)
    shapes = {img_id: (h, w) for img_id, h, w in res.instance.images}
    for img_id, raster in maps.items():
        assert raster.shape == shapes[img_id]


def test_write_dataset_reads_back(tmp_path):
    res = generate(_small_spec())
    paths = write_dataset(res, tmp_path / "data")
    inst = read_instance(paths["records"], paths["features_meta"], paths["features_bin"],
                         geometries=paths["geometries"], k_novel=res.spec.k_novel)
    assert inst.n_masks == res.instance.n_masks
    assert inst.k_base == res.spec.k_base
    assert inst.features.tobytes() == res.instance.features.tobytes()
    assert validate_instance(inst).ok
    gt_files = sorted((tmp_path / "data" / "gt_maps").glob("map_*.u16"))
    assert len(gt_files) == len(res.unlabeled_image_ids)
