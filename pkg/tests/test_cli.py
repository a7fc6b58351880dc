import hashlib
import json

import numpy as np
import pytest

from maskgcd.cli import main
from maskgcd.mask_io import read_labels
from maskgcd.synth import SynthSpec, generate, write_dataset

SYNTH_SPEC = dict(k_base=3, k_novel=2, masks_per_class=12, feature_dim=8,
                  intra_std=0.5, center_separation=10.0, novel_pixel_fraction=0.05,
                  fragmentation=2, rng_seed=1)


@pytest.fixture()
def dataset(tmp_path):
    paths = write_dataset(generate(SynthSpec(**SYNTH_SPEC)), tmp_path / "data")
    return tmp_path, paths


def _write_config(tmp_path, paths, out_name="out", **overrides):
    cfg = {
        "paths": {
            "records": paths["records"],
            "features_meta": paths["features_meta"],
            "features_bin": paths["features_bin"],
            "geometries": paths["geometries"],
            "gt_maps": paths["gt_maps"],
            "out_dir": str(tmp_path / out_name),
        },
        "run_id": "testrun",
        "mode": "nerg",
        "theta": 0.1,
        "k": 5,
        "k_novel": 2,
        "area_threshold": 1,
        "rng_seed": 3,
    }
    cfg.update(overrides)
    path = tmp_path / f"{out_name}.json"
    path.write_text(json.dumps(cfg))
    return path, tmp_path / out_name


def test_run_pipeline_end_to_end(dataset, capsys):
    tmp_path, paths = dataset
    cfg_path, out = _write_config(tmp_path, paths)
    assert main(["run", "--config", str(cfg_path)]) == 0
    assert (out / "labels.ndjson").exists()
    assert (out / "run_manifest.json").exists()
    assert (out / "maps").is_dir()
    report = json.loads((out / "eval_report.json").read_text())
    assert report["run_id"] == "testrun"
    assert report["config"]["theta"] == 0.1
    assert 0.0 <= report["miou_avg"] <= 1.0
    # clean separation: discovery is essentially perfect on this instance
    assert report["miou_avg"] > 0.9


def test_stage_composition_equals_run(dataset):
    tmp_path, paths = dataset
    cfg_run, out_run = _write_config(tmp_path, paths, out_name="whole")
    assert main(["run", "--config", str(cfg_run)]) == 0

    cfg_stages, out_stages = _write_config(tmp_path, paths, out_name="staged")
    for stage in ("knn", "propagate", "complete", "cluster", "assemble", "eval"):
        assert main([stage, "--config", str(cfg_stages)]) == 0, stage

    labels_whole = (out_run / "labels.ndjson").read_bytes()
    labels_staged = (out_stages / "labels.ndjson").read_bytes()
    assert labels_whole == labels_staged
    # reports differ only in the echoed out_dir path
    rep_whole = json.loads((out_run / "eval_report.json").read_text())
    rep_staged = json.loads((out_stages / "eval_report.json").read_text())
    for key in ("per_class_iou", "miou_base", "miou_novel", "miou_avg", "matching"):
        assert rep_whole[key] == rep_staged[key]


def test_rerun_byte_identical(dataset):
    tmp_path, paths = dataset
    cfg_a, out_a = _write_config(tmp_path, paths, out_name="a")
    cfg_b, out_b = _write_config(tmp_path, paths, out_name="a")  # same config twice
    assert main(["run", "--config", str(cfg_a)]) == 0
    first_labels = (out_a / "labels.ndjson").read_bytes()
    first_report = (out_a / "eval_report.json").read_bytes()
    assert main(["run", "--config", str(cfg_b)]) == 0
    assert (out_a / "labels.ndjson").read_bytes() == first_labels
    assert (out_a / "eval_report.json").read_bytes() == first_report


def test_missing_features_is_data_error(dataset, capsys):
    tmp_path, paths = dataset
    meta = json.loads(open(paths["features_meta"]).read())
    meta["d"] += 1  # meta now disagrees with the binary blob
    (tmp_path / "bad_meta.json").write_text(json.dumps(meta))
    paths = dict(paths, features_meta=str(tmp_path / "bad_meta.json"))
    cfg_path, _ = _write_config(tmp_path, paths, out_name="bad")
    code = main(["run", "--config", str(cfg_path)])
    assert code == 3
    err = capsys.readouterr().err
    assert "DIMENSION_MISMATCH" in err
    assert "ingest" in err


def test_config_errors_exit_2(dataset, capsys):
    tmp_path, paths = dataset
    cfg_path, _ = _write_config(tmp_path, paths, out_name="cfgerr", mode="bogus")
    assert main(["run", "--config", str(cfg_path)]) == 2

    cfg = json.loads(cfg_path.read_text())
    cfg["mode"] = "nerg"
    cfg["unknown_key"] = 1
    cfg_path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(cfg_path)]) == 2

    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_baseline_mode_runs(dataset):
    tmp_path, paths = dataset
    cfg_path, out = _write_config(tmp_path, paths, out_name="base", mode="baseline")
    assert main(["run", "--config", str(cfg_path)]) == 0
    labels = read_labels(out / "labels.ndjson")
    assert len(labels) == 96  # (3 labeled + 3 unlabeled base + 2 novel) * 12
    report = json.loads((out / "eval_report.json").read_text())
    assert 0.0 <= report["miou_avg"] <= 1.0


def test_eval_identical_maps_gives_one(dataset):
    tmp_path, paths = dataset
    # run once, then evaluate the ground truth against itself
    cfg_path, out = _write_config(tmp_path, paths, out_name="self")
    assert main(["run", "--config", str(cfg_path)]) == 0
    cfg = json.loads(cfg_path.read_text())
    cfg["paths"]["out_dir"] = str(tmp_path / "selfeval")
    cfg_path.write_text(json.dumps(cfg))
    import shutil

    shutil.copytree(paths["gt_maps"], tmp_path / "selfeval" / "maps")
    assert main(["eval", "--config", str(cfg_path)]) == 0
    report = json.loads((tmp_path / "selfeval" / "eval_report.json").read_text())
    assert report["miou_avg"] == 1.0


def test_synth_subcommand_deterministic(tmp_path):
    spec_path = tmp_path / "synth.json"
    spec_path.write_text(json.dumps(SYNTH_SPEC))
    assert main(["synth", "--config", str(spec_path), "--out", str(tmp_path / "s1"), "--seed", "7"]) == 0
    assert main(["synth", "--config", str(spec_path), "--out", str(tmp_path / "s2"), "--seed", "7"]) == 0

    def digest(root):
        out = {}
        for p in sorted(root.rglob("*")):
            if p.is_file():
                out[p.relative_to(root)] = hashlib.sha256(p.read_bytes()).hexdigest()
        return out

    assert digest(tmp_path / "s1") == digest(tmp_path / "s2")


def test_run_without_geometries_skips_maps(dataset):
    tmp_path, paths = dataset
    cfg_path, out = _write_config(tmp_path, paths, out_name="nogeom")
    cfg = json.loads(cfg_path.read_text())
    del cfg["paths"]["geometries"]
    del cfg["paths"]["gt_maps"]
    cfg_path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(cfg_path)]) == 0
    assert (out / "labels.ndjson").exists()
    assert not (out / "maps").exists()
    assert not (out / "eval_report.json").exists()


def test_option_paths_smoke(dataset):
    tmp_path, paths = dataset
    cfg_path, out = _write_config(
        tmp_path, paths, out_name="opts", normalize_features=True,
        score_norm="mass", matching="greedy", freeze_base_centroids=True,
        mode="baseline", threads=2)
    assert main(["run", "--config", str(cfg_path)]) == 0
    report = json.loads((out / "eval_report.json").read_text())
    assert report["config"]["score_norm"] == "mass"
    assert 0.0 <= report["miou_avg"] <= 1.0


def test_slic_subcommand(tmp_path):
    from maskgcd.slic import write_ppm
    from maskgcd.mask_io import read_instance

    rng = np.random.default_rng(0)
    image = np.zeros((8, 8, 3), dtype=np.uint8)
    image[:, 4:] = 220
    write_ppm(image, tmp_path / "img.ppm")
    code = main(["slic", "--image", str(tmp_path / "img.ppm"), "--segments", "2",
                 "--out-records", str(tmp_path / "records.ndjson"),
                 "--out-geometries", str(tmp_path / "geoms.ndjson"),
                 "--out-features", str(tmp_path / "features.f32"),
                 "--out-meta", str(tmp_path / "features.meta.json")])
    assert code == 0
    inst = read_instance(tmp_path / "records.ndjson", tmp_path / "features.meta.json",
                         tmp_path / "features.f32", geometries=tmp_path / "geoms.ndjson")
    from maskgcd.core import validate_instance

    assert validate_instance(inst).ok
    assert inst.features.shape[1] == 5
    assert sum(m.area for m in inst.masks) == 64
