import numpy as np

from maskgcd.core import (
    LABELED,
    UNLABELED,
    DiscoveryInstance,
    MaskRecord,
    init_label_state,
    validate_instance,
)
from maskgcd.rle import RleMask


def _mask(mask_id, image_id=0, area=1, bbox=(0, 0, 1, 1), label=None, split=UNLABELED):
    return MaskRecord(mask_id=mask_id, image_id=image_id, area=area, bbox=bbox, label=label, split=split)


def _instance(masks, features=None, k_base=2, k_novel=1, images=None, geometries=None):
    if features is None:
        features = np.zeros((len(masks), 3), dtype=np.float32)
    if images is None:
        images = [(0, 1, 2)]
    return DiscoveryInstance(masks=masks, features=features, k_base=k_base, k_novel=k_novel,
                             images=images, geometries=geometries or {})


def test_wellformed_instance_empty_report():
    masks = [
        _mask(0, label=0, split=LABELED, bbox=(0, 0, 1, 1)),
        _mask(1, bbox=(1, 0, 1, 1)),
        _mask(2, image_id=1, bbox=(0, 0, 2, 1), area=2),
    ]
    geoms = {
        0: RleMask(size=(1, 2), counts=(0, 1, 1)),
        1: RleMask(size=(1, 2), counts=(1, 1)),
        2: RleMask(size=(1, 2), counts=(0, 2)),
    }
    inst = _instance(masks, images=[(0, 1, 2), (1, 1, 2)], geometries=geoms)
    assert validate_instance(inst).ok


def test_overlap_names_both_masks_and_image():
    masks = [
        _mask(10, area=2, bbox=(0, 0, 2, 1)),
        _mask(11, bbox=(0, 0, 1, 1)),
    ]
    geoms = {
        10: RleMask(size=(1, 2), counts=(0, 2)),
        11: RleMask(size=(1, 2), counts=(0, 1, 1)),
    }
    report = validate_instance(_instance(masks, geometries=geoms))
    overlap = [v for v in report.violations if v.code == "OVERLAP"]
    assert len(overlap) == 1
    assert set(overlap[0].mask_ids) == {10, 11}
    assert overlap[0].image_id == 0


def test_label_at_k_base_out_of_range():
    masks = [_mask(0, label=2, split=LABELED)]  # k_base = 2, valid labels 0..1
    report = validate_instance(_instance(masks))
    assert any(v.code == "LABEL_OUT_OF_RANGE" for v in report.violations)


def test_split_label_mismatch():
    report = validate_instance(_instance([_mask(0, split=LABELED)]))
    assert any(v.code == "SPLIT_LABEL_MISMATCH" for v in report.violations)
    report = validate_instance(_instance([_mask(0, label=0, split=UNLABELED)]))
    assert any(v.code == "SPLIT_LABEL_MISMATCH" for v in report.violations)


def test_area_and_bbox_checked_against_geometry():
    masks = [_mask(0, area=2, bbox=(0, 0, 1, 1))]
    geoms = {0: RleMask(size=(1, 2), counts=(0, 1, 1))}
    report = validate_instance(_instance(masks, geometries=geoms, images=[(0, 1, 2)]))
    codes = {v.code for v in report.violations}
    assert "AREA_MISMATCH" in codes
    assert "COVERAGE_GAP" in codes  # single 1-pixel mask cannot cover 1x2

    masks = [_mask(0, area=1, bbox=(1, 0, 1, 1)), _mask(1, area=1, bbox=(1, 0, 1, 1))]
    geoms = {0: RleMask(size=(1, 2), counts=(0, 1, 1)), 1: RleMask(size=(1, 2), counts=(1, 1))}
    report = validate_instance(_instance(masks, geometries=geoms))
    assert any(v.code == "BBOX_NOT_TIGHT" and v.mask_ids == (0,) for v in report.violations)


def test_duplicate_mask_id_and_unknown_image():
    report = validate_instance(_instance([_mask(0), _mask(0)]))
    assert any(v.code == "DUPLICATE_MASK_ID" for v in report.violations)
    report = validate_instance(_instance([_mask(0, image_id=5)]))
    assert any(v.code == "UNKNOWN_IMAGE" for v in report.violations)


def test_nonfinite_features_flagged():
    feats = np.zeros((1, 3), dtype=np.float32)
    feats[0, 1] = np.nan
    report = validate_instance(_instance([_mask(0)], features=feats))
    assert any(v.code == "FEATURES_NOT_FINITE" for v in report.violations)


def test_validate_is_pure():
    masks = [_mask(0, label=5, split=LABELED)]
    inst = _instance(masks)
    first = validate_instance(inst)
    second = validate_instance(inst)
    assert first.violations == second.violations


def test_init_label_state():
    masks = [_mask(0, label=1, split=LABELED), _mask(1)]
    state = init_label_state(_instance(masks))
    assert state.labels.tolist() == [1, -1]
    assert state.confidence.tolist() == [1.0, 0.0]
    assert state.fixed.tolist() == [True, False]
