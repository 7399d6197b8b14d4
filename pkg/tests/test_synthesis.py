import numpy as np
import pytest

from comprestore.core.errors import CropError, ManifestError
from comprestore.data.dataset import (
    AlignedTaskDataset,
    DatasetManifest,
    RestorationPairs,
    load_image,
    verify_dataset,
)
from comprestore.data.synthesis import aligned_views, compose, crop_window, derive_seed, procedural_scene


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed("a", 1) == derive_seed("a", 1)
    assert derive_seed("a", 1) != derive_seed("a", 2)
    assert 0 <= derive_seed("x") < 2**63


def test_procedural_scene_is_deterministic():
    a = procedural_scene(32, 3)
    np.testing.assert_array_equal(a, procedural_scene(32, 3))
    assert a.shape == (3, 32, 32)
    assert not np.array_equal(a, procedural_scene(32, 4))


def test_compose_clean_is_identity(catalog):
    scene = procedural_scene(24, 0)
    out, label = compose(scene, catalog.get("clean"), 0)
    np.testing.assert_array_equal(out, scene)
    assert label.order == 0


def test_compose_is_deterministic(catalog):
    scene = procedural_scene(24, 0)
    cfg = catalog.get("rain+haze+noise")
    a, label = compose(scene, cfg, 11, ranges=catalog.severity_ranges)
    b, _ = compose(scene, cfg, 11, ranges=catalog.severity_ranges)
    np.testing.assert_array_equal(a, b)
    assert str(label) == "10100010"


def test_compose_needs_severities(catalog):
    with pytest.raises(ValueError):
        compose(procedural_scene(16, 0), catalog.get("haze"), 0)


def test_crop_window_bounds():
    top, left, size = crop_window(40, 40, 16, "s", 0)
    assert 0 <= top <= 24 and 0 <= left <= 24 and size == 16
    with pytest.raises(CropError):
        crop_window(8, 8, 16, "s", 0)


def test_aligned_views_share_one_window(catalog):
    scene = procedural_scene(32, 1)
    clean = catalog.get("clean")
    views = aligned_views(scene, [clean, clean, catalog.get("haze")], 16, 5, ranges=catalog.severity_ranges)
    np.testing.assert_array_equal(views[0][0], views[1][0])
    top, left, _ = crop_window(32, 32, 16, "scene", 5)
    np.testing.assert_array_equal(views[0][0], scene[:, top:top + 16, left:left + 16])
    assert [str(v[1]) for v in views] == ["00000000", "00000000", "00100000"]


def test_mini_dataset_verifies(mini_dataset, catalog):
    files = verify_dataset(DatasetManifest.load(mini_dataset.root), catalog)
    assert len(files) == 3 * 44
    assert len(mini_dataset.scene_ids("test")) == 1
    assert len(mini_dataset.scene_ids("train")) == 2


def test_tampered_file_fails_verification(mini_dataset, catalog, tmp_path):
    import shutil

    copy = tmp_path / "copy"
    shutil.copytree(mini_dataset.root, copy)
    manifest = DatasetManifest.load(copy)
    target = copy / manifest.entries[5].path
    target.write_bytes(target.read_bytes()[:-4])
    with pytest.raises(ManifestError, match="differ"):
        verify_dataset(manifest, catalog)


def test_missing_manifest(tmp_path):
    with pytest.raises(ManifestError):
        DatasetManifest.load(tmp_path)


def test_aligned_dataset_items(mini_dataset, catalog):
    ds = AlignedTaskDataset(mini_dataset, catalog, crop_size=16, scene_split="train")
    views, labels = ds[0]
    assert views.shape == (22, 3, 16, 16)
    assert labels.shape == (22, 9)
    assert labels[0, 8] == 1 and labels[0, :8].sum() == 0
    assert labels[1:, 8].sum() == 0


def test_restoration_pairs_share_window_per_scene(mini_dataset, catalog):
    seen = catalog.by_split("seen")
    ds = RestorationPairs(mini_dataset, seen, "train", crop_size=16, seed=0)
    assert len(ds) == 2 * 21
    a, b = ds[0], ds[1]
    assert a["scene"] == b["scene"]
    assert a["target_key"] == b["target_key"]
    assert torch_equal(a["clean"], b["clean"])
    assert a["degraded"].shape == (3, 16, 16)


def test_full_scene_pairs(mini_dataset, catalog):
    ds = RestorationPairs(mini_dataset, [catalog.get("haze")], "test")
    item = ds[0]
    assert item["clean"].shape == (3, 32, 32)
    assert item["target_key"].endswith("@0,0,32")
    expected = load_image(mini_dataset.path_of(item["scene"], "clean"))
    np.testing.assert_allclose(item["clean"].numpy(), expected, atol=1e-6)


def torch_equal(a, b):
    return bool((a == b).all())
