import pytest
import torch

from comprestore.core.config import AppConfig, DataConfig, LossConfig, PerceptionConfig, RestorationConfig, TrainConfig
from comprestore.data.catalog import enumerate_configs
from comprestore.data.dataset import build_dataset, build_manifest, list_scene_sources


def make_tiny_config(root=None) -> AppConfig:
    cfg = AppConfig()
    cfg.data = DataConfig(num_scenes=3, scene_size=32, crop_size=16, test_fraction=0.34, seed=0)
    cfg.perception = PerceptionConfig(embed_dim=16, input_size=32)
    cfg.restoration = RestorationConfig(
        widths=[4, 8, 4],
        blocks_per_stage=1,
        token_dim=16,
        token_heads=2,
        freq_experts=2,
        freq_rank=2,
        window_size=4,
        head_dim=4,
        base_width=4,
    )
    cfg.train = TrainConfig(perception_epochs=1, restoration_epochs=1, batch_size=4, device="cpu")
    cfg.loss = LossConfig(gf_radius=2)
    if root is not None:
        cfg.paths.data_root = str(root / "data")
        cfg.paths.runs_dir = str(root / "runs")
    return cfg


@pytest.fixture(autouse=True)
def isolated_logs(tmp_path, monkeypatch):
    monkeypatch.setenv("COMPRESTORE_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.delenv("COMPRESTORE_CONFIG", raising=False)


@pytest.fixture
def tiny_cfg(tmp_path):
    return make_tiny_config(tmp_path)


@pytest.fixture(scope="session")
def catalog():
    return enumerate_configs()


@pytest.fixture(scope="session")
def mini_dataset(tmp_path_factory, catalog):
    """Three procedural 32x32 scenes rendered under all 44 configs (2 train, 1 test)."""
    root = tmp_path_factory.mktemp("mini") / "data"
    manifest = build_manifest(catalog, root, list_scene_sources(None, 3), seed=0, scene_size=32, test_fraction=0.34)
    build_dataset(manifest, catalog, workers=2, progress=False)
    return manifest


@pytest.fixture
def seeded():
    torch.manual_seed(0)
