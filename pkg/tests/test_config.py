import json

import pytest

from comprestore.core.config import AppConfig


def test_defaults_save_and_reload(tmp_path, monkeypatch):
    cfg_file = tmp_path / "configs" / "config.json"
    monkeypatch.setenv("COMPRESTORE_CONFIG", str(cfg_file))

    cfg = AppConfig()
    saved = cfg.save()
    assert saved == cfg_file
    assert cfg_file.exists()

    cfg.train.lr = 1e-3
    cfg.restoration.widths = [8, 16, 8]
    cfg.save()

    cfg2 = AppConfig.load()
    assert cfg2.train.lr == 1e-3
    assert cfg2.restoration.widths == [8, 16, 8]
    assert cfg2.perception.kl_direction == "forward"


def test_missing_file_exits(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        AppConfig.load(tmp_path / "nope.json")
    assert e.value.code == 1
    assert "not found" in capsys.readouterr().err


def test_unknown_key_exits(tmp_path):
    path = tmp_path / "config.json"
    data = AppConfig().to_dict()
    data["train"]["nonsense"] = 1
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(SystemExit):
        AppConfig.load(path)


def test_dotted_get_and_set_coerce_types():
    cfg = AppConfig()
    assert cfg.get("train.batch_size") == 8
    assert cfg.set("train.batch_size", "16") == 16
    assert cfg.set("loss.lambda_freq", "0.5") == 0.5
    assert cfg.set("restoration.widths", "6,12,6") == [6, 12, 6]
    assert cfg.set("restoration.widths", "[6, 12, 24, 12, 6]") == [6, 12, 24, 12, 6]
    with pytest.raises(KeyError):
        cfg.get("train.nope")
    with pytest.raises(KeyError):
        cfg.set("train", "1")


def test_overrides_against_full_scale():
    cfg = AppConfig()
    diff = cfg.overrides_vs_full_scale()
    assert diff["perception.embed_dim"] == [128, 512]
    assert diff["restoration.widths"] == [[12, 24, 48, 24, 12], [24, 48, 96, 48, 24]]
    assert "loss.lambda_freq" not in diff
    assert AppConfig.full_scale().overrides_vs_full_scale() == {}


def test_shipped_config_matches_defaults():
    from pathlib import Path

    shipped = Path(__file__).resolve().parents[1] / "config" / "config.json"
    assert AppConfig.load(shipped) == AppConfig()
