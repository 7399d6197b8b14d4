import io
import json
from contextlib import redirect_stdout

import pytest

from comprestore.core.cli import main
from comprestore.engine.evaluation import ConfigResult, EvalReport


def run_cli(args):
    buf = io.StringIO()
    code = 0
    with redirect_stdout(buf):
        try:
            code = main(args)
        except SystemExit as e:
            code = int(e.code) if isinstance(e.code, int) else 0
    return code, buf.getvalue()


@pytest.fixture
def cfg_file(tmp_path, tiny_cfg):
    return str(tiny_cfg.save(tmp_path / "config.json"))


def test_cli_help_shows_when_no_args():
    code, out = run_cli([])
    assert code == 0
    assert "Available commands" in out


def test_cli_version_flag():
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0


def test_config_help_without_subcommand():
    code, out = run_cli(["config"])
    assert code == 0
    assert "init" in out


def test_config_init_get_set(tmp_path, capsys):
    path = str(tmp_path / "c" / "config.json")
    code, out = run_cli(["--config", path, "config", "init"])
    assert code == 0 and "✅" in out
    code, out = run_cli(["--config", path, "config", "init"])
    assert code == 1 and "already exists" in capsys.readouterr().err

    code, out = run_cli(["--config", path, "config", "set", "train.lr", "0.001"])
    assert code == 0
    code, out = run_cli(["--config", path, "config", "get", "train.lr"])
    assert out.strip() == "0.001"
    code, out = run_cli(["--config", path, "config", "get", "restoration.widths"])
    assert json.loads(out) == [12, 24, 48, 24, 12]

    code, out = run_cli(["--config", path, "config", "get", "train.missing"])
    assert code == 1 and "Unknown config key" in capsys.readouterr().err
    code, out = run_cli(["--config", path, "config", "set", "train.batch_size", "many"])
    assert code == 2


def test_config_init_full_scale(tmp_path):
    path = str(tmp_path / "full.json")
    run_cli(["--config", path, "config", "init", "--full-scale"])
    code, out = run_cli(["--config", path, "config", "list"])
    assert json.loads(out)["perception"]["backend"] == "vlm"


def test_missing_config_file_exits(tmp_path):
    code, _ = run_cli(["--config", str(tmp_path / "nope.json"), "config", "list"])
    assert code == 1


def test_synth_and_verify(tmp_path, cfg_file):
    out_dir = str(tmp_path / "ds")
    code, out = run_cli(["--config", cfg_file, "synth", "--num-scenes", "2", "--out", out_dir, "--workers", "1", "-q"])
    assert code == 0, out
    assert "Wrote 88 images" in out
    code, out = run_cli(["--config", cfg_file, "synth", "--out", out_dir, "--verify"])
    assert code == 0 and "88 files match" in out


def test_verify_without_dataset_fails(tmp_path, cfg_file, capsys):
    code, out = run_cli(["--config", cfg_file, "synth", "--out", str(tmp_path / "empty"), "--verify"])
    assert code == 1
    assert "❌" not in out
    assert "❌" in capsys.readouterr().err


def test_perceive_with_missing_checkpoint(tmp_path, cfg_file, capsys):
    code, out = run_cli(["--config", cfg_file, "perceive", "--img", "x.png", "--ckpt", str(tmp_path / "p.pt")])
    assert code == 1
    assert "checkpoint not found" in capsys.readouterr().err


def test_unknown_variant_is_rejected_by_parser(cfg_file):
    with pytest.raises(SystemExit) as e:
        main(["--config", cfg_file, "ablate", "--variant", "bogus", "--perception-ckpt", "p.pt"])
    assert e.value.code == 2


def test_report_command(tmp_path, catalog):
    results = [ConfigResult(c.name, c.split, c.order, 1, 25.0, 0.8, 20.0, 0.7) for c in catalog.degraded]
    paths = EvalReport(results).save(tmp_path, "eval_predicted")
    code, out = run_cli(["report", str(paths["json"]), "--out", str(tmp_path / "results")])
    assert code == 0
    assert (tmp_path / "results" / "results.md").exists()
    assert (tmp_path / "results" / "psnr_vs_order.png").exists()


def test_report_with_missing_file(tmp_path):
    code, out = run_cli(["report", str(tmp_path / "missing.json")])
    assert code == 1
