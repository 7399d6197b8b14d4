import io
import json
from contextlib import redirect_stdout
from pathlib import Path

import pytest

from comprestore.core.cli import main
from comprestore.engine.evaluation import EvalReport


def run_cli(args):
    buf = io.StringIO()
    code = 0
    with redirect_stdout(buf):
        try:
            code = main(args)
        except SystemExit as e:
            code = int(e.code) if isinstance(e.code, int) else 0
    return code, buf.getvalue()


@pytest.mark.slow
def test_two_stage_pipeline(tmp_path, tiny_cfg):
    cfg = str(tiny_cfg.save(tmp_path / "config.json"))
    runs = Path(tiny_cfg.paths.runs_dir)

    code, out = run_cli(["--config", cfg, "synth", "--num-scenes", "3", "-q"])
    assert code == 0, out

    code, out = run_cli(["--config", cfg, "train-perception", "-q"])
    assert code == 0, out
    p_ckpt = runs / "perception" / "perception.pt"
    assert p_ckpt.exists()
    run_json = json.loads((runs / "perception" / "run.json").read_text())
    assert run_json["stage"] == "perception"
    assert "perception.embed_dim" in run_json["overrides_vs_full_scale"]

    code, out = run_cli(["--config", cfg, "train-restoration", "--perception-ckpt", str(p_ckpt), "-q"])
    assert code == 0, out
    r_ckpt = runs / "restoration-full" / "restoration.pt"
    assert r_ckpt.exists()
    assert list((runs / "restoration-full").glob("restoration-full-*.jsonl"))

    code, out = run_cli(["--config", cfg, "eval", "--ckpt", str(r_ckpt), "--perception-ckpt", str(p_ckpt), "-q"])
    assert code == 0, out
    code, out = run_cli(["--config", cfg, "eval", "--ckpt", str(r_ckpt), "--perception-ckpt", str(p_ckpt),
                         "--oracle-mask", "-q"])
    assert code == 0, out
    predicted = EvalReport.load(runs / "restoration-full" / "eval_predicted.json")
    oracle = EvalReport.load(runs / "restoration-full" / "eval_oracle.json")
    assert len(predicted.results) == 43 and not predicted.partial
    assert oracle.mask_source == "oracle"

    img = Path(tiny_cfg.paths.data_root) / "unseen" / "rain+haze+blur+artifact"
    sample = sorted(img.glob("*.png"))[0]
    dump = tmp_path / "cond.json"
    code, out = run_cli(["--config", cfg, "restore", "--img", str(sample), "--ckpt", str(r_ckpt),
                         "--perception-ckpt", str(p_ckpt), "--mask", "10100101", "--out", str(tmp_path / "r.png"),
                         "--dump-conditioning", str(dump)])
    assert code == 0, out
    assert (tmp_path / "r.png").exists()
    assert json.loads(dump.read_text())["mask"] == [1, 0, 1, 0, 0, 1, 0, 1]

    code, out = run_cli(["--config", cfg, "perceive", "--img", str(sample), "--ckpt", str(p_ckpt), "--topk", "2"])
    assert code == 0
    assert len(json.loads(out)["mask"]) == 8

    code, out = run_cli(["report", str(runs / "restoration-full" / "eval_predicted.json"),
                         str(runs / "restoration-full" / "eval_oracle.json"), "--out", str(tmp_path / "results")])
    assert code == 0
    assert "oracle mask" in (tmp_path / "results" / "results.md").read_text()


@pytest.mark.slow
def test_ablation_variant(tmp_path, tiny_cfg, mini_dataset):
    from comprestore.data.catalog import enumerate_configs
    from comprestore.engine.ablation import ablate
    from comprestore.engine.perception_trainer import train_stage1

    catalog = enumerate_configs()
    p_run = train_stage1(tiny_cfg, mini_dataset, catalog, tmp_path / "p", progress=False)
    report = ablate(tiny_cfg, mini_dataset, catalog, p_run.checkpoint, "no_dc_correction", tmp_path / "abl", progress=False)
    assert report.variant == "no_dc_correction"
    assert (tmp_path / "abl" / "no_dc_correction" / "report.json").exists()


@pytest.mark.slow
def test_train_pipeline_pairs_checkpoints(tmp_path, tiny_cfg, mini_dataset):
    from comprestore.data.catalog import enumerate_configs
    from comprestore.engine.checkpoints import load_perception, load_restoration
    from comprestore.engine.pipeline import train_pipeline

    run = train_pipeline(tiny_cfg, mini_dataset, enumerate_configs(), tmp_path / "runs", progress=False)
    assert run.perception.checkpoint == tmp_path / "runs" / "perception" / "perception.pt"
    assert run.restoration.checkpoint == tmp_path / "runs" / "restoration-full" / "restoration.pt"

    _, meta = load_perception(run.perception.checkpoint)
    # refuses to load if stage II recorded a different perception hash
    load_restoration(run.restoration.checkpoint, perception_sha256=meta["param_sha256"])


@pytest.mark.slow
def test_train_command(tmp_path, tiny_cfg):
    cfg = str(tiny_cfg.save(tmp_path / "config.json"))
    assert run_cli(["--config", cfg, "synth", "--num-scenes", "3", "-q"])[0] == 0
    code, out = run_cli(["--config", cfg, "train", "--variant", "no_gate", "-q"])
    assert code == 0, out
    assert "Restoration checkpoint" in out
    assert (Path(tiny_cfg.paths.runs_dir) / "restoration-no_gate" / "restoration.pt").exists()
