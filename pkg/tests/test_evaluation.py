import json

import pytest

from comprestore.engine.evaluation import GROUPS, ConfigResult, EvalReport
from comprestore.engine.report import ablation_table, grouped_table, render
from comprestore.engine.variants import VARIANTS, resolve_variant
from comprestore.core.errors import UnknownVariantError


def _report(catalog, offset=0.0, variant="full", mask_source="predicted", drop=()):
    results = [
        ConfigResult(
            config=c.name,
            split=c.split,
            order=c.order,
            scenes=2,
            psnr=30.0 - c.order + offset,
            ssim=0.9 - 0.01 * c.order,
            input_psnr=20.0 - c.order,
            input_ssim=0.7,
        )
        for c in catalog.degraded
        if c.name not in drop
    ]
    return EvalReport(results, mask_source=mask_source, variant=variant, missing=list(drop))


def test_groups_are_means_of_members(catalog):
    groups = _report(catalog).groups()
    assert set(groups) == {g for g, _, _ in GROUPS}
    assert groups["seen_single"]["psnr"] == pytest.approx(29.0)
    assert groups["unseen_quad"]["psnr"] == pytest.approx(26.0)
    assert groups["quad"] == groups["unseen_quad"]
    assert groups["overall_seen"]["configs"] == 21
    assert groups["overall_unseen"]["configs"] == 22
    assert groups["all"]["configs"] == 43
    seen = (8 * 29 + 9 * 28 + 4 * 27) / 21
    assert groups["overall_seen"]["psnr"] == pytest.approx(seen)


def test_partial_report_omits_empty_groups(catalog):
    quads = [c.name for c in catalog.degraded if c.order == 4]
    report = _report(catalog, drop=quads)
    assert report.partial
    assert "unseen_quad" not in report.groups()
    assert "quad" not in report.groups()


def test_save_and_load(tmp_path, catalog):
    report = _report(catalog, variant="no_gate")
    paths = report.save(tmp_path, stem="r")
    loaded = EvalReport.load(paths["json"])
    assert loaded.variant == "no_gate"
    assert loaded.groups() == report.groups()
    assert paths["csv"].read_text().splitlines()[0].startswith("config,split,order")
    assert json.loads(paths["json"].read_text())["by_order"]["4"]["configs"] == 6


def test_tables(catalog):
    a = _report(catalog)
    b = _report(catalog, offset=0.5, mask_source="oracle")
    table = grouped_table([a, b])
    assert "Degraded input" in table
    assert "full (oracle mask)" in table
    assert "29.50 / " in table
    assert ablation_table([a]).count("\n") == 3


def test_render_writes_outputs(tmp_path, catalog):
    paths = render([_report(catalog), _report(catalog, 1.0, variant="no_gate")], tmp_path / "out")
    assert paths["markdown"].read_text().startswith("# Restoration results")
    assert paths["plot"].stat().st_size > 0
    assert len(paths["csv"].read_text().splitlines()) == 1 + 2 * len(GROUPS)
    with pytest.raises(ValueError):
        render([], tmp_path)


def test_variants():
    assert len(VARIANTS) == 17
    assert resolve_variant("full").options.freq_branch
    assert not resolve_variant("no_freq_branch").options.freq_branch
    assert resolve_variant("no_freq_loss").freq_loss is False
    with pytest.raises(UnknownVariantError):
        resolve_variant("nope")
