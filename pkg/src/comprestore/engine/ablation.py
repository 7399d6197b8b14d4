"""
Ablation runs: train one variant under the shared seed, then evaluate it.

file: src/comprestore/engine/ablation.py
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from comprestore.core.config import AppConfig
from comprestore.core.logger import get_logger
from comprestore.data.catalog import Catalog
from comprestore.data.dataset import DatasetManifest
from comprestore.engine.checkpoints import load_perception
from comprestore.engine.evaluation import EvalReport, evaluate
from comprestore.engine.restoration_trainer import train_stage2
from comprestore.engine.runtime import resolve_device
from comprestore.engine.variants import resolve_variant

log = get_logger("comprestore.ablate")


def ablate(
    cfg: AppConfig,
    manifest: DatasetManifest,
    catalog: Catalog,
    perception_ckpt: Path,
    variant: str,
    run_root: Path,
    epochs: Optional[int] = None,
    progress: bool = True,
) -> EvalReport:
    spec = resolve_variant(variant)
    run_dir = Path(run_root) / spec.name
    log.info("Ablation %s: %s", spec.name, spec.description)

    run = train_stage2(cfg, manifest, catalog, perception_ckpt, run_dir, variant=spec.name, epochs=epochs, progress=progress)
    device = resolve_device(cfg.train.device)
    perception, _ = load_perception(perception_ckpt, device=str(device))
    report = evaluate(
        perception,
        run.model.to(device),
        manifest,
        catalog,
        variant=spec.name,
        batch_size=cfg.train.batch_size,
        progress=progress,
    )
    report.meta["description"] = spec.description
    report.meta["checkpoint"] = str(run.checkpoint)
    report.save(run_dir, stem="report")
    return report
