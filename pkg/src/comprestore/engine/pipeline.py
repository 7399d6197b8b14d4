"""
Both training stages back to back: perception first, then the restorer
against the frozen perception checkpoint it just produced.

file: src/comprestore/engine/pipeline.py
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from comprestore.core.config import AppConfig
from comprestore.core.logger import get_logger
from comprestore.data.catalog import Catalog
from comprestore.data.dataset import DatasetManifest
from comprestore.engine.perception_trainer import PerceptionRun, train_stage1
from comprestore.engine.restoration_trainer import RestorationRun, train_stage2

log = get_logger("comprestore.train")


@dataclass
class PipelineRun:
    perception: PerceptionRun
    restoration: RestorationRun


def train_pipeline(
    cfg: AppConfig,
    manifest: DatasetManifest,
    catalog: Catalog,
    run_root: Path,
    variant: Optional[str] = None,
    progress: bool = True,
) -> PipelineRun:
    """Runs land in <run_root>/perception and <run_root>/restoration-<variant>."""
    run_root = Path(run_root)
    variant = variant or cfg.train.variant
    stage1 = train_stage1(cfg, manifest, catalog, run_root / "perception", progress=progress)
    log.info("Stage I done (%s); starting stage II for variant %s", stage1.param_sha256[:12], variant)
    stage2 = train_stage2(
        cfg,
        manifest,
        catalog,
        stage1.checkpoint,
        run_root / f"restoration-{variant}",
        variant=variant,
        progress=progress,
    )
    return PipelineRun(stage1, stage2)
