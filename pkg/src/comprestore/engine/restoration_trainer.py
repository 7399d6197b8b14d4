"""
Stage II: train the restoration network against a frozen perception model.

The perception model runs under no_grad on every degraded batch; its predicted
masks (optionally overloaded) and embeddings condition the restorer. Its
parameter hash is checked after training and any drift aborts the run.

file: src/comprestore/engine/restoration_trainer.py
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import torch
from torch.utils.data import DataLoader
from tqdm import tqdm

from comprestore.core.config import AppConfig
from comprestore.core.errors import DivergenceError, FrozenParameterError
from comprestore.core.logger import get_logger
from comprestore.core.step_logger import StepLogger
from comprestore.data.catalog import NUM_FACTORS, Catalog
from comprestore.data.dataset import DatasetManifest, RestorationPairs
from comprestore.data.synthesis import derive_seed
from comprestore.engine.checkpoints import load_perception, param_hash, save_restoration
from comprestore.engine.runtime import make_optimizer, resolve_device, seed_everything, write_run_manifest
from comprestore.engine.variants import Variant, resolve_variant
from comprestore.losses.restoration import RestorationCriterion, mask_overload
from comprestore.models.perception import PerceptionModel
from comprestore.models.restoration import Restorer

log = get_logger("comprestore.train")

CHECKPOINT_NAME = "restoration.pt"


@dataclass
class RestorationRun:
    model: Restorer
    checkpoint: Path
    variant: str
    history: List[Dict[str, float]] = field(default_factory=list)


def freeze(model: PerceptionModel) -> PerceptionModel:
    for p in model.parameters():
        p.requires_grad_(False)
    return model.eval()


@torch.no_grad()
def condition_inputs(
    perception: PerceptionModel,
    degraded: torch.Tensor,
    soft: bool = False,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """(mask, p) for a batch: thresholded mask, or sigmoid probabilities when soft."""
    logits, mask, p = perception.perceive(degraded)
    if soft:
        return torch.sigmoid(logits[:, :NUM_FACTORS]), p
    return mask.to(degraded.dtype), p


def train_stage2(
    cfg: AppConfig,
    manifest: DatasetManifest,
    catalog: Catalog,
    perception_ckpt: Path,
    run_dir: Path,
    variant: Optional[str] = None,
    epochs: Optional[int] = None,
    progress: bool = True,
) -> RestorationRun:
    seed = cfg.train.seed
    seed_everything(seed)
    device = resolve_device(cfg.train.device)
    epochs = cfg.train.restoration_epochs if epochs is None else epochs
    spec: Variant = resolve_variant(variant or cfg.train.variant)
    run_dir = Path(run_dir)

    perception, meta = load_perception(perception_ckpt, device="cpu")
    if meta["catalog_sha256"] != catalog.sha256:
        log.warning("perception checkpoint was trained on catalog %s, dataset uses %s",
                    meta["catalog_sha256"][:12], catalog.sha256[:12])
    perception = freeze(perception).to(device)
    frozen_hash = meta["param_sha256"]

    model = Restorer(perception.dim, cfg.restoration, spec.options).to(device)
    dataset = RestorationPairs(manifest, catalog.by_split("seen"), "train", cfg.data.crop_size, seed)
    if len(dataset) == 0:
        raise ValueError("no seen-config training pairs in the manifest")
    loader = DataLoader(
        dataset,
        batch_size=cfg.train.batch_size,
        shuffle=True,
        num_workers=cfg.train.num_workers,
        generator=torch.Generator().manual_seed(seed),
        drop_last=len(dataset) > cfg.train.batch_size,
    )
    lc = cfg.loss
    criterion = RestorationCriterion(
        lambda_freq=lc.lambda_freq if spec.freq_loss else 0.0,
        lambda_base=lc.lambda_base if spec.base_loss else 0.0,
        center_ratio=lc.freq_center_ratio,
        gf_radius=lc.gf_radius,
        gf_eps=lc.gf_eps,
    )
    overload_prob = cfg.train.mask_overload_prob if spec.mask_overload else 0.0
    optimizer, scheduler = make_optimizer(model.parameters(), cfg.train, epochs * len(loader))

    write_run_manifest(
        run_dir,
        cfg,
        stage="restoration",
        variant=spec.name,
        catalog_sha256=catalog.sha256,
        perception_checkpoint=str(perception_ckpt),
        perception_sha256=frozen_hash,
        train_pairs=len(dataset),
    )
    log.info("Stage II (%s): %d pairs, widths=%s, %d epochs on %s",
             spec.name, len(dataset), cfg.restoration.widths, epochs, device)

    history: List[Dict[str, float]] = []
    step = 0
    with StepLogger(run_dir, f"restoration-{spec.name}") as steps:
        for epoch in range(epochs):
            dataset.set_epoch(epoch)
            model.train()
            running = {"l1": 0.0, "l_freq": 0.0, "l_base": 0.0, "total": 0.0}
            for batch in tqdm(loader, desc=f"restoration {epoch + 1}/{epochs}", disable=not progress, leave=False):
                degraded = batch["degraded"].to(device)
                clean = batch["clean"].to(device)
                mask, p = condition_inputs(perception, degraded, soft=spec.options.soft_mask)
                if overload_prob > 0 and not spec.options.soft_mask:
                    mask = mask_overload(mask, derive_seed("overload", seed, step), overload_prob)

                out = model(degraded, mask, p)
                loss, terms = criterion(out.output, out.base, clean, batch["target_key"])
                if not math.isfinite(terms["total"]):
                    raise DivergenceError(f"non-finite restoration loss at epoch {epoch + 1}, step {step} ({terms})")

                optimizer.zero_grad(set_to_none=True)
                loss.backward()
                if cfg.train.grad_clip > 0:
                    torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.train.grad_clip)
                optimizer.step()
                if scheduler is not None:
                    scheduler.step()

                steps.log({"step": step, **terms})
                for key in running:
                    running[key] += terms[key] / len(loader)
                step += 1

            summary = {"epoch": epoch + 1, **running}
            steps.log(summary)
            history.append(summary)
            log.info("epoch %d: loss %.4f (l1 %.4f, freq %.4f, base %.4f)",
                     epoch + 1, running["total"], running["l1"], running["l_freq"], running["l_base"])

    if any(p.grad is not None for p in perception.parameters()) or param_hash(perception.cpu()) != frozen_hash:
        raise FrozenParameterError("perception parameters changed during restoration training")

    ckpt_path = run_dir / CHECKPOINT_NAME
    save_restoration(ckpt_path, model.cpu(), cfg, spec.name, frozen_hash)
    return RestorationRun(model=model.eval(), checkpoint=ckpt_path, variant=spec.name, history=history)
