"""
Stage I: train the perception model on aligned multi-task views.

Each step takes a batch of scenes; every scene contributes its K training-task
views cut from one shared window. Alignment is computed per scene over its K
views, classification over all views of the batch. The text side is frozen and
checked bit-for-bit before and after training.

file: src/comprestore/engine/perception_trainer.py
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import torch
from torch.utils.data import DataLoader
from tqdm import tqdm

from comprestore.core.config import AppConfig
from comprestore.core.errors import DivergenceError, FrozenParameterError
from comprestore.core.logger import get_logger
from comprestore.core.step_logger import StepLogger
from comprestore.data.catalog import Catalog, TaskConfig
from comprestore.data.dataset import AlignedTaskDataset, DatasetManifest
from comprestore.engine.checkpoints import param_hash, save_perception
from comprestore.engine.metrics import perception_metrics
from comprestore.engine.runtime import make_optimizer, resolve_device, seed_everything, write_run_manifest
from comprestore.losses.alignment import PerceptionCriterion, label_similarity
from comprestore.models.perception import PerceptionModel, build_backend, prompt_for

log = get_logger("comprestore.train")

CHECKPOINT_NAME = "perception.pt"


@dataclass
class PerceptionRun:
    model: PerceptionModel
    checkpoint: Path
    param_sha256: str
    history: List[Dict[str, float]] = field(default_factory=list)


def build_perception_model(cfg: AppConfig, tasks: Sequence[TaskConfig]) -> PerceptionModel:
    p = cfg.perception
    backend = build_backend(p.backend, p.embed_dim, p.input_size, p.vlm_model, cfg.train.seed)
    return PerceptionModel(backend, [prompt_for(t) for t in tasks])


def frozen_text_hash(model: PerceptionModel) -> str:
    """Hash over the cached prompt embeddings and any text-tower weights."""
    return param_hash(model, prefix="text_cache") + param_hash(model.backend, prefix="model.text")


@torch.no_grad()
def evaluate_perception(
    model: PerceptionModel,
    manifest: DatasetManifest,
    catalog: Catalog,
    crop_size: int,
    scene_split: str = "test",
    tasks: Optional[Sequence[TaskConfig]] = None,
    device: Optional[torch.device] = None,
    seed: int = 0,
) -> Dict[str, object]:
    """Multi-label metrics over aligned views of the given scenes."""
    device = device or next(model.parameters()).device
    ds = AlignedTaskDataset(manifest, catalog, crop_size, scene_split=scene_split, tasks=tasks, seed=seed)
    if len(ds) == 0:
        raise ValueError(f"no {scene_split!r} scenes in the manifest")
    model.eval()
    all_logits, all_labels = [], []
    for i in range(len(ds)):
        views, labels = ds[i]
        logits, _ = model(views.to(device))
        all_logits.append(logits.cpu())
        all_labels.append(labels)
    return perception_metrics(torch.cat(all_logits), torch.cat(all_labels))


def train_stage1(
    cfg: AppConfig,
    manifest: DatasetManifest,
    catalog: Catalog,
    run_dir: Path,
    epochs: Optional[int] = None,
    progress: bool = True,
) -> PerceptionRun:
    seed = cfg.train.seed
    seed_everything(seed)
    device = resolve_device(cfg.train.device)
    epochs = cfg.train.perception_epochs if epochs is None else epochs
    run_dir = Path(run_dir)

    tasks = catalog.training_tasks
    model = build_perception_model(cfg, tasks).to(device)
    dataset = AlignedTaskDataset(manifest, catalog, cfg.data.crop_size, scene_split="train", tasks=tasks, seed=seed)
    if len(dataset) == 0:
        raise ValueError("no training scenes in the manifest")
    loader = DataLoader(
        dataset,
        batch_size=cfg.train.batch_size,
        shuffle=True,
        num_workers=cfg.train.num_workers,
        generator=torch.Generator().manual_seed(seed),
    )
    similarity = label_similarity(dataset.labels).to(device)
    p = cfg.perception
    criterion = PerceptionCriterion(p.lambda_align, p.lambda_cls, p.temperature, p.alpha, p.kl_direction)
    optimizer, scheduler = make_optimizer(model.parameters(), cfg.train, epochs * len(loader))

    text_before = frozen_text_hash(model)
    write_run_manifest(
        run_dir,
        cfg,
        stage="perception",
        catalog_sha256=catalog.sha256,
        num_tasks=len(tasks),
        train_scenes=len(dataset),
    )
    log.info("Stage I: %d scenes x %d tasks, backend=%s d=%d, %d epochs on %s",
             len(dataset), len(tasks), p.backend, model.dim, epochs, device)

    history: List[Dict[str, float]] = []
    step = 0
    with StepLogger(run_dir, "perception") as steps:
        for epoch in range(epochs):
            dataset.set_epoch(epoch)
            model.train()
            running = {"l_align": 0.0, "l_cls": 0.0, "total": 0.0}
            for views, labels in tqdm(loader, desc=f"perception {epoch + 1}/{epochs}", disable=not progress, leave=False):
                b, k = views.shape[:2]
                views, labels = views.to(device), labels.to(device)
                logits, f_i = model(views.flatten(0, 1))
                logits, f_i = logits.view(b, k, -1), f_i.view(b, k, -1)
                text = model.text_embeddings()

                loss = logits.new_zeros(())
                parts = {"l_align": 0.0, "l_cls": 0.0, "total": 0.0}
                for s in range(b):
                    total, terms = criterion(logits[s], labels[s], f_i[s], text, similarity)
                    loss = loss + total / b
                    for key in parts:
                        parts[key] += terms[key] / b
                if not math.isfinite(float(loss.detach())):
                    raise DivergenceError(f"non-finite perception loss at epoch {epoch + 1}, step {step} ({parts})")

                optimizer.zero_grad(set_to_none=True)
                loss.backward()
                if cfg.train.grad_clip > 0:
                    torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.train.grad_clip)
                optimizer.step()
                if scheduler is not None:
                    scheduler.step()

                steps.log({"step": step, **parts})
                for key in running:
                    running[key] += parts[key] / len(loader)
                step += 1

            summary = {"epoch": epoch + 1, **running}
            if manifest.scene_ids("test"):
                metrics = evaluate_perception(model, manifest, catalog, cfg.data.crop_size, "test", tasks, device, seed)
                summary["test_bit_accuracy"] = metrics["bit_accuracy"]
            steps.log(summary)
            history.append(summary)
            log.info("epoch %d: loss %.4f (align %.4f, cls %.4f), held-out bit accuracy %s",
                     epoch + 1, running["total"], running["l_align"], running["l_cls"],
                     f"{summary['test_bit_accuracy']:.3f}" if "test_bit_accuracy" in summary else "n/a")

    if frozen_text_hash(model) != text_before:
        raise FrozenParameterError("text embeddings changed during perception training")

    ckpt_path = run_dir / CHECKPOINT_NAME
    digest = save_perception(ckpt_path, model.cpu(), cfg, catalog.sha256)
    return PerceptionRun(model=model.eval(), checkpoint=ckpt_path, param_sha256=digest, history=history)
