"""
Shared run plumbing: device selection, seeding, optimizers and run.json.

file: src/comprestore/engine/runtime.py
"""

from __future__ import annotations

import json
import random
import subprocess
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import torch

from comprestore import __version__
from comprestore.core.config import AppConfig, TrainConfig
from comprestore.core.logger import get_logger

log = get_logger("comprestore.runtime")


def resolve_device(name: str = "auto") -> torch.device:
    if name == "auto":
        return torch.device("cuda" if torch.cuda.is_available() else "cpu")
    return torch.device(name)


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def git_hash() -> Optional[str]:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5, check=True)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None


def make_optimizer(params: Iterable[torch.nn.Parameter], train: TrainConfig, total_steps: int):
    """AdamW plus an optional per-step cosine schedule; returns (optimizer, scheduler or None)."""
    optimizer = torch.optim.AdamW([p for p in params if p.requires_grad], lr=train.lr, weight_decay=train.weight_decay)
    if train.lr_schedule == "cosine":
        return optimizer, torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=max(1, total_steps))
    if train.lr_schedule != "constant":
        raise ValueError(f"unknown lr schedule {train.lr_schedule!r} (expected 'constant' or 'cosine')")
    return optimizer, None


def write_run_manifest(run_dir: Path, cfg: AppConfig, stage: str, **extra) -> Path:
    """Writes run.json: resolved config, seeds, hashes and the overrides against the full-scale preset."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    record = {
        "stage": stage,
        "version": __version__,
        "created": datetime.now().isoformat(timespec="seconds"),
        "git": git_hash(),
        "seeds": {"train": cfg.train.seed, "data": cfg.data.seed},
        "config": cfg.to_dict(),
        "overrides_vs_full_scale": cfg.overrides_vs_full_scale(),
        **extra,
    }
    path = run_dir / "run.json"
    path.write_text(json.dumps(record, indent=2, default=str), encoding="utf-8")
    log.info("Wrote %s", path)
    return path
