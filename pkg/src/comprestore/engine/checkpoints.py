"""
Checkpoint files for both training stages.

A checkpoint is one torch.save'd dict: the state dict plus everything needed to
rebuild the module (backend, widths, options) and the hashes that tie a
restoration checkpoint to the exact perception weights it was trained against.

file: src/comprestore/engine/checkpoints.py
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Optional, Tuple

import torch
import torch.nn as nn

from comprestore.core.config import AppConfig, RestorationConfig
from comprestore.core.errors import CheckpointError
from comprestore.core.logger import get_logger
from comprestore.models.perception import PerceptionModel, build_backend
from comprestore.models.restoration import ModelOptions, Restorer

log = get_logger("comprestore.checkpoints")

FORMAT_VERSION = 1


def param_hash(module: nn.Module, prefix: str = "") -> str:
    """sha256 over the state dict (sorted keys, raw bytes); optionally restricted to a key prefix."""
    h = hashlib.sha256()
    for key, value in sorted(module.state_dict().items()):
        if not key.startswith(prefix):
            continue
        h.update(key.encode())
        h.update(value.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def _load(path: Path, kind: str, device: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"{kind} checkpoint not found: {path}")
    try:
        ckpt = torch.load(path, map_location=device, weights_only=True)
    except Exception as e:  # torch raises several unrelated types for corrupt files
        raise CheckpointError(f"cannot read {kind} checkpoint {path}: {e}") from e
    if ckpt.get("kind") != kind:
        raise CheckpointError(f"{path} is a {ckpt.get('kind')!r} checkpoint, expected {kind!r}")
    return ckpt


def save_perception(path: Path, model: PerceptionModel, cfg: AppConfig, catalog_sha256: str) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    digest = param_hash(model)
    torch.save(
        {
            "kind": "perception",
            "format": FORMAT_VERSION,
            "backend": model.backend.name,
            "embed_dim": model.dim,
            "input_size": model.backend.input_size,
            "vlm_model": cfg.perception.vlm_model,
            "seed": cfg.train.seed,
            "prompts": model.prompts,
            "catalog_sha256": catalog_sha256,
            "config": cfg.to_dict(),
            "param_sha256": digest,
            "state_dict": model.state_dict(),
        },
        path,
    )
    log.info("Saved perception checkpoint %s (sha256 %s)", path, digest[:12])
    return digest


def load_perception(path: Path, device: str = "cpu") -> Tuple[PerceptionModel, dict]:
    ckpt = _load(path, "perception", device)
    backend = build_backend(ckpt["backend"], ckpt["embed_dim"], ckpt["input_size"], ckpt["vlm_model"], ckpt["seed"])
    model = PerceptionModel(backend, ckpt["prompts"])
    model.load_state_dict(ckpt["state_dict"])
    model.to(device).eval()
    if param_hash(model) != ckpt["param_sha256"]:
        raise CheckpointError(f"perception checkpoint {path} does not match its recorded parameter hash")
    return model, ckpt


def save_restoration(
    path: Path,
    model: Restorer,
    cfg: AppConfig,
    variant: str,
    perception_sha256: str,
) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    digest = param_hash(model)
    torch.save(
        {
            "kind": "restoration",
            "format": FORMAT_VERSION,
            "variant": variant,
            **model.describe(),
            "perception_sha256": perception_sha256,
            "config": cfg.to_dict(),
            "param_sha256": digest,
            "state_dict": model.state_dict(),
        },
        path,
    )
    log.info("Saved restoration checkpoint %s (variant %s, sha256 %s)", path, variant, digest[:12])
    return digest


def load_restoration(
    path: Path,
    device: str = "cpu",
    perception_sha256: Optional[str] = None,
) -> Tuple[Restorer, dict]:
    """Rebuilds the restorer; with perception_sha256 given, refuses a mismatched pairing."""
    ckpt = _load(path, "restoration", device)
    if perception_sha256 is not None and ckpt["perception_sha256"] != perception_sha256:
        raise CheckpointError(
            f"restoration checkpoint {path} was trained against perception "
            f"{ckpt['perception_sha256'][:12]}, got {perception_sha256[:12]}"
        )
    model = Restorer(
        ckpt["embed_dim"],
        RestorationConfig(**ckpt["restoration"]),
        ModelOptions(**ckpt["options"]),
    )
    model.load_state_dict(ckpt["state_dict"])
    return model.to(device).eval(), ckpt
