"""
Helpers shared by the command handlers: config resolution, dataset opening
and the uniform failure path.

file: src/comprestore/commands/common.py
"""

from __future__ import annotations

import os
import sys
from pathlib import Path
from typing import NoReturn, Optional, Tuple

import numpy as np
import torch

from comprestore.core.config import AppConfig, _default_config_path
from comprestore.core.logger import get_logger, set_default_level
from comprestore.data.catalog import Catalog, enumerate_configs
from comprestore.data.dataset import DatasetManifest, load_image

# Library errors a command reports as a one-line failure instead of a traceback.
EXPECTED_ERRORS = (ValueError, RuntimeError, KeyError, FileNotFoundError)


def fail(log, message: str, exc: Optional[BaseException] = None) -> NoReturn:
    print(f"❌ {message}", file=sys.stderr)
    if exc is not None:
        log.error("%s (%s: %s)", message, type(exc).__name__, exc)
    else:
        log.error(message)
    sys.exit(1)


def load_config(args) -> AppConfig:
    """
    --config or COMPRESTORE_CONFIG must point to an existing file; otherwise
    ./config/config.json is used when present, else the built-in defaults.
    """
    explicit = getattr(args, "config", None)
    if explicit or os.environ.get("COMPRESTORE_CONFIG"):
        cfg = AppConfig.load(Path(explicit) if explicit else None)
    elif _default_config_path().exists():
        cfg = AppConfig.load()
    else:
        get_logger("comprestore.cli").info("No config file found; using built-in defaults")
        cfg = AppConfig()
    if getattr(args, "seed", None) is not None:
        cfg.train.seed = args.seed
        cfg.data.seed = args.seed
    if getattr(args, "device", None):
        cfg.train.device = args.device
    set_default_level(cfg.logging_level)
    return cfg


def load_catalog(cfg: AppConfig) -> Catalog:
    return enumerate_configs(Path(cfg.paths.catalog) if cfg.paths.catalog else None)


def open_dataset(cfg: AppConfig, data_dir: Optional[str]) -> Tuple[DatasetManifest, Catalog]:
    catalog = load_catalog(cfg)
    manifest = DatasetManifest.load(Path(data_dir or cfg.paths.data_root))
    if manifest.catalog_sha256 != catalog.sha256:
        raise ValueError(
            f"dataset {manifest.root} was generated from a different catalog "
            f"({manifest.catalog_sha256[:12]} vs {catalog.sha256[:12]})"
        )
    return manifest, catalog


def read_image(path: str) -> torch.Tensor:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"image not found: {p}")
    return torch.from_numpy(np.ascontiguousarray(load_image(p))).float()


def default_run_dir(cfg: AppConfig, name: str) -> Path:
    return Path(cfg.paths.runs_dir) / name
