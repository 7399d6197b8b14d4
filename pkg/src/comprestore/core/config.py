"""
Configuration management for comprestore.

The config.json file is the single source of truth for a run. This module fails
with an error if the file is not found, is corrupt, or carries unknown keys.
Every field has a desk-scale default, so `AppConfig()` is itself a valid config.

Default location: ./config/config.json (overridable by COMPRESTORE_CONFIG)
"""

from __future__ import annotations

import json
import os
import sys
import typing
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, List


def _default_config_path() -> Path:
    """Determines the path for the configuration file."""
    env = os.environ.get("COMPRESTORE_CONFIG")
    if env:
        return Path(env).expanduser()
    return Path.cwd() / "config" / "config.json"


@dataclass
class PathsConfig:
    data_root: str = "data/mini"
    runs_dir: str = "runs"
    # Empty means the catalog shipped inside the package.
    catalog: str = ""


@dataclass
class DataConfig:
    num_scenes: int = 200
    scene_size: int = 96
    crop_size: int = 64
    test_fraction: float = 0.2
    seed: int = 0


@dataclass
class PerceptionConfig:
    backend: str = "tiny"
    embed_dim: int = 128
    input_size: int = 64
    vlm_model: str = "openai/clip-vit-base-patch32"
    temperature: float = 0.07
    alpha: float = 2.0
    lambda_align: float = 0.1
    lambda_cls: float = 0.9
    # "forward" = KL(P || Q) with P the model distribution; "reverse" = KL(Q || P)
    kl_direction: str = "forward"


@dataclass
class RestorationConfig:
    widths: List[int] = field(default_factory=lambda: [12, 24, 48, 24, 12])
    blocks_per_stage: int = 2
    token_dim: int = 256
    token_heads: int = 4
    freq_experts: int = 2
    freq_rank: int = 4
    dc_eta: float = 0.1
    window_size: int = 8
    head_dim: int = 12
    expert_expansion: float = 2.0
    base_width: int = 16


@dataclass
class TrainConfig:
    perception_epochs: int = 10
    restoration_epochs: int = 10
    batch_size: int = 8
    lr: float = 2e-4
    weight_decay: float = 0.02
    lr_schedule: str = "constant"
    grad_clip: float = 1.0
    mask_overload_prob: float = 0.05
    seed: int = 0
    num_workers: int = 0
    device: str = "auto"
    variant: str = "full"


@dataclass
class LossConfig:
    lambda_freq: float = 0.1
    lambda_base: float = 0.1
    freq_center_ratio: float = 0.2
    gf_radius: int = 15
    gf_eps: float = 1e-3


@dataclass
class AppConfig:
    """Main configuration class. Values are loaded from config.json."""
    paths: PathsConfig = field(default_factory=PathsConfig)
    data: DataConfig = field(default_factory=DataConfig)
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    restoration: RestorationConfig = field(default_factory=RestorationConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    logging_level: str = "info"

    @classmethod
    def from_dict(cls, data: dict) -> "AppConfig":
        data = dict(data)
        sections = {}
        for f in fields(cls):
            if f.name in data and is_dataclass(f.default_factory):
                sections[f.name] = f.default_factory(**data.pop(f.name))
        return cls(**sections, **data)

    @classmethod
    def load(cls, path: Path | None = None) -> "AppConfig":
        """Loads configuration from JSON file. Exits if the file does not exist."""
        cfg_path = Path(path) if path else _default_config_path()
        try:
            return cls.from_dict(json.loads(cfg_path.read_text(encoding="utf-8")))
        except FileNotFoundError:
            print(f"❌ Error: Configuration file not found at '{cfg_path}'.", file=sys.stderr)
            print("   Create one with `comprestore config init` or set COMPRESTORE_CONFIG.", file=sys.stderr)
            sys.exit(1)
        except (json.JSONDecodeError, TypeError, KeyError) as e:
            print(f"❌ Error: Configuration file at '{cfg_path}' is corrupted or has unknown keys.", file=sys.stderr)
            print(f"   Please ensure the file is valid. Details: {e}", file=sys.stderr)
            sys.exit(1)

    def save(self, path: Path | None = None) -> Path:
        """Saves the current configuration to a JSON file."""
        cfg_path = Path(path) if path else _default_config_path()
        cfg_path.parent.mkdir(parents=True, exist_ok=True)
        with cfg_path.open("w", encoding="utf-8") as f:
            json.dump(asdict(self), f, indent=2, ensure_ascii=False)
        return cfg_path

    def to_dict(self) -> dict:
        return asdict(self)

    def get(self, key: str) -> Any:
        """Returns the value at a dotted key such as 'train.lr'."""
        node: Any = self
        for part in key.split("."):
            if not is_dataclass(node) or part not in {f.name for f in fields(node)}:
                raise KeyError(key)
            node = getattr(node, part)
        return node

    def set(self, key: str, raw: str) -> Any:
        """Coerces `raw` to the declared field type and assigns it at a dotted key."""
        *parents, leaf = key.split(".")
        node: Any = self
        for part in parents:
            node = getattr(node, part, None)
            if not is_dataclass(node):
                raise KeyError(key)
        hints = typing.get_type_hints(type(node))
        if leaf not in hints or is_dataclass(getattr(node, leaf)):
            raise KeyError(key)
        value = _coerce(raw, hints[leaf])
        setattr(node, leaf, value)
        return value

    @classmethod
    def full_scale(cls) -> "AppConfig":
        """Settings matching the full-size training protocol."""
        cfg = cls()
        cfg.data = replace(cfg.data, scene_size=320, crop_size=256)
        cfg.perception = replace(cfg.perception, backend="vlm", embed_dim=512, input_size=224)
        cfg.restoration = replace(cfg.restoration, widths=[24, 48, 96, 48, 24])
        cfg.train = replace(cfg.train, perception_epochs=100, restoration_epochs=100)
        return cfg

    def overrides_vs_full_scale(self) -> dict:
        """Flat {dotted_key: [ours, full]} for every field that differs from the full-scale preset."""
        ours, full = _flatten(asdict(self)), _flatten(asdict(AppConfig.full_scale()))
        return {k: [ours[k], full[k]] for k in ours if ours[k] != full.get(k)}

    @property
    def path(self) -> Path:
        """Returns the path to the configuration file."""
        return _default_config_path()


def _coerce(raw: str, tp: Any) -> Any:
    if tp is bool:
        if raw.lower() in {"1", "true", "yes", "on"}:
            return True
        if raw.lower() in {"0", "false", "no", "off"}:
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if tp in (int, float, str):
        return tp(raw)
    if typing.get_origin(tp) in (list, List):
        (item,) = typing.get_args(tp)
        parsed = json.loads(raw) if raw.strip().startswith("[") else raw.split(",")
        return [item(v) for v in parsed]
    raise ValueError(f"unsupported field type {tp!r}")


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}."))
        else:
            out[f"{prefix}{k}"] = v
    return out
