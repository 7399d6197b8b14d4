"""
Grouped evaluation over the held-out scenes of every degraded configuration.

file: src/comprestore/engine/evaluation.py
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import torch
from tqdm import tqdm

from comprestore.core.logger import get_logger
from comprestore.data.catalog import Catalog, TaskConfig
from comprestore.data.dataset import DatasetManifest, load_image
from comprestore.engine.metrics import psnr_y, ssim_y
from comprestore.engine.restoration_trainer import condition_inputs
from comprestore.models.perception import PerceptionModel
from comprestore.models.restoration import Restorer

log = get_logger("comprestore.eval")

MASK_SOURCES = ("predicted", "oracle")

# (group name, split, order or None for every order)
GROUPS = [
    ("seen_single", "seen", 1),
    ("seen_double", "seen", 2),
    ("seen_triple", "seen", 3),
    ("overall_seen", "seen", None),
    ("unseen_double", "unseen", 2),
    ("unseen_triple", "unseen", 3),
    ("unseen_quad", "unseen", 4),
    ("overall_unseen", "unseen", None),
    ("all", None, None),
    ("quad", None, 4),
]
CSV_FIELDS = ["config", "split", "order", "scenes", "psnr", "ssim", "input_psnr", "input_ssim"]


@dataclass
class ConfigResult:
    config: str
    split: str
    order: int
    scenes: int
    psnr: float
    ssim: float
    input_psnr: float
    input_ssim: float


@dataclass
class EvalReport:
    results: List[ConfigResult]
    mask_source: str = "predicted"
    variant: str = "full"
    missing: List[str] = field(default_factory=list)
    meta: Dict[str, object] = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.missing)

    def members(self, split: Optional[str], order: Optional[int]) -> List[ConfigResult]:
        return [
            r for r in self.results
            if (split is None or r.split == split) and (order is None or r.order == order)
        ]

    def groups(self) -> Dict[str, Dict[str, float]]:
        """Arithmetic means of member configs; groups with no members are omitted."""
        out = {}
        for name, split, order in GROUPS:
            rows = self.members(split, order)
            if rows:
                out[name] = _mean_row(rows)
        return out

    def by_order(self) -> Dict[int, Dict[str, float]]:
        orders = sorted({r.order for r in self.results})
        return {o: _mean_row(self.members(None, o)) for o in orders}

    def to_dict(self) -> dict:
        return {
            "mask_source": self.mask_source,
            "variant": self.variant,
            "partial": self.partial,
            "missing": self.missing,
            "meta": self.meta,
            "groups": self.groups(),
            "by_order": {str(k): v for k, v in self.by_order().items()},
            "results": [asdict(r) for r in self.results],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for r in self.results:
            writer.writerow(asdict(r))
        return buf.getvalue()

    def save(self, out_dir: Path, stem: str = "report") -> Dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {"json": out_dir / f"{stem}.json", "csv": out_dir / f"{stem}.csv"}
        paths["json"].write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        paths["csv"].write_text(self.to_csv(), encoding="utf-8")
        return paths

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        return cls(
            results=[ConfigResult(**r) for r in data["results"]],
            mask_source=data.get("mask_source", "predicted"),
            variant=data.get("variant", "full"),
            missing=list(data.get("missing", [])),
            meta=dict(data.get("meta", {})),
        )

    @classmethod
    def load(cls, path: Path) -> "EvalReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _mean_row(rows: List[ConfigResult]) -> Dict[str, float]:
    return {
        "psnr": float(np.mean([r.psnr for r in rows])),
        "ssim": float(np.mean([r.ssim for r in rows])),
        "input_psnr": float(np.mean([r.input_psnr for r in rows])),
        "input_ssim": float(np.mean([r.input_ssim for r in rows])),
        "configs": len(rows),
    }


def _to_tensor(img: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(img)).float()


@torch.no_grad()
def evaluate_config(
    cfg: TaskConfig,
    scenes: List[str],
    manifest: DatasetManifest,
    perception: PerceptionModel,
    restorer: Restorer,
    mask_source: str = "predicted",
    batch_size: int = 8,
    pool: Optional[ThreadPoolExecutor] = None,
) -> ConfigResult:
    device = next(restorer.parameters()).device
    load = pool.map if pool is not None else map
    degraded = list(load(lambda s: load_image(manifest.path_of(s, cfg.name)), scenes))
    clean = list(load(lambda s: load_image(manifest.path_of(s, "clean")), scenes))
    soft = restorer.options.soft_mask
    psnrs, ssims, in_psnrs, in_ssims = [], [], [], []
    for start in range(0, len(scenes), batch_size):
        x = torch.stack([_to_tensor(d) for d in degraded[start:start + batch_size]]).to(device)
        y = torch.stack([_to_tensor(c) for c in clean[start:start + batch_size]]).to(device)
        mask, p = condition_inputs(perception, x, soft=soft and mask_source == "predicted")
        if mask_source == "oracle":
            mask = torch.tensor(cfg.label.bits, dtype=x.dtype, device=device).expand(x.shape[0], -1)
        pred = restorer.restore(x, mask, p)
        for i in range(x.shape[0]):
            psnrs.append(psnr_y(pred[i], y[i]))
            ssims.append(ssim_y(pred[i], y[i]))
            in_psnrs.append(psnr_y(x[i], y[i]))
            in_ssims.append(ssim_y(x[i], y[i]))
    return ConfigResult(
        config=cfg.name,
        split=cfg.split,
        order=cfg.order,
        scenes=len(scenes),
        psnr=float(np.mean(psnrs)),
        ssim=float(np.mean(ssims)),
        input_psnr=float(np.mean(in_psnrs)),
        input_ssim=float(np.mean(in_ssims)),
    )


def evaluate(
    perception: PerceptionModel,
    restorer: Restorer,
    manifest: DatasetManifest,
    catalog: Catalog,
    mask_source: str = "predicted",
    scene_split: str = "test",
    variant: str = "full",
    batch_size: int = 8,
    workers: int = 4,
    progress: bool = True,
) -> EvalReport:
    """Per-config PSNR/SSIM over the held-out scenes for all degraded configs."""
    if mask_source not in MASK_SOURCES:
        raise ValueError(f"mask_source must be one of {MASK_SOURCES}, got {mask_source!r}")
    scenes = manifest.scene_ids(scene_split)
    if not scenes:
        raise ValueError(f"no {scene_split!r} scenes in the manifest")
    perception.eval()
    restorer.eval()

    results, missing = [], []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for cfg in tqdm(catalog.degraded, desc=f"eval ({mask_source})", disable=not progress, leave=False):
            try:
                paths = [manifest.path_of(s, cfg.name) for s in scenes]
            except KeyError:
                missing.append(cfg.name)
                continue
            if not all(p.exists() for p in paths):
                missing.append(cfg.name)
                continue
            results.append(evaluate_config(cfg, scenes, manifest, perception, restorer, mask_source, batch_size, pool))

    if missing:
        log.warning("evaluation is partial: %d config(s) missing: %s", len(missing), ", ".join(missing))
    report = EvalReport(
        results=results,
        mask_source=mask_source,
        variant=variant,
        missing=missing,
        meta={"scenes": len(scenes), "scene_split": scene_split, "catalog_sha256": catalog.sha256},
    )
    groups = report.groups()
    for name in ("overall_seen", "overall_unseen", "all"):
        if name in groups:
            log.info("%s: %.2f dB / %.4f (input %.2f dB)", name, groups[name]["psnr"], groups[name]["ssim"],
                     groups[name]["input_psnr"])
    return report
