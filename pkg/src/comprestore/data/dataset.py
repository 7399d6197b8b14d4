"""
On-disk benchmark: manifest, generation, verification and torch datasets.

Layout: root/<split>/<config>/<scene>.png plus root/manifest.json.

file: src/comprestore/data/dataset.py
"""

from __future__ import annotations

import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import torch
from PIL import Image
from torch.utils.data import Dataset
from tqdm import tqdm

from comprestore.core.errors import ManifestError
from comprestore.core.logger import get_logger
from comprestore.data.catalog import Catalog, DegradationSpec, TaskConfig
from comprestore.data.synthesis import compose, crop, crop_window, derive_seed, plan_specs, procedural_scene

MANIFEST_NAME = "manifest.json"
IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


def to_uint8(img: np.ndarray) -> np.ndarray:
    """(3, H, W) floats in [0, 1] to (H, W, 3) uint8, rounding half to even."""
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8).transpose(1, 2, 0)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    return np.asarray(arr, dtype=np.float64).transpose(2, 0, 1) / 255.0


def png_bytes(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img)).save(buf, format="PNG", compress_level=6)
    return buf.getvalue()


def load_image(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return from_uint8(np.asarray(im.convert("RGB")))


def save_image(img: np.ndarray, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(png_bytes(img))


@dataclass
class SceneEntry:
    id: str
    source: str
    split: str


@dataclass
class FileEntry:
    scene: str
    config: str
    split: str
    path: str
    specs: List[dict] = field(default_factory=list)
    sha256: Optional[str] = None


@dataclass
class DatasetManifest:
    root: str
    seed: int
    scene_size: int
    catalog_sha256: str
    catalog_source: str
    scenes: List[SceneEntry]
    entries: List[FileEntry]
    version: int = 1

    def __post_init__(self):
        self._index = {(e.scene, e.config): e for e in self.entries}

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetManifest":
        data = dict(data)
        scenes = [SceneEntry(**s) for s in data.pop("scenes")]
        entries = [FileEntry(**e) for e in data.pop("entries")]
        return cls(scenes=scenes, entries=entries, **data)

    @classmethod
    def load(cls, root: Path) -> "DatasetManifest":
        path = Path(root) / MANIFEST_NAME
        try:
            manifest = cls.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except FileNotFoundError:
            raise ManifestError(f"no manifest at {path}; run `comprestore synth` first") from None
        except (json.JSONDecodeError, TypeError, KeyError) as e:
            raise ManifestError(f"manifest {path} is corrupt: {e}") from e
        # The tree may have been moved since generation.
        manifest.root = str(root)
        return manifest

    def save(self) -> Path:
        path = Path(self.root) / MANIFEST_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")
        return path

    def scene_ids(self, split: Optional[str] = None) -> List[str]:
        return [s.id for s in self.scenes if split is None or s.split == split]

    def entry(self, scene: str, config: str) -> FileEntry:
        return self._index[(scene, config)]

    def path_of(self, scene: str, config: str) -> Path:
        return Path(self.root) / self.entry(scene, config).path


def list_scene_sources(scene_dir: Optional[Path], num_scenes: int) -> List[str]:
    """Image paths from `scene_dir`, or procedural sources when no directory is given."""
    if scene_dir is None:
        return [f"procedural:{i}" for i in range(num_scenes)]
    files = sorted(p for p in Path(scene_dir).iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
    if not files:
        raise ManifestError(f"no images found in {scene_dir}")
    return [str(p) for p in files[:num_scenes]]


def load_scene(source: str, size: int) -> np.ndarray:
    """The clean scene as stored on disk (8-bit quantized, size x size)."""
    if source.startswith("procedural:"):
        img = procedural_scene(size, int(source.split(":", 1)[1]))
    else:
        with Image.open(source) as im:
            rgb = im.convert("RGB")
            side = min(rgb.size)
            left, top = (rgb.width - side) // 2, (rgb.height - side) // 2
            rgb = rgb.crop((left, top, left + side, top + side)).resize((size, size), Image.BICUBIC)
            img = from_uint8(np.asarray(rgb))
    return from_uint8(to_uint8(img))


def build_manifest(
    catalog: Catalog,
    root: Path,
    scene_sources: Sequence[str],
    seed: int,
    scene_size: int,
    test_fraction: float = 0.2,
) -> DatasetManifest:
    """Plans every (scene, config) file and samples its severities once."""
    rng = np.random.default_rng(derive_seed("partition", seed))
    order = rng.permutation(len(scene_sources))
    num_test = max(1, int(round(test_fraction * len(scene_sources)))) if len(scene_sources) > 1 else 0
    test_idx = set(order[:num_test].tolist())

    scenes = [
        SceneEntry(id=f"scene_{i:04d}", source=src, split="test" if i in test_idx else "train")
        for i, src in enumerate(scene_sources)
    ]
    entries = []
    for scene in scenes:
        for cfg in catalog.configs:
            specs = plan_specs(cfg, catalog.severity_ranges, derive_seed(seed, scene.id))
            entries.append(
                FileEntry(
                    scene=scene.id,
                    config=cfg.name,
                    split=cfg.split,
                    path=f"{cfg.split}/{cfg.name}/{scene.id}.png",
                    specs=[s.to_dict() for s in specs],
                )
            )
    return DatasetManifest(
        root=str(root),
        seed=seed,
        scene_size=scene_size,
        catalog_sha256=catalog.sha256,
        catalog_source=catalog.source,
        scenes=scenes,
        entries=entries,
    )


def render_entry(manifest: DatasetManifest, catalog: Catalog, entry: FileEntry, scene_img: np.ndarray) -> bytes:
    cfg = catalog.get(entry.config)
    specs = [DegradationSpec.from_dict(s) for s in entry.specs]
    degraded, _ = compose(scene_img, cfg, derive_seed(manifest.seed, entry.scene), specs=specs)
    return png_bytes(degraded)


def build_dataset(manifest: DatasetManifest, catalog: Catalog, workers: int = 1, progress: bool = True) -> Path:
    """Writes every image listed in `manifest` and the manifest itself (single writer)."""
    log = get_logger("comprestore.synth")
    if manifest.catalog_sha256 != catalog.sha256:
        raise ManifestError("manifest was planned against a different catalog")
    root = Path(manifest.root)
    scenes = {s.id: s for s in manifest.scenes}
    by_scene: Dict[str, List[FileEntry]] = {}
    for e in manifest.entries:
        by_scene.setdefault(e.scene, []).append(e)

    def work(scene_id: str) -> List[tuple]:
        scene_img = load_scene(scenes[scene_id].source, manifest.scene_size)
        return [(e, render_entry(manifest, catalog, e, scene_img)) for e in by_scene[scene_id]]

    log.info("Generating %d files for %d scenes under %s", len(manifest.entries), len(scenes), root)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = pool.map(work, list(by_scene))
        for rendered in tqdm(results, total=len(by_scene), disable=not progress, desc="synth"):
            for entry, data in rendered:
                path = root / entry.path
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_bytes(data)
                entry.sha256 = hashlib.sha256(data).hexdigest()
    manifest_path = manifest.save()
    log.info("Manifest written to %s", manifest_path)
    return manifest_path


def verify_dataset(manifest: DatasetManifest, catalog: Catalog) -> List[str]:
    """Checks catalog hash and per-file hashes; raises ManifestError listing mismatches."""
    if manifest.catalog_sha256 != catalog.sha256:
        raise ManifestError(
            f"catalog hash mismatch: manifest {manifest.catalog_sha256[:12]} vs catalog {catalog.sha256[:12]}"
        )
    pairs = {(e.scene, e.config) for e in manifest.entries}
    if len(pairs) != len(manifest.entries):
        raise ManifestError("manifest lists a (scene, config) pair more than once")
    expected = {(s.id, c.name) for s in manifest.scenes for c in catalog.configs}
    if pairs != expected:
        raise ManifestError(f"manifest is missing {len(expected - pairs)} (scene, config) pairs")
    bad = []
    for e in manifest.entries:
        path = Path(manifest.root) / e.path
        if not path.exists() or hashlib.sha256(path.read_bytes()).hexdigest() != e.sha256:
            bad.append(e.path)
    if bad:
        raise ManifestError(f"{len(bad)} file(s) differ from the manifest, first: {bad[0]}")
    return sorted(e.path for e in manifest.entries)


def label_with_clean_bit(cfg: TaskConfig) -> List[float]:
    """The 9-bit task label: 8 factor bits followed by the clean bit."""
    return [float(b) for b in cfg.label.bits] + [1.0 if cfg.is_clean else 0.0]


def _tensor(img: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(img)).float()


class AlignedTaskDataset(Dataset):
    """
    One item per scene: the K training-task variants of that scene, cut from
    one shared window. Returns images (K, 3, S, S) and labels (K, 9).
    """

    def __init__(
        self,
        manifest: DatasetManifest,
        catalog: Catalog,
        crop_size: int,
        scene_split: str = "train",
        tasks: Optional[Sequence[TaskConfig]] = None,
        seed: int = 0,
    ):
        self.manifest = manifest
        self.tasks = list(tasks) if tasks is not None else catalog.training_tasks
        self.scenes = manifest.scene_ids(scene_split)
        self.crop_size = crop_size
        self.seed = seed
        self.epoch = 0
        self.labels = torch.tensor([label_with_clean_bit(t) for t in self.tasks])

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.scenes)

    def __getitem__(self, idx: int):
        scene = self.scenes[idx]
        size = self.manifest.scene_size
        window = crop_window(size, size, self.crop_size, scene, derive_seed(self.seed, self.epoch))
        views = [crop(load_image(self.manifest.path_of(scene, t.name)), window) for t in self.tasks]
        return torch.stack([_tensor(v) for v in views]), self.labels.clone()


class RestorationPairs(Dataset):
    """(degraded, clean, mask) pairs over scenes of one split and a set of configs."""

    def __init__(
        self,
        manifest: DatasetManifest,
        configs: Iterable[TaskConfig],
        scene_split: str = "train",
        crop_size: Optional[int] = None,
        seed: int = 0,
    ):
        self.manifest = manifest
        self.configs = list(configs)
        self.scenes = manifest.scene_ids(scene_split)
        self.items = [(s, c) for s in self.scenes for c in self.configs]
        self.crop_size = crop_size
        self.seed = seed
        self.epoch = 0

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, idx: int) -> dict:
        scene, cfg = self.items[idx]
        degraded = load_image(self.manifest.path_of(scene, cfg.name))
        clean = load_image(self.manifest.path_of(scene, "clean"))
        window = (0, 0, self.manifest.scene_size)
        if self.crop_size:
            size = self.manifest.scene_size
            # one window per scene and epoch, shared by all configs of that scene
            window = crop_window(size, size, self.crop_size, scene, derive_seed("pairs", self.seed, self.epoch))
            degraded, clean = crop(degraded, window), crop(clean, window)
        return {
            "degraded": _tensor(degraded),
            "clean": _tensor(clean),
            "mask": torch.tensor(cfg.label.bits, dtype=torch.float32),
            "config": cfg.name,
            "scene": scene,
            # identifies the clean crop, used to cache its smoothed target
            "target_key": f"{scene}@{window[0]},{window[1]},{window[2]}",
        }
