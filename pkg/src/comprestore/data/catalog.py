"""
Degradation factors, task configurations and the configuration catalog.

The catalog is a JSON file (not code) so the benchmark can be swapped without
touching the generator. The packaged default lists 1 clean, 21 seen and 22
unseen configurations.

file: src/comprestore/data/catalog.py
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from comprestore.core.errors import CatalogError

# Canonical order: also the order labels are written and factors are applied.
FACTORS: Tuple[str, ...] = (
    "rain",
    "snow",
    "haze",
    "low_light",
    "over_exposure",
    "blur",
    "noise",
    "artifact",
)
NUM_FACTORS = len(FACTORS)
FACTOR_INDEX: Dict[str, int] = {name: i for i, name in enumerate(FACTORS)}

GLOBAL_FACTORS: Tuple[str, ...] = ("haze", "low_light", "over_exposure")
SPATIAL_FACTORS: Tuple[str, ...] = ("rain", "snow", "blur", "noise", "artifact")
GLOBAL_INDICES: Tuple[int, ...] = tuple(FACTOR_INDEX[f] for f in GLOBAL_FACTORS)
SPATIAL_INDICES: Tuple[int, ...] = tuple(FACTOR_INDEX[f] for f in SPATIAL_FACTORS)

SPLITS = ("clean", "seen", "unseen")
EXPECTED_COUNTS = {"clean": 1, "seen": 21, "unseen": 22}
ALLOWED_ORDERS = {"clean": {0}, "seen": {1, 2, 3}, "unseen": {2, 3, 4}}

DEFAULT_CATALOG = "default_catalog.json"


@dataclass(frozen=True)
class DegradationVector:
    """Multi-hot indicator over the 8 factors in canonical order."""
    bits: Tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) != NUM_FACTORS or any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"expected {NUM_FACTORS} binary flags, got {self.bits!r}")

    @classmethod
    def zeros(cls) -> "DegradationVector":
        return cls((0,) * NUM_FACTORS)

    @classmethod
    def from_factors(cls, factors: Sequence[str]) -> "DegradationVector":
        bits = [0] * NUM_FACTORS
        for f in factors:
            bits[FACTOR_INDEX[f]] = 1
        return cls(tuple(bits))

    @classmethod
    def from_string(cls, text: str) -> "DegradationVector":
        text = text.strip()
        if len(text) != NUM_FACTORS or set(text) - {"0", "1"}:
            raise ValueError(f"mask must be {NUM_FACTORS} characters of 0/1, got {text!r}")
        return cls(tuple(int(c) for c in text))

    @property
    def factors(self) -> List[str]:
        return [f for f, b in zip(FACTORS, self.bits) if b]

    @property
    def order(self) -> int:
        return sum(self.bits)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)

    def as_list(self) -> List[int]:
        return list(self.bits)


@dataclass(frozen=True)
class DegradationSpec:
    """One factor plus its severity parameters."""
    factor: str
    severity: Mapping[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"factor": self.factor, "severity": dict(self.severity)}

    @classmethod
    def from_dict(cls, data: dict) -> "DegradationSpec":
        return cls(factor=data["factor"], severity=dict(data.get("severity", {})))


@dataclass(frozen=True)
class TaskConfig:
    """One degradation configuration of the benchmark."""
    name: str
    factors: Tuple[str, ...]
    split: str
    label: DegradationVector

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def is_clean(self) -> bool:
        return self.order == 0

    def specs(self, severities: Mapping[str, Mapping[str, float]]) -> List[DegradationSpec]:
        """Binds sampled severities to this config's factors, in canonical order."""
        ordered = sorted(self.factors, key=FACTOR_INDEX.__getitem__)
        return [DegradationSpec(f, dict(severities[f])) for f in ordered]


@dataclass
class Catalog:
    configs: List[TaskConfig]
    severity_ranges: Dict[str, Dict[str, Tuple[float, float]]]
    declared_counts: Dict[str, Dict[int, int]]
    version: str
    sha256: str
    source: str

    def by_split(self, split: str) -> List[TaskConfig]:
        return [c for c in self.configs if c.split == split]

    def get(self, name: str) -> TaskConfig:
        for c in self.configs:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def degraded(self) -> List[TaskConfig]:
        return [c for c in self.configs if not c.is_clean]

    @property
    def training_tasks(self) -> List[TaskConfig]:
        """The clean config followed by every seen config."""
        return self.by_split("clean") + self.by_split("seen")

    def order_counts(self, split: str) -> Dict[int, int]:
        counts: Dict[int, int] = {}
        for c in self.by_split(split):
            counts[c.order] = counts.get(c.order, 0) + 1
        return counts


def default_catalog_path() -> Path:
    return Path(str(resources.files("comprestore.data").joinpath(DEFAULT_CATALOG)))


def catalog_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _parse_config(entry: dict) -> TaskConfig:
    try:
        name = entry["name"]
        factors = tuple(entry["factors"])
        split = entry["split"]
    except KeyError as e:
        raise CatalogError(f"catalog entry missing key {e}: {entry!r}") from None
    unknown = [f for f in factors if f not in FACTOR_INDEX]
    if unknown:
        raise CatalogError(f"config {name!r}: unknown factor(s) {unknown}")
    if len(set(factors)) != len(factors):
        raise CatalogError(f"config {name!r}: repeated factor")
    if split not in SPLITS:
        raise CatalogError(f"config {name!r}: unknown split {split!r}")
    label = DegradationVector.from_factors(factors)
    if "label" in entry and entry["label"] != str(label):
        raise CatalogError(f"config {name!r}: label {entry['label']} does not match factors ({label})")
    if "low_light" in factors and "over_exposure" in factors:
        raise CatalogError(f"config {name!r}: low_light and over_exposure cannot co-occur")
    if len(factors) not in ALLOWED_ORDERS[split]:
        raise CatalogError(f"config {name!r}: order {len(factors)} not allowed in split {split!r}")
    return TaskConfig(name=name, factors=factors, split=split, label=label)


def enumerate_configs(catalog_file: Optional[Path] = None) -> Catalog:
    """Parses and validates a catalog file; the packaged default when none is given."""
    path = Path(catalog_file) if catalog_file else default_catalog_path()
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise CatalogError(f"cannot read catalog {path}: {e}") from e

    configs = [_parse_config(entry) for entry in raw.get("configs", [])]

    seen_names = set()
    for c in configs:
        if c.name in seen_names:
            raise CatalogError(f"duplicate config name {c.name!r}")
        seen_names.add(c.name)
    seen_sets = set()
    for c in configs:
        key = frozenset(c.factors)
        if key in seen_sets:
            raise CatalogError(f"config {c.name!r} repeats an existing factor combination")
        seen_sets.add(key)

    total = sum(EXPECTED_COUNTS.values())
    if len(configs) != total:
        raise CatalogError(f"count ≠ {total}: catalog lists {len(configs)} configs")
    for split, expected in EXPECTED_COUNTS.items():
        got = sum(1 for c in configs if c.split == split)
        if got != expected:
            raise CatalogError(f"split {split!r} has {got} configs, expected {expected}")
    singles = {c.factors[0] for c in configs if c.order == 1 and c.split == "seen"}
    if singles != set(FACTORS):
        raise CatalogError(f"every single factor must be seen; missing {sorted(set(FACTORS) - singles)}")

    ranges = {
        factor: {k: (float(v[0]), float(v[1])) for k, v in params.items()}
        for factor, params in raw.get("severity_ranges", {}).items()
    }
    missing = [f for f in FACTORS if f not in ranges]
    if missing:
        raise CatalogError(f"severity ranges missing for {missing}")

    declared = {
        split: {int(k): int(v) for k, v in counts.items()}
        for split, counts in raw.get("declared_counts", {}).items()
    }
    catalog = Catalog(
        configs=configs,
        severity_ranges=ranges,
        declared_counts=declared,
        version=str(raw.get("version", "")),
        sha256=catalog_hash(path),
        source=str(path),
    )
    for split, counts in declared.items():
        if catalog.order_counts(split) != counts:
            raise CatalogError(
                f"split {split!r} per-order counts {catalog.order_counts(split)} differ from declared {counts}"
            )
    return catalog
