import json
from pathlib import Path

from comprestore.commands.common import EXPECTED_ERRORS, fail, load_catalog, load_config
from comprestore.core.logger import get_logger
from comprestore.data.dataset import (
    DatasetManifest,
    build_dataset,
    build_manifest,
    list_scene_sources,
    verify_dataset,
)


def cmd_synth(args):
    """Handle `comprestore synth`: generate (or verify) the degraded dataset."""
    log = get_logger("comprestore.cli")
    cfg = load_config(args)
    if args.catalog:
        cfg.paths.catalog = args.catalog
    out = Path(args.out or cfg.paths.data_root)
    try:
        catalog = load_catalog(cfg)
        if args.verify:
            files = verify_dataset(DatasetManifest.load(out), catalog)
            print(f"✅ {len(files)} files match the manifest under {out}")
            return 0
        sources = list_scene_sources(Path(args.scenes) if args.scenes else None, args.num_scenes or cfg.data.num_scenes)
        manifest = build_manifest(
            catalog,
            out,
            sources,
            seed=cfg.data.seed,
            scene_size=args.size or cfg.data.scene_size,
            test_fraction=cfg.data.test_fraction,
        )
        path = build_dataset(manifest, catalog, workers=args.workers, progress=not args.quiet)
    except EXPECTED_ERRORS as e:
        fail(log, f"Synthesis failed: {e}", e)

    splits = {s: len(manifest.scene_ids(s)) for s in ("train", "test")}
    print(f"✅ Wrote {len(manifest.entries)} images ({len(catalog.configs)} configs, scenes {json.dumps(splits)})")
    print(f"📝 Manifest: {path}")
    return 0
