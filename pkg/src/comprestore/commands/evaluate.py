from pathlib import Path

from comprestore.commands.common import EXPECTED_ERRORS, fail, load_config, open_dataset
from comprestore.core.logger import get_logger
from comprestore.engine.checkpoints import load_perception, load_restoration
from comprestore.engine.evaluation import evaluate
from comprestore.engine.runtime import resolve_device


def cmd_eval(args):
    """Handle `comprestore eval`: grouped PSNR/SSIM over the held-out scenes."""
    log = get_logger("comprestore.cli")
    cfg = load_config(args)
    mask_source = "oracle" if args.oracle_mask else "predicted"
    try:
        manifest, catalog = open_dataset(cfg, args.data)
        device = resolve_device(cfg.train.device)
        perception, meta = load_perception(args.perception_ckpt, device=str(device))
        restorer, ckpt = load_restoration(args.ckpt, device=str(device), perception_sha256=meta["param_sha256"])
        report = evaluate(
            perception,
            restorer,
            manifest,
            catalog,
            mask_source=mask_source,
            scene_split=args.split,
            variant=ckpt["variant"],
            batch_size=cfg.train.batch_size,
            workers=args.workers,
            progress=not args.quiet,
        )
    except EXPECTED_ERRORS as e:
        fail(log, f"Evaluation failed: {e}", e)

    report.meta["checkpoint"] = str(args.ckpt)
    out_dir = Path(args.out) if args.out else Path(args.ckpt).parent
    paths = report.save(out_dir, stem=f"eval_{mask_source}")
    groups = report.groups()
    for name in ("overall_seen", "overall_unseen", "all"):
        if name in groups:
            print(f"  {name:<15} {groups[name]['psnr']:6.2f} dB  SSIM {groups[name]['ssim']:.4f}")
    if report.partial:
        print(f"⚠️  Partial report: {len(report.missing)} config(s) missing")
    print(f"📝 Report: {paths['json']}")
    return 0
