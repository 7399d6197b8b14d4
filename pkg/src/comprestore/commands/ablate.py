from pathlib import Path

from comprestore.commands.common import EXPECTED_ERRORS, fail, load_config, open_dataset
from comprestore.core.logger import get_logger
from comprestore.engine.ablation import ablate
from comprestore.engine.variants import variant_names


def cmd_ablate(args):
    """Handle `comprestore ablate --variant NAME|all`."""
    log = get_logger("comprestore.cli")
    cfg = load_config(args)
    names = variant_names() if args.variant == "all" else [args.variant]
    run_root = Path(args.run_dir) if args.run_dir else Path(cfg.paths.runs_dir) / "ablations"
    try:
        manifest, catalog = open_dataset(cfg, args.data)
        for name in names:
            report = ablate(
                cfg,
                manifest,
                catalog,
                Path(args.perception_ckpt),
                name,
                run_root,
                epochs=args.epochs,
                progress=not args.quiet,
            )
            overall = report.groups().get("all")
            summary = f"{overall['psnr']:.2f} dB / {overall['ssim']:.4f}" if overall else "no results"
            print(f"✅ {name}: {summary}")
    except EXPECTED_ERRORS as e:
        fail(log, f"Ablation failed: {e}", e)
    print(f"📝 Reports under {run_root}")
    return 0
