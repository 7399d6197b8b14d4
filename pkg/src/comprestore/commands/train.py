from pathlib import Path

from comprestore.commands.common import EXPECTED_ERRORS, default_run_dir, fail, load_config, open_dataset
from comprestore.core.logger import get_logger
from comprestore.engine.pipeline import train_pipeline
from comprestore.engine.perception_trainer import train_stage1
from comprestore.engine.restoration_trainer import train_stage2


def cmd_train_perception(args):
    """Handle `comprestore train-perception` (stage I)."""
    log = get_logger("comprestore.cli")
    cfg = load_config(args)
    if args.backend:
        cfg.perception.backend = args.backend
    run_dir = Path(args.run_dir) if args.run_dir else default_run_dir(cfg, "perception")
    try:
        manifest, catalog = open_dataset(cfg, args.data)
        run = train_stage1(cfg, manifest, catalog, run_dir, epochs=args.epochs, progress=not args.quiet)
    except EXPECTED_ERRORS as e:
        fail(log, f"Perception training failed: {e}", e)
    if run.history:
        last = run.history[-1]
        acc = last.get("test_bit_accuracy")
        print(f"✅ Final loss {last['total']:.4f}" + (f", held-out bit accuracy {acc:.3f}" if acc is not None else ""))
    print(f"📝 Checkpoint: {run.checkpoint} (sha256 {run.param_sha256[:12]})")
    return 0


def cmd_train_restoration(args):
    """Handle `comprestore train-restoration` (stage II) for one variant."""
    log = get_logger("comprestore.cli")
    cfg = load_config(args)
    variant = args.variant or cfg.train.variant
    run_dir = Path(args.run_dir) if args.run_dir else default_run_dir(cfg, f"restoration-{variant}")
    try:
        manifest, catalog = open_dataset(cfg, args.data)
        run = train_stage2(
            cfg,
            manifest,
            catalog,
            Path(args.perception_ckpt),
            run_dir,
            variant=variant,
            epochs=args.epochs,
            progress=not args.quiet,
        )
    except EXPECTED_ERRORS as e:
        fail(log, f"Restoration training failed: {e}", e)
    if run.history:
        print(f"✅ Final loss {run.history[-1]['total']:.4f} ({run.variant})")
    print(f"📝 Checkpoint: {run.checkpoint}")
    return 0


def cmd_train(args):
    """Handle `comprestore train`: stage I, then stage II on the fresh perception checkpoint."""
    log = get_logger("comprestore.cli")
    cfg = load_config(args)
    run_root = Path(args.run_dir) if args.run_dir else Path(cfg.paths.runs_dir)
    try:
        manifest, catalog = open_dataset(cfg, args.data)
        run = train_pipeline(cfg, manifest, catalog, run_root, variant=args.variant, progress=not args.quiet)
    except EXPECTED_ERRORS as e:
        fail(log, f"Training failed: {e}", e)
    print(f"📝 Perception checkpoint: {run.perception.checkpoint} (sha256 {run.perception.param_sha256[:12]})")
    print(f"📝 Restoration checkpoint: {run.restoration.checkpoint}")
    return 0
