"""
Core CLI logic for comprestore.
Handles argument parsing and command dispatch.

file: src/comprestore/core/cli.py
"""

import argparse
import sys
from typing import List, Optional

from comprestore import __version__
from comprestore.commands.ablate import cmd_ablate
from comprestore.commands.config_cmd import cmd_config
from comprestore.commands.evaluate import cmd_eval
from comprestore.commands.perceive import cmd_perceive
from comprestore.commands.report_cmd import cmd_report
from comprestore.commands.restore import cmd_restore
from comprestore.commands.synth import cmd_synth
from comprestore.commands.train import cmd_train, cmd_train_perception, cmd_train_restoration
from comprestore.engine.variants import variant_names


def _common(p: argparse.ArgumentParser, data: bool = True, seed: bool = True) -> None:
    if data:
        p.add_argument("--data", help="Dataset root holding manifest.json (default: paths.data_root)")
    if seed:
        p.add_argument("--seed", type=int, help="Override train.seed and data.seed")
    p.add_argument("--device", help="cpu, cuda, mps or auto (default: train.device)")
    p.add_argument("-q", "--quiet", action="store_true", help="Hide progress bars")


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser for the comprestore CLI."""
    parser = argparse.ArgumentParser(
        prog="comprestore",
        description="comprestore – perception-conditioned restoration of compositional degradations.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  comprestore config init                          Write config/config.json with defaults
  comprestore synth --num-scenes 40                Generate the degraded dataset
  comprestore train-perception --epochs 5          Stage I
  comprestore train-restoration --perception-ckpt runs/perception/perception.pt
  comprestore eval --ckpt runs/restoration-full/restoration.pt --perception-ckpt runs/perception/perception.pt
  comprestore restore --img rainy.png --ckpt ... --perception-ckpt ... --mask 10100000
  comprestore report runs/restoration-full/eval_predicted.json --out results
        """.strip(),
    )
    parser.add_argument("--version", action="version", version=f"comprestore {__version__}")
    parser.add_argument("--config", help="Path to config.json (default: env COMPRESTORE_CONFIG or ./config/config.json)")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    synth = subparsers.add_parser("synth", help="Synthesize the degraded dataset from clean scenes")
    synth.add_argument("--catalog", help="Config catalog JSON (default: the packaged catalog)")
    synth.add_argument("--scenes", help="Directory of clean images (default: procedural scenes)")
    synth.add_argument("--out", help="Output dataset root (default: paths.data_root)")
    synth.add_argument("--num-scenes", type=int, help="Number of scenes (default: data.num_scenes)")
    synth.add_argument("--size", type=int, help="Scene side length (default: data.scene_size)")
    synth.add_argument("--workers", type=int, default=4, help="Parallel scene workers")
    synth.add_argument("--verify", action="store_true", help="Only verify an existing dataset against its manifest")
    _common(synth, data=False)

    tp = subparsers.add_parser("train-perception", help="Stage I: train the degradation perception model")
    tp.add_argument("--backend", choices=["tiny", "vlm"], help="Perception backend (default: perception.backend)")
    tp.add_argument("--epochs", type=int, help="Epochs (default: train.perception_epochs)")
    tp.add_argument("--run-dir", help="Run directory (default: <runs_dir>/perception)")
    _common(tp)

    perceive = subparsers.add_parser("perceive", help="Predict the degradation mask of one image")
    perceive.add_argument("--img", required=True, help="Input image")
    perceive.add_argument("--ckpt", required=True, help="Perception checkpoint")
    perceive.add_argument("--topk", type=int, default=0, help="Also list the k closest task prompts")
    _common(perceive, data=False, seed=False)

    tr = subparsers.add_parser("train-restoration", help="Stage II: train the restorer against frozen perception")
    tr.add_argument("--perception-ckpt", required=True, help="Perception checkpoint from stage I")
    tr.add_argument("--variant", choices=variant_names(), help="Model variant (default: train.variant)")
    tr.add_argument("--epochs", type=int, help="Epochs (default: train.restoration_epochs)")
    tr.add_argument("--run-dir", help="Run directory (default: <runs_dir>/restoration-<variant>)")
    _common(tr)

    restore = subparsers.add_parser("restore", help="Restore one image")
    restore.add_argument("--img", required=True, help="Degraded input image")
    restore.add_argument("--ckpt", required=True, help="Restoration checkpoint")
    restore.add_argument("--perception-ckpt", required=True, help="Perception checkpoint it was trained with")
    restore.add_argument("--mask", help="8-bit mask overriding the predicted one, e.g. 10100000")
    restore.add_argument("--out", help="Output PNG (default: <img>_restored.png)")
    restore.add_argument("--dump-conditioning", metavar="FILE", help="Write conditioning vectors and attention as JSON")
    _common(restore, data=False, seed=False)

    ev = subparsers.add_parser("eval", help="Grouped evaluation over held-out scenes")
    ev.add_argument("--ckpt", required=True, help="Restoration checkpoint")
    ev.add_argument("--perception-ckpt", required=True, help="Perception checkpoint")
    ev.add_argument("--oracle-mask", action="store_true", help="Condition on ground-truth masks")
    ev.add_argument("--split", default="test", choices=["train", "test"], help="Scene split to evaluate")
    ev.add_argument("--workers", type=int, default=4, help="Image loading threads")
    ev.add_argument("--out", help="Report directory (default: next to the checkpoint)")
    _common(ev, seed=False)

    ab = subparsers.add_parser("ablate", help="Train and evaluate an ablation variant")
    ab.add_argument("--variant", required=True, choices=variant_names() + ["all"], help="Variant name or 'all'")
    ab.add_argument("--perception-ckpt", required=True, help="Shared perception checkpoint")
    ab.add_argument("--epochs", type=int, help="Epochs (default: train.restoration_epochs)")
    ab.add_argument("--run-dir", help="Root for per-variant runs (default: <runs_dir>/ablations)")
    _common(ab)

    tr_all = subparsers.add_parser("train", help="Run both stages: perception, then restoration")
    tr_all.add_argument("--variant", choices=variant_names(), help="Model variant (default: train.variant)")
    tr_all.add_argument("--run-dir", help="Root for both runs (default: paths.runs_dir)")
    _common(tr_all)

    rp = subparsers.add_parser("report", help="Render tables and plots from evaluation reports")
    rp.add_argument("reports", nargs="+", help="Report JSON files")
    rp.add_argument("--out", default="results", help="Output directory")

    cfg_parser = subparsers.add_parser("config", help="Manage comprestore configuration")
    cfg_sub = cfg_parser.add_subparsers(dest="config_cmd")
    cfg_init = cfg_sub.add_parser("init", help="Write a config file with default values")
    cfg_init.add_argument("--full-scale", action="store_true", help="Use the full-scale preset")
    cfg_init.add_argument("--force", action="store_true", help="Overwrite an existing file")
    cfg_sub.add_parser("path", help="Show config file path")
    cfg_get = cfg_sub.add_parser("get", help="Get a config value")
    cfg_get.add_argument("key", help="Dotted key, e.g. 'train.lr'")
    cfg_set = cfg_sub.add_parser("set", help="Set and save a config value")
    cfg_set.add_argument("key", help="Dotted key, e.g. 'restoration.widths'")
    cfg_set.add_argument("value", help="The new value; lists as '12,24,48,24,12'")
    cfg_sub.add_parser("list", help="List all configuration values in JSON format")

    return parser


COMMANDS = {
    "synth": cmd_synth,
    "train-perception": cmd_train_perception,
    "perceive": cmd_perceive,
    "train-restoration": cmd_train_restoration,
    "train": cmd_train,
    "restore": cmd_restore,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "report": cmd_report,
    "config": cmd_config,
}


def main(args: Optional[List[str]] = None) -> int:
    """
    Main CLI entry point.

    Args:
        args: Command-line arguments (default: sys.argv[1:])

    Returns:
        Exit code (0 on success)
    """
    if args is None:
        args = sys.argv[1:]

    parser = create_parser()

    if not args:
        parser.print_help()
        return 0

    parsed = parser.parse_args(args)

    # `comprestore config` without a subcommand
    if parsed.command == "config" and not parsed.config_cmd:
        cfg_parser = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices["config"]
        cfg_parser.print_help()
        return 0

    handler = COMMANDS.get(parsed.command)
    if handler is None:
        parser.print_help()
        return 0
    return handler(parsed) or 0


if __name__ == "__main__":
    sys.exit(main())
