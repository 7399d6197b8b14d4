import json
from pathlib import Path

import torch

from comprestore.commands.common import EXPECTED_ERRORS, fail, load_config, read_image
from comprestore.core.logger import get_logger
from comprestore.data.catalog import DegradationVector
from comprestore.data.dataset import save_image
from comprestore.engine.checkpoints import load_perception, load_restoration
from comprestore.engine.restoration_trainer import condition_inputs
from comprestore.engine.runtime import resolve_device


def dump_conditioning(restorer, mask: torch.Tensor, p: torch.Tensor, path: Path) -> Path:
    """Per-stage conditioning vectors and token attention weights as JSON."""
    if not restorer.options.semantic_embedding:
        p = torch.zeros_like(p)
    with torch.no_grad():
        g, weights = restorer.encoder(mask, p, soft=restorer.options.soft_mask)
    payload = {
        "mask": [round(float(v), 6) for v in mask[0].tolist()],
        "conditioning": g[0].tolist(),
        "attention": weights[0].tolist(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def cmd_restore(args):
    """Handle `comprestore restore --img FILE`; --mask overrides the predicted mask."""
    log = get_logger("comprestore.cli")
    cfg = load_config(args)
    try:
        device = resolve_device(cfg.train.device)
        perception, meta = load_perception(args.perception_ckpt, device=str(device))
        restorer, _ = load_restoration(args.ckpt, device=str(device), perception_sha256=meta["param_sha256"])
        x = read_image(args.img).to(device).unsqueeze(0)
        mask, p = condition_inputs(perception, x, soft=restorer.options.soft_mask)
        if args.mask:
            override = DegradationVector.from_string(args.mask)
            mask = torch.tensor([override.as_list()], dtype=x.dtype, device=device)
            log.info("Using user mask %s instead of the predicted one", override)
        y = restorer.restore(x, mask, p)[0]
        out = Path(args.out) if args.out else Path(args.img).with_name(f"{Path(args.img).stem}_restored.png")
        save_image(y.cpu().numpy(), out)
        if args.dump_conditioning:
            dumped = dump_conditioning(restorer, mask, p, Path(args.dump_conditioning))
            print(f"📝 Conditioning: {dumped}")
    except EXPECTED_ERRORS as e:
        fail(log, f"Restoration failed: {e}", e)
    source = "user" if args.mask else "predicted"
    bits = "".join(str(int(round(float(v)))) for v in mask[0].tolist())
    print(f"✅ Restored {args.img} -> {out} ({source} mask {bits})")
    return 0
