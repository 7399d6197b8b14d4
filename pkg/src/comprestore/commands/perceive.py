import json

from comprestore.commands.common import EXPECTED_ERRORS, fail, load_config, read_image
from comprestore.core.logger import get_logger
from comprestore.engine.checkpoints import load_perception
from comprestore.engine.runtime import resolve_device


def cmd_perceive(args):
    """Handle `comprestore perceive --img FILE`: print the predicted mask as JSON."""
    log = get_logger("comprestore.cli")
    cfg = load_config(args)
    try:
        device = resolve_device(cfg.train.device)
        model, _ = load_perception(args.ckpt, device=str(device))
        img = read_image(args.img).to(device)
        out = model.infer(img)
        result = {
            "image": args.img,
            "mask": str(out.vector),
            "factors": out.vector.factors,
            "probabilities": out.probabilities,
        }
        if args.topk:
            result["closest_prompts"] = [model.prompts[i] for i in model.retrieve_config(img, args.topk)]
    except EXPECTED_ERRORS as e:
        fail(log, f"Perception failed: {e}", e)
    print(json.dumps(result, indent=2))
    return 0
