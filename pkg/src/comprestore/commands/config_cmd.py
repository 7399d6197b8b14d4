import json
import sys
from pathlib import Path

from comprestore.commands.common import load_config
from comprestore.core.config import AppConfig, _default_config_path


def _target(args) -> Path:
    return Path(args.config) if args.config else _default_config_path()


def cmd_config(args):
    if args.config_cmd == "init":
        path = _target(args)
        if path.exists() and not args.force:
            print(f"❌ {path} already exists (use --force to overwrite)", file=sys.stderr)
            sys.exit(1)
        cfg = AppConfig.full_scale() if args.full_scale else AppConfig()
        saved = cfg.save(path)
        print(f"✅ Wrote {'full-scale' if args.full_scale else 'default'} config to {saved}")
        return 0
    if args.config_cmd == "path":
        print(_target(args))
        return 0

    cfg = load_config(args)
    if args.config_cmd == "get":
        try:
            val = cfg.get(args.key)
        except KeyError:
            print(f"❌ Unknown config key '{args.key}'", file=sys.stderr)
            sys.exit(1)
        print(json.dumps(val) if isinstance(val, (list, dict)) else val)
        return 0
    if args.config_cmd == "set":
        try:
            value = cfg.set(args.key, args.value)
        except KeyError:
            print(f"❌ Unknown config key '{args.key}'", file=sys.stderr)
            sys.exit(1)
        except ValueError as e:
            print(f"❌ Invalid value for {args.key}: {e}", file=sys.stderr)
            sys.exit(2)
        saved = cfg.save(_target(args))
        print(f"✅ Saved {args.key}={value!r} to {saved}")
        return 0
    if args.config_cmd == "list":
        print(json.dumps(cfg.to_dict(), indent=2))
        return 0
    print("Use: comprestore config [init|path|get|set|list]")
    return 0
