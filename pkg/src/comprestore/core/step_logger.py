import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional


class StepLogger:
    """Writes per-step training records as JSON lines, rotating by file size."""

    def __init__(self, run_dir: Path, title: str, max_bytes: int = 1 * 1024 * 1024):
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.title = title
        self.max_bytes = max_bytes
        self.log_fp = None
        self.log_path: Optional[Path] = None
        self._open_log(self._next_index())

    def _safe_title(self) -> str:
        return "".join(c if c.isalnum() or c in ("-", "_") else "-" for c in self.title).strip("-") or "run"

    def _next_index(self, start_at: int = 1) -> int:
        date_str = datetime.now().strftime("%Y-%m-%d")
        max_i = 0
        for p in self.run_dir.glob(f"{self._safe_title()}-{date_str}-*.jsonl"):
            try:
                max_i = max(max_i, int(p.stem.split("-")[-1]))
            except (ValueError, IndexError):
                continue
        return max(max_i + 1, start_at)

    def _open_log(self, index: int = 1):
        date_str = datetime.now().strftime("%Y-%m-%d")
        self.log_path = self.run_dir / f"{self._safe_title()}-{date_str}-{index}.jsonl"
        self.log_fp = self.log_path.open("a", encoding="utf-8")

    def log(self, record: Dict[str, Any]):
        if not self.log_fp:
            return
        try:
            if self.log_path and self.log_path.stat().st_size >= self.max_bytes:
                self.close()
                current_i = int(self.log_path.stem.split("-")[-1])
                self._open_log(current_i + 1)
            self.log_fp.write(json.dumps(record) + "\n")
            self.log_fp.flush()
        except Exception:
            self.close()

    def close(self):
        if self.log_fp:
            try:
                self.log_fp.close()
            except Exception:
                pass
            self.log_fp = None

    def __enter__(self) -> "StepLogger":
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        self.close()
