from pathlib import Path

from comprestore.commands.common import EXPECTED_ERRORS, fail
from comprestore.core.logger import get_logger
from comprestore.engine.evaluation import EvalReport
from comprestore.engine.report import render


def cmd_report(args):
    """Handle `comprestore report REPORT.json ...`: tables, CSV and the order plot."""
    log = get_logger("comprestore.cli")
    try:
        reports = [EvalReport.load(Path(p)) for p in args.reports]
        paths = render(reports, Path(args.out))
    except EXPECTED_ERRORS as e:
        fail(log, f"Report failed: {e}", e)
    for kind, path in paths.items():
        print(f"📝 {kind}: {path}")
    return 0
