"""
Tables and plots from one or more evaluation reports.

file: src/comprestore/engine/report.py
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from comprestore.core.logger import get_logger
from comprestore.engine.evaluation import GROUPS, EvalReport

log = get_logger("comprestore.report")

GROUP_TITLES = {
    "seen_single": "Seen Single",
    "seen_double": "Seen Double",
    "seen_triple": "Seen Triple",
    "overall_seen": "Overall Seen",
    "unseen_double": "Unseen Double",
    "unseen_triple": "Unseen Triple",
    "unseen_quad": "Unseen Quad",
    "overall_unseen": "Overall Unseen",
    "all": "All",
    "quad": "Quad",
}
MAIN_GROUPS = [g for g, _, _ in GROUPS if g not in ("all", "quad")]


def _label(report: EvalReport) -> str:
    label = report.variant
    if report.mask_source == "oracle":
        label += " (oracle mask)"
    if report.partial:
        label += " [partial]"
    return label


def _cell(groups: Dict[str, Dict[str, float]], name: str, prefix: str = "") -> str:
    if name not in groups:
        return "-"
    g = groups[name]
    return f"{g[prefix + 'psnr']:.2f} / {g[prefix + 'ssim']:.4f}"


def grouped_table(reports: Sequence[EvalReport], include_input: bool = True) -> str:
    """Markdown table: one row per report, one PSNR / SSIM column per group."""
    header = "| Method | " + " | ".join(GROUP_TITLES[g] for g in MAIN_GROUPS) + " |"
    lines = [header, "|" + "---|" * (len(MAIN_GROUPS) + 1)]
    if include_input and reports:
        groups = reports[0].groups()
        lines.append("| Degraded input | " + " | ".join(_cell(groups, g, "input_") for g in MAIN_GROUPS) + " |")
    for r in reports:
        groups = r.groups()
        lines.append(f"| {_label(r)} | " + " | ".join(_cell(groups, g) for g in MAIN_GROUPS) + " |")
    return "\n".join(lines) + "\n"


def ablation_table(reports: Sequence[EvalReport]) -> str:
    """Markdown table: variant x (All PSNR, All SSIM, Quad PSNR, Quad SSIM)."""
    lines = ["| Variant | All PSNR | All SSIM | Quad PSNR | Quad SSIM |", "|---|---|---|---|---|"]
    for r in reports:
        g = r.groups()
        cells = []
        for name in ("all", "quad"):
            cells += [f"{g[name]['psnr']:.2f}", f"{g[name]['ssim']:.4f}"] if name in g else ["-", "-"]
        lines.append(f"| {_label(r)} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def write_groups_csv(reports: Sequence[EvalReport], path: Path) -> Path:
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["method", "mask_source", "group", "configs", "psnr", "ssim", "input_psnr", "input_ssim"])
        for r in reports:
            for name, g in r.groups().items():
                writer.writerow([r.variant, r.mask_source, name, g["configs"], g["psnr"], g["ssim"],
                                 g["input_psnr"], g["input_ssim"]])
    return Path(path)


def order_plot(reports: Sequence[EvalReport], path: Path) -> Path:
    """PSNR-Y against degradation order, one line per report plus the degraded input."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for i, r in enumerate(reports):
        orders = r.by_order()
        xs = sorted(orders)
        ax.plot(xs, [orders[o]["psnr"] for o in xs], marker="o", label=_label(r))
        if i == 0:
            ax.plot(xs, [orders[o]["input_psnr"] for o in xs], linestyle="--", color="gray", label="degraded input")
    ax.set_xlabel("degradation order")
    ax.set_ylabel("PSNR-Y (dB)")
    ax.set_xticks([1, 2, 3, 4])
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def render(reports: List[EvalReport], out_dir: Path) -> Dict[str, Path]:
    if not reports:
        raise ValueError("report needs at least one evaluation report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    md = ["# Restoration results", "", "PSNR-Y (dB) / SSIM-Y per group.", "", grouped_table(reports)]
    if len(reports) > 1:
        md += ["## All / Quad", "", ablation_table(reports)]
    partial = [r.variant for r in reports if r.partial]
    if partial:
        md += [f"Partial reports (missing configs): {', '.join(partial)}", ""]
    paths = {
        "markdown": out_dir / "results.md",
        "csv": write_groups_csv(reports, out_dir / "groups.csv"),
        "plot": order_plot(reports, out_dir / "psnr_vs_order.png"),
    }
    paths["markdown"].write_text("\n".join(md), encoding="utf-8")
    log.info("Report written to %s", out_dir)
    return paths
