"""
Markdown rendering of evaluation reports.

Initial-protocol cells become one table per phase with block sizes as columns;
k-fold cells become a single table with one row per (phase, folds).
"""

from typing import List, Sequence

from core.evaluation import EvalReport, ReportCell
from .base_renderer import ReportRenderer


def _fmt(value: float) -> str:
    return f"{value:.4f}"


class MarkdownReportRenderer(ReportRenderer):
    """Human-readable tables; not parsed back."""

    def render(self, report: EvalReport) -> str:
        parts: List[str] = []
        for cells in self.group_cells(report).values():
            if cells[0].protocol == "initial":
                parts.append(self._initial_table(cells))
            else:
                parts.append(self._kfold_table(cells, report))
        if report.notes:
            parts.append("\n".join(f"- {note}" for note in report.notes))
        return "\n\n".join(parts) + "\n"

    def _initial_table(self, cells: Sequence[ReportCell]) -> str:
        lines = [
            f"### {self.phase_label(cells[0].phase)}",
            "",
            "| Block size | " + " | ".join(str(c.param) for c in cells) + " |",
            "|---" * (len(cells) + 1) + "|",
            "| FAR | " + " | ".join(_fmt(c.far) for c in cells) + " |",
            "| FRR | " + " | ".join(_fmt(c.frr) for c in cells) + " |",
            "| Avg. number of blocks | " + " | ".join(_fmt(c.avg_blocks) for c in cells) + " |",
            "| Avg. characters to decision | "
            + " | ".join(f"{c.avg_blocks * c.param:.1f}" for c in cells) + " |",
        ]
        return "\n".join(lines)

    def _kfold_table(self, cells: Sequence[ReportCell], report: EvalReport) -> str:
        block_size = int(report.config_value("kfold.block_size") or 0)
        lines = [
            f"### Cross-validation (block size {block_size})",
            "",
            "| Phase | Folds | FAR | FRR | Avg. number of blocks | Avg. characters to decision |",
            "|---|---|---|---|---|---|",
        ]
        lines.extend(
            f"| {self.phase_label(c.phase)} | {c.param} | {_fmt(c.far)} | {_fmt(c.frr)} | "
            f"{_fmt(c.avg_blocks)} | {c.avg_blocks * block_size:.1f} |"
            for c in cells
        )
        return "\n".join(lines)
