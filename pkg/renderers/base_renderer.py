"""
Base renderer abstract class for evaluation reports.
Defines the interface that all report renderer implementations must follow.
"""

from abc import ABC, abstractmethod
from typing import Dict, Optional

from core.evaluation import EvalReport, ReportCell


DEFAULT_PHASE_LABELS = {
    "prompted": "First phase (Prompted)",
    "freestyle": "Second phase (Freestyle)",
}


class ReportRenderer(ABC):
    """
    Abstract base class for rendering an EvalReport.

    Subclasses implement specific output formats (canonical text, Markdown, ...)
    while sharing phase labelling and cell grouping.
    """

    def __init__(self, phase_labels: Optional[Dict[str, str]] = None):
        """
        Args:
            phase_labels: Mapping of phase value to display label
                        (e.g., {"prompted": "First phase (Prompted)"})
        """
        self.phase_labels = dict(phase_labels or DEFAULT_PHASE_LABELS)

    @abstractmethod
    def render(self, report: EvalReport) -> str:
        """
        Render a report.

        Args:
            report: Evaluation report

        Returns:
            Rendered text, newline-terminated
        """
        pass

    def phase_label(self, phase: str) -> str:
        """Display label for a phase, or the raw value when none is configured."""
        return self.phase_labels.get(phase, phase)

    @staticmethod
    def table_name(cell: ReportCell) -> str:
        """
        Table a cell belongs to: one table per phase for the initial protocol,
        a single table for the k-fold protocol.
        """
        if cell.protocol == "initial":
            return f"{cell.protocol} {cell.phase}"
        return cell.protocol

    def group_cells(self, report: EvalReport) -> Dict[str, list]:
        """Cells grouped by table, in report order."""
        tables: Dict[str, list] = {}
        for cell in report.cells:
            tables.setdefault(self.table_name(cell), []).append(cell)
        return tables
