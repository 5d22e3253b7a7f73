"""
Renderer package for evaluation report formats.
"""

from .base_renderer import ReportRenderer, DEFAULT_PHASE_LABELS
from .report_text_renderer import ReportTextRenderer, parse_report
from .markdown_report_renderer import MarkdownReportRenderer

__all__ = [
    'ReportRenderer',
    'DEFAULT_PHASE_LABELS',
    'ReportTextRenderer',
    'parse_report',
    'MarkdownReportRenderer'
]
