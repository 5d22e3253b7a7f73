"""
Canonical keydyn-report v1 text format, and its parser.

    keydyn-report v1
    [config]
    key=value ...
    [table <name>]
    phase,protocol,param,far,frr,avg_blocks,impostor_runs,genuine_runs
    ...
    [confusions]
    phase,protocol,param,fold,model_user,test_user,outcome,blocks
    ...
    [notes]
    free text, one note per line
"""

import logging
from typing import List, Union

from core.authenticator import RunClass
from core.errors import CorruptReport, VersionMismatch
from core.evaluation import EvalReport, ReportCell, RunRecord
from .base_renderer import ReportRenderer


logger = logging.getLogger(__name__)

REPORT_MAGIC = "keydyn-report"
REPORT_VERSION = "v1"
CELL_COLUMNS = "phase,protocol,param,far,frr,avg_blocks,impostor_runs,genuine_runs"
CONFUSION_COLUMNS = "phase,protocol,param,fold,model_user,test_user,outcome,blocks"


class ReportTextRenderer(ReportRenderer):
    """Renders the bit-exact report file; floats are written with repr so they parse back unchanged."""

    def render(self, report: EvalReport) -> str:
        lines = [f"{REPORT_MAGIC} {REPORT_VERSION}", "[config]"]
        lines.extend(f"{key}={value}" for key, value in report.config)

        for name, cells in self.group_cells(report).items():
            lines.append(f"[table {name}]")
            lines.append(CELL_COLUMNS)
            lines.extend(
                f"{c.phase},{c.protocol},{c.param},{c.far!r},{c.frr!r},{c.avg_blocks!r},"
                f"{c.impostor_runs},{c.genuine_runs}"
                for c in cells
            )

        lines.extend(["[confusions]", CONFUSION_COLUMNS])
        lines.extend(
            f"{r.phase},{r.protocol},{r.param},{r.fold},{r.model_user},{r.test_user},"
            f"{r.outcome.value},{r.blocks}"
            for r in report.confusions
        )
        lines.append("[notes]")
        lines.extend(report.notes)
        return "\n".join(lines) + "\n"


def _parse_cell(line: str, line_no: int) -> ReportCell:
    fields = line.split(",")
    if len(fields) != 8:
        raise CorruptReport(f"line={line_no} expected 8 cell fields, got {len(fields)}")
    try:
        return ReportCell(
            phase=fields[0],
            protocol=fields[1],
            param=int(fields[2]),
            far=float(fields[3]),
            frr=float(fields[4]),
            avg_blocks=float(fields[5]),
            impostor_runs=int(fields[6]),
            genuine_runs=int(fields[7]),
        )
    except ValueError as e:
        raise CorruptReport(f"line={line_no} unreadable cell: {e}") from None


def _parse_confusion(line: str, line_no: int) -> RunRecord:
    fields = line.split(",")
    if len(fields) != 8:
        raise CorruptReport(f"line={line_no} expected 8 confusion fields, got {len(fields)}")
    try:
        return RunRecord(
            phase=fields[0],
            protocol=fields[1],
            param=int(fields[2]),
            fold=int(fields[3]),
            model_user=fields[4],
            test_user=fields[5],
            outcome=RunClass(fields[6]),
            blocks=int(fields[7]),
        )
    except ValueError as e:
        raise CorruptReport(f"line={line_no} unreadable confusion: {e}") from None


def parse_report(source: Union[str, bytes]) -> EvalReport:
    """
    Parse a keydyn-report v1 file.

    Raises:
        VersionMismatch: Header carries another version
        CorruptReport: Anything else that does not parse
    """
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptReport("report is not valid UTF-8") from None

    lines = source.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CorruptReport("empty report")
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != REPORT_MAGIC:
        raise CorruptReport(f"not a report file: {lines[0][:40]!r}")
    if magic[1] != REPORT_VERSION:
        raise VersionMismatch(f"report format {magic[1]!r}, expected {REPORT_VERSION!r}")

    config: List[tuple] = []
    cells: List[ReportCell] = []
    confusions: List[RunRecord] = []
    notes: List[str] = []
    section = None
    expect_columns = None

    for line_no, line in enumerate(lines[1:], 2):
        if expect_columns is not None:
            if line != expect_columns:
                raise CorruptReport(f"line={line_no} expected column header {expect_columns}")
            expect_columns = None
            continue
        if line.startswith("[") and line.endswith("]") and section != "notes":
            name = line[1:-1]
            if name == "config":
                section = "config"
            elif name.startswith("table "):
                section, expect_columns = "table", CELL_COLUMNS
            elif name == "confusions":
                section, expect_columns = "confusions", CONFUSION_COLUMNS
            elif name == "notes":
                section = "notes"
            else:
                raise CorruptReport(f"line={line_no} unknown section {line!r}")
            continue

        if section == "config":
            key, sep, value = line.partition("=")
            if not sep:
                raise CorruptReport(f"line={line_no} config line without '='")
            config.append((key, value))
        elif section == "table":
            cells.append(_parse_cell(line, line_no))
        elif section == "confusions":
            confusions.append(_parse_confusion(line, line_no))
        elif section == "notes":
            notes.append(line)
        else:
            raise CorruptReport(f"line={line_no} content outside any section")

    if expect_columns is not None:
        raise CorruptReport("report ends before a column header")
    if section != "notes":
        raise CorruptReport("report is truncated (no [notes] section)")
    logger.debug("Parsed report: %d cells, %d confusions", len(cells), len(confusions))
    return EvalReport(tuple(config), tuple(cells), tuple(confusions), tuple(notes))
