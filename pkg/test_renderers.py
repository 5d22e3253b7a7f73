"""
Tests for the canonical report file and the Markdown tables.
"""

import numpy as np
import pytest

from core.authenticator import RunClass
from core.errors import CorruptReport, VersionMismatch
from core.evaluation import EvalReport, ReportCell, RunRecord
from renderers import MarkdownReportRenderer, ReportTextRenderer, parse_report


def random_report(rng) -> EvalReport:
    config = tuple((f"key{k}", f"v={rng.integers(0, 1000)}") for k in range(int(rng.integers(0, 5))))
    cells = []
    for phase in ("prompted", "freestyle"):
        for param in sorted(rng.choice(200, int(rng.integers(0, 4)), replace=False) + 2):
            cells.append(ReportCell(
                phase, "initial", int(param),
                far=float(rng.random()), frr=float(rng.random()), avg_blocks=float(rng.uniform(1, 20)),
                impostor_runs=int(rng.integers(0, 400)), genuine_runs=int(rng.integers(0, 20)),
            ))
    if rng.random() < 0.5:
        cells.append(ReportCell("prompted", "kfold", 5, 0.0, 1.0, 2.0 / 3.0, 12, 6))
    confusions = tuple(
        RunRecord("prompted", "initial", 30, int(rng.integers(0, 10)), f"user{rng.integers(9)}",
                  f"user{rng.integers(9)}", RunClass.FALSE_ACCEPT if rng.random() < 0.5 else RunClass.FALSE_REJECT,
                  int(rng.integers(1, 17)))
        for _ in range(int(rng.integers(0, 4)))
    )
    notes = tuple(f"[note {k}] skipped user{k}" for k in range(int(rng.integers(0, 3))))
    return EvalReport(config, tuple(cells), confusions, notes)


SAMPLE = EvalReport(
    config=(("protocol", "initial"), ("auth.threshold", "0.65")),
    cells=(
        ReportCell("prompted", "initial", 30, 0.0025, 0.05, 2.1947, 380, 20),
        ReportCell("prompted", "initial", 50, 0.015, 0.035, 2.3, 380, 20),
        ReportCell("freestyle", "initial", 30, 0.0, 0.05, 2.0, 380, 20),
    ),
    confusions=(RunRecord("prompted", "initial", 30, 0, "user01", "user02", RunClass.FALSE_ACCEPT, 16),),
    notes=("skipped phase=freestyle user=user07 strokes=1200 needed=2000",),
)


def test_report_text_layout():
    assert ReportTextRenderer().render(SAMPLE) == (
        "keydyn-report v1\n"
        "[config]\n"
        "protocol=initial\n"
        "auth.threshold=0.65\n"
        "[table initial prompted]\n"
        "phase,protocol,param,far,frr,avg_blocks,impostor_runs,genuine_runs\n"
        "prompted,initial,30,0.0025,0.05,2.1947,380,20\n"
        "prompted,initial,50,0.015,0.035,2.3,380,20\n"
        "[table initial freestyle]\n"
        "phase,protocol,param,far,frr,avg_blocks,impostor_runs,genuine_runs\n"
        "freestyle,initial,30,0.0,0.05,2.0,380,20\n"
        "[confusions]\n"
        "phase,protocol,param,fold,model_user,test_user,outcome,blocks\n"
        "prompted,initial,30,0,user01,user02,FalseAccept,16\n"
        "[notes]\n"
        "skipped phase=freestyle user=user07 strokes=1200 needed=2000\n"
    )


def test_report_round_trips(rng):
    renderer = ReportTextRenderer()
    for _ in range(500):
        report = random_report(rng)
        text = renderer.render(report)
        assert parse_report(text) == report
        assert parse_report(text.encode("utf-8")) == report
        assert renderer.render(parse_report(text)) == text


def test_truncated_report_is_corrupt():
    text = ReportTextRenderer().render(SAMPLE)
    cut = text[: text.index("[confusions]")]
    with pytest.raises(CorruptReport):
        parse_report(cut)


@pytest.mark.parametrize("edit", [
    lambda t: t.replace("0.0025", "zero", 1),
    lambda t: t.replace("protocol=initial", "protocol", 1),
    lambda t: t.replace("[confusions]", "[confusion]", 1),
    lambda t: t.replace("FalseAccept", "Maybe", 1),
    lambda t: t.replace("keydyn-report", "other-report", 1),
    lambda t: "",
])
def test_edited_report_is_corrupt(edit):
    with pytest.raises(CorruptReport):
        parse_report(edit(ReportTextRenderer().render(SAMPLE)))


def test_other_version_is_rejected():
    text = ReportTextRenderer().render(SAMPLE).replace("v1", "v2", 1)
    with pytest.raises(VersionMismatch):
        parse_report(text)


def test_markdown_initial_tables():
    text = MarkdownReportRenderer().render(SAMPLE)
    assert "### First phase (Prompted)" in text
    assert "### Second phase (Freestyle)" in text
    assert "| Block size | 30 | 50 |" in text
    assert "| FAR | 0.0025 | 0.0150 |" in text
    assert "| Avg. characters to decision | 65.8 | 115.0 |" in text
    assert text.endswith("- skipped phase=freestyle user=user07 strokes=1200 needed=2000\n")


def test_markdown_kfold_table():
    report = EvalReport(
        config=(("kfold.block_size", "80"),),
        cells=(ReportCell("prompted", "kfold", 10, 0.01, 0.02, 1.5, 3800, 200),),
    )
    text = MarkdownReportRenderer(phase_labels={"prompted": "Prompted"}).render(report)
    assert "### Cross-validation (block size 80)" in text
    assert "| Prompted | 10 | 0.0100 | 0.0200 | 1.5000 | 120.0 |" in text


def test_unknown_phase_uses_raw_value():
    assert MarkdownReportRenderer().phase_label("mobile") == "mobile"
