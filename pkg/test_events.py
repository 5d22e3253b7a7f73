"""
Tests for keystroke log parsing, validation, serialization and slicing.
"""

import numpy as np
import pytest

from conftest import make_log, random_strokes
from core.errors import (
    DuplicateStrokeKind,
    MalformedLine,
    NegativeHold,
    NonMonotonicPress,
    OrphanStroke,
    OutOfRange,
)
from core.events import (
    KeyEvent,
    KeyKind,
    Phase,
    format_ms,
    load_log,
    parse_log,
    serialize_log,
    slice_strokes,
    stroke_count,
)


def test_minimal_complete_stroke():
    log = parse_log("0,P,100.0\n0,R,180.0\n")
    assert stroke_count(log) == 1
    assert log.stroke_times()[0].tolist() == [100.0]
    assert log.stroke_times()[1].tolist() == [180.0]


def test_release_before_press_is_negative_hold():
    with pytest.raises(NegativeHold, match="stroke_id=0"):
        parse_log("0,P,100.0\n0,R,90.0\n")


def test_rollover_is_legal():
    log = parse_log("0,P,0\n1,P,50\n0,R,70\n1,R,120\n")
    assert stroke_count(log) == 2
    assert [(e.stroke_id, e.kind) for e in log.events] == [
        (0, KeyKind.PRESS), (1, KeyKind.PRESS), (0, KeyKind.RELEASE), (1, KeyKind.RELEASE),
    ]


def test_header_sets_user_and_phase():
    log = parse_log("# keydyn-log v1 user=user07 phase=freestyle\n0,P,1\n0,R,2\n")
    assert log.user_id == "user07"
    assert log.phase is Phase.FREESTYLE


def test_missing_header_defaults():
    log = parse_log("# some comment\n0,P,1\n0,R,2\n")
    assert log.user_id == ""
    assert log.phase is Phase.PROMPTED


def test_empty_log_has_no_strokes():
    log = parse_log("")
    assert stroke_count(log) == 0
    assert log.duration_ms == 0.0


def test_unknown_log_version_rejected():
    with pytest.raises(MalformedLine, match="line=1"):
        parse_log("# keydyn-log v2 user=a phase=prompted\n")


@pytest.mark.parametrize("text,line", [
    ("0,P\n", 1),
    ("0,P,1\n0,X,2\n", 2),
    ("a,P,1\n", 1),
    ("0,P,abc\n", 1),
    ("0,P,-5\n", 1),
    ("0,P,1,2\n", 1),
    ("0,P,nan\n", 1),
])
def test_malformed_lines(text, line):
    with pytest.raises(MalformedLine, match=f"^line={line} "):
        parse_log(text)


def test_press_without_release():
    with pytest.raises(OrphanStroke, match="^stroke_id=1 "):
        parse_log("0,P,0\n0,R,10\n1,P,20\n")


def test_release_without_press():
    with pytest.raises(OrphanStroke, match="^stroke_id=0 "):
        parse_log("0,R,10\n")


def test_duplicate_kind():
    with pytest.raises(DuplicateStrokeKind, match="stroke_id=0"):
        parse_log("0,P,0\n0,P,1\n0,R,5\n")


def test_press_order_follows_stroke_id():
    with pytest.raises(NonMonotonicPress, match="^stroke_id=1 "):
        parse_log("0,P,100\n0,R,150\n1,P,50\n1,R,60\n")


def test_equal_press_times_are_allowed():
    log = parse_log("0,P,10\n1,P,10\n0,R,20\n1,R,30\n")
    assert stroke_count(log) == 2


def test_event_order_in_file_does_not_matter():
    a = parse_log("0,P,0\n0,R,70\n1,P,50\n1,R,120\n")
    b = parse_log("1,R,120\n0,R,70\n1,P,50\n0,P,0\n")
    assert a == b


@pytest.mark.parametrize("t,text", [
    (100.0, "100.0"),
    (100.25, "100.25"),
    (0.0, "0.0"),
    (12.345, "12.345"),
    (7.1, "7.1"),
])
def test_format_ms(t, text):
    assert format_ms(t) == text


def test_serialize_round_trip(rng):
    for case in range(500):
        n = int(rng.integers(0, 30))
        phase = Phase.FREESTYLE if case % 2 else Phase.PROMPTED
        log = make_log(random_strokes(rng, n), f"user{case}", phase)
        assert parse_log(serialize_log(log)) == log


def test_load_log_reads_bytes(tmp_path, rollover_log):
    path = tmp_path / "u_prompted.log"
    path.write_text(serialize_log(rollover_log), encoding="utf-8")
    assert load_log(path) == rollover_log


def test_single_mutations_are_rejected(rng):
    """Break one invariant of a valid rollover log at a time."""
    log = make_log(random_strokes(rng, 12, rollover=0.5))
    events = list(log.events)
    press = {e.stroke_id: e for e in events if e.kind is KeyKind.PRESS}
    release = {e.stroke_id: e for e in events if e.kind is KeyKind.RELEASE}

    def render(evs):
        return "".join(f"{e.stroke_id},{e.kind.value},{format_ms(e.t_ms)}\n" for e in evs)

    with pytest.raises(OrphanStroke):
        parse_log(render([e for e in events if e is not release[5]]))
    with pytest.raises(DuplicateStrokeKind):
        parse_log(render(events + [press[3]]))
    with pytest.raises(NegativeHold):
        bad = KeyEvent(4, KeyKind.RELEASE, press[4].t_ms - 1.0)
        parse_log(render([bad if e is release[4] else e for e in events]))
    with pytest.raises(NonMonotonicPress):
        late = KeyEvent(6, KeyKind.PRESS, press[7].t_ms + 1.0)
        early_release = [e for e in events if e is not press[6]]
        fixed = [
            KeyEvent(e.stroke_id, e.kind, late.t_ms + 10.0)
            if e.kind is KeyKind.RELEASE and e.stroke_id == late.stroke_id else e
            for e in early_release
        ]
        parse_log(render(fixed + [late]))


def test_slice_training_split():
    log = make_log([(i * 100.0, i * 100.0 + 50.0) for i in range(2000)])
    assert stroke_count(slice_strokes(log, 0, 1500)) == 1500


def test_slice_identity(rollover_log):
    assert slice_strokes(rollover_log, 0, stroke_count(rollover_log)) == rollover_log


def test_slice_out_of_range(rollover_log):
    with pytest.raises(OutOfRange):
        slice_strokes(rollover_log, 0, 3)
    with pytest.raises(OutOfRange):
        slice_strokes(rollover_log, -1, 1)


def test_adjacent_slices_cover_range(rng):
    log = make_log(random_strokes(rng, 40))
    a, b, c = 5, 12, 9
    first = slice_strokes(log, a, b)
    second = slice_strokes(log, a + b, c)
    whole = slice_strokes(log, a, b + c)
    ids = first.stroke_ids.tolist() + second.stroke_ids.tolist()
    assert ids == whole.stroke_ids.tolist() == list(range(a, a + b + c))
    assert sorted(first.events + second.events, key=KeyEvent.sort_key) == list(whole.events)


def test_slice_keeps_timestamps(rollover_log):
    tail = slice_strokes(rollover_log, 1, 1)
    assert [e.t_ms for e in tail.events] == [50.0, 120.0]
    assert np.array_equal(tail.stroke_ids, [1])
