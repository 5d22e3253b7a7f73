"""
Anonymized keystroke timing logs: types, parser, validator and serializer.

A log records only when keys go down and come up. Each stroke carries an
ephemeral stroke_id that pairs its press with its release; nothing about the
key itself is stored.

Log file format (UTF-8, one event per line):

    # keydyn-log v1 user=<id> phase=<prompted|freestyle>
    <stroke_id>,<P|R>,<t_ms>
"""

import logging
import math
import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .errors import (
    DuplicateStrokeKind,
    MalformedLine,
    NegativeHold,
    NonMonotonicPress,
    OrphanStroke,
    OutOfRange,
)


logger = logging.getLogger(__name__)

LOG_MAGIC = "keydyn-log"
LOG_VERSION = "v1"
_HEADER_RE = re.compile(
    r"^#\s*keydyn-log\s+(?P<version>\S+)\s+user=(?P<user>\S*)\s+phase=(?P<phase>\S+)\s*$"
)


class KeyKind(str, Enum):
    PRESS = "P"
    RELEASE = "R"


class Phase(str, Enum):
    """Collection phase: typing to a prompt, or free use of the computer."""

    PROMPTED = "prompted"
    FREESTYLE = "freestyle"


@dataclass(frozen=True)
class KeyEvent:
    stroke_id: int
    kind: KeyKind
    t_ms: float

    def sort_key(self) -> Tuple[float, int, int]:
        return (self.t_ms, self.stroke_id, 0 if self.kind is KeyKind.PRESS else 1)


@dataclass(frozen=True)
class KeystrokeLog:
    """
    Immutable, validated keystroke timing stream.

    Events are kept in canonical order: by t_ms, then stroke_id, press before
    release. Build instances through parse_log() or KeystrokeLog.from_strokes();
    both validate.
    """

    user_id: str
    phase: Phase
    events: Tuple[KeyEvent, ...]

    @classmethod
    def from_strokes(
        cls,
        user_id: str,
        phase: Phase,
        strokes: Iterable[Tuple[float, float]],
        first_id: int = 0,
    ) -> "KeystrokeLog":
        """
        Build a log from (press_ms, release_ms) pairs in press order.

        Args:
            user_id: Opaque user label
            phase: Collection phase
            strokes: Press/release times, one pair per stroke
            first_id: stroke_id assigned to the first stroke

        Returns:
            Validated KeystrokeLog
        """
        events: List[KeyEvent] = []
        for offset, (press, release) in enumerate(strokes):
            sid = first_id + offset
            events.append(KeyEvent(sid, KeyKind.PRESS, float(press)))
            events.append(KeyEvent(sid, KeyKind.RELEASE, float(release)))
        return cls(user_id, phase, validate_events(events))

    @cached_property
    def _stroke_table(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        press: Dict[int, float] = {}
        release: Dict[int, float] = {}
        for event in self.events:
            target = press if event.kind is KeyKind.PRESS else release
            target[event.stroke_id] = event.t_ms
        ids = sorted(press)
        return (
            np.asarray(ids, dtype=np.int64),
            np.asarray([press[i] for i in ids], dtype=np.float64),
            np.asarray([release[i] for i in ids], dtype=np.float64),
        )

    @property
    def stroke_ids(self) -> np.ndarray:
        return self._stroke_table[0]

    def stroke_times(self) -> Tuple[np.ndarray, np.ndarray]:
        """Return (press_ms, release_ms) arrays in stroke order."""
        _, press, release = self._stroke_table
        return press, release

    @property
    def duration_ms(self) -> float:
        if not self.events:
            return 0.0
        return self.events[-1].t_ms - self.events[0].t_ms


def validate_events(events: Sequence[KeyEvent]) -> Tuple[KeyEvent, ...]:
    """
    Check every KeyEvent invariant and return the events in canonical order.

    Violations are reported for the lowest offending stroke_id first.

    Raises:
        DuplicateStrokeKind, OrphanStroke, NegativeHold, NonMonotonicPress
    """
    press: Dict[int, float] = {}
    release: Dict[int, float] = {}
    for event in events:
        target = press if event.kind is KeyKind.PRESS else release
        if event.stroke_id in target:
            raise DuplicateStrokeKind(
                f"stroke_id={event.stroke_id} has more than one {event.kind.value} event"
            )
        target[event.stroke_id] = event.t_ms

    for sid in sorted(set(press) | set(release)):
        if sid not in release:
            raise OrphanStroke(f"stroke_id={sid} has a press without a release")
        if sid not in press:
            raise OrphanStroke(f"stroke_id={sid} has a release without a press")
        if release[sid] < press[sid]:
            raise NegativeHold(
                f"stroke_id={sid} released at {release[sid]} before press at {press[sid]}"
            )

    previous_id, previous_t = None, -math.inf
    for sid in sorted(press):
        if press[sid] < previous_t:
            raise NonMonotonicPress(
                f"stroke_id={sid} pressed at {press[sid]} before stroke_id={previous_id} at {previous_t}"
            )
        previous_id, previous_t = sid, press[sid]

    return tuple(sorted(events, key=KeyEvent.sort_key))


def _parse_event(line: str, line_no: int) -> KeyEvent:
    fields = line.split(",")
    if len(fields) != 3:
        raise MalformedLine(f"line={line_no} expected 3 fields, got {len(fields)}")
    raw_id, raw_kind, raw_t = (field.strip() for field in fields)
    try:
        stroke_id = int(raw_id)
    except ValueError:
        raise MalformedLine(f"line={line_no} stroke_id {raw_id!r} is not an integer") from None
    if stroke_id < 0:
        raise MalformedLine(f"line={line_no} stroke_id {stroke_id} is negative")
    try:
        kind = KeyKind(raw_kind)
    except ValueError:
        raise MalformedLine(f"line={line_no} kind {raw_kind!r} is not P or R") from None
    try:
        t_ms = float(raw_t)
    except ValueError:
        raise MalformedLine(f"line={line_no} t_ms {raw_t!r} is not a number") from None
    if not math.isfinite(t_ms) or t_ms < 0:
        raise MalformedLine(f"line={line_no} t_ms {raw_t!r} must be finite and non-negative")
    return KeyEvent(stroke_id, kind, t_ms)


def parse_log(source: Union[str, bytes]) -> KeystrokeLog:
    """
    Parse and validate a keydyn-log v1 text.

    Args:
        source: File content as text or UTF-8 bytes

    Returns:
        Validated KeystrokeLog (user "" and phase prompted when no header)

    Raises:
        MalformedLine, OrphanStroke, NegativeHold, NonMonotonicPress,
        DuplicateStrokeKind
    """
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedLine(f"line=0 not valid UTF-8: {e}") from None

    user_id, phase = "", Phase.PROMPTED
    seen_comment = False
    events: List[KeyEvent] = []

    for line_no, raw in enumerate(source.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if not seen_comment:
                seen_comment = True
                header = _HEADER_RE.match(line)
                if header:
                    if header.group("version") != LOG_VERSION:
                        raise MalformedLine(
                            f"line={line_no} unsupported log version {header.group('version')!r}"
                        )
                    user_id = header.group("user")
                    try:
                        phase = Phase(header.group("phase"))
                    except ValueError:
                        raise MalformedLine(
                            f"line={line_no} unknown phase {header.group('phase')!r}"
                        ) from None
            continue
        events.append(_parse_event(line, line_no))

    log = KeystrokeLog(user_id, phase, validate_events(events))
    logger.debug("Parsed log user=%s phase=%s strokes=%d", user_id, phase.value, stroke_count(log))
    return log


def format_ms(t_ms: float) -> str:
    """Print a timestamp with at most 3 decimals, keeping one (100.0, 100.25)."""
    text = f"{t_ms:.3f}".rstrip("0")
    return text + "0" if text.endswith(".") else text


def serialize_log(log: KeystrokeLog) -> str:
    """Render a log in keydyn-log v1 format (header always written)."""
    lines = [f"# {LOG_MAGIC} {LOG_VERSION} user={log.user_id} phase={log.phase.value}"]
    lines.extend(f"{e.stroke_id},{e.kind.value},{format_ms(e.t_ms)}" for e in log.events)
    return "\n".join(lines) + "\n"


def load_log(path: Union[str, Path]) -> KeystrokeLog:
    return parse_log(Path(path).read_bytes())


def stroke_count(log: KeystrokeLog) -> int:
    """Number of complete strokes (the unit the protocols call a character)."""
    return len(log.stroke_ids)


def slice_strokes(log: KeystrokeLog, start: int, length: int) -> KeystrokeLog:
    """
    Sub-log holding strokes [start, start + length) in stroke order.

    Both events of each kept stroke are included with timestamps unchanged.

    Raises:
        OutOfRange: If the range does not fit inside the log
    """
    total = stroke_count(log)
    if start < 0 or length < 0 or start + length > total:
        raise OutOfRange(f"strokes [{start}, {start + length}) outside log of {total} strokes")
    if start == 0 and length == total:
        return log
    keep = set(log.stroke_ids[start:start + length].tolist())
    events = tuple(e for e in log.events if e.stroke_id in keep)
    return KeystrokeLog(log.user_id, log.phase, events)
