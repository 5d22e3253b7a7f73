"""
Seeded synthetic typist cohorts.

Each typist presses keys at clamped-normal intervals and holds them for
clamped-normal durations. With probability rollover_prob the hold is stretched
past the next press (negative UD). The Freestyle phase adds a linear drift of
the means and 25% extra jitter.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple, Union

import numpy as np

from .errors import CrowdedCohort, InvalidProfile, MalformedLine, TooFewUsers, VersionMismatch
from .events import KeystrokeLog, Phase


logger = logging.getLogger(__name__)

HOLD_FLOOR_MS = 5.0
INTERVAL_FLOOR_MS = 5.0
OVERLAP_FLOOR_MS = 1.0
FREESTYLE_JITTER_FACTOR = 1.25
DEFAULT_STROKES = 2000
MIN_SEPARATION_MS = 8.0

HOLD_RANGE_MS = (60.0, 140.0)
DD_RANGE_MS = (110.0, 260.0)
# Minimum gap between a typist's mean hold and mean press interval.
FLIGHT_MARGIN_MS = 40.0

COHORT_MAGIC = "keydyn-cohort"
COHORT_VERSION = "v1"
_PROFILE_FIELDS = (
    "user_id", "hold_mean_ms", "hold_jitter_ms", "dd_mean_ms", "dd_jitter_ms",
    "rollover_prob", "drift_per_1000", "seed",
)


@dataclass(frozen=True)
class TypistProfile:
    user_id: str
    hold_mean_ms: float
    hold_jitter_ms: float
    dd_mean_ms: float
    dd_jitter_ms: float
    rollover_prob: float = 0.0
    drift_per_1000: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.user_id or any(c.isspace() or c in ",=" for c in self.user_id):
            raise InvalidProfile(f"user_id {self.user_id!r} must be non-empty without spaces, ',' or '='")
        if self.hold_jitter_ms < 0 or self.dd_jitter_ms < 0:
            raise InvalidProfile(f"user={self.user_id} jitter must be non-negative")
        if not self.hold_mean_ms > 3.0 * self.hold_jitter_ms:
            raise InvalidProfile(
                f"user={self.user_id} hold_mean {self.hold_mean_ms} must exceed 3 x jitter {self.hold_jitter_ms}"
            )
        if not self.dd_mean_ms > self.hold_mean_ms:
            raise InvalidProfile(
                f"user={self.user_id} dd_mean {self.dd_mean_ms} must exceed hold_mean {self.hold_mean_ms}"
            )
        if not 0.0 <= self.rollover_prob <= 1.0:
            raise InvalidProfile(f"user={self.user_id} rollover_prob must be in [0, 1]")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidProfile(f"user={self.user_id} seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class CohortSpec:
    profiles: Tuple[TypistProfile, ...]
    strokes_per_user: int = DEFAULT_STROKES
    phases: Tuple[Phase, ...] = field(default=(Phase.PROMPTED, Phase.FREESTYLE))

    def __post_init__(self):
        ids = [p.user_id for p in self.profiles]
        if len(set(ids)) != len(ids):
            raise InvalidProfile(f"user_ids must be distinct: {ids}")
        if self.strokes_per_user < 1:
            raise InvalidProfile(f"strokes_per_user must be positive, got {self.strokes_per_user}")


def _clamped_normal(rng: np.random.Generator, mean: np.ndarray, jitter: float, floor: float) -> np.ndarray:
    return np.maximum(floor, rng.normal(mean, jitter))


def generate_log(profile: TypistProfile, strokes: int, phase: Phase) -> KeystrokeLog:
    """
    Generate a deterministic keystroke log for one typist and phase.

    Args:
        profile: Typist timing parameters
        strokes: Number of complete strokes
        phase: Prompted, or Freestyle (drift + extra jitter)

    Returns:
        Validated KeystrokeLog with timestamps rounded to 3 decimals

    Raises:
        InvalidProfile: strokes is negative
    """
    if strokes < 0:
        raise InvalidProfile(f"strokes must be non-negative, got {strokes}")
    phase_index = 0 if phase is Phase.PROMPTED else 1
    rng = np.random.default_rng(np.random.SeedSequence([profile.seed, phase_index]))

    hold_mean = np.full(strokes, profile.hold_mean_ms)
    dd_mean = np.full(strokes, profile.dd_mean_ms)
    hold_jitter, dd_jitter = profile.hold_jitter_ms, profile.dd_jitter_ms
    if phase is Phase.FREESTYLE:
        drift = profile.drift_per_1000 * np.arange(strokes) / 1000.0
        hold_mean = hold_mean + drift
        dd_mean = dd_mean + drift
        hold_jitter *= FREESTYLE_JITTER_FACTOR
        dd_jitter *= FREESTYLE_JITTER_FACTOR

    # Draw order is fixed so a profile always maps to the same stream.
    intervals = _clamped_normal(rng, dd_mean, dd_jitter, INTERVAL_FLOOR_MS)
    holds = _clamped_normal(rng, hold_mean, hold_jitter, HOLD_FLOOR_MS)
    rolls = rng.random(strokes) < profile.rollover_prob
    overlaps = _clamped_normal(rng, 0.2 * hold_mean, hold_jitter, OVERLAP_FLOOR_MS)

    press = np.concatenate([[0.0], np.cumsum(intervals[:-1])]) if strokes else np.empty(0)
    next_interval = np.append(intervals[:-1], np.inf) if strokes else np.empty(0)
    has_next = np.isfinite(next_interval)
    holds = np.where(rolls & has_next, next_interval + overlaps, holds)
    holds = np.where(~rolls & has_next, np.minimum(holds, next_interval), holds)

    press = np.round(press, 3)
    release = np.round(press + holds, 3)
    log = KeystrokeLog.from_strokes(profile.user_id, phase, zip(press.tolist(), release.tolist()))
    logger.debug(
        "Generated user=%s phase=%s strokes=%d seed=%d",
        profile.user_id, phase.value, strokes, profile.seed,
    )
    return log


def _grid_means(n_users: int) -> List[Tuple[float, float]]:
    rows = max(1, math.ceil(math.sqrt(1.25 * n_users)))
    rows = min(rows, n_users)
    hold_levels = np.linspace(*HOLD_RANGE_MS, rows) if rows > 1 else np.array([HOLD_RANGE_MS[0]])
    per_row = [n_users // rows + (1 if r < n_users % rows else 0) for r in range(rows)]

    means = []
    for hold, count in zip(hold_levels, per_row):
        low = max(DD_RANGE_MS[0], hold + FLIGHT_MARGIN_MS)
        dd_levels = np.linspace(low, DD_RANGE_MS[1], count) if count > 1 else np.array([low])
        means.extend((float(hold), float(dd)) for dd in dd_levels)
    return means


def _min_separation(means: List[Tuple[float, float]]) -> float:
    best = math.inf
    for a in range(len(means)):
        for b in range(a + 1, len(means)):
            gap = max(abs(means[a][0] - means[b][0]), abs(means[a][1] - means[b][1]))
            best = min(best, gap)
    return best


def default_cohort(n_users: int, master_seed: int, strokes_per_user: int = DEFAULT_STROKES) -> CohortSpec:
    """
    Build a well-separated cohort of typists.

    Hold means are spread over [60, 140] ms and press-interval means over
    [110, 260] ms on a sheared grid; positions, jitters, rollover and drift are
    drawn from master_seed.

    Raises:
        TooFewUsers: n_users < 2
        CrowdedCohort: Parameters would be closer than 8 ms
    """
    if n_users < 2:
        raise TooFewUsers(f"a cohort needs at least 2 users, got {n_users}")
    means = _grid_means(n_users)
    separation = _min_separation(means)
    if separation < MIN_SEPARATION_MS:
        raise CrowdedCohort(f"{n_users} users leave only {separation:.2f} ms separation")

    rng = np.random.default_rng(np.random.SeedSequence(master_seed))
    order = rng.permutation(n_users)
    hold_jitter = rng.uniform(2.0, 4.0, n_users)
    dd_jitter = rng.uniform(4.0, 6.0, n_users)
    rollover = rng.uniform(0.0, 0.08, n_users)
    drift = rng.uniform(-2.0, 2.0, n_users)
    seeds = rng.integers(0, 2 ** 63, n_users)

    width = len(str(n_users))
    profiles = []
    for k in range(n_users):
        hold, dd = means[int(order[k])]
        profiles.append(TypistProfile(
            user_id=f"user{k + 1:0{width}d}",
            hold_mean_ms=hold,
            hold_jitter_ms=round(float(hold_jitter[k]), 3),
            dd_mean_ms=dd,
            dd_jitter_ms=round(float(dd_jitter[k]), 3),
            rollover_prob=round(float(rollover[k]), 4),
            drift_per_1000=round(float(drift[k]), 3),
            seed=int(seeds[k]),
        ))
    logger.info("Built cohort of %d users (seed=%d, separation %.1f ms)", n_users, master_seed, separation)
    return CohortSpec(tuple(profiles), strokes_per_user)


def generate_cohort_logs(spec: CohortSpec) -> Dict[Phase, Dict[str, KeystrokeLog]]:
    """Generate every (phase, user) log of a cohort, keyed by phase then user_id."""
    return {
        phase: {p.user_id: generate_log(p, spec.strokes_per_user, phase) for p in spec.profiles}
        for phase in spec.phases
    }


def serialize_cohort_spec(spec: CohortSpec) -> str:
    lines = [
        f"# {COHORT_MAGIC} {COHORT_VERSION}",
        f"strokes_per_user={spec.strokes_per_user}",
        "phases=" + ",".join(p.value for p in spec.phases),
        ",".join(_PROFILE_FIELDS),
    ]
    for p in spec.profiles:
        lines.append(",".join([
            p.user_id, repr(p.hold_mean_ms), repr(p.hold_jitter_ms), repr(p.dd_mean_ms),
            repr(p.dd_jitter_ms), repr(p.rollover_prob), repr(p.drift_per_1000), str(p.seed),
        ]))
    return "\n".join(lines) + "\n"


def parse_cohort_spec(source: Union[str, bytes]) -> CohortSpec:
    """
    Parse a keydyn-cohort v1 file.

    Raises:
        VersionMismatch, MalformedLine, InvalidProfile
    """
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedLine(f"line=0 not valid UTF-8: {e}") from None
    lines = [line.strip() for line in source.splitlines() if line.strip()]
    if not lines or not lines[0].startswith(f"# {COHORT_MAGIC}"):
        raise MalformedLine(f"line=1 missing '# {COHORT_MAGIC} {COHORT_VERSION}' header")
    version = lines[0].split()[-1]
    if version != COHORT_VERSION:
        raise VersionMismatch(f"cohort format {version!r}, expected {COHORT_VERSION!r}")
    if len(lines) < 4 or lines[3] != ",".join(_PROFILE_FIELDS):
        raise MalformedLine("line=4 missing profile column header")

    try:
        strokes = int(lines[1].removeprefix("strokes_per_user="))
        phases = tuple(Phase(v) for v in lines[2].removeprefix("phases=").split(","))
    except ValueError as e:
        raise MalformedLine(f"line=2 unreadable cohort settings: {e}") from None

    profiles = []
    for line_no, line in enumerate(lines[4:], 5):
        fields = line.split(",")
        if len(fields) != len(_PROFILE_FIELDS):
            raise MalformedLine(f"line={line_no} expected {len(_PROFILE_FIELDS)} fields, got {len(fields)}")
        try:
            profiles.append(TypistProfile(
                fields[0], *(float(v) for v in fields[1:7]), seed=int(fields[7]),
            ))
        except ValueError as e:
            if isinstance(e, InvalidProfile):
                raise
            raise MalformedLine(f"line={line_no} unreadable profile: {e}") from None
    return CohortSpec(tuple(profiles), strokes, phases)
