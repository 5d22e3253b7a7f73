"""
Shared pytest fixtures for the keydyn test suite.
"""

from typing import Iterable, Tuple

import numpy as np
import pytest
from click.testing import CliRunner

from core.events import KeystrokeLog, Phase
from core.synth import CohortSpec, TypistProfile, generate_cohort_logs


def make_log(strokes: Iterable[Tuple[float, float]], user_id: str = "u", phase: Phase = Phase.PROMPTED) -> KeystrokeLog:
    """Build a validated log from (press_ms, release_ms) pairs."""
    return KeystrokeLog.from_strokes(user_id, phase, strokes)


def random_strokes(rng: np.random.Generator, n: int, rollover: float = 0.3):
    """Random well-formed strokes on a 1 ms grid with 3-decimal timestamps, some rolled over."""
    intervals = np.round(rng.uniform(20.0, 250.0, n), 3)
    press = np.round(np.concatenate([[rng.uniform(0, 50)], intervals[:-1]]).cumsum(), 3) if n else np.empty(0)
    holds = np.round(rng.uniform(30.0, 160.0, n), 3)
    rolled = rng.random(n) < rollover
    holds = np.where(rolled, holds + 200.0, holds)
    release = np.round(press + holds, 3)
    return list(zip(press.tolist(), release.tolist()))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture
def rollover_log() -> KeystrokeLog:
    return make_log([(0.0, 70.0), (50.0, 120.0)])


@pytest.fixture(scope="session")
def far_pair_spec() -> CohortSpec:
    """Two typists whose hold times differ by 80 ms with 2 ms jitter."""
    return CohortSpec((
        TypistProfile("slow", hold_mean_ms=140.0, hold_jitter_ms=2.0, dd_mean_ms=200.0, dd_jitter_ms=2.0, seed=1),
        TypistProfile("fast", hold_mean_ms=60.0, hold_jitter_ms=2.0, dd_mean_ms=200.0, dd_jitter_ms=2.0, seed=2),
    ))


@pytest.fixture(scope="session")
def far_pair_logs(far_pair_spec):
    return generate_cohort_logs(far_pair_spec)


@pytest.fixture(scope="session")
def identical_cohort_logs():
    """Three users sharing one zero-jitter profile: every digraph is the same."""
    spec = CohortSpec(tuple(
        TypistProfile(f"clone{k}", hold_mean_ms=80.0, hold_jitter_ms=0.0, dd_mean_ms=150.0, dd_jitter_ms=0.0, seed=k)
        for k in range(3)
    ))
    return generate_cohort_logs(spec)


@pytest.fixture
def cli_runner() -> CliRunner:
    return CliRunner()
