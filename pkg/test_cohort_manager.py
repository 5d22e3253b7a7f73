"""
Tests for reading and writing cohort directories.
"""

import logging

import pytest

from cohort_manager import SPEC_FILE, CohortManager, log_file_name
from core.errors import InvalidConfig, MalformedLine
from core.events import Phase, serialize_log, stroke_count
from core.synth import default_cohort, generate_cohort_logs


@pytest.fixture
def small_spec():
    return default_cohort(3, 4, strokes_per_user=60)


def test_log_file_name():
    assert log_file_name("user01", Phase.FREESTYLE) == "user01_freestyle.log"


def test_write_then_load(tmp_path, small_spec):
    cohort_dir = tmp_path / "cohort"
    written = CohortManager(cohort_dir).write(small_spec)
    assert written[0] == cohort_dir / SPEC_FILE
    assert len(written) == 1 + 3 * 2
    assert not list(cohort_dir.glob("*.tmp"))

    manager = CohortManager(cohort_dir)
    users = manager.load()
    assert users == {Phase.PROMPTED: ["user1", "user2", "user3"], Phase.FREESTYLE: ["user1", "user2", "user3"]}
    assert manager.spec == small_spec

    logs = manager.load_all()
    expected = generate_cohort_logs(small_spec)
    for phase in Phase:
        for user_id, log in logs[phase].items():
            assert stroke_count(log) == 60
            assert serialize_log(log) == serialize_log(expected[phase][user_id])


def test_discovers_logs_without_spec(tmp_path, small_spec):
    CohortManager(tmp_path).write(small_spec)
    (tmp_path / SPEC_FILE).unlink()
    (tmp_path / "user2_freestyle.log").unlink()
    (tmp_path / "notes.txt").write_text("ignored", encoding="utf-8")

    manager = CohortManager(tmp_path)
    assert manager.phases() == [Phase.PROMPTED, Phase.FREESTYLE]
    assert manager.list_users(Phase.FREESTYLE) == ["user1", "user3"]
    assert manager.spec is None


def test_missing_directory(tmp_path):
    with pytest.raises(InvalidConfig, match="not found"):
        CohortManager(tmp_path / "absent").load()


def test_empty_directory(tmp_path):
    with pytest.raises(InvalidConfig, match="no keystroke logs"):
        CohortManager(tmp_path).load()


def test_spec_names_missing_log(tmp_path, small_spec):
    CohortManager(tmp_path).write(small_spec)
    (tmp_path / "user3_prompted.log").unlink()
    with pytest.raises(InvalidConfig, match="user3"):
        CohortManager(tmp_path).load()


def test_user_mismatch_is_logged(tmp_path, small_spec, caplog):
    manager = CohortManager(tmp_path)
    manager.write(small_spec)
    source = tmp_path / "user1_prompted.log"
    source.rename(tmp_path / "user9_prompted.log")
    (tmp_path / SPEC_FILE).unlink()

    with caplog.at_level(logging.WARNING):
        logs = CohortManager(tmp_path).load_phase_logs(Phase.PROMPTED)
    assert sorted(logs) == ["user2", "user3", "user9"]
    assert logs["user9"].user_id == "user1"
    assert "declares user=user1" in caplog.text


def test_undecodable_spec_file(tmp_path, small_spec):
    CohortManager(tmp_path).write(small_spec)
    (tmp_path / SPEC_FILE).write_bytes(b"# keydyn-cohort v1\n\xc3\x28\n")
    with pytest.raises(MalformedLine):
        CohortManager(tmp_path).load()
