"""
Cohort directory management.
Reads and writes a cohort: its spec file plus one log file per (user, phase).

    <dir>/cohort.txt               keydyn-cohort v1 spec (optional when reading)
    <dir>/<user_id>_<phase>.log    keydyn-log v1, e.g. user01_prompted.log
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

from core.errors import InvalidConfig
from core.events import KeystrokeLog, Phase, load_log, serialize_log
from core.files import write_text_atomic
from core.synth import CohortSpec, generate_log, parse_cohort_spec, serialize_cohort_spec


logger = logging.getLogger(__name__)

SPEC_FILE = "cohort.txt"
LOG_SUFFIX = ".log"


def log_file_name(user_id: str, phase: Phase) -> str:
    return f"{user_id}_{phase.value}{LOG_SUFFIX}"


class CohortManager:
    """Manages a cohort directory and the logs in it."""

    def __init__(self, cohort_dir: Union[str, Path]):
        """
        Args:
            cohort_dir: Directory holding cohort.txt and the per-user log files
        """
        self.cohort_dir = Path(cohort_dir)
        self.spec: Optional[CohortSpec] = None
        self._users: Dict[Phase, List[str]] = {}

    def write(self, spec: CohortSpec) -> List[Path]:
        """
        Generate every log of a cohort and write it with the spec.

        Returns:
            Paths written, spec file first
        """
        self.spec = spec
        written = [write_text_atomic(self.cohort_dir / SPEC_FILE, serialize_cohort_spec(spec))]
        for phase in spec.phases:
            for profile in spec.profiles:
                log = generate_log(profile, spec.strokes_per_user, phase)
                written.append(write_text_atomic(self.cohort_dir / log_file_name(profile.user_id, phase),
                                                 serialize_log(log)))
        logger.info(
            "Wrote cohort of %d users x %d phases to %s",
            len(spec.profiles), len(spec.phases), self.cohort_dir,
        )
        return written

    def load(self) -> Dict[Phase, List[str]]:
        """
        Index the cohort directory.

        With a cohort.txt the user list comes from the spec; without one it is
        discovered from the log file names.

        Returns:
            Users per phase, sorted

        Raises:
            InvalidConfig: Directory missing, or a log named by the spec is missing
        """
        if not self.cohort_dir.is_dir():
            raise InvalidConfig(f"cohort directory not found: {self.cohort_dir}")

        spec_path = self.cohort_dir / SPEC_FILE
        if spec_path.exists():
            self.spec = parse_cohort_spec(spec_path.read_bytes())
            users = sorted(p.user_id for p in self.spec.profiles)
            self._users = {phase: list(users) for phase in self.spec.phases}
            for phase, phase_users in self._users.items():
                missing = [u for u in phase_users if not self.log_path(u, phase).exists()]
                if missing:
                    raise InvalidConfig(
                        f"cohort {self.cohort_dir} is missing {phase.value} logs for: {', '.join(missing)}"
                    )
        else:
            self._users = self._discover()
        if not self._users:
            raise InvalidConfig(f"no keystroke logs in {self.cohort_dir}")
        return self._users

    def _discover(self) -> Dict[Phase, List[str]]:
        found: Dict[Phase, List[str]] = {}
        for phase in Phase:
            suffix = f"_{phase.value}{LOG_SUFFIX}"
            users = sorted(
                p.name[: -len(suffix)] for p in self.cohort_dir.glob(f"*{suffix}") if len(p.name) > len(suffix)
            )
            if users:
                found[phase] = users
        return found

    def log_path(self, user_id: str, phase: Phase) -> Path:
        return self.cohort_dir / log_file_name(user_id, phase)

    def list_users(self, phase: Phase) -> List[str]:
        """Users with a log in the given phase."""
        if not self._users:
            self.load()
        return list(self._users.get(phase, []))

    def phases(self) -> List[Phase]:
        if not self._users:
            self.load()
        return [phase for phase in Phase if phase in self._users]

    def load_phase_logs(self, phase: Phase) -> Dict[str, KeystrokeLog]:
        """Parse every log of one phase, keyed by user_id."""
        logs = {}
        for user_id in self.list_users(phase):
            log = load_log(self.log_path(user_id, phase))
            if log.user_id and log.user_id != user_id:
                logger.warning("%s declares user=%s", self.log_path(user_id, phase).name, log.user_id)
            logs[user_id] = log
        return logs

    def load_all(self) -> Dict[Phase, Dict[str, KeystrokeLog]]:
        """All logs keyed by phase, then user_id."""
        return {phase: self.load_phase_logs(phase) for phase in self.phases()}
