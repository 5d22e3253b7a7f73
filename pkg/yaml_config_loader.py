"""
YAML experiment-config loader and validator.
Loads the experiment YAML file and converts it to typed configuration objects.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import yaml

from core.authenticator import AuthConfig
from core.errors import InvalidConfig
from core.evaluation import FoldStrategy, InitialProtocol, KFoldProtocol
from core.ocsvm import GAMMA_SCALE, OcsvmConfig


logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = os.path.join("config", "keydyn.yaml")
CONFIG_ENV_VAR = "KEYDYN_CONFIG"

SECTION_KEYS = {
    "ocsvm": {"nu", "gamma", "kkt_tol", "max_iter", "alpha_floor"},
    "auth": {"block_size", "threshold", "drop_partial_final_block"},
    "initial": {"train_strokes", "test_strokes", "block_sizes"},
    "kfold": {"folds", "block_size", "fold_strategy", "seed", "total_strokes"},
    "synth": {"users", "strokes", "seed"},
}


@dataclass(frozen=True)
class SynthSettings:
    users: int = 20
    strokes: int = 2000
    seed: int = 42

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidConfig(f"synth.seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Every tunable of a keydyn experiment, already validated."""

    ocsvm: OcsvmConfig = field(default_factory=OcsvmConfig)
    auth: AuthConfig = field(default_factory=AuthConfig)
    initial: InitialProtocol = field(default_factory=InitialProtocol)
    kfold_folds: Tuple[int, ...] = (5, 10)
    kfold: KFoldProtocol = field(default_factory=KFoldProtocol)
    synth: SynthSettings = field(default_factory=SynthSettings)

    def kfold_protocols(self, folds: Optional[Tuple[int, ...]] = None) -> Tuple[KFoldProtocol, ...]:
        """One KFoldProtocol per fold count, sharing every other setting."""
        return tuple(
            KFoldProtocol(
                n_folds=n,
                block_size=self.kfold.block_size,
                threshold=self.kfold.threshold,
                fold_strategy=self.kfold.fold_strategy,
                seed=self.kfold.seed,
                total_strokes=self.kfold.total_strokes,
            )
            for n in (folds or self.kfold_folds)
        )


class ExperimentConfigLoader:
    """Loads and validates YAML experiment files."""

    def __init__(self, yaml_file: Optional[str] = None):
        """
        Args:
            yaml_file: Path to YAML config file. If omitted, KEYDYN_CONFIG is
                       used, then config/keydyn.yaml; a missing default file
                       means built-in defaults.
        """
        self.explicit = yaml_file is not None or CONFIG_ENV_VAR in os.environ
        self.yaml_file = yaml_file or os.environ.get(CONFIG_ENV_VAR) or DEFAULT_CONFIG_PATH
        self.raw_data: Dict[str, Any] = {}
        self.config: Optional[ExperimentConfig] = None

    def load(self) -> ExperimentConfig:
        """
        Load and parse the YAML config file.

        Returns:
            ExperimentConfig with file values over built-in defaults

        Raises:
            InvalidConfig: Explicit file missing, malformed YAML, unknown keys
                           or out-of-range values
        """
        if not os.path.exists(self.yaml_file):
            if self.explicit:
                raise InvalidConfig(f"config file not found: {self.yaml_file}")
            logger.info("No config file at %s, using built-in defaults", self.yaml_file)
            self.config = ExperimentConfig()
            return self.config

        try:
            with open(self.yaml_file, 'r', encoding='utf-8') as f:
                self.raw_data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise InvalidConfig(f"{self.yaml_file}: malformed YAML: {e}") from None

        self._validate_schema()
        self.config = self._convert_to_config()
        logger.info("Loaded experiment config from %s", self.yaml_file)
        return self.config

    def _validate_schema(self):
        """Reject unknown sections and keys."""
        if not isinstance(self.raw_data, dict):
            raise InvalidConfig("YAML root must be a dictionary")

        for section, values in self.raw_data.items():
            if section not in SECTION_KEYS:
                raise InvalidConfig(f"unknown section '{section}'")
            if not isinstance(values, dict):
                raise InvalidConfig(f"section '{section}' must be a dictionary")
            unknown = set(values) - SECTION_KEYS[section]
            if unknown:
                raise InvalidConfig(f"unknown key(s) in '{section}': {', '.join(sorted(unknown))}")

    def _section(self, name: str) -> Dict[str, Any]:
        return self.raw_data.get(name) or {}

    def _convert_to_config(self) -> ExperimentConfig:
        """Build typed config objects; their own validation raises InvalidConfig."""
        defaults = ExperimentConfig()
        try:
            ocsvm = self._section("ocsvm")
            gamma = ocsvm.get("gamma", GAMMA_SCALE)
            ocsvm_cfg = OcsvmConfig(
                nu=float(ocsvm.get("nu", defaults.ocsvm.nu)),
                gamma=gamma if gamma == GAMMA_SCALE else float(gamma),
                kkt_tol=float(ocsvm.get("kkt_tol", defaults.ocsvm.kkt_tol)),
                max_iter=int(ocsvm.get("max_iter", defaults.ocsvm.max_iter)),
                alpha_floor=float(ocsvm.get("alpha_floor", defaults.ocsvm.alpha_floor)),
            )

            auth = self._section("auth")
            auth_cfg = AuthConfig(
                block_size=int(auth.get("block_size", defaults.auth.block_size)),
                threshold=float(auth.get("threshold", defaults.auth.threshold)),
                drop_partial_final_block=bool(
                    auth.get("drop_partial_final_block", defaults.auth.drop_partial_final_block)
                ),
            )

            initial = self._section("initial")
            initial_cfg = InitialProtocol(
                train_strokes=int(initial.get("train_strokes", defaults.initial.train_strokes)),
                test_strokes=int(initial.get("test_strokes", defaults.initial.test_strokes)),
                block_sizes=tuple(int(b) for b in initial.get("block_sizes", defaults.initial.block_sizes)),
                threshold=auth_cfg.threshold,
            )

            kfold = self._section("kfold")
            folds = tuple(int(n) for n in kfold.get("folds", defaults.kfold_folds))
            if not folds:
                raise InvalidConfig("kfold.folds must list at least one fold count")
            kfold_cfg = KFoldProtocol(
                n_folds=folds[0],
                block_size=int(kfold.get("block_size", defaults.kfold.block_size)),
                threshold=auth_cfg.threshold,
                fold_strategy=FoldStrategy(kfold.get("fold_strategy", defaults.kfold.fold_strategy.value)),
                seed=int(kfold.get("seed", defaults.kfold.seed)),
                total_strokes=int(kfold.get("total_strokes", defaults.kfold.total_strokes)),
            )

            synth = self._section("synth")
            synth_cfg = SynthSettings(
                users=int(synth.get("users", defaults.synth.users)),
                strokes=int(synth.get("strokes", defaults.synth.strokes)),
                seed=int(synth.get("seed", defaults.synth.seed)),
            )
        except InvalidConfig:
            raise
        except (TypeError, ValueError) as e:
            raise InvalidConfig(f"{self.yaml_file}: {e}") from None

        config = ExperimentConfig(ocsvm_cfg, auth_cfg, initial_cfg, folds, kfold_cfg, synth_cfg)
        # Validates every fold count, not just the first.
        config.kfold_protocols()
        return config

    def get_config(self) -> ExperimentConfig:
        """
        Return the loaded configuration.

        Raises:
            InvalidConfig: If load() has not been called
        """
        if self.config is None:
            raise InvalidConfig("config not loaded yet. Call load() first.")
        return self.config
