"""
Tests for the YAML experiment-config loader.
"""

from pathlib import Path

import pytest

from core.errors import InvalidConfig
from core.evaluation import FoldStrategy
from yaml_config_loader import CONFIG_ENV_VAR, ExperimentConfig, ExperimentConfigLoader


REPO_CONFIG = Path(__file__).parent / "config" / "keydyn.yaml"


@pytest.fixture(autouse=True)
def no_config_env(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)


def write_yaml(tmp_path, text: str) -> str:
    path = tmp_path / "experiment.yaml"
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_shipped_config_matches_defaults():
    config = ExperimentConfigLoader(str(REPO_CONFIG)).load()
    assert config == ExperimentConfig()


def test_missing_default_file_gives_defaults(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    loader = ExperimentConfigLoader()
    assert loader.load() == ExperimentConfig()
    assert loader.get_config() is loader.config


def test_missing_explicit_file(tmp_path):
    with pytest.raises(InvalidConfig, match="not found"):
        ExperimentConfigLoader(str(tmp_path / "nope.yaml")).load()


def test_env_var_selects_file(tmp_path, monkeypatch):
    path = write_yaml(tmp_path, "ocsvm:\n  nu: 0.2\n")
    monkeypatch.setenv(CONFIG_ENV_VAR, path)
    assert ExperimentConfigLoader().load().ocsvm.nu == 0.2


def test_partial_file_overrides_defaults(tmp_path):
    path = write_yaml(tmp_path, (
        "ocsvm:\n  gamma: 0.5\n"
        "auth:\n  threshold: 0.7\n"
        "kfold:\n  folds: [4]\n  fold_strategy: single\n  seed: 9\n"
        "synth:\n  users: 6\n"
    ))
    config = ExperimentConfigLoader(path).load()
    assert config.ocsvm.gamma == 0.5
    assert config.ocsvm.nu == 0.1
    assert config.auth.threshold == 0.7
    assert config.initial.threshold == 0.7
    assert config.kfold_folds == (4,)
    (protocol,) = config.kfold_protocols()
    assert (protocol.n_folds, protocol.fold_size, protocol.seed) == (4, 500, 9)
    assert protocol.fold_strategy is FoldStrategy.SINGLE_RANDOM_FOLD
    assert protocol.threshold == 0.7
    assert config.synth.users == 6
    assert config.synth.seed == 42


def test_kfold_protocols_override_folds():
    protocols = ExperimentConfig().kfold_protocols((5, 10))
    assert [p.n_folds for p in protocols] == [5, 10]
    assert {p.block_size for p in protocols} == {80}


def test_empty_file_gives_defaults(tmp_path):
    assert ExperimentConfigLoader(write_yaml(tmp_path, "")).load() == ExperimentConfig()


@pytest.mark.parametrize("text", [
    "- just\n- a list\n",
    "plots:\n  dpi: 100\n",
    "ocsvm:\n  nu: 0.1\n  C: 3\n",
    "auth: 5\n",
    "ocsvm:\n  nu: 1.5\n",
    "ocsvm:\n  gamma: wide\n",
    "auth:\n  block_size: 1\n",
    "kfold:\n  folds: [5, 3]\n",
    "kfold:\n  folds: []\n",
    "kfold:\n  fold_strategy: sometimes\n",
    "initial:\n  block_sizes: [30, 900]\n",
    "kfold:\n  seed: -1\n",
    "synth:\n  seed: -3\n",
    "ocsvm: {nu: [\n",
])
def test_invalid_files(tmp_path, text):
    with pytest.raises(InvalidConfig):
        ExperimentConfigLoader(write_yaml(tmp_path, text)).load()


def test_get_config_before_load():
    with pytest.raises(InvalidConfig):
        ExperimentConfigLoader("whatever.yaml").get_config()
