import json

import pytest

from ail_errors import ConfigError
from harness.config import RunConfig, apply_overrides, load_config_file, resolve_config, save_config


def test_defaults_are_valid():
    config = resolve_config(environ={})
    assert config.T == 10 and config.beta_start == 0.05 and config.beta_end == 0.45
    assert config.pseudo_ratio == 7 and config.k_expert == 64
    assert config.zeta == 0.6 and config.eta_start == 0.4
    assert config.gamma == 0.99 and config.target_update_rate == 0.005


@pytest.mark.parametrize("field,value", [
    ("T", 0),
    ("beta_start", 0.0),
    ("beta_end", 1.0),
    ("gamma", 1.0),
    ("env", "cartpole"),
    ("k_expert", 0),
    ("clamp_delta", 0.5),
    ("eval_every", 0),
])
def test_invalid_fields_are_rejected(field, value):
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), {field: value}).validate()


def test_beta_order_is_checked():
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), {"beta_start": 0.5, "beta_end": 0.4}).validate()


def test_precedence_file_environment_cli(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"seed": 3, "T": 5, "output_dir": "from_file"}))
    config = resolve_config(path, environ={})
    assert config.seed == 3 and config.T == 5
    config = resolve_config(path, environ={"DIFFIMIT_SEED": "4", "DIFFIMIT_OUTPUT_DIR": "from_env"})
    assert config.seed == 4 and config.output_dir == "from_env"
    config = resolve_config(path, cli_overrides={"seed": 9, "T": None}, environ={"DIFFIMIT_SEED": "4"})
    assert config.seed == 9 and config.T == 5


def test_bad_seed_environment():
    with pytest.raises(ConfigError):
        resolve_config(environ={"DIFFIMIT_SEED": "abc"})


def test_unknown_and_mistyped_fields(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"not_a_field": 1}))
    with pytest.raises(ConfigError):
        load_config_file(path)
    path.write_text(json.dumps({"use_pedr": "yes"}))
    with pytest.raises(ConfigError):
        load_config_file(path)
    path.write_text(json.dumps({"T": 2.5}))
    with pytest.raises(ConfigError):
        load_config_file(path)
    with pytest.raises(FileNotFoundError):
        load_config_file(tmp_path / "missing.json")


def test_saved_config_reloads_unchanged(tmp_path):
    config = apply_overrides(RunConfig(), {"seed": 7, "eps_hidden": [16, 16], "use_pseudo": False})
    save_config(tmp_path / "config.json", config)
    assert load_config_file(tmp_path / "config.json") == config
    assert json.loads((tmp_path / "config.json").read_text())["schema_version"] == 1
