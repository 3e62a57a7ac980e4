"""Tests for RunConfig loading, saving and validation."""

import pytest
import yaml

from gridob.config import RunConfig, get_config_path, load_config, save_config, validate_config


class TestLoadSave:
    """YAML round trips and defaults."""

    def test_missing_file_gives_defaults(self, tmp_path):
        assert load_config(tmp_path / "absent.yaml") == RunConfig()

    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config(path) == RunConfig()

    def test_save_then_load(self, tmp_path):
        config = RunConfig(n=4, K=3, Nmax=5, ring="both", s_params="1010")
        path = tmp_path / "run.yaml"
        save_config(config, path)
        assert yaml.safe_load(path.read_text())["Nmax"] == 5
        assert load_config(path) == config

    def test_unknown_keys_are_ignored(self):
        config = RunConfig.from_dict({"n": 5, "model": "large"})
        assert config.n == 5

    def test_default_path_follows_xdg(self, isolated_config_home):
        assert get_config_path() == isolated_config_home / "gridob" / "config.yaml"


class TestValidation:
    """validate_config accepts sane runs and names the bad field otherwise."""

    def test_defaults_are_valid(self):
        assert validate_config(RunConfig()) == (True, None)

    @pytest.mark.parametrize("changes, field", [
        ({"n": 1}, "n"),
        ({"ring": "q"}, "ring"),
        ({"K": -1}, "K"),
        ({"Nmax": -2}, "Nmax"),
        ({"threads": 0}, "threads"),
        ({"s_params": "10"}, "s_params"),
        ({"s_params": "1a0"}, "s_params"),
        ({"o_perm": "[113]", "x_perm": "[231]"}, "o_perm"),
        ({"o_perm": "[123]"}, "x_perm"),
        ({"sign_file": "/nonexistent/n3.signs"}, "Sign file"),
    ])
    def test_rejects(self, changes, field):
        valid, message = validate_config(RunConfig(**changes))
        assert not valid
        assert field in message

    def test_explicit_markings(self):
        assert validate_config(RunConfig(o_perm="[123]", x_perm="[231]"))[0]

    def test_s_param_bits(self):
        assert RunConfig(n=3).s_param_bits() == [0, 0, 0]
        assert RunConfig(n=3, s_params="101").s_param_bits() == [1, 0, 1]
