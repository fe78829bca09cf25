"""
Tests for weakcoin.config
"""

import pytest

from weakcoin.config import Config
from weakcoin.errors import InvalidArgumentError


class TestConfig:
    """Tests for layered settings"""

    def test_defaults(self):
        """No file gives the built-in defaults"""
        config = Config()
        assert config.get("tuner.restarts") == 8
        assert config.get("ascent.iters") == 300
        assert config.get("output.format") == "csv"

    def test_file_overrides(self, tmp_path):
        """A YAML file merges over the defaults"""
        path = tmp_path / "settings.yaml"
        path.write_text("tuner:\n  restarts: 3\n")
        config = Config(path)
        assert config.get("tuner.restarts") == 3
        assert config.get("tuner.max_evals") == 20000

    def test_json_file(self, tmp_path):
        """JSON files load through the same path"""
        path = tmp_path / "settings.json"
        path.write_text('{"simulate": {"runs": 10}}')
        assert Config(path).get("simulate.runs") == 10

    def test_flag_wins(self):
        """resolve prefers an explicit flag"""
        config = Config()
        assert config.resolve("ascent.seed", 7) == 7
        assert config.resolve("ascent.seed", None) == 0

    def test_set_and_missing(self):
        """set creates sections; unknown keys give the default"""
        config = Config()
        config.set("extra.value", 1)
        assert config.get("extra.value") == 1
        assert config.get("nope.none", "x") == "x"

    def test_missing_file(self, tmp_path):
        """An explicit path that does not exist is an error"""
        with pytest.raises(InvalidArgumentError):
            Config(tmp_path / "absent.yaml")

    def test_non_mapping(self, tmp_path):
        """Top level must be a mapping"""
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(InvalidArgumentError):
            Config(path)

    def test_parse_error(self, tmp_path):
        """Broken YAML is reported as invalid input"""
        path = tmp_path / "broken.yaml"
        path.write_text("tuner: [1, 2\n")
        with pytest.raises(InvalidArgumentError):
            Config(path)

    def test_snapshot_is_copy(self):
        """Snapshots do not alias the live settings"""
        config = Config()
        snap = config.snapshot()
        snap["tuner"]["restarts"] = 99
        assert config.get("tuner.restarts") == 8
