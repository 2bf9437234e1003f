"""
配置管理器测试
=============

使用方法:
pytest test_config_manager.py
"""

import sys
from pathlib import Path

import pytest

# 添加项目路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from utils.config_manager import ConfigInvalid, ConfigManager, get_config, load_config_file
from netsim import ScenarioConfig


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "test.ini"
    path.write_text(
        "[SCENARIO]\nn = 40\nbeta0 = 0.1\npartition = yes\n"
        "[GAME]\nslots = 4\nfees = 1, 2, 3\n"
        "[LOGGING_CONFIG]\nlog_level = DEBUG\n"
        "[OUTPUT_CONFIG]\nfloat_format = %.6f\n",
        encoding="utf-8",
    )
    return ConfigManager(str(path))


class TestConfigManager:

    def test_typed_sections(self, config):
        scenario = config.scenario_config
        assert scenario["n"] == 40
        assert scenario["beta0"] == 0.1
        assert scenario["partition"] is True
        assert scenario["epochs"] == 10
        assert config.game_config["fees"] == [1.0, 2.0, 3.0]
        assert config.output_config["float_format"] == "%.6f"

    def test_overrides(self, config):
        config.apply_overrides(["n=12", "game.rho=0.7", "LOGGING_CONFIG.log_file="], "SCENARIO")
        assert config.scenario_config["n"] == 12
        assert config.game_config["rho"] == 0.7
        assert config.logging_config["log_file"] == ""

    @pytest.mark.parametrize("override", ["n", "=3"])
    def test_malformed_override(self, config, override):
        with pytest.raises(ConfigInvalid):
            config.apply_overrides([override], "SCENARIO")

    def test_unknown_override_key(self, config):
        with pytest.raises(ConfigInvalid):
            config.apply_overrides(["epocs=5"], "SCENARIO")
        with pytest.raises(ConfigInvalid):
            config.apply_overrides(["NOWHERE.n=5"], "SCENARIO")

    def test_scenario_carries_run_settings(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text(
            "[SCENARIO]\nstop_on_conflict = no\n"
            "[PERFORMANCE_CONFIG]\nprogress_interval_epochs = 7\nmemory_usage_limit_mb = 64\n",
            encoding="utf-8",
        )
        scenario = ScenarioConfig.from_mapping(load_config_file(str(path)).scenario_config)
        assert scenario.stop_on_conflict is False
        assert scenario.progress_interval == 7
        assert scenario.memory_limit_mb == 64

    def test_unparsable_values(self, config):
        config.set("SCENARIO", "n", "lots")
        config.set("GAME", "fees", "1,x")
        with pytest.raises(ConfigInvalid):
            config.scenario_config
        with pytest.raises(ConfigInvalid):
            config.game_config
        assert not config.validate_config()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigInvalid):
            load_config_file(str(tmp_path / "absent.ini"))

    def test_repository_config_is_valid(self):
        assert get_config().validate_config()
