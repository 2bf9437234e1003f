"""
命令行测试
=========

通过 main() 调用各个子命令，检查输出文件与退出码。

使用方法:
pytest test_cli.py
"""

import sys
from pathlib import Path

import orjson
import pandas as pd
import pytest

# 添加项目路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from main import EXIT_CONFIG, EXIT_IO, EXIT_OK, main


QUIET = ["--set", "LOGGING_CONFIG.log_file=", "--set", "LOGGING_CONFIG.enable_console_output=false"]


def cli(*args: str) -> int:
    return main([*args, *QUIET])


class TestTables:

    def test_slashing_table(self, tmp_path):
        out = tmp_path / "slashing.csv"
        assert cli("tables", "slashing", "--out", str(out)) == EXIT_OK
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["p0", "beta0", "epochs"]
        assert frame["epochs"].tolist() == [4685, 4066, 3622, 3107, 502]

    def test_survival_table(self, tmp_path):
        out = tmp_path / "survival.csv"
        assert cli("tables", "survival", "--out", str(out)) == EXIT_OK
        assert "log10_probability" in pd.read_csv(out).columns

    def test_unknown_table(self, tmp_path):
        assert cli("tables", "bogus", "--out", str(tmp_path / "x.csv")) == EXIT_IO


class TestSimulate:

    def test_writes_report_and_summary(self, tmp_path):
        out = tmp_path / "run.csv"
        assert cli("simulate", "--epochs", "2", "--set", "n=32", "--out", str(out)) == EXIT_OK
        frame = pd.read_csv(out)
        assert frame["epoch"].tolist() == [1, 2]
        summary = orjson.loads(out.with_suffix(".summary.json").read_bytes())
        assert summary["command"] == "simulate"
        assert summary["schema_version"] == "1.0.0"
        assert summary["summary"]["epochs"] == 2

    def test_same_seed_same_bytes(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["simulate", "--epochs", "2", "--seed", "9", "--set", "n=24", "--set", "partition=true",
                "--set", "beta0=0.25", "--set", "strategy=dual_active"]
        assert cli(*args, "--out", str(first)) == EXIT_OK
        assert cli(*args, "--out", str(second)) == EXIT_OK
        assert first.read_bytes() == second.read_bytes()

    def test_invalid_scenario(self, tmp_path):
        assert cli("simulate", "--set", "beta0=1.5", "--out", str(tmp_path / "x.csv")) == EXIT_CONFIG

    def test_unparsable_value(self, tmp_path):
        assert cli("simulate", "--set", "n=many", "--out", str(tmp_path / "x.csv")) == EXIT_CONFIG

    def test_strategy_without_fork(self, tmp_path):
        assert cli("simulate", "--set", "strategy=dual_active", "--set", "beta0=0.2", "--set", "partition=false",
                   "--out", str(tmp_path / "x.csv")) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert cli("simulate", "--config", str(tmp_path / "none.ini")) == EXIT_CONFIG


class TestGame:

    def test_game_with_best_response(self, tmp_path):
        out = tmp_path / "game.csv"
        assert cli("game", "--set", "slots=3", "--check-best-response", "--out", str(out)) == EXIT_OK
        assert len(pd.read_csv(out)) == 3
        checks = pd.read_csv(tmp_path / "game_best_response.csv")
        assert len(checks) == 3 + 3 * 3
        assert set(checks["role"]) == {"proposer", "attester"}
        summary = orjson.loads(out.with_suffix(".summary.json").read_bytes())
        assert summary["command"] == "game"
        assert sum(s["probability"] for s in summary["scenarios"]) == pytest.approx(1.0)

    def test_rho_sweep(self, tmp_path):
        out = tmp_path / "game.csv"
        assert cli("game", "--set", "slots=3", "--sweep-rho", "0.2", "0.6", "--out", str(out)) == EXIT_OK
        sweep = pd.read_csv(tmp_path / "game_rho_sweep.csv")
        assert sweep["rho"].tolist() == [0.2, 0.6]

    def test_short_fee_list(self, tmp_path):
        assert cli("game", "--set", "fees=1,2", "--out", str(tmp_path / "g.csv")) == EXIT_CONFIG


class TestCurves:

    def test_single_curve(self, tmp_path):
        out = tmp_path / "stake.csv"
        assert cli("curves", "stake", "--set", "curve_horizon=1000", "--set", "curve_step=500",
                   "--out", str(out)) == EXIT_OK
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["curve", "series", "t", "value"]
        assert set(frame["curve"]) == {"stake"}

    def test_unknown_curve(self, tmp_path):
        assert cli("curves", "wobble", "--out", str(tmp_path / "c.csv")) == EXIT_IO
