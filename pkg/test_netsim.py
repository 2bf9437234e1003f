"""
网络仿真测试
===========

测试内容:
1. 场景配置校验与验证者划分
2. 诚实运行、分区泄漏与确定性
3. 长分区下冲突最终确定出现的 epoch，含半活跃拜占庭 (慢)
4. 随机场景与较长分区的安全性: β < 1/3 时没有冲突最终确定，同一 epoch 不会证成两个检查点 (慢)

使用方法:
pytest test_netsim.py -m "not slow"
"""

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# 添加项目路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from adversary import NoFork, SetupNotSatisfied
from netsim import Network, OverlappingGroups, RunReport, ScenarioConfig, partition, run, split_validators
from leak_analytics import time_to_refinalize_semiactive
from utils.config_manager import ConfigInvalid


class TestScenarioConfig:

    def test_defaults(self):
        config = ScenarioConfig()
        assert config.strategy == "idle"
        assert config.byzantine_count == 0

    @pytest.mark.parametrize("values", [
        {"strategy": "sleepy"},
        {"beta0": 1.0},
        {"p0": 0.0},
        {"j": 32},
        {"epochs": 0},
    ])
    def test_invalid_values(self, values):
        with pytest.raises(ConfigInvalid):
            ScenarioConfig.from_mapping(values)

    def test_split_validators(self):
        config = ScenarioConfig(n=100, beta0=0.2, p0=0.25, partition=True)
        byzantine, groups = split_validators(config)
        assert byzantine == list(range(80, 100))
        assert [len(g) for g in groups] == [20, 60]

    def test_single_group_without_partition(self):
        byzantine, groups = split_validators(ScenarioConfig(n=10, beta0=0.3))
        assert len(byzantine) == 3
        assert groups == [list(range(7))]


class TestPartition:

    def test_overlapping_groups(self):
        with pytest.raises(OverlappingGroups):
            partition([[0, 1, 2], [2, 3]])

    def test_release_tick(self):
        schedule = partition([[0, 1], [2, 3]], until=2)
        assert schedule.group_of(3) == 1
        assert schedule.group_of(9) is None
        assert schedule.release_tick(10, 1) == 2 * 32 * 3
        assert schedule.release_tick(500, 1) == 501
        assert partition([[0, 1], [2]]).release_tick(10, 1) is None
        assert partition([[0, 1, 2]]).release_tick(10, 2) == 12


class TestStrategySetup:

    def test_fork_strategy_needs_partition(self):
        with pytest.raises(NoFork):
            Network(ScenarioConfig(n=20, beta0=0.2, strategy="dual_active"))

    def test_bouncing_outside_window(self):
        with pytest.raises(SetupNotSatisfied):
            Network(ScenarioConfig(n=20, beta0=0.1, p0=0.9, strategy="prob_bouncing"))


class TestRuns:

    @pytest.fixture(scope="class")
    def honest(self) -> RunReport:
        return run(ScenarioConfig(n=64, epochs=4, seed=3))

    def test_report_columns(self, honest):
        frame = honest.to_frame()
        assert list(frame.columns) == list(RunReport.COLUMNS)
        assert frame["epoch"].tolist() == [1, 2, 3, 4]

    def test_honest_chain_finalizes(self, honest):
        frame = honest.to_frame()
        assert frame["finalized_epoch"].iloc[-1] >= 1
        assert not frame["leak_active"].any()
        epochs = [epoch for epoch, _ in honest.finalized["X"]]
        assert epochs == sorted(set(epochs))
        assert honest.summary() == {
            "conflicting_finalization_epoch": None, "threshold_cross_epoch": None, "epochs": 4,
        }

    def test_partition_starts_leak(self):
        report = run(ScenarioConfig(n=64, p0=0.5, partition=True, epochs=8, seed=2))
        last = report.to_frame().groupby("view").tail(1)
        assert len(last) == 2
        assert last["leak_active"].all()
        assert (last["finalized_epoch"] == 0).all()
        assert (last["own_stake_mean"] > last["other_stake_mean"]).all()
        assert report.conflicting_finalization_epoch is None

    def test_same_seed_same_report(self):
        config = ScenarioConfig(n=20, beta0=0.2, p0=0.5, partition=True, strategy="dual_active", epochs=3, seed=5)
        first, second = run(config), run(config)
        pd.testing.assert_frame_equal(first.to_frame(), second.to_frame())
        assert first.finalized == second.finalized


class TestLongPartition:

    @pytest.mark.slow
    def test_inactive_half_ejected_then_conflict(self):
        config = ScenarioConfig(n=32, p0=0.5, partition=True, epochs=4800, seed=1)
        report = run(config)
        assert report.conflicting_finalization_epoch is not None
        assert 4639 <= report.conflicting_finalization_epoch <= 4733

    @pytest.mark.slow
    def test_dual_active_conflict(self):
        config = ScenarioConfig(n=50, beta0=0.2, p0=0.5, partition=True, strategy="dual_active",
                                epochs=3300, seed=1)
        report = run(config)
        assert report.conflicting_finalization_epoch is not None
        assert 3077 <= report.conflicting_finalization_epoch <= 3139

    @pytest.mark.slow
    def test_inactive_half_conflict_hundred_validators(self):
        report = run(ScenarioConfig(n=100, p0=0.5, partition=True, epochs=4800, seed=1))
        assert report.conflicting_finalization_epoch is not None
        assert 4639 <= report.conflicting_finalization_epoch <= 4733

    @pytest.mark.slow
    def test_dual_active_conflict_hundred_validators(self):
        report = run(ScenarioConfig(n=100, beta0=0.2, p0=0.5, partition=True, strategy="dual_active",
                                    epochs=3300, seed=1))
        assert report.conflicting_finalization_epoch is not None
        assert 3077 <= report.conflicting_finalization_epoch <= 3139

    @pytest.mark.slow
    def test_semi_active_conflict(self):
        # 66 个拜占庭，诚实的 134 个平分到两个分区
        config = ScenarioConfig(n=200, beta0=0.33, p0=0.5, partition=True, strategy="semi_active",
                                epochs=700, seed=1)
        byzantine, groups = split_validators(config)
        assert len(byzantine) == 66 and [len(g) for g in groups] == [67, 67]
        expected = time_to_refinalize_semiactive(0.5, 0.33)
        report = run(config)
        assert report.conflicting_finalization_epoch is not None
        assert 0.97 * expected <= report.conflicting_finalization_epoch <= 1.03 * expected + 8


def _random_scenario(rng: np.random.Generator, seed: int) -> ScenarioConfig:
    while True:
        n = int(rng.integers(9, 17))
        beta0 = float(rng.choice([0.0, 0.1, 0.2, 0.3]))
        if round(beta0 * n) / n < 1 / 3:
            break
    strategy = str(rng.choice(["idle", "dual_active", "semi_active"]))
    fork = strategy != "idle" and beta0 > 0
    return ScenarioConfig(
        n=n, beta0=beta0, p0=float(rng.uniform(0.3, 0.7)), partition=fork or bool(rng.integers(2)),
        gst=int(rng.choice([-1, 1, 2])), delta=int(rng.integers(0, 4)), epochs=3, seed=seed,
        strategy=strategy if fork else "idle",
    )


class TestSafety:

    @pytest.mark.slow
    def test_random_executions_are_safe(self):
        rng = np.random.default_rng(2024)
        for seed in range(500):
            config = _random_scenario(rng, seed)
            network = Network(config)
            report = network.run()
            assert report.conflicting_finalization_epoch is None, config
            for view in network.views:
                epochs = [cp.epoch for cp in view.finality.justified.values()]
                assert len(epochs) == len(set(epochs)), config

    @pytest.mark.slow
    def test_long_partitions_are_safe(self):
        rng = np.random.default_rng(7)
        for seed in range(20):
            n = int(rng.integers(24, 65))
            beta0 = float(rng.choice([0.1, 0.2, 0.3]))
            if round(beta0 * n) / n >= 1 / 3:
                continue
            config = ScenarioConfig(
                n=n, beta0=beta0, p0=float(rng.uniform(0.3, 0.7)), partition=True,
                gst=int(rng.choice([-1, 10, 20, 30])), epochs=40, seed=seed,
                strategy=str(rng.choice(["dual_active", "semi_active"])),
            )
            network = Network(config)
            report = network.run()
            assert report.conflicting_finalization_epoch is None, config
            for view in network.views:
                epochs = [cp.epoch for cp in view.finality.justified.values()]
                assert len(epochs) == len(set(epochs)), config
