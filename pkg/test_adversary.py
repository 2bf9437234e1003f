"""
拜占庭策略测试
=============

测试内容:
1. 弹跳攻击持续概率 (解析值与蒙特卡洛)
2. 罚没条件判定
3. 策略构造与分支要求

使用方法:
pytest test_adversary.py
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# 添加项目路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from adversary import (
    AdversaryError, DualActive, NoFork, ProbBouncing, SetupNotSatisfied, attack_survival_probability,
    dual_active_step, epoch_has_byzantine_proposer, is_slashable_pair, make_strategy, semi_active_branch,
    simulate_bouncing_continuation, simulate_bouncing_survival, survival_table,
)
from chain import Attestation, Checkpoint, ValidatorRegistry, sha256
from leak_analytics import DomainError
from randao import Seed
from netsim import Network, ScenarioConfig
from validator import ValidatorView


# 64 个验证者中 16 个拜占庭；诚实的 31 个晚收到释放区块，17 个及时收到
BOUNCING = dict(n=64, beta0=0.25, p0=0.65, partition=True, gst=2, strategy="prob_bouncing", stop_on_conflict=False)


def checkpoint(tag: str, epoch: int) -> Checkpoint:
    return Checkpoint(sha256(tag.encode()), epoch)


def attestation(attester: int, source: Checkpoint, target: Checkpoint, slot: int = 0) -> Attestation:
    return Attestation(attester, slot, target.block, source, target)


def check_bouncing_run(strategy: ProbBouncing, report, gst: int, epochs: int) -> None:
    """释放连续进行直到第一次错过；释放期间两组都不会最终确定，攻击结束后恢复"""
    released = strategy.released_epochs
    assert released == list(range(gst, gst + len(released)))
    if released:
        last = released[-1]
        if last + 1 < epochs:
            assert strategy.missed_epochs == [last + 1]
        for row in report.rows:
            if row["epoch"] <= last + 2:
                assert row["finalized_epoch"] == 0
        if last + 4 <= epochs:
            final = [row for row in report.rows if row["epoch"] == epochs]
            assert all(row["finalized_epoch"] > 0 for row in final)
    else:
        assert strategy.missed_epochs == [gst]


class TestSurvival:

    def test_long_attack_is_negligible(self):
        probability = attack_survival_probability(1 / 3, 8, 7000)
        assert 0.95e-121 <= probability <= 1.05e-121

    def test_edge_cases(self):
        assert attack_survival_probability(0.2, 8, 0) == 1.0
        assert attack_survival_probability(0.0, 8, 3) == 0.0
        with pytest.raises(DomainError):
            attack_survival_probability(1.0, 8, 3)
        with pytest.raises(DomainError):
            attack_survival_probability(0.2, 0, 3)

    def test_continuation_frequency(self):
        expected = 1 - 0.7 ** 8
        trials = 1000
        sigma = math.sqrt(expected * (1 - expected) / trials)
        observed = simulate_bouncing_continuation(0.3, 8, trials, np.random.default_rng(5), n=50)
        assert abs(observed - expected) <= 3 * sigma

    @pytest.mark.slow
    def test_continuation_frequency_large_sample(self):
        expected = 1 - 0.7 ** 8
        trials = 10_000
        sigma = math.sqrt(expected * (1 - expected) / trials)
        observed = simulate_bouncing_continuation(0.3, 8, trials, np.random.default_rng(5))
        assert abs(observed - expected) <= 3 * sigma

    def test_continuation_uses_proposer_selection(self):
        registry = ValidatorRegistry.uniform(10, byzantine=range(10))
        assert epoch_has_byzantine_proposer(Seed(b"\x01" * 32, 3), registry, frozenset(range(10)), 1)
        assert not epoch_has_byzantine_proposer(Seed(b"\x01" * 32, 3), registry, frozenset(), 8)
        assert simulate_bouncing_continuation(0.0, 8, 20, np.random.default_rng(1), n=10) == 0.0

    @pytest.mark.slow
    def test_survival_curve_matches_closed_form(self):
        trials = 2000
        curve = simulate_bouncing_survival(0.3, 8, 20, trials, np.random.default_rng(6), n=50)
        assert curve.shape == (20,)
        for k, observed in enumerate(curve, start=1):
            expected = attack_survival_probability(0.3, 8, k)
            sigma = math.sqrt(expected * (1 - expected) / trials)
            assert abs(observed - expected) <= 3 * sigma + 1e-9
        assert np.all(np.diff(curve) <= 0)

    def test_survival_table(self):
        frame = survival_table()
        assert list(frame.columns) == ["beta", "j", "k", "probability", "log10_probability"]
        row = frame[(frame["k"] == 7000) & np.isclose(frame["beta"], 1 / 3)].iloc[0]
        assert row["log10_probability"] == pytest.approx(-121, abs=0.03)


class TestSlashing:

    def test_double_vote(self):
        source = checkpoint("g", 0)
        first = attestation(1, source, checkpoint("a", 3))
        second = attestation(1, source, checkpoint("b", 3))
        assert is_slashable_pair(first, second)

    def test_surround_vote(self):
        outer = attestation(2, checkpoint("s", 1), checkpoint("t", 5))
        inner = attestation(2, checkpoint("u", 2), checkpoint("v", 4))
        assert is_slashable_pair(outer, inner)
        assert is_slashable_pair(inner, outer)

    def test_not_slashable(self):
        source = checkpoint("g", 0)
        first = attestation(1, source, checkpoint("a", 3))
        assert not is_slashable_pair(first, first)
        assert not is_slashable_pair(first, attestation(2, source, checkpoint("b", 3)))
        assert not is_slashable_pair(first, attestation(1, checkpoint("a", 3), checkpoint("c", 4)))


class TestStrategies:

    def test_unknown_kind(self):
        with pytest.raises(AdversaryError):
            make_strategy("sleepy", [1, 2])

    def test_make_strategy(self):
        strategy = make_strategy("dual_active", [3, 1], seed=4)
        assert isinstance(strategy, DualActive)
        assert strategy.byzantine == frozenset({1, 3})
        assert sorted(strategy.rngs) == [1, 3]

    def test_dual_active_needs_two_views(self):
        view = ValidatorView(range(4), ValidatorRegistry.uniform(6))
        with pytest.raises(NoFork):
            dual_active_step([view], frozenset({4, 5}), 1, 0)

    def test_semi_active_schedule(self):
        assert [semi_active_branch(e, None) for e in range(4)] == [0, 1, 0, 1]
        assert [semi_active_branch(e, 10) for e in range(9, 15)] == [1, 0, 0, 1, 1, 0]

    @pytest.mark.parametrize("overrides", [
        {"partition": False},
        {"gst": 1},
        {"p0": 0.9},
        {"p0": 0.8},
    ])
    def test_bouncing_setup_not_satisfied(self, overrides):
        values = dict(BOUNCING, **overrides)
        with pytest.raises(SetupNotSatisfied):
            Network(ScenarioConfig(**values))

    def test_bouncing_stalls_finality_while_releases_continue(self):
        network = Network(ScenarioConfig(**dict(BOUNCING, epochs=6, seed=1)))
        assert isinstance(network.strategy, ProbBouncing)
        report = network.run()
        check_bouncing_run(network.strategy, report, gst=2, epochs=6)

    @pytest.mark.slow
    def test_bouncing_runs_for_several_epochs(self):
        longest = 0
        for seed in range(1, 5):
            network = Network(ScenarioConfig(**dict(BOUNCING, epochs=12, seed=seed)))
            report = network.run()
            check_bouncing_run(network.strategy, report, gst=2, epochs=12)
            longest = max(longest, len(network.strategy.released_epochs))
        assert longest >= 2
