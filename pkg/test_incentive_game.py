"""
激励博弈测试
===========

测试内容:
1. 博弈区块树的头部选择与平局规则
2. 全部遵循协议时的收益
3. 无人反制时的单次偏离、分叉来回弹跳与手续费回升时的停止
4. 持续分叉的两种情形与 χ 结算
5. 最优反应检查与 ρ 扫描
6. 随机策略组合下的收益性质

使用方法:
pytest test_incentive_game.py
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

# 添加项目路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from incentive_game import (
    ChiMode, DomainError, GameConfig, GameState, HorizonTooLarge, NeverObedient, Strategy, StrategyProfile,
    Unresolved, attester_payoff, best_response_check, count_deviations, cunning_condition,
    cunning_proposer_action, eventual_obedience_slot, obedient_proposer_action, play_game, proposer_payoff,
    rho_sweep, simulate_game,
)
from utils.config_manager import ConfigInvalid


LATE = 20 / 27


def bouncing_config(rho: float, fees, s: int) -> GameConfig:
    """w_f - w_g 比 ρa 小 0.01: 第一个提议者总能偏离"""
    return GameConfig(s=s, a=10, rho=rho, x=0.001, w_g=4.0, w_f=4.0 + 10 * rho - 0.01, fees=fees)


@pytest.fixture
def fee_stop():
    """手续费先降后升: 弹跳在手续费回升时停止"""
    return bouncing_config(0.7, [10, 9, 8, 7, 6, 7, 8, 9, 10, 11, 12], s=8)


@pytest.fixture
def lasting_fork():
    """手续费一直下降: 弹跳持续到最后，留下势均力敌的分叉"""
    return bouncing_config(0.7, [10, 9, 8, 7, 6, 5, 4], s=4)


class TestGameState:

    def test_tie_goes_to_newest(self):
        state = GameState.initial(GameConfig(w_f=2.0, w_g=2.0))
        assert state.head() == 2

    def test_boost_can_move_head(self):
        state = GameState.initial(GameConfig(a=4, rho=0.4, w_f=3.0, w_g=2.0))
        state.add_block(3, 1)
        assert state.head() == 2
        assert state.head(boost=3) == 3

    def test_no_g_branch_when_weight_zero(self):
        state = GameState.initial(GameConfig(w_f=2.0, w_g=0.0))
        assert 1 not in state
        assert obedient_proposer_action(state, 3) == 0

    def test_cunning_condition(self):
        assert cunning_condition(8, 4, 0.65, 10)
        assert not cunning_condition(8, 4, 0.3, 10)
        with pytest.raises(DomainError):
            cunning_condition(1, 2, 0.4, 3)
        with pytest.raises(DomainError):
            cunning_condition(2, 1, 1.0, 3)

    def test_myopic_picks_oldest_winning_parent(self):
        config = GameConfig(a=4, rho=0.4, w_f=3.0, w_g=2.0)
        state = GameState.initial(config)
        assert cunning_proposer_action(state, 3) == 1


class TestConfig:

    def test_fees_too_short(self):
        with pytest.raises(ConfigInvalid):
            GameConfig.from_mapping({"s": 4, "fees": [1, 2, 3]})

    @pytest.mark.parametrize("values", [
        {"w_f": 1.0, "w_g": 2.0},
        {"proposers": "greedy"},
        {"rho": 1.0},
        {"fees": [1, 0, 2, 3, 4, 5, 6, 7, 8]},
    ])
    def test_invalid(self, values):
        with pytest.raises(ConfigInvalid):
            GameConfig.from_mapping(values)

    def test_random_fees_are_seeded(self):
        config = GameConfig(s=4, seed=3)
        fees = config.fee_schedule()
        assert len(fees) == 7
        assert set(fees) <= {1.0, 2.0, 3.0, 4.0}
        assert np.array_equal(fees, GameConfig(s=4, seed=3).fee_schedule())

    def test_profile_dimensions_checked(self):
        config = GameConfig(s=3, a=2)
        with pytest.raises(ConfigInvalid):
            play_game(config, StrategyProfile.uniform(2, 2))


class TestObedient:

    @pytest.fixture
    def result(self):
        config = GameConfig(s=4, a=3, rho=0.4, x=1.0, w_f=2.0, w_g=1.0, fees=[1, 2, 3, 4, 5, 6, 7])
        return simulate_game(config, StrategyProfile.uniform(4, 3))

    def test_payoffs(self, result):
        assert np.allclose(result.attester_payoffs, 1.0)
        assert np.allclose(result.chi, 1.0)
        assert proposer_payoff(result, 0) == pytest.approx(3.0)
        for k in range(1, 4):
            assert proposer_payoff(result, k) == pytest.approx(3 / 7 + result.fees[2 + k])

    def test_no_deviation(self, result):
        assert count_deviations(result) == (0, 0)
        assert eventual_obedience_slot(result) == 0

    def test_frame(self, result):
        frame = result.to_frame()
        assert frame["proposer_strategy"].unique().tolist() == ["obedient"]
        assert frame["fee"].tolist() == [3.0, 4.0, 5.0, 6.0]

    def test_unresolved(self):
        config = GameConfig(s=2, a=2, fees=[1, 1, 1, 1, 1])
        played = play_game(config, StrategyProfile.uniform(2, 2))
        with pytest.raises(Unresolved):
            attester_payoff(played, 0, 0)
        with pytest.raises(Unresolved):
            played.to_frame()


class TestDeviation:

    def test_uncontested_deviation_hoards_fee(self):
        config = GameConfig(s=3, a=4, rho=0.4, x=1.0, w_f=3.0, w_g=2.0, fees=[1] * 6)
        result = simulate_game(config, StrategyProfile.uniform(3, 4, Strategy.CUNNING, Strategy.OBEDIENT))
        assert [r.phi for r in result.records] == [1, 0, 0]
        assert count_deviations(result) == (1, 0)
        assert eventual_obedience_slot(result) == 1
        assert proposer_payoff(result, 0) == pytest.approx(2.0)
        assert proposer_payoff(result, 1) == pytest.approx(4 / 7 + 1)
        assert np.allclose(result.attester_payoffs, 1.0)

    @pytest.mark.parametrize("rho,second", [(0.3, False), (0.45, False), (0.55, True), (0.7, True)])
    def test_second_deviation_needs_large_boost(self, rho, second):
        config = bouncing_config(rho, [10, 9, 8, 7, 6, 5, 4], s=4)
        result = simulate_game(config, StrategyProfile.uniform(4, 10, Strategy.CUNNING, Strategy.OBEDIENT))
        assert result.records[0].deviations == 1
        assert (result.records[1].deviations > 0) == second

    def test_bouncing_stops_when_fees_rise(self, fee_stop):
        result = simulate_game(fee_stop, StrategyProfile.uniform(8, 10, Strategy.CUNNING, Strategy.OBEDIENT))
        assert [r.phi for r in result.records[:4]] == [1, 1, 1, 0]
        assert count_deviations(result) == (3, 0)
        assert eventual_obedience_slot(result) == 3
        assert result.chi.tolist() == [1, 0, 1, 1, 1, 1, 1, 1]

        x = fee_stop.x
        assert attester_payoff(result, 0, 0) == pytest.approx(LATE * x)
        assert attester_payoff(result, 0, 1) == pytest.approx(LATE * x)
        assert attester_payoff(result, 0, 2) == pytest.approx(x)
        assert proposer_payoff(result, 0) == pytest.approx(17.0)
        assert proposer_payoff(result, 1) == 0.0
        assert proposer_payoff(result, 2) == pytest.approx(13.0 + 2 * 10 * LATE * x / 7)
        assert proposer_payoff(result, 3) == pytest.approx(7.0 + 10 * x / 7)


class TestLastingFork:

    def test_never_obedient(self, lasting_fork):
        result = simulate_game(lasting_fork, StrategyProfile.uniform(4, 10, Strategy.CUNNING, Strategy.OBEDIENT))
        assert count_deviations(result) == (4, 0)
        with pytest.raises(NeverObedient):
            eventual_obedience_slot(result)

    def test_two_scenarios(self, lasting_fork):
        result = simulate_game(lasting_fork, StrategyProfile.uniform(4, 10, Strategy.CUNNING, Strategy.OBEDIENT))
        assert sorted(s.head for s in result.scenarios) == [5, 6]
        assert np.allclose(result.chi, 0.5)
        x = lasting_fork.x
        for k in range(3):
            assert attester_payoff(result, 0, k) == pytest.approx(LATE * x)
        assert attester_payoff(result, 0, 3) == pytest.approx(47 * x / 54)

    def test_cunning_attester_follows_next_proposer(self, lasting_fork):
        """最后一个 slot 的 cunning 证明者投给下一个提议者会选的父块 (slot 5)"""
        profile = StrategyProfile.uniform(4, 10, Strategy.CUNNING, Strategy.OBEDIENT).with_attester(3, 0, Strategy.CUNNING)
        result = simulate_game(lasting_fork, profile)
        assert result.records[3].nu[0] == 1
        assert result.records[3].nu[1:] == [0] * 9
        assert sorted(s.head for s in result.scenarios) == [5, 6]

        x = lasting_fork.x
        assert 47 / 54 == pytest.approx((1 + LATE) / 2)
        assert attester_payoff(result, 0, 3) == pytest.approx(47 * x / 54)
        assert attester_payoff(result, 1, 3) == pytest.approx(47 * x / 54)

    def test_sampled_chi_picks_one_side(self, lasting_fork):
        config = lasting_fork.copy(update={"chi_mode": ChiMode.SAMPLED})
        result = simulate_game(config, StrategyProfile.uniform(4, 10, Strategy.CUNNING, Strategy.OBEDIENT))
        assert len(result.scenarios) == 1
        assert set(result.chi.tolist()) == {0.0, 1.0}
        assert result.chi.sum() == 2.0


class TestBestResponse:

    def test_horizon_limit(self):
        config = GameConfig(s=7)
        with pytest.raises(HorizonTooLarge):
            best_response_check(config, StrategyProfile.from_config(config), (0,))

    def test_obedience_is_best_when_boost_is_small(self):
        config = GameConfig(s=3, a=2, rho=0.4, w_f=5.0, w_g=1.0, fees=[1] * 6)
        profile = StrategyProfile.uniform(3, 2)
        assert best_response_check(config, profile, (0,)).is_best_response
        assert best_response_check(config, profile, (1, 0)).is_best_response

    def test_profitable_deviation_found(self):
        config = GameConfig(s=3, a=4, rho=0.4, x=1.0, w_f=3.0, w_g=2.0, fees=[1] * 6)
        check = best_response_check(config, StrategyProfile.uniform(3, 4), (0,))
        assert not check.is_best_response
        assert check.payoff == pytest.approx(1.0)
        assert check.witness == Strategy.CUNNING
        assert check.witness_payoff == pytest.approx(2.0)

    def test_obedience_is_best_when_bounce_gains_little(self):
        """ρ >= 1/2，f_{k-2} - f_{k-1} = 0: 偏离会被下一个提议者弹回，只拿到一半"""
        config = bouncing_config(0.7, [5, 5, 5, 5, 1, 1], s=3)
        profile = StrategyProfile.uniform(3, 10, Strategy.CUNNING, Strategy.OBEDIENT)
        result = simulate_game(config, profile)
        assert [r.phi for r in result.records] == [1, 0, 0]

        x = config.x
        check = best_response_check(config, profile, (1,))
        assert check.is_best_response
        assert check.payoff == pytest.approx(5 + 10 * x / 7)

        bounced = simulate_game(config, profile.with_proposer(1, 1))
        assert [r.phi for r in bounced.records] == [1, 1, 1]
        assert proposer_payoff(bounced, 1) == pytest.approx((10 + 10 * LATE * x / 7) / 2)

    def test_first_proposer_obeys_among_cunning_players(self):
        """第二个提议者可以弹回时，第一个提议者的最优反应是遵循协议"""
        config = bouncing_config(0.7, [1, 1, 5, 1, 1, 1], s=3)
        profile = StrategyProfile.uniform(3, 10, Strategy.CUNNING, Strategy.CUNNING)
        result = simulate_game(config, profile)
        assert count_deviations(result) == (0, 0)

        check = best_response_check(config, profile, (0,))
        assert check.is_best_response
        assert check.payoff == pytest.approx(5.0)

        # cunning 证明者转投下一个提议者的父块，字面规则的偏离区块被孤立
        myopic = simulate_game(config, profile.with_proposer(0, Strategy.MYOPIC))
        assert myopic.records[0].phi == 1
        assert myopic.records[0].nu == [1] * 10
        assert proposer_payoff(myopic, 0) == 0.0


class TestSweep:

    def test_rho_sweep(self, fee_stop):
        frame = rho_sweep(fee_stop, [0.7])
        assert list(frame.columns) == [
            "rho", "proposer_deviations", "attester_deviations", "eventual_obedience_slot",
            "proposer_payoff_total", "attester_payoff_mean",
        ]
        row = frame.iloc[0]
        assert row["proposer_deviations"] == 3
        assert row["eventual_obedience_slot"] == 3


NAMED = st.sampled_from([Strategy.OBEDIENT, Strategy.CUNNING, Strategy.MYOPIC])


@st.composite
def games(draw):
    s = draw(st.integers(1, 5))
    a = draw(st.integers(1, 4))
    w_f = draw(st.floats(0.0, 6.0))
    w_g = draw(st.floats(0.0, w_f))
    config = GameConfig(
        s=s, a=a, rho=draw(st.floats(0.0, 0.95)), x=draw(st.sampled_from([0.001, 1.0])), w_f=w_f, w_g=w_g,
        fees=draw(st.lists(st.sampled_from([1.0, 2.0, 3.0, 4.0]), min_size=3 + s, max_size=3 + s)),
    )
    profile = StrategyProfile(
        draw(st.lists(NAMED, min_size=s, max_size=s)),
        [draw(st.lists(NAMED, min_size=a, max_size=a)) for _ in range(s)],
    )
    return config, profile


class TestPayoffProperties:

    @settings(max_examples=200, deadline=None)
    @given(games())
    def test_random_profiles(self, game):
        config, profile = game
        result = simulate_game(config, profile)
        x = config.x
        assert set(result.chi.tolist()) <= {0.0, 0.5, 1.0}
        assert np.all(result.attester_payoffs >= 2 * x / 9 - 1e-12)
        assert np.all(result.attester_payoffs <= x + 1e-12)
        assert np.all(result.proposer_payoffs[result.chi == 0] == 0)
        assert np.all(result.proposer_payoffs[result.chi > 0] > 0)
        assert sum(s.probability for s in result.scenarios) == pytest.approx(1.0)

        deviating = [r.deviations > 0 for r in result.records]
        if deviating[-1]:
            with pytest.raises(NeverObedient):
                eventual_obedience_slot(result)
        else:
            slot = eventual_obedience_slot(result)
            assert not any(deviating[slot:])
            assert slot == 0 or deviating[slot - 1]

    @settings(max_examples=100, deadline=None)
    @given(games(), st.floats(0.0, 0.49))
    def test_small_boost_obeys_after_first_slot(self, game, rho):
        config, _ = game
        config = config.copy(update={"rho": rho})
        result = simulate_game(config, StrategyProfile.uniform(config.s, config.a, Strategy.CUNNING))
        assert count_deviations(result)[1] == 0
        assert all(r.deviations == 0 for r in result.records[1:])
        if config.s > 1:
            assert eventual_obedience_slot(result) <= 1

    @settings(max_examples=50, deadline=None)
    @given(games())
    def test_obedient_profile_never_deviates(self, game):
        config, _ = game
        result = simulate_game(config, StrategyProfile.uniform(config.s, config.a))
        assert count_deviations(result) == (0, 0)
        assert eventual_obedience_slot(result) == 0
