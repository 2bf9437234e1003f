"""
激励博弈 - Beacon Lab
====================

带提议者加成的简化分叉选择上的动态博弈: 每个 slot 一个提议者与 a 个证明者，
比较 obedient (遵循协议) 与 cunning (利用加成挑选更旧父块) 策略的收益。

主要功能:
1. GameState: 以创世块为根的博弈区块树与投票权重，平局时含最新 slot 的子树胜出
2. cunning_condition / cunning_proposer_action / 证明者与提议者的策略动作
3. simulate_game: 按 "提议 → 证明" 的事件顺序执行 s 个 slot 并结算 χ 与收益
4. attester_payoff / proposer_payoff: 证明者奖励 (x, 20x/27, 2x/9) 与提议者囤积收益
5. best_response_check: 有界偏离的穷举最优反应检查
6. eventual_obedience_slot: 此后所有动作都与协议一致的 slot
7. rho_sweep: 提议者加成扫描

绝对 slot: 0 为创世块，1 为竞争分支 G (权重 w_g，w_g=0 时不存在)，2 为 fork choice
指定分支 F (权重 w_f)，博弈第 k 个 slot 对应绝对 slot 3+k。手续费按绝对 slot 编号。

作者: Beacon Lab Team
版本: 1.0.0
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, validator

from fork_choice import accumulate_weights
from utils.config_manager import ConfigInvalid
from utils.logger import get_logger, log_performance


PRE_GAME_SLOTS = 3
GENESIS_SLOT = 0
G_BRANCH_SLOT = 1
F_BRANCH_SLOT = 2
MAX_CHECK_HORIZON = 6
PAYOFF_TOLERANCE = 1e-12

REWARD_LATE_FACTOR = 20.0 / 27.0
REWARD_STALE_FACTOR = 2.0 / 9.0
PROPOSER_SHARE = 1.0 / 7.0

_logger = get_logger("incentive_game")


class GameError(Exception):
    """激励博弈错误基类"""


class DomainError(GameError, ValueError):
    """参数超出定义域"""


class Unresolved(GameError):
    """博弈尚未结算"""


class HorizonTooLarge(GameError):
    """穷举检查的 slot 数过大"""


class NeverObedient(GameError):
    """直到最后一个 slot 仍有偏离"""


class InvalidAction(GameError):
    """偏移指向不存在的区块"""


class Strategy(str, Enum):
    """玩家策略

    OBEDIENT: 按 fork choice 行动。
    MYOPIC: cunning 规则的字面形式，总是选在加成下仍是头部的最旧父块 (cunning_proposer_action)。
    CUNNING: 博弈中的 cunning 玩家。偏离会被下一个提议者弹回时，只在期望收益不低于遵循协议时才偏离
    (rational_cunning_action)；cunning 证明者投给下一个 cunning 提议者会选的父块。
    """
    OBEDIENT = "obedient"
    CUNNING = "cunning"
    MYOPIC = "myopic"


# 具体偏移 (int) 只出现在最优反应检查的有界偏离中
StrategyChoice = Union[Strategy, int]


class ChiMode(str, Enum):
    ANALYTIC = "analytic"
    SAMPLED = "sampled"


# ==================== 配置 ====================

class GameConfig(BaseModel):
    """博弈参数"""
    s: int = Field(default=6, ge=1, description="slot 数 (对玩家未知)")
    a: int = Field(default=3, ge=1, description="每个 slot 的证明者数")
    rho: float = Field(default=0.4, ge=0.0, lt=1.0, description="提议者加成系数")
    x: float = Field(default=1.0, gt=0.0, description="证明基础奖励")
    fees: List[float] = Field(default_factory=list, description="按绝对 slot 的手续费")
    fee_set: List[float] = Field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0], description="随机手续费取值集合")
    w_f: float = Field(default=2.0, ge=0.0, description="fork choice 指定分支的初始权重")
    w_g: float = Field(default=1.0, ge=0.0, description="竞争分支的初始权重")
    proposers: str = Field(default="cunning", description="默认提议者策略")
    attesters_strategy: str = Field(default="obedient", description="默认证明者策略")
    chi_mode: ChiMode = Field(default=ChiMode.ANALYTIC, description="χ 结算方式")
    seed: int = Field(default=1, description="随机种子")
    max_offset: int = Field(default=3, ge=0, description="最优反应检查的最大固定偏移")

    @validator('fees', 'fee_set', each_item=True)
    def validate_positive(cls, v):
        if v <= 0:
            raise ValueError('手续费必须为正')
        return v

    @validator('w_g')
    def validate_branch_weights(cls, v, values):
        if 'w_f' in values and v > values['w_f']:
            raise ValueError('w_f 必须不小于 w_g')
        return v

    @validator('proposers', 'attesters_strategy')
    def validate_strategy(cls, v):
        Strategy(v)
        return v

    @classmethod
    def from_mapping(cls, values: Dict[str, Any]) -> "GameConfig":
        try:
            config = cls(**values)
        except (ValidationError, ValueError) as e:
            raise ConfigInvalid(f"博弈配置无效: {e}") from e
        if config.fees and len(config.fees) < PRE_GAME_SLOTS + config.s:
            raise ConfigInvalid(f"手续费至少需要 {PRE_GAME_SLOTS + config.s} 个 (绝对 slot 0..{PRE_GAME_SLOTS + config.s - 1})")
        return config

    @property
    def rho_a(self) -> float:
        return self.rho * self.a

    def fee_schedule(self) -> np.ndarray:
        """绝对 slot 0..3+s-1 的手续费；未显式给出时从 fee_set 独立抽取"""
        length = PRE_GAME_SLOTS + self.s
        if self.fees:
            return np.asarray(self.fees[:length], dtype=float)
        rng = np.random.default_rng(self.seed)
        return rng.choice(np.asarray(self.fee_set, dtype=float), size=length)


@dataclass
class StrategyProfile:
    """每个提议者与每个证明者的策略"""
    proposers: List[StrategyChoice]
    attesters: List[List[StrategyChoice]]

    @classmethod
    def uniform(cls, s: int, a: int, proposer: StrategyChoice = Strategy.OBEDIENT,
                attester: StrategyChoice = Strategy.OBEDIENT) -> "StrategyProfile":
        return cls([_as_choice(proposer)] * s, [[_as_choice(attester)] * a for _ in range(s)])

    @classmethod
    def from_config(cls, config: GameConfig) -> "StrategyProfile":
        return cls.uniform(config.s, config.a, config.proposers, config.attesters_strategy)

    def with_proposer(self, k: int, choice: StrategyChoice) -> "StrategyProfile":
        proposers = list(self.proposers)
        proposers[k] = _as_choice(choice)
        return StrategyProfile(proposers, [list(row) for row in self.attesters])

    def with_attester(self, k: int, i: int, choice: StrategyChoice) -> "StrategyProfile":
        attesters = [list(row) for row in self.attesters]
        attesters[k][i] = _as_choice(choice)
        return StrategyProfile(list(self.proposers), attesters)


def _as_choice(choice: StrategyChoice) -> StrategyChoice:
    if isinstance(choice, (int, np.integer)) and not isinstance(choice, Strategy):
        return int(choice)
    return Strategy(choice)


# ==================== 博弈区块树 ====================

@dataclass
class GameState:
    """按 slot 编号的区块树 (每个 slot 至多一个区块) 与直接投票权重"""
    parents: Dict[int, Optional[int]]
    direct: Dict[int, float]
    rho_a: float

    @classmethod
    def initial(cls, config: GameConfig) -> "GameState":
        parents: Dict[int, Optional[int]] = {GENESIS_SLOT: None, F_BRANCH_SLOT: GENESIS_SLOT}
        direct = {GENESIS_SLOT: 0.0, F_BRANCH_SLOT: config.w_f}
        if config.w_g > 0:
            parents[G_BRANCH_SLOT] = GENESIS_SLOT
            direct[G_BRANCH_SLOT] = config.w_g
        return cls(parents, direct, config.rho_a)

    def copy(self) -> "GameState":
        return GameState(dict(self.parents), dict(self.direct), self.rho_a)

    def __contains__(self, slot: int) -> bool:
        return slot in self.parents

    def add_block(self, slot: int, parent: int) -> None:
        if parent not in self.parents:
            raise InvalidAction(f"父块 slot {parent} 不存在")
        if slot in self.parents or parent >= slot:
            raise InvalidAction(f"slot {slot} 无法挂在 {parent} 上")
        self.parents[slot] = parent
        self.direct[slot] = 0.0

    def add_votes(self, block: int, weight: float) -> None:
        self.direct[block] = self.direct.get(block, 0.0) + weight

    def ancestors(self, slot: int) -> List[int]:
        chain = []
        current: Optional[int] = slot
        while current is not None:
            chain.append(current)
            current = self.parents[current]
        return chain

    def _children(self) -> Dict[int, List[int]]:
        children: Dict[int, List[int]] = {s: [] for s in self.parents}
        for slot, parent in self.parents.items():
            if parent is not None:
                children[parent].append(slot)
        return children

    def subtree_weights(self, boost: Optional[int] = None) -> Dict[int, float]:
        direct = dict(self.direct)
        if boost is not None:
            direct[boost] = direct.get(boost, 0.0) + self.rho_a
        return accumulate_weights(self.parents.keys(), self.parents.get, lambda s: s, direct)

    def _newest(self) -> Dict[int, int]:
        newest = {s: s for s in self.parents}
        for slot in sorted(self.parents, reverse=True):
            parent = self.parents[slot]
            if parent is not None:
                newest[parent] = max(newest[parent], newest[slot])
        return newest

    def ranked_children(self, node: int, weights: Dict[int, float],
                        children: Optional[Dict[int, List[int]]] = None,
                        newest: Optional[Dict[int, int]] = None) -> List[int]:
        """按 (子树权重, 子树中最新 slot) 降序"""
        children = children or self._children()
        newest = newest or self._newest()
        return sorted(children[node], key=lambda c: (weights[c], newest[c]), reverse=True)

    def head(self, boost: Optional[int] = None, root: int = GENESIS_SLOT) -> int:
        """从 root 出发逐层选最重子树；平局时含最新 slot 的子树胜出"""
        weights = self.subtree_weights(boost)
        children = self._children()
        newest = self._newest()
        node = root
        while children[node]:
            node = self.ranked_children(node, weights, children, newest)[0]
        return node


def cunning_condition(w_f: float, w_g: float, rho: float, a: int) -> bool:
    """w_f - w_g <= ρa"""
    if not w_f >= w_g >= 0:
        raise DomainError(f"需要 w_f >= w_g >= 0: w_f={w_f}, w_g={w_g}")
    if a < 1 or not 0 <= rho < 1:
        raise DomainError(f"参数无效: rho={rho}, a={a}")
    return w_f - w_g <= rho * a


# ==================== 策略动作 ====================

def obedient_proposer_action(state: GameState, slot: int) -> int:
    """挂在无加成 fork choice 的头部上"""
    return slot - 1 - state.head()


def cunning_proposer_action(state: GameState, slot: int) -> int:
    """最旧的父块，使新区块在加成下仍是头部"""
    for offset in range(slot - 1, -1, -1):
        parent = slot - 1 - offset
        if parent not in state:
            continue
        trial = state.copy()
        trial.add_block(slot, parent)
        if trial.head(boost=slot) == slot:
            return offset
    raise InvalidAction(f"slot {slot} 没有可用父块")


def _hoard_value(config: GameConfig, fees: np.ndarray, slot: int, offset: int, reward: float) -> float:
    """Σ_{j=slot-offset..slot} (a/7 · reward [j-1 为博弈 slot] + f_{j-1})"""
    total = 0.0
    for j in range(slot - offset, slot + 1):
        if j - 1 >= PRE_GAME_SLOTS:
            total += config.a * PROPOSER_SHARE * reward
        total += fees[j - 1]
    return total


def rational_cunning_action(state: GameState, slot: int, config: GameConfig, fees: np.ndarray) -> int:
    """cunning 提议者: 偏离不会被下一个提议者反制时直接偏离；
    会被反制 (分叉来回弹跳，χ=1/2) 时，只有期望收益不低于遵循协议时才偏离"""
    obedient = obedient_proposer_action(state, slot)
    cunning = cunning_proposer_action(state, slot)
    if cunning == obedient:
        return obedient
    trial = state.copy()
    trial.add_block(slot, slot - 1 - cunning)
    trial.add_votes(slot, config.a)
    if cunning_proposer_action(trial, slot + 1) == obedient_proposer_action(trial, slot + 1):
        return cunning
    bounce = 0.5 * _hoard_value(config, fees, slot, cunning, config.x * REWARD_LATE_FACTOR)
    keep = _hoard_value(config, fees, slot, obedient, config.x)
    return cunning if bounce >= keep - PAYOFF_TOLERANCE else obedient


def proposer_action(choice: StrategyChoice, state: GameState, slot: int,
                    config: GameConfig, fees: np.ndarray) -> int:
    if choice == Strategy.OBEDIENT:
        return obedient_proposer_action(state, slot)
    if choice == Strategy.MYOPIC:
        return cunning_proposer_action(state, slot)
    if choice == Strategy.CUNNING:
        return rational_cunning_action(state, slot, config, fees)
    if slot - 1 - choice not in state:
        raise InvalidAction(f"偏移 {choice} 在 slot {slot} 处无对应区块")
    return int(choice)


def obedient_attester_action(state: GameState, slot: int) -> int:
    """证明加成后 fork choice 的头部"""
    return slot - state.head(boost=slot)


def cunning_attester_action(state: GameState, slot: int, config: GameConfig, fees: np.ndarray) -> int:
    """与下一个 cunning 提议者的父块一致，假设本 slot 其他证明者都遵循协议"""
    trial = state.copy()
    trial.add_votes(state.head(boost=slot), config.a)
    return rational_cunning_action(trial, slot + 1, config, fees)


def attester_action(choice: StrategyChoice, state: GameState, slot: int,
                    config: GameConfig, fees: np.ndarray) -> int:
    if choice == Strategy.OBEDIENT:
        return obedient_attester_action(state, slot)
    if choice in (Strategy.CUNNING, Strategy.MYOPIC):
        return cunning_attester_action(state, slot, config, fees)
    if slot - choice not in state:
        raise InvalidAction(f"证明偏移 {choice} 在 slot {slot} 处无对应区块")
    return int(choice)


# ==================== 执行与结算 ====================

@dataclass(frozen=True)
class GameVote:
    slot: int
    attester: int
    block: int


@dataclass
class SlotRecord:
    k: int
    slot: int
    phi: int
    prescribed_phi: int
    nu: List[int]
    prescribed_nu: int

    @property
    def deviations(self) -> int:
        return int(self.phi != self.prescribed_phi) + sum(n != self.prescribed_nu for n in self.nu)


@dataclass(frozen=True)
class Scenario:
    probability: float
    head: int


@dataclass
class GameResult:
    config: GameConfig
    profile: StrategyProfile
    fees: np.ndarray
    state: GameState
    records: List[SlotRecord]
    votes: List[GameVote]
    scenarios: List[Scenario] = field(default_factory=list)
    chi: Optional[np.ndarray] = None
    attester_payoffs: Optional[np.ndarray] = None
    proposer_payoffs: Optional[np.ndarray] = None

    @property
    def resolved(self) -> bool:
        return self.attester_payoffs is not None

    def to_frame(self) -> pd.DataFrame:
        if not self.resolved:
            raise Unresolved("博弈尚未结算")
        rows = []
        for record in self.records:
            rows.append({
                "k": record.k,
                "slot": record.slot,
                "proposer_strategy": _choice_name(self.profile.proposers[record.k]),
                "phi": record.phi,
                "prescribed_phi": record.prescribed_phi,
                "chi": float(self.chi[record.k]),
                "proposer_payoff": float(self.proposer_payoffs[record.k]),
                "attester_payoff_mean": float(self.attester_payoffs[record.k].mean()),
                "deviations": record.deviations,
                "fee": float(self.fees[record.slot - 1]),
            })
        return pd.DataFrame(rows)


def _choice_name(choice: StrategyChoice) -> str:
    return choice.value if isinstance(choice, Strategy) else f"offset:{choice}"


def play_game(config: GameConfig, profile: StrategyProfile, fees: Optional[np.ndarray] = None) -> GameResult:
    """按事件顺序执行 s 个 slot (不结算)"""
    if len(profile.proposers) != config.s or any(len(row) != config.a for row in profile.attesters):
        raise ConfigInvalid(f"策略组合维度与配置不符: s={config.s}, a={config.a}")
    fees = config.fee_schedule() if fees is None else fees
    state = GameState.initial(config)
    records: List[SlotRecord] = []
    votes: List[GameVote] = []
    for k in range(config.s):
        slot = PRE_GAME_SLOTS + k
        prescribed_phi = obedient_proposer_action(state, slot)
        phi = proposer_action(profile.proposers[k], state, slot, config, fees)
        state.add_block(slot, slot - 1 - phi)

        prescribed_nu = obedient_attester_action(state, slot)
        nu = [attester_action(choice, state, slot, config, fees) for choice in profile.attesters[k]]
        for i, offset in enumerate(nu):
            votes.append(GameVote(slot, i, slot - offset))
            state.add_votes(slot - offset, 1.0)
        records.append(SlotRecord(k, slot, phi, prescribed_phi, nu, prescribed_nu))
    return GameResult(config, profile, fees, state, records, votes)


def resolve_scenarios(state: GameState) -> List[Scenario]:
    """最终的规范链；首个权重差不超过 ρa 的分叉视为持续分叉，两侧各 1/2"""
    weights = state.subtree_weights()
    children = state._children()
    newest = state._newest()
    node = GENESIS_SLOT
    while children[node]:
        ranked = state.ranked_children(node, weights, children, newest)
        if len(ranked) > 1 and weights[ranked[0]] - weights[ranked[1]] <= state.rho_a:
            return [Scenario(0.5, state.head(root=ranked[0])), Scenario(0.5, state.head(root=ranked[1]))]
        node = ranked[0]
    return [Scenario(1.0, node)]


def _attestation_reward(chain: List[int], parents: Dict[int, Optional[int]], vote: GameVote, x: float) -> float:
    """由规范链上 vote.slot 之后的第一个区块打包"""
    for block in chain:
        if block > vote.slot:
            delay = block - vote.slot
            if delay == 1:
                return x if parents[block] == vote.block else x * REWARD_LATE_FACTOR
            if delay <= 5:
                return x * REWARD_LATE_FACTOR
            return x * REWARD_STALE_FACTOR
    return 0.0


def _scenario_payoffs(result: GameResult, scenario: Scenario) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    config = result.config
    closing = PRE_GAME_SLOTS + config.s
    parents = dict(result.state.parents)
    parents[closing] = scenario.head
    chain = sorted([closing] + result.state.ancestors(scenario.head))
    canonical = set(chain)

    attester = np.zeros((config.s, config.a))
    for vote in result.votes:
        attester[vote.slot - PRE_GAME_SLOTS, vote.attester] = _attestation_reward(chain, parents, vote, config.x)

    chi = np.zeros(config.s)
    proposer = np.zeros(config.s)
    for record in result.records:
        if record.slot not in canonical:
            continue
        chi[record.k] = 1.0
        total = 0.0
        for j in range(record.slot - record.phi, record.slot + 1):
            if j - 1 >= PRE_GAME_SLOTS:
                total += PROPOSER_SHARE * attester[j - 1 - PRE_GAME_SLOTS].sum()
            total += result.fees[j - 1]
        proposer[record.k] = total
    return chi, attester, proposer


def resolve_game(result: GameResult) -> GameResult:
    """结算 χ 与收益: analytic 模式对各情形取期望，sampled 模式按种子抽取一个情形"""
    scenarios = resolve_scenarios(result.state)
    if result.config.chi_mode == ChiMode.SAMPLED and len(scenarios) > 1:
        rng = np.random.default_rng(result.config.seed)
        picked = scenarios[int(rng.integers(len(scenarios)))]
        scenarios = [replace(picked, probability=1.0)]
    result.scenarios = scenarios
    result.chi = np.zeros(result.config.s)
    result.attester_payoffs = np.zeros((result.config.s, result.config.a))
    result.proposer_payoffs = np.zeros(result.config.s)
    for scenario in scenarios:
        chi, attester, proposer = _scenario_payoffs(result, scenario)
        result.chi += scenario.probability * chi
        result.attester_payoffs += scenario.probability * attester
        result.proposer_payoffs += scenario.probability * proposer
    return result


def simulate_game(config: GameConfig, profile: Optional[StrategyProfile] = None,
                  fees: Optional[np.ndarray] = None) -> GameResult:
    profile = profile or StrategyProfile.from_config(config)
    result = resolve_game(play_game(config, profile, fees))
    _logger.debug(f"博弈结束: 情形 {[(s.probability, s.head) for s in result.scenarios]}")
    return result


def attester_payoff(result: GameResult, i: int, k: int) -> float:
    if not result.resolved:
        raise Unresolved("博弈尚未结算")
    return float(result.attester_payoffs[k, i])


def proposer_payoff(result: GameResult, k: int) -> float:
    if not result.resolved:
        raise Unresolved("博弈尚未结算")
    return float(result.proposer_payoffs[k])


# ==================== 均衡分析 ====================

@dataclass
class BestResponse:
    is_best_response: bool
    payoff: float
    witness: Optional[StrategyChoice] = None
    witness_payoff: Optional[float] = None


def _player_payoff(result: GameResult, player: Tuple[int, ...]) -> float:
    if len(player) == 1:
        return proposer_payoff(result, player[0])
    k, i = player
    return attester_payoff(result, i, k)


def best_response_check(config: GameConfig, profile: StrategyProfile,
                        player: Tuple[int, ...]) -> BestResponse:
    """player 为 (k,) 表示提议者 k，(k, i) 表示 slot k 的证明者 i

    候选偏离: Obedient、Cunning 以及固定偏移 0..max_offset。
    """
    if config.s > MAX_CHECK_HORIZON:
        raise HorizonTooLarge(f"穷举检查最多支持 {MAX_CHECK_HORIZON} 个 slot: s={config.s}")
    fees = config.fee_schedule()
    baseline = _player_payoff(simulate_game(config, profile, fees), player)
    candidates: List[StrategyChoice] = [Strategy.OBEDIENT, Strategy.CUNNING] + list(range(config.max_offset + 1))
    current = profile.proposers[player[0]] if len(player) == 1 else profile.attesters[player[0]][player[1]]

    best: Optional[Tuple[StrategyChoice, float]] = None
    for choice in candidates:
        if choice == current:
            continue
        deviated = profile.with_proposer(player[0], choice) if len(player) == 1 \
            else profile.with_attester(player[0], player[1], choice)
        try:
            payoff = _player_payoff(simulate_game(config, deviated, fees), player)
        except InvalidAction:
            continue
        if payoff > baseline + PAYOFF_TOLERANCE and (best is None or payoff > best[1]):
            best = (choice, payoff)
    if best is None:
        return BestResponse(True, baseline)
    return BestResponse(False, baseline, best[0], best[1])


def eventual_obedience_slot(result: GameResult) -> int:
    """最后一次偏离之后的博弈 slot；没有偏离时为 0"""
    deviating = [r.k for r in result.records if r.deviations]
    if not deviating:
        return 0
    last = max(deviating)
    if last == result.config.s - 1:
        raise NeverObedient(f"最后一个 slot ({last}) 仍有偏离")
    return last + 1


def count_deviations(result: GameResult) -> Tuple[int, int]:
    """(提议者偏离数, 证明者偏离数)"""
    proposers = sum(r.phi != r.prescribed_phi for r in result.records)
    attesters = sum(sum(n != r.prescribed_nu for n in r.nu) for r in result.records)
    return proposers, attesters


def sweep_row(config: GameConfig, rho: float) -> Dict[str, Any]:
    """单个 ρ 的扫描结果 (可在子进程中执行)"""
    swept = config.copy(update={"rho": rho})
    result = simulate_game(swept)
    proposers, attesters = count_deviations(result)
    try:
        obedience: Optional[int] = eventual_obedience_slot(result)
    except NeverObedient:
        obedience = None
    return {
        "rho": rho,
        "proposer_deviations": proposers,
        "attester_deviations": attesters,
        "eventual_obedience_slot": obedience,
        "proposer_payoff_total": float(result.proposer_payoffs.sum()),
        "attester_payoff_mean": float(result.attester_payoffs.mean()),
    }


@log_performance
def rho_sweep(config: GameConfig, rhos: Sequence[float]) -> pd.DataFrame:
    return pd.DataFrame([sweep_row(config, float(rho)) for rho in rhos])


if __name__ == "__main__":
    demo = GameConfig(s=6, a=10, rho=0.65, w_f=8.0, w_g=4.0,
                      fees=[100.0 - 10 * i for i in range(PRE_GAME_SLOTS + 6)])
    outcome = simulate_game(demo, StrategyProfile.uniform(6, 10, Strategy.CUNNING))
    print(outcome.to_frame())
    print("最终遵循协议的 slot:", eventual_obedience_slot(simulate_game(demo.copy(update={"rho": 0.4}))))
