"""
拜占庭策略库 - Beacon Lab
========================

拜占庭验证者只控制自己的消息及其投递时间。策略在仿真的每个 slot-third 被调用，
读取各诚实视图 (只读) 并返回投递指令。

主要功能:
1. Idle: 完全不活跃
2. DualActive: 在两个分支上都活跃 (可被罚没的双重投票模式)
3. SemiActive: 隔一个 epoch 活跃一次；满足条件后在每个分支上连续活跃两个 epoch
4. ProbBouncing: 扣留投票，在前 j 个 slot 内由拜占庭提议者"及时"释放
5. attack_survival_probability: 弹跳攻击持续 k 个 epoch 的概率 (对数空间)
6. is_slashable_pair: 双重投票 / 环绕投票判定

作者: Beacon Lab Team
版本: 1.0.0
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, TYPE_CHECKING

import numpy as np
import pandas as pd

from chain import Attestation, BlockTree, SLOTS_PER_EPOCH, ValidatorRegistry, epoch_of, epoch_start_slot
from leak_analytics import DomainError, bouncing_window
from randao import Seed, committee_size, get_proposer_index, get_seed, proposer_schedule
from validator import Message, MessageKind, ValidatorView, THIRDS_PER_SLOT
from utils.logger import get_logger

if TYPE_CHECKING:
    from netsim import Network


class AdversaryError(Exception):
    """拜占庭策略错误基类"""


class NoFork(AdversaryError):
    """策略需要两个分支"""


class SetupNotSatisfied(AdversaryError):
    """攻击的前置条件不成立"""


@dataclass(frozen=True)
class DeliveryDirective:
    """把 message 在 tick 投递给第 target 个视图"""
    target: int
    message: Message
    tick: int


# ==================== 基本动作 ====================

def _tick_of(slot: int, third: int) -> int:
    return slot * THIRDS_PER_SLOT + third


def act_on_branch(view: ValidatorView, target: int, byzantine: frozenset,
                  slot: int, third: int) -> List[DeliveryDirective]:
    """拜占庭验证者按 view 的职责在该分支上提议/证明，立即投递"""
    now = _tick_of(slot, third)
    directives: List[DeliveryDirective] = []
    proposer = view.current_proposer
    if third == 0 and slot > 0 and proposer in byzantine:
        block = view.compose_block(proposer)
        directives.append(DeliveryDirective(target, Message(MessageKind.PROPOSE, proposer, block, now), now))
    if third == 1:
        for validator in view.current_committee:
            if validator in byzantine and view.registry[validator].active_flag:
                attestation = view.compose_attestation(validator, slot)
                directives.append(DeliveryDirective(
                    target, Message(MessageKind.ATTEST, validator, attestation, now), now))
    return directives


def dual_active_step(views: Sequence[ValidatorView], byzantine: frozenset,
                     slot: int, third: int) -> List[DeliveryDirective]:
    """在每个分支上都按职责行动；一个 epoch 内每个拜占庭验证者每个分支各证明一次"""
    if len(views) < 2:
        raise NoFork("DualActive 需要至少两个分支")
    directives: List[DeliveryDirective] = []
    for index, view in enumerate(views):
        directives += act_on_branch(view, index, byzantine, slot, third)
    return directives


def semi_active_branch(epoch: int, finalize_from: Optional[int]) -> int:
    """本 epoch 活跃的分支: 平时按 epoch 奇偶交替；finalize_from 起先分支 0 两个 epoch，再分支 1 两个 epoch"""
    if finalize_from is not None and finalize_from <= epoch < finalize_from + 4:
        return 0 if epoch < finalize_from + 2 else 1
    return epoch % 2


def semi_active_step(views: Sequence[ValidatorView], byzantine: frozenset, epoch: int,
                     slot: int, third: int, finalize_from: Optional[int] = None) -> List[DeliveryDirective]:
    """只在一个分支上活跃，同一 epoch 不会在两个分支上投票"""
    if len(views) < 2:
        raise NoFork("SemiActive 需要至少两个分支")
    branch = semi_active_branch(epoch, finalize_from)
    return act_on_branch(views[branch], branch, byzantine, slot, third)


def branch_tip(tree: BlockTree, block: bytes) -> bytes:
    """tree 中以 block 为祖先、slot 最高的叶子"""
    tips = [leaf for leaf in tree.leaves if tree.is_ancestor(block, leaf)]
    if not tips:
        return block
    return max(tips, key=lambda h: (tree.get(h).slot, h))


def branch_proposer(view: ValidatorView, tip: bytes, slot: int) -> int:
    """按 tip 所在分支的 RANDAO 种子抽取 slot 的提议者"""
    return get_proposer_index(get_seed(view.tree, tip, epoch_of(slot)), slot, view.registry)


def bouncing_step(views: Sequence[ValidatorView], byzantine: frozenset, withheld: List[Attestation],
                  slot: int, third: int, j: int) -> List[DeliveryDirective]:
    """在 epoch 前 j 个 slot 内释放上一 epoch 扣留的投票

    views[0] 是晚收到释放区块的一组，views[1] 是及时收到的一组。区块建在扣留投票所在分支的
    末端，只有该分支的 RANDAO 选出的本 slot 提议者是拜占庭验证者时才能释放。
    及时组立即收到；晚组在 slot j+1 才收到，只能在下一个 epoch 边界采用其中的证成。
    """
    if len(views) < 2:
        raise NoFork("弹跳攻击需要两个分支")
    if third != 0 or slot % SLOTS_PER_EPOCH >= j or not withheld:
        return []
    late_view = views[0]
    anchor = max(withheld, key=lambda a: (a.slot, a.attester)).block_vote
    tip = branch_tip(late_view.tree, anchor)
    proposer = branch_proposer(late_view, tip, slot)
    if proposer not in byzantine:
        return []

    block = late_view.compose_block(proposer, parent=tip, extra=withheld)
    now = _tick_of(slot, 0)
    late = _tick_of(epoch_start_slot(epoch_of(slot)) + j + 1, 0)
    message = Message(MessageKind.PROPOSE, proposer, block, now)
    return [DeliveryDirective(1, message, now), DeliveryDirective(0, message, late)]


# ==================== 策略 ====================

class ByzantineStrategy:
    """策略基类；每个拜占庭验证者拥有独立的随机数流"""

    kind = "idle"
    requires_fork = False

    def __init__(self, byzantine: Sequence[int], seed: int = 0, **params):
        self.logger = get_logger(self.__class__.__name__)
        self.byzantine = frozenset(byzantine)
        self.params = params
        streams = np.random.SeedSequence(seed).spawn(len(self.byzantine))
        self.rngs: Dict[int, np.random.Generator] = {
            v: np.random.default_rng(s) for v, s in zip(sorted(self.byzantine), streams)
        }

    def setup(self, network: "Network") -> None:
        if self.requires_fork and self.byzantine and len(network.views) < 2:
            raise NoFork(f"{self.kind} 需要分区产生的两个分支")

    def on_tick(self, network: "Network", slot: int, third: int) -> List[DeliveryDirective]:
        return []


class Idle(ByzantineStrategy):
    kind = "idle"


class DualActive(ByzantineStrategy):
    kind = "dual_active"
    requires_fork = True

    def on_tick(self, network: "Network", slot: int, third: int) -> List[DeliveryDirective]:
        if not self.byzantine:
            return []
        return dual_active_step(network.views, self.byzantine, slot, third)


class SemiActive(ByzantineStrategy):
    kind = "semi_active"
    requires_fork = True

    def __init__(self, byzantine: Sequence[int], seed: int = 0, **params):
        super().__init__(byzantine, seed, **params)
        self.finalize_from: Optional[int] = None

    def finalize_now(self, views: Sequence[ValidatorView]) -> bool:
        """每个分支上 (本组诚实 + 拜占庭) 的有效余额都达到 2/3"""
        return all(view.active_stake_ratio(view.members | self.byzantine) >= 2.0 / 3.0 for view in views)

    def on_tick(self, network: "Network", slot: int, third: int) -> List[DeliveryDirective]:
        if not self.byzantine:
            return []
        epoch = epoch_of(slot)
        if (self.finalize_from is None and third == 0 and slot % SLOTS_PER_EPOCH == 0
                and epoch > 0 and self.finalize_now(network.views)):
            self.finalize_from = epoch
            self.logger.info(f"epoch {epoch}: 拜占庭占比足够，开始在两个分支上依次最终确定")
        return semi_active_step(network.views, self.byzantine, epoch, slot, third, self.finalize_from)


class ProbBouncing(ByzantineStrategy):
    """概率弹跳攻击

    GST 之前: 晚组 (views[0]) 与及时组 (views[1]) 各自出块。拜占庭验证者在及时组的分支上
    公开投票，使其在 GST 时获得 LMD 权重；同时在晚组分支上投出扣留的投票，使该分支的检查点
    可被证成。GST 之后每个 epoch 在前 j 个 slot 内释放上一 epoch 扣留的投票，及时组随之切换
    分支，晚组在下一个 epoch 边界才跟上，两个分支交替证成而不会最终确定。
    某个 epoch 的前 j 个 slot 没有拜占庭提议者时攻击结束，拜占庭验证者此后不再活动。
    """

    kind = "prob_bouncing"
    requires_fork = True

    def __init__(self, byzantine: Sequence[int], seed: int = 0, **params):
        super().__init__(byzantine, seed, **params)
        self.withheld: Dict[int, List[Attestation]] = {}
        self.released_epochs: List[int] = []
        self.missed_epochs: List[int] = []
        self.active = True

    def setup(self, network: "Network") -> None:
        super().setup(network)
        config = network.config
        if not config.partition or config.gst < 2:
            raise SetupNotSatisfied(f"弹跳攻击需要分区且 gst >= 2 (partition={config.partition}, gst={config.gst})")
        if not bouncing_window(config.p0, config.beta0):
            raise SetupNotSatisfied(f"p0={config.p0} 不在弹跳窗口内 (beta0={config.beta0})")
        honest = 1.0 - config.beta0
        early = min(1.0, config.j * committee_size(config.n) / config.n)
        if (early + (1 - early) * config.p0) * honest >= 2.0 / 3.0:
            raise SetupNotSatisfied(f"释放前的诚实投票已足以证成 (p0={config.p0}, j={config.j})")
        if (1 - config.p0) * honest + config.beta0 <= config.p0 * honest:
            raise SetupNotSatisfied(f"GST 时及时组分支的 LMD 权重不占优 (p0={config.p0}, beta0={config.beta0})")

    def on_tick(self, network: "Network", slot: int, third: int) -> List[DeliveryDirective]:
        if not self.byzantine or not self.active:
            return []
        late_view, timely_view = network.views
        epoch = epoch_of(slot)
        gst = network.config.gst
        if third == 1:
            return self._vote(late_view, timely_view, epoch, slot, before_gst=epoch < gst)
        if third != 0 or epoch < gst:
            return []

        j = network.config.j
        if epoch in self.released_epochs:
            return []
        if slot % SLOTS_PER_EPOCH == j:
            self.missed_epochs.append(epoch)
            self.active = False
            self.withheld.clear()
            self.logger.info(f"epoch {epoch}: 前 {j} 个 slot 没有拜占庭提议者，弹跳攻击结束")
            return []
        directives = bouncing_step(network.views, self.byzantine, self.withheld.get(epoch - 1, []), slot, third, j)
        if directives:
            self.released_epochs.append(epoch)
            self.withheld.pop(epoch - 1, None)
            self.logger.debug(f"slot {slot}: 释放 epoch {epoch - 1} 的扣留投票")
        return directives

    def _vote(self, late_view: ValidatorView, timely_view: ValidatorView, epoch: int, slot: int,
              before_gst: bool) -> List[DeliveryDirective]:
        """扣留晚组分支上的投票；GST 之前另在及时组分支上公开投票"""
        if epoch < 1:
            return []
        for stale in [e for e in self.withheld if e < epoch - 1]:
            del self.withheld[stale]
        for validator in late_view.current_committee:
            if validator in self.byzantine and late_view.registry[validator].active_flag:
                self.withheld.setdefault(epoch, []).append(late_view.compose_attestation(validator, slot))
        if not before_gst:
            return []
        now = _tick_of(slot, 1)
        directives = []
        for validator in timely_view.current_committee:
            if validator in self.byzantine and timely_view.registry[validator].active_flag:
                message = Message(MessageKind.ATTEST, validator, timely_view.compose_attestation(validator, slot), now)
                directives += [DeliveryDirective(1, message, now), DeliveryDirective(0, message, now)]
        return directives


STRATEGIES = {cls.kind: cls for cls in (Idle, DualActive, SemiActive, ProbBouncing)}


def make_strategy(kind: str, byzantine: Sequence[int], seed: int = 0, **params) -> ByzantineStrategy:
    try:
        cls = STRATEGIES[kind]
    except KeyError:
        raise AdversaryError(f"未知策略: {kind}") from None
    return cls(byzantine, seed, **params)


# ==================== 概率与判定 ====================

def attack_survival_probability(beta: float, j: int, k: int) -> float:
    """(1 - (1-β)^j)^k: 连续 k 个 epoch 在前 j 个 slot 内都有拜占庭提议者"""
    if not 0 <= beta < 1:
        raise DomainError(f"beta 必须在 [0, 1) 内: {beta}")
    if j < 1 or k < 0:
        raise DomainError(f"j 必须为正且 k 非负: j={j}, k={k}")
    if k == 0:
        return 1.0
    if beta == 0:
        return 0.0
    return math.exp(k * math.log1p(-((1 - beta) ** j)))


def _byzantine_registry(beta: float, n: int):
    count = int(round(beta * n))
    byzantine = frozenset(range(n - count, n))
    return ValidatorRegistry.uniform(n, byzantine=byzantine), byzantine


def epoch_has_byzantine_proposer(seed: Seed, registry: ValidatorRegistry, byzantine: frozenset, j: int) -> bool:
    """seed 对应 epoch 的前 j 个 slot 中是否抽到拜占庭提议者"""
    start = epoch_start_slot(seed.epoch)
    return any(p in byzantine for p in proposer_schedule(seed, registry, range(start, start + j)))


def simulate_bouncing_continuation(beta: float, j: int, trials: int, rng: np.random.Generator,
                                   n: int = 100) -> float:
    """蒙特卡洛: 随机 RANDAO 种子下，epoch 前 j 个 slot 抽到拜占庭提议者的频率

    拜占庭验证者为编号最大的 round(β·n) 个，提议者由 swap-or-not 洗牌抽取。
    """
    registry, byzantine = _byzantine_registry(beta, n)
    hits = sum(
        epoch_has_byzantine_proposer(Seed(rng.bytes(32), 0), registry, byzantine, j)
        for _ in range(trials)
    )
    return hits / trials


def simulate_bouncing_survival(beta: float, j: int, k_max: int, trials: int,
                               rng: np.random.Generator, n: int = 100) -> np.ndarray:
    """蒙特卡洛: 攻击持续至少 k 个 epoch 的经验概率，k = 1..k_max；每个 epoch 使用新的种子"""
    registry, byzantine = _byzantine_registry(beta, n)
    alive = np.zeros(k_max)
    for _ in range(trials):
        for k in range(k_max):
            if not epoch_has_byzantine_proposer(Seed(rng.bytes(32), k), registry, byzantine, j):
                break
            alive[k] += 1
    return alive / trials


def survival_table(beta_values: Sequence[float] = (0.1, 0.2, 0.3, 1.0 / 3.0),
                   j: int = 8, k_values: Sequence[int] = (10, 100, 1000, 7000)) -> pd.DataFrame:
    rows = [
        {"beta": b, "j": j, "k": k, "probability": attack_survival_probability(b, j, k),
         "log10_probability": k * math.log1p(-((1 - b) ** j)) / math.log(10)}
        for b in beta_values for k in k_values
    ]
    return pd.DataFrame(rows, columns=["beta", "j", "k", "probability", "log10_probability"])


def is_slashable_pair(first: Attestation, second: Attestation) -> bool:
    """同一验证者的两条证明是否构成双重投票或环绕投票"""
    if first.attester != second.attester or first == second:
        return False
    if first.target.epoch == second.target.epoch and first.target != second.target:
        return True
    s1, t1 = first.source.epoch, first.target.epoch
    s2, t2 = second.source.epoch, second.target.epoch
    return (s1 < s2 and t2 < t1) or (s2 < s1 and t1 < t2)


if __name__ == "__main__":
    print("P(攻击持续 7000 epoch):", attack_survival_probability(1 / 3, 8, 7000))
    print("单 epoch 持续频率:", simulate_bouncing_continuation(0.3, 8, 1000, np.random.default_rng(1)))
