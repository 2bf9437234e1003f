"""
网络仿真 - Beacon Lab
====================

确定性离散事件仿真: 以 slot 的三分之一为时钟粒度，驱动诚实验证者视图与拜占庭策略，
在部分同步网络 (可选分区与 GST) 下运行若干 epoch，输出逐 epoch 报告。

主要功能:
1. ScenarioConfig: 场景参数 (pydantic 校验)
2. partition: 分区调度指令 (组之间的诚实消息在 until 之前被扣留)
3. Network.run: 事件循环 (同一 tick 先投递，再由拜占庭策略与诚实视图行动)
4. RunReport: 逐 epoch 行、冲突最终确定 epoch 与 β 越过 1/3 的 epoch

事件队列按 (tick, 发送者, 序号) 排序；同一发送者到同一接收者先进先出。

作者: Beacon Lab Team
版本: 1.0.0
"""

import heapq
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd
import psutil
from pydantic import BaseModel, Field, ValidationError, validator

from adversary import DeliveryDirective, STRATEGIES, ByzantineStrategy, make_strategy
from chain import BlockTree, InvalidBlock, ValidatorRegistry, SLOTS_PER_EPOCH, make_genesis
from finality import conflicting
from validator import Message, MessageKind, ValidatorView, THIRDS_PER_SLOT
from utils.config_manager import ConfigInvalid
from utils.logger import ProgressReporter, get_logger, log_performance


class NetsimError(Exception):
    """网络仿真错误基类"""


class OverlappingGroups(NetsimError):
    """分区组之间有重叠"""


# ==================== 场景配置 ====================

class ScenarioConfig(BaseModel):
    """仿真场景"""
    n: int = Field(default=100, ge=1, description="验证者总数")
    beta0: float = Field(default=0.0, ge=0.0, lt=1.0, description="拜占庭初始权益比例")
    p0: float = Field(default=0.5, gt=0.0, lt=1.0, description="分区 X 中诚实验证者比例")
    partition: bool = Field(default=False, description="是否把诚实验证者分成两个分区")
    gst: int = Field(default=-1, ge=-1, description="分区结束的 epoch，-1 表示不结束")
    delta: int = Field(default=1, ge=0, description="消息延迟上界 (slot 的三分之一为单位)")
    j: int = Field(default=8, ge=0, lt=SLOTS_PER_EPOCH, description="epoch 内接受证成更新的 slot 上界")
    epochs: int = Field(default=10, ge=1, description="仿真 epoch 数")
    seed: int = Field(default=1, description="随机种子")
    strategy: str = Field(default="idle", description="拜占庭策略")
    rho: float = Field(default=0.4, ge=0.0, le=1.0, description="提议者加成系数")
    stop_on_conflict: bool = Field(default=True, description="出现冲突最终确定后停止")
    progress_interval: int = Field(default=500, ge=1, description="每隔多少个 epoch 输出一次进度")
    memory_limit_mb: int = Field(default=1024, ge=1, description="内存告警阈值 (MB)")

    @validator('strategy')
    def validate_strategy(cls, v):
        if v not in STRATEGIES:
            raise ValueError(f"未知策略 {v}，可选: {sorted(STRATEGIES)}")
        return v

    @classmethod
    def from_mapping(cls, values: Dict[str, Any]) -> "ScenarioConfig":
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigInvalid(f"场景配置无效: {e}") from e

    @property
    def byzantine_count(self) -> int:
        return int(round(self.beta0 * self.n))


@dataclass(frozen=True)
class PartitionSchedule:
    """分区调度: groups 内部互通，组间诚实消息扣留到 until (epoch，-1 表示一直扣留)"""
    groups: Tuple[frozenset, ...]
    until: int

    def group_of(self, validator: int) -> Optional[int]:
        for index, group in enumerate(self.groups):
            if validator in group:
                return index
        return None

    def release_tick(self, send_tick: int, delta: int) -> Optional[int]:
        arrival = send_tick + delta
        if len(self.groups) < 2:
            return arrival
        if self.until < 0:
            return None
        return max(arrival, self.until * SLOTS_PER_EPOCH * THIRDS_PER_SLOT)


def partition(groups: Sequence[Iterable[int]], until: int = -1) -> PartitionSchedule:
    frozen = tuple(frozenset(g) for g in groups if g)
    seen: set = set()
    for group in frozen:
        if seen & group:
            raise OverlappingGroups(f"分区组重叠: {sorted(seen & group)}")
        seen |= group
    return PartitionSchedule(frozen, until)


def split_validators(config: ScenarioConfig) -> Tuple[List[int], List[List[int]]]:
    """拜占庭取编号最大的 round(β0·n) 个；诚实验证者按 p0 切成 X、Y 两组"""
    n_byz = config.byzantine_count
    byzantine = list(range(config.n - n_byz, config.n))
    honest = list(range(config.n - n_byz))
    two_groups = config.partition or config.strategy == "prob_bouncing"
    if not two_groups:
        return byzantine, [honest]
    cut = int(round(config.p0 * len(honest)))
    return byzantine, [honest[:cut], honest[cut:]]


# ==================== 报告 ====================

@dataclass
class RunReport:
    config: Dict[str, Any]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    conflicting_finalization_epoch: Optional[int] = None
    threshold_cross_epoch: Optional[int] = None
    finalized: Dict[str, List[Tuple[int, str]]] = field(default_factory=dict)
    peak_memory_mb: float = 0.0

    COLUMNS = (
        "epoch", "view", "justified_epoch", "finalized_epoch", "leak_active", "participation",
        "beta", "own_stake_mean", "other_stake_mean", "byzantine_stake_mean", "ejected",
    )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=list(self.COLUMNS))

    def summary(self) -> Dict[str, Any]:
        return {
            "conflicting_finalization_epoch": self.conflicting_finalization_epoch,
            "threshold_cross_epoch": self.threshold_cross_epoch,
            "epochs": max((r["epoch"] for r in self.rows), default=0),
        }


def _mean_stake(registry: ValidatorRegistry, validators: Iterable[int]) -> float:
    stakes = [registry[v].stake for v in validators]
    return sum(stakes) / len(stakes) if stakes else 0.0


# ==================== 事件循环 ====================

@dataclass(order=True)
class _Delivery:
    tick: int
    sender: int
    seq: int
    target: int = field(compare=False)
    message: Message = field(compare=False)


class Network:
    """一次仿真运行的全部状态"""

    def __init__(self, config: ScenarioConfig, strategy: Optional[ByzantineStrategy] = None):
        self.logger = get_logger(self.__class__.__name__)
        self.config = config
        self.byzantine, groups = split_validators(config)
        registry = ValidatorRegistry.uniform(config.n, byzantine=self.byzantine)
        genesis = make_genesis()
        self.schedule = partition(groups if config.partition else [sum(groups, [])], config.gst)
        self.views = [
            ValidatorView(group, registry, genesis, config.j, config.rho, name=name)
            for name, group in zip(("X", "Y"), groups)
        ]
        self.global_tree = BlockTree(genesis)
        self.strategy = strategy or make_strategy(config.strategy, self.byzantine, config.seed)
        self.queue: List[_Delivery] = []
        self._seq = 0
        self.report = RunReport(config=config.dict())
        self._last_finalized = [view.finality.last_finalized for view in self.views]
        self.strategy.setup(self)

    # ---------- 投递 ----------

    def _push(self, when: int, target: int, message: Message) -> None:
        self._seq += 1
        heapq.heappush(self.queue, _Delivery(when, message.sender, self._seq, target, message))

    def _record_block(self, message: Message) -> None:
        if message.kind == MessageKind.PROPOSE and message.body.hash not in self.global_tree:
            try:
                self.global_tree.insert_block(message.body, check_digest=False)
            except InvalidBlock as e:
                self.logger.warning(f"全局区块树拒绝区块: {e}")

    def _deliver(self, target: int, message: Message, tick: int) -> None:
        view = self.views[target]
        if message.kind == MessageKind.PROPOSE:
            view.on_block(message.body, (tick % THIRDS_PER_SLOT) / THIRDS_PER_SLOT)
        else:
            view.on_attestation(message.body)

    def _deliver_due(self, tick: int) -> None:
        while self.queue and self.queue[0].tick <= tick:
            item = heapq.heappop(self.queue)
            self._deliver(item.target, item.message, tick)

    def broadcast(self, origin: int, message: Message, tick: int) -> None:
        """诚实视图的消息发往其它视图；分区期间由调度决定是否扣留"""
        self._record_block(message)
        if len(self.views) < 2:
            return
        when = self.schedule.release_tick(tick, self.config.delta)
        for target in range(len(self.views)):
            if target != origin and when is not None:
                self._push(when, target, message)

    def apply(self, directive: DeliveryDirective, tick: int) -> None:
        self._record_block(directive.message)
        if directive.tick <= tick:
            self._deliver(directive.target, directive.message, tick)
        else:
            self._push(directive.tick, directive.target, directive.message)

    # ---------- epoch 统计 ----------

    def _on_epoch(self, epoch: int) -> None:
        honest_groups = [view.members for view in self.views]
        for index, view in enumerate(self.views):
            summary = view.history[-1]
            others = set().union(*(g for k, g in enumerate(honest_groups) if k != index))
            beta = view.active_stake_ratio(self.byzantine)
            self.report.rows.append({
                "epoch": epoch,
                "view": view.name,
                "justified_epoch": summary.justified_epoch,
                "finalized_epoch": summary.finalized_epoch,
                "leak_active": summary.leak_active,
                "participation": summary.participation,
                "beta": beta,
                "own_stake_mean": _mean_stake(view.registry, view.members),
                "other_stake_mean": _mean_stake(view.registry, others),
                "byzantine_stake_mean": _mean_stake(view.registry, self.byzantine),
                "ejected": len(summary.ejected),
            })
            if beta >= 1.0 / 3.0 and self.report.threshold_cross_epoch is None:
                self.report.threshold_cross_epoch = epoch
                self.logger.info(f"epoch {epoch}: 视图 {view.name} 中拜占庭占比达到 {beta:.4f}")
        self._check_conflicts(epoch)

    def _check_conflicts(self, epoch: int) -> None:
        current = [view.finality.last_finalized for view in self.views]
        if current == self._last_finalized or self.report.conflicting_finalization_epoch is not None:
            self._last_finalized = current
            return
        self._last_finalized = current
        for i in range(len(current)):
            for k in range(i + 1, len(current)):
                if conflicting(self.global_tree, current[i], current[k]):
                    self.report.conflicting_finalization_epoch = epoch
                    self.logger.warning(
                        f"epoch {epoch}: 冲突最终确定 {current[i].short()} vs {current[k].short()}")
                    return

    # ---------- 主循环 ----------

    def step(self, tick: int) -> None:
        slot, third = divmod(tick, THIRDS_PER_SLOT)
        for view in self.views:
            view.advance(slot, third)
        if third == 0 and slot % SLOTS_PER_EPOCH == 0 and slot > 0:
            self._on_epoch(slot // SLOTS_PER_EPOCH)
        self._deliver_due(tick)
        for directive in self.strategy.on_tick(self, slot, third):
            self.apply(directive, tick)
        for index, view in enumerate(self.views):
            for message in view.act(tick):
                self.broadcast(index, message, tick)

    @log_performance
    def run(self) -> RunReport:
        config = self.config
        progress = ProgressReporter("仿真", config.epochs, config.progress_interval, name="netsim")
        last_tick = config.epochs * SLOTS_PER_EPOCH * THIRDS_PER_SLOT
        self.logger.info(
            f"开始仿真: n={config.n}, beta0={config.beta0}, p0={config.p0}, 分区={config.partition}, "
            f"策略={config.strategy}, epochs={config.epochs}"
        )
        for tick in range(last_tick + 1):
            self.step(tick)
            if tick % (SLOTS_PER_EPOCH * THIRDS_PER_SLOT) == 0:
                epoch = tick // (SLOTS_PER_EPOCH * THIRDS_PER_SLOT)
                progress.update(epoch, extra=f"最终确定: {[v.finality.last_finalized.epoch for v in self.views]}")
                if config.stop_on_conflict and self.report.conflicting_finalization_epoch is not None:
                    break

        for view in self.views:
            self.report.finalized[view.name] = [(cp.epoch, cp.block.hex()) for cp in view.finality.finalized]
        self.report.peak_memory_mb = psutil.Process().memory_info().rss / 1024 / 1024
        limit = config.memory_limit_mb
        if self.report.peak_memory_mb > limit:
            self.logger.warning(f"内存占用 {self.report.peak_memory_mb:.1f} MB 超过限制 {limit} MB")
        self.logger.info(f"仿真结束: {self.report.summary()}, 内存 {self.report.peak_memory_mb:.1f} MB")
        return self.report


def run(config: ScenarioConfig, strategy: Optional[ByzantineStrategy] = None) -> RunReport:
    return Network(config, strategy).run()


if __name__ == "__main__":
    demo = ScenarioConfig(n=64, epochs=4)
    report = run(demo)
    print(report.to_frame().tail())
