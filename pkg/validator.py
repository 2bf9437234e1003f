"""
验证者视图 - Beacon Lab
======================

共享同一消息流的一组验证者的本地视图: 区块树、证明池、证成/最终确定状态、
泄漏状态与每 slot 的职责。视图在 slot 切换、区块到达与证明到达时推进。

主要功能:
1. tick: 推进本地时钟，执行 epoch 边界处理，按职责产生提议与证明
2. prepare_block / prepare_attestation: 构造区块与证明 (每个 epoch 只证明一次)
3. on_block: 插入区块或缓存孤块；epoch 前 j 个 slot 内在区块分支上尝试证成
4. on_attestation: 记录最新消息，区块未知时缓存
5. epoch 边界: 证成/最终确定、不活跃分数与罚金、弹出

证明触发: 本 slot 区块到达或到达 slot 的 1/3 时刻，先到者为准。

作者: Beacon Lab Team
版本: 1.0.0
"""

from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set, Tuple, Union

from chain import (
    Attestation, Block, BlockTree, ValidatorRegistry, InvalidBlock, UnknownAttester, SLOTS_PER_EPOCH,
    checkpoint_of_epoch, epoch_of, epoch_start_slot,
)
from finality import Branch, FinalityState, justification_finalization, justify_targets
from fork_choice import get_head_with_boost
from leak_analytics import LeakState, process_leak_epoch
from randao import NoActiveValidators, Seed, compute_committee, get_proposer_index, get_seed, randao_reveal
from utils.logger import get_logger


THIRDS_PER_SLOT = 3
TIMELY_FRACTION = 1.0 / 3.0
# 区块最多打包多少个 slot 之前的证明
INCLUSION_WINDOW = 2 * SLOTS_PER_EPOCH


class ValidatorError(Exception):
    """验证者模块错误基类"""


class DoubleVote(ValidatorError):
    """诚实验证者在同一 epoch 内第二次证明"""


class Role(str, Enum):
    PROPOSER = "proposer"
    ATTESTER = "attester"


class MessageKind(str, Enum):
    PROPOSE = "propose"
    ATTEST = "attest"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    sender: int
    body: Union[Block, Attestation]
    tick: int


@dataclass(frozen=True)
class EpochDuties:
    epoch: int
    seed: Seed
    committee_weight: float


@dataclass(frozen=True)
class EpochSummary:
    """epoch 边界处理后的视图快照"""
    epoch: int
    justified_epoch: int
    finalized_epoch: int
    leak_active: bool
    participation: float
    ejected: Tuple[int, ...]


class ValidatorView:
    """一组验证者的共享视图"""

    def __init__(self, members: Iterable[int], registry: ValidatorRegistry,
                 genesis: Optional[Block] = None, j: int = 8, rho: float = 0.4,
                 name: str = "view"):
        self.name = name
        self.logger = get_logger(f"{self.__class__.__name__}[{name}]")
        self.members = frozenset(members)
        unknown = [m for m in self.members if not 0 <= m < len(registry)]
        if unknown:
            raise UnknownAttester(f"视图成员不在注册表中: {unknown}")
        if not 0 <= j < SLOTS_PER_EPOCH:
            raise ValueError(f"j 必须在 [0, {SLOTS_PER_EPOCH}) 内: {j}")
        self.j = j
        self.rho = rho

        self.tree = BlockTree(genesis)
        self.registry = registry.copy()
        self.finality = FinalityState.from_genesis(self.tree.root)
        self.leak = LeakState()

        self.slot_clock = -1
        self.third = 0
        self.duties: Optional[EpochDuties] = None
        self.current_proposer: Optional[int] = None
        self.current_committee: List[int] = []
        self.roles: Dict[int, Set[Role]] = {}
        self.pending_attesters: Set[int] = set()
        self.last_attested_epoch: Dict[int, int] = {}
        self.block_seen = False
        self.timely_block: Optional[bytes] = None

        self.orphans: Dict[bytes, List[Tuple[Block, float]]] = defaultdict(list)
        self.waiting_attestations: Dict[bytes, List[Attestation]] = defaultdict(list)
        self.deferred: Dict[bytes, int] = {}
        self.history: List[EpochSummary] = []
        self._head_cache: Tuple[tuple, bytes] = ((), self.tree.root)

    # ==================== 时钟与职责 ====================

    @property
    def epoch(self) -> int:
        return epoch_of(max(self.slot_clock, 0))

    def advance(self, wall_slot: int, third: int = 0) -> None:
        """把本地时钟推进到 (wall_slot, third)，跨 slot 时刷新职责"""
        while self.slot_clock < wall_slot:
            self._start_slot(self.slot_clock + 1)
        self.third = third

    def act(self, tick_index: int) -> List[Message]:
        """按当前职责产生消息；自己的消息立即进入本视图"""
        messages: List[Message] = []
        slot = self.slot_clock
        proposer = self.current_proposer
        if (self.third == 0 and slot > 0 and proposer in self.members
                and Role.PROPOSER in self.roles.get(proposer, ())):
            block = self.prepare_block(proposer)
            self.roles[proposer].discard(Role.PROPOSER)
            self.on_block(block, 0.0)
            messages.append(Message(MessageKind.PROPOSE, proposer, block, tick_index))

        if self.pending_attesters and (self.block_seen or self.third >= 1):
            for attester in sorted(self.pending_attesters):
                attestation = self.prepare_attestation(attester)
                self.on_attestation(attestation)
                messages.append(Message(MessageKind.ATTEST, attester, attestation, tick_index))
        return messages

    def tick(self, wall_slot: int, third: int = 0) -> List[Message]:
        self.advance(wall_slot, third)
        return self.act(wall_slot * THIRDS_PER_SLOT + third)

    def _start_slot(self, slot: int) -> None:
        self.slot_clock = slot
        if slot % SLOTS_PER_EPOCH == 0:
            self._process_epoch(epoch_of(slot))

        self.block_seen = False
        self.timely_block = None
        try:
            self.current_proposer = get_proposer_index(self.duties.seed, slot, self.registry)
        except NoActiveValidators:
            self.logger.warning(f"slot {slot} 无可用提议者")
            self.current_proposer = None
        self.current_committee = compute_committee(self.duties.seed, slot, self.registry)

        self.roles = {}
        if self.current_proposer in self.members:
            self.roles.setdefault(self.current_proposer, set()).add(Role.PROPOSER)
        for member in self.current_committee:
            if member in self.members:
                self.roles.setdefault(member, set()).add(Role.ATTESTER)
        self.pending_attesters = {m for m, r in self.roles.items() if Role.ATTESTER in r}

    def _process_epoch(self, epoch: int) -> None:
        """epoch 首个 slot: 补做窗口外证成 → 证成/最终确定 → 不活跃更新 → 新种子"""
        self._apply_deferred_justification()
        head = self.head(boosted=False)
        participation = 0.0
        ejected: List[int] = []
        if epoch > 0:
            previous_finalized = self.finality.last_finalized
            justification_finalization(Branch(self.tree, head), self.finality, self.registry, epoch)
            if self.finality.last_finalized != previous_finalized:
                self.logger.debug(f"epoch {epoch}: 最终确定推进到 {self.finality.last_finalized.short()}")
        if epoch >= 2:
            # 证明在下一个 epoch 内才全部打包，因此评估 e-2 的参与情况
            participants = self.participants(head, epoch - 2)
            participation = self.active_stake_ratio(participants)
            self.leak.update(epoch - 1, self.finality.last_finalized.epoch)
            ejected = process_leak_epoch(self.registry, participants, self.leak)
            if ejected:
                self.logger.info(f"epoch {epoch}: 弹出 {len(ejected)} 个验证者")

        seed = get_seed(self.tree, head, epoch)
        weight = self.rho * self.registry.total_effective_balance() / SLOTS_PER_EPOCH
        self.duties = EpochDuties(epoch, seed, weight)
        self.history.append(EpochSummary(
            epoch, self.finality.last_justified.epoch, self.finality.last_finalized.epoch,
            self.leak.leak_active, participation, tuple(ejected),
        ))

    def _apply_deferred_justification(self) -> None:
        """在 j 窗口之后到达的分支上补做证成，只有得到更新的证成检查点时才采用"""
        deferred, self.deferred = self.deferred, {}
        for block_hash, arrival_epoch in deferred.items():
            targets = (arrival_epoch - 2, arrival_epoch - 1)
            branch = Branch(self.tree, block_hash)
            trial = self.finality.copy()
            justify_targets(branch, trial, self.registry, targets)
            if trial.last_justified.epoch > self.finality.last_justified.epoch:
                justify_targets(branch, self.finality, self.registry, targets)
                self.logger.debug(f"epoch 边界补做证成: {self.finality.last_justified.short()}")

    def participants(self, head: bytes, epoch: int) -> Set[int]:
        """分支上已打包、目标为 epoch 检查点的证明者"""
        target = checkpoint_of_epoch(self.tree, head, epoch)
        return {
            attestation.attester
            for _, attestation in self.tree.included_attestations(head, epoch_start_slot(epoch))
            if attestation.target == target
        }

    # ==================== 分叉选择 ====================

    def head(self, boosted: bool = True) -> bytes:
        boost = self.timely_block if boosted else None
        key = (self.tree.version, boost, self.finality.last_justified.block)
        if self._head_cache[0] == key:
            return self._head_cache[1]
        rho_a = self.duties.committee_weight if self.duties else 0.0
        head = get_head_with_boost(self.tree, self.tree.attestation_pool, self.registry,
                                   boost, rho_a, self.finality.last_justified.block)
        self._head_cache = (key, head)
        return head

    # ==================== 构造消息 ====================

    def includable_attestations(self, parent: bytes, slot: int) -> List[Attestation]:
        """池中尚未被 parent 分支打包的证明"""
        candidates = [
            a for a in self.tree.attestation_pool.values()
            if slot - INCLUSION_WINDOW <= a.slot < slot
        ]
        if not candidates:
            return []
        oldest = min(a.slot for a in candidates)
        included = {a.digest for _, a in self.tree.included_attestations(parent, oldest)}
        return sorted((a for a in candidates if a.digest not in included), key=lambda a: (a.slot, a.attester))

    def compose_block(self, proposer: int, parent: Optional[bytes] = None,
                      extra: Iterable[Attestation] = (), fees: float = 0.0) -> Block:
        """在 parent (默认头部) 上构造当前 slot 的区块，不改变视图状态"""
        slot = self.slot_clock
        parent = parent or self.head()
        attestations = self.includable_attestations(parent, slot)
        known = {a.digest for a in attestations}
        attestations += [a for a in extra if a.digest not in known]
        return Block.create(slot, parent, proposer, randao_reveal(proposer, epoch_of(slot)), attestations, fees)

    def prepare_block(self, proposer: int) -> Block:
        return self.compose_block(proposer)

    def compose_attestation(self, attester: int, slot: Optional[int] = None) -> Attestation:
        """按当前视图构造证明，不记录投票"""
        slot = self.slot_clock if slot is None else slot
        head = self.head()
        target = checkpoint_of_epoch(self.tree, head, epoch_of(slot))
        return Attestation(attester, slot, head, self.finality.last_justified, target)

    def prepare_attestation(self, attester: int) -> Attestation:
        epoch = self.epoch
        if self.last_attested_epoch.get(attester) == epoch:
            raise DoubleVote(f"验证者 {attester} 在 epoch {epoch} 已经证明过")
        attestation = self.compose_attestation(attester)
        self.last_attested_epoch[attester] = epoch
        self.pending_attesters.discard(attester)
        if attester in self.roles:
            self.roles[attester].discard(Role.ATTESTER)
        return attestation

    # ==================== 接收消息 ====================

    def on_block(self, block: Block, arrival_fraction: float = 0.0) -> bool:
        """插入区块 (父块未知时缓存)，返回是否有区块进入树"""
        if block.hash in self.tree:
            return False
        if block.parent not in self.tree:
            self.orphans[block.parent].append((block, arrival_fraction))
            return False
        inserted = False
        queue = [(block, arrival_fraction)]
        while queue:
            current, fraction = queue.pop()
            if self._insert(current, fraction):
                inserted = True
                queue.extend(self.orphans.pop(current.hash, []))
        return inserted

    def _insert(self, block: Block, arrival_fraction: float) -> bool:
        try:
            self.tree.insert_block(block)
        except InvalidBlock as e:
            self.logger.warning(f"丢弃无效区块: {e}")
            return False

        for attestation in block.attestations:
            self.on_attestation(attestation)
        for attestation in self.waiting_attestations.pop(block.hash, []):
            self.tree.record_attestation(attestation, self.registry)

        if block.slot == self.slot_clock:
            self.block_seen = True
            if arrival_fraction <= TIMELY_FRACTION and self.timely_block is None:
                self.timely_block = block.hash

        if self.slot_clock >= 0 and self.slot_clock % SLOTS_PER_EPOCH <= self.j:
            epoch = self.epoch
            newly = justify_targets(Branch(self.tree, block.hash), self.finality, self.registry,
                                    (epoch - 2, epoch - 1))
            if newly:
                self.logger.debug(f"slot {self.slot_clock}: 区块到达后证成 {[cp.short() for cp in newly]}")
        elif self.slot_clock >= 0:
            # 窗口外到达的分支只保留末端，到下一个 epoch 边界再尝试证成
            self.deferred.pop(block.parent, None)
            self.deferred[block.hash] = self.epoch
        return True

    def on_attestation(self, attestation: Attestation) -> bool:
        if attestation.block_vote not in self.tree:
            self.waiting_attestations[attestation.block_vote].append(attestation)
            return False
        return self.tree.record_attestation(attestation, self.registry)

    # ==================== 统计 ====================

    def active_stake_ratio(self, voters: Iterable[int]) -> float:
        total = self.registry.total_effective_balance()
        if total == 0:
            return 0.0
        return sum(self.registry.effective_balance(v) for v in set(voters)) / total


# ==================== 模块级操作 ====================

def tick(view: ValidatorView, wall_slot: int, third: int = 0) -> List[Message]:
    return view.tick(wall_slot, third)


def prepare_block(view: ValidatorView, proposer: int) -> Block:
    return view.prepare_block(proposer)


def prepare_attestation(view: ValidatorView, attester: int) -> Attestation:
    return view.prepare_attestation(attester)


def on_block(view: ValidatorView, block: Block, arrival_fraction: float = 0.0) -> bool:
    return view.on_block(block, arrival_fraction)


def on_attestation(view: ValidatorView, attestation: Attestation) -> bool:
    return view.on_attestation(attestation)


if __name__ == "__main__":
    registry = ValidatorRegistry.uniform(64)
    view = ValidatorView(range(64), registry, name="demo")
    for slot in range(2 * SLOTS_PER_EPOCH + 1):
        for third in range(THIRDS_PER_SLOT):
            view.tick(slot, third)
    print("区块数:", len(view.tree), "最后证成:", view.finality.last_justified.short())
