"""
最终确定性 - Beacon Lab
======================

Casper FFG: 统计分支内已打包的检查点投票，证成目标检查点，并按四种情形最终确定。

主要功能:
1. count_matching_checkpoint_vote: 分支上 (source -> target) 投票的权益总和，每个验证者只计一次
2. justify_targets: 在 2/3 超级多数下证成目标检查点并记录超级多数链接
3. justification_finalization: epoch 边界处理 (证成 e-2、e-1，然后检查 A,B,C,D 四种最终确定情形)
4. conflicting: 判断两个检查点是否互不为祖先

作者: Beacon Lab Team
版本: 1.0.0
"""

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Set, Tuple, Iterable

from chain import (
    BlockTree, Checkpoint, ValidatorRegistry, checkpoint_of_epoch, epoch_start_slot,
)
from utils.logger import get_logger


SUPERMAJORITY = 2.0 / 3.0

CheckpointKey = Tuple[int, bytes]

_logger = get_logger("finality")


@dataclass(frozen=True)
class Branch:
    """一条分支: 区块树 + 分支头"""
    tree: BlockTree
    head: bytes


@dataclass
class FinalityState:
    """单个视图的证成/最终确定状态"""
    last_justified: Checkpoint
    last_finalized: Checkpoint
    justified: Dict[CheckpointKey, Checkpoint] = field(default_factory=dict)
    finalized: List[Checkpoint] = field(default_factory=list)
    links: Set[Tuple[CheckpointKey, CheckpointKey]] = field(default_factory=set)
    window: List[Checkpoint] = field(default_factory=list)

    @classmethod
    def from_genesis(cls, genesis_hash: bytes) -> "FinalityState":
        genesis = Checkpoint(genesis_hash, 0, justified=True, finalized=True)
        return cls(genesis, genesis, {genesis.key: genesis}, [genesis])

    def is_justified(self, checkpoint: Checkpoint) -> bool:
        return checkpoint.key in self.justified

    def has_link(self, source: Checkpoint, target: Checkpoint) -> bool:
        return (source.key, target.key) in self.links

    def copy(self) -> "FinalityState":
        return FinalityState(
            self.last_justified, self.last_finalized, dict(self.justified),
            list(self.finalized), set(self.links), list(self.window),
        )


# ==================== 投票统计 ====================

def tally_target_votes(branch: Branch, target: Checkpoint,
                       registry: ValidatorRegistry) -> Dict[Checkpoint, float]:
    """分支上以 target 为目标的已打包投票，按 source 分组的权益"""
    seen: Set[int] = set()
    stakes: Dict[Checkpoint, float] = {}
    for _, attestation in branch.tree.included_attestations(branch.head, epoch_start_slot(target.epoch)):
        if attestation.target != target or attestation.attester in seen:
            continue
        seen.add(attestation.attester)
        stakes[attestation.source] = stakes.get(attestation.source, 0.0) + registry.effective_balance(attestation.attester)
    return stakes


def count_matching_checkpoint_vote(branch: Branch, source: Checkpoint, target: Checkpoint,
                                   registry: ValidatorRegistry) -> float:
    """分支上 (source -> target) 投票的权益总和"""
    if source.epoch >= target.epoch:
        raise ValueError(f"source epoch {source.epoch} 必须小于 target epoch {target.epoch}")
    seen: Set[int] = set()
    total = 0.0
    for _, attestation in branch.tree.included_attestations(branch.head, epoch_start_slot(target.epoch)):
        if attestation.source == source and attestation.target == target and attestation.attester not in seen:
            seen.add(attestation.attester)
            total += registry.effective_balance(attestation.attester)
    return total


def is_supermajority(stake: float, total: float) -> bool:
    return total > 0 and stake >= SUPERMAJORITY * total


# ==================== 证成与最终确定 ====================

def justify_targets(branch: Branch, state: FinalityState, registry: ValidatorRegistry,
                    target_epochs: Iterable[int]) -> List[Checkpoint]:
    """依次尝试证成各目标 epoch 的检查点，返回新证成的检查点"""
    total = registry.total_effective_balance()
    newly: List[Checkpoint] = []
    for epoch in target_epochs:
        if epoch < 1:
            continue
        target = checkpoint_of_epoch(branch.tree, branch.head, epoch)
        for source, stake in tally_target_votes(branch, target, registry).items():
            if source.epoch >= target.epoch or not state.is_justified(source):
                continue
            if not is_supermajority(stake, total):
                continue
            state.links.add((source.key, target.key))
            if not state.is_justified(target):
                justified = replace(target, justified=True)
                state.justified[target.key] = justified
                newly.append(justified)
                _logger.debug(f"检查点证成: {justified.short()} (source {source.short()}, 权益 {stake:.2f}/{total:.2f})")
    for checkpoint in newly:
        if checkpoint.epoch > state.last_justified.epoch:
            state.last_justified = checkpoint
    return newly


def _finalize(state: FinalityState, checkpoint: Checkpoint) -> None:
    if checkpoint.epoch <= state.last_finalized.epoch:
        return
    finalized = replace(checkpoint, justified=True, finalized=True)
    state.justified[finalized.key] = finalized
    state.finalized.append(finalized)
    state.last_finalized = finalized
    _logger.debug(f"检查点最终确定: {finalized.short()}")


def justification_finalization(branch: Branch, state: FinalityState,
                               registry: ValidatorRegistry, epoch: int) -> FinalityState:
    """在 epoch 的第一个 slot 调用

    证成 e-2 与 e-1 的检查点后，以 A,B,C,D = e-4..e-1 的检查点检查:
    A,B 已证成且 A->C; B 已证成且 B->C; B,C 已证成且 B->D; C 已证成且 C->D。
    """
    justify_targets(branch, state, registry, (epoch - 2, epoch - 1))

    window = []
    for e in range(epoch - 4, epoch):
        if e < 0:
            window.append(None)
            continue
        checkpoint = checkpoint_of_epoch(branch.tree, branch.head, e)
        window.append(replace(checkpoint, justified=state.is_justified(checkpoint)))
    state.window = [cp for cp in window if cp is not None]

    a, b, c, d = window
    j = state.is_justified
    if a and b and c and j(a) and j(b) and state.has_link(a, c):
        _finalize(state, a)
    if b and c and j(b) and state.has_link(b, c):
        _finalize(state, b)
    if b and c and d and j(b) and j(c) and state.has_link(b, d):
        _finalize(state, b)
    if c and d and j(c) and state.has_link(c, d):
        _finalize(state, c)
    return state


def conflicting(tree: BlockTree, first: Checkpoint, second: Checkpoint) -> bool:
    """两个检查点的区块互不为祖先"""
    if first.block not in tree or second.block not in tree:
        return False
    return not (tree.is_ancestor(first.block, second.block) or tree.is_ancestor(second.block, first.block))


if __name__ == "__main__":
    tree = BlockTree()
    state = FinalityState.from_genesis(tree.root)
    registry = ValidatorRegistry.uniform(4)
    justification_finalization(Branch(tree, tree.root), state, registry, 2)
    print("最后证成:", state.last_justified.short(), "最后最终确定:", state.last_finalized.short())
