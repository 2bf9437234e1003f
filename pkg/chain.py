"""
链数据模型 - Beacon Lab
======================

区块、证明、检查点、区块树与验证者注册表，所有其他模块共享。

主要功能:
1. 规范字节编码与 SHA-256 摘要
2. 区块树插入、祖先查询与分支遍历
3. 最新消息 (latest message) 证明池
4. 按 epoch 求检查点
5. 调试导出 (每行 `hash parent slot proposer`)

编码布局 (全部小端):
- 整数: 8 字节无符号
- 实数: 8 字节 IEEE-754 双精度
- 摘要: 32 字节原样
- 列表: 8 字节长度前缀 + 每个元素 (元素自身再带 8 字节长度前缀)

作者: Beacon Lab Team
版本: 1.0.0
"""

import hashlib
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Iterator, Tuple, Iterable, Set

import orjson

from utils.logger import get_logger


SLOTS_PER_EPOCH = 32
MAX_EFFECTIVE_BALANCE = 32.0
EJECTION_BALANCE = 16.75
ZERO_HASH = bytes(32)

_logger = get_logger("chain")


# ==================== 异常 ====================

class ChainError(Exception):
    """链数据模型错误基类"""


class UnknownParent(ChainError):
    """父区块未知 (孤块，由调用方缓存)"""


class InvalidBlock(ChainError):
    """区块结构无效"""


class InvalidDigest(InvalidBlock):
    """区块摘要与规范编码不一致"""


class UnknownAttester(ChainError):
    """证明者不在注册表中"""


class UnknownBlock(ChainError):
    """区块不在树中"""


# ==================== 编码 ====================

def epoch_of(slot: int) -> int:
    return slot // SLOTS_PER_EPOCH


def epoch_start_slot(epoch: int) -> int:
    return epoch * SLOTS_PER_EPOCH


def encode_int(value: int) -> bytes:
    return int(value).to_bytes(8, 'little', signed=False)


def encode_real(value: float) -> bytes:
    return struct.pack('<d', float(value))


def encode_list(items: Iterable[bytes]) -> bytes:
    items = list(items)
    out = [encode_int(len(items))]
    for item in items:
        out.append(encode_int(len(item)))
        out.append(item)
    return b"".join(out)


def hash_concat(*parts) -> bytes:
    """对整数 (8 字节小端) 与字节串的拼接求 SHA-256"""
    h = hashlib.sha256()
    for part in parts:
        h.update(encode_int(part) if isinstance(part, int) else part)
    return h.digest()


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


# ==================== 数据类型 ====================

@dataclass(frozen=True)
class Checkpoint:
    """检查点 (block, epoch)；相等性只比较 block 与 epoch"""
    block: bytes
    epoch: int
    justified: bool = field(default=False, compare=False)
    finalized: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.finalized and not self.justified:
            raise ValueError("已最终确定的检查点必须已被证成")

    @property
    def key(self) -> Tuple[int, bytes]:
        return (self.epoch, self.block)

    def encode(self) -> bytes:
        return encode_int(self.epoch) + self.block

    def short(self) -> str:
        return f"({self.block.hex()[:8]}, {self.epoch})"


@dataclass(frozen=True)
class Attestation:
    """证明: 区块投票 + 检查点投票 (source -> target)"""
    attester: int
    slot: int
    block_vote: bytes
    source: Checkpoint
    target: Checkpoint

    def __post_init__(self):
        # epoch 0 的目标就是创世检查点本身
        if self.source.epoch >= self.target.epoch and self.target.epoch != 0:
            raise ValueError(f"source epoch {self.source.epoch} 必须小于 target epoch {self.target.epoch}")

    @property
    def epoch(self) -> int:
        return epoch_of(self.slot)

    @property
    def checkpoint_vote(self) -> Tuple[Checkpoint, Checkpoint]:
        return (self.source, self.target)

    def encode(self) -> bytes:
        return b"".join((
            encode_int(self.attester),
            encode_int(self.slot),
            self.block_vote,
            self.source.encode(),
            self.target.encode(),
        ))

    @cached_property
    def digest(self) -> bytes:
        return sha256(self.encode())


@dataclass(frozen=True)
class Block:
    """区块；hash 为其余字段规范编码的摘要"""
    slot: int
    parent: bytes
    proposer: int
    randao_reveal: bytes
    attestations: Tuple[Attestation, ...] = ()
    fees: float = 0.0
    hash: bytes = b""

    @classmethod
    def create(cls, slot: int, parent: bytes, proposer: int, randao_reveal: bytes,
               attestations: Iterable[Attestation] = (), fees: float = 0.0) -> "Block":
        body = cls(slot, parent, proposer, randao_reveal, tuple(attestations), fees)
        return cls(slot, parent, proposer, randao_reveal, body.attestations, fees, body.compute_digest())

    def encode_body(self) -> bytes:
        return b"".join((
            encode_int(self.slot),
            self.parent,
            encode_int(self.proposer),
            self.randao_reveal,
            encode_list(a.encode() for a in self.attestations),
            encode_real(self.fees),
        ))

    def compute_digest(self) -> bytes:
        return sha256(self.encode_body())


def make_genesis() -> Block:
    return Block.create(slot=0, parent=ZERO_HASH, proposer=0, randao_reveal=ZERO_HASH)


def genesis_checkpoint(genesis: Block) -> Checkpoint:
    return Checkpoint(genesis.hash, 0, justified=True, finalized=True)


@dataclass
class ValidatorRecord:
    """验证者记录"""
    id: int
    stake: float = MAX_EFFECTIVE_BALANCE
    inactivity_score: int = 0
    active_flag: bool = True
    byzantine: bool = False

    @property
    def effective_balance(self) -> float:
        if not self.active_flag:
            return 0.0
        return min(self.stake, MAX_EFFECTIVE_BALANCE)

    def eject(self) -> None:
        self.stake = 0.0
        self.active_flag = False


class ValidatorRegistry:
    """验证者注册表，索引稠密 0..n-1"""

    def __init__(self, records: Iterable[ValidatorRecord]):
        self.records: List[ValidatorRecord] = list(records)
        for idx, record in enumerate(self.records):
            if record.id != idx:
                raise ValueError(f"验证者索引必须稠密: 位置 {idx} 上是 {record.id}")

    @classmethod
    def uniform(cls, n: int, stake: float = MAX_EFFECTIVE_BALANCE,
                byzantine: Iterable[int] = ()) -> "ValidatorRegistry":
        byz = set(byzantine)
        return cls(ValidatorRecord(i, stake, byzantine=i in byz) for i in range(n))

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, index: int) -> ValidatorRecord:
        if not 0 <= index < len(self.records):
            raise UnknownAttester(f"未知验证者: {index}")
        return self.records[index]

    def __iter__(self) -> Iterator[ValidatorRecord]:
        return iter(self.records)

    def effective_balance(self, index: int) -> float:
        return self[index].effective_balance

    def total_effective_balance(self) -> float:
        return sum(r.effective_balance for r in self.records)

    def active_indices(self) -> List[int]:
        return [r.id for r in self.records if r.active_flag]

    def copy(self) -> "ValidatorRegistry":
        return ValidatorRegistry(
            ValidatorRecord(r.id, r.stake, r.inactivity_score, r.active_flag, r.byzantine) for r in self.records
        )


# ==================== 区块树 ====================

class BlockTree:
    """以创世块为根的区块树与最新消息证明池

    树只接受父块已知的区块，孤块由 validator 模块缓存。
    """

    def __init__(self, genesis: Optional[Block] = None):
        self.genesis = genesis or make_genesis()
        self.blocks: Dict[bytes, Block] = {self.genesis.hash: self.genesis}
        self.children: Dict[bytes, List[bytes]] = {self.genesis.hash: []}
        self.leaves: Set[bytes] = {self.genesis.hash}
        self.attestation_pool: Dict[int, Attestation] = {}
        # 每次区块或最新消息变化时递增，供视图缓存失效
        self.version = 0

    @property
    def root(self) -> bytes:
        return self.genesis.hash

    def __contains__(self, block_hash: bytes) -> bool:
        return block_hash in self.blocks

    def __len__(self) -> int:
        return len(self.blocks)

    def get(self, block_hash: bytes) -> Block:
        try:
            return self.blocks[block_hash]
        except KeyError:
            raise UnknownBlock(f"未知区块: {block_hash.hex()[:16]}") from None

    def insert_block(self, block: Block, check_digest: bool = True) -> "BlockTree":
        """插入区块；重复插入为幂等空操作"""
        if block.hash in self.blocks:
            _logger.debug(f"重复区块忽略: {block.hash.hex()[:8]}")
            return self
        if check_digest and block.compute_digest() != block.hash:
            raise InvalidDigest(f"区块摘要错误: slot {block.slot}")
        parent = self.blocks.get(block.parent)
        if parent is None:
            raise UnknownParent(f"父区块未知: {block.parent.hex()[:8]} (slot {block.slot})")
        if parent.slot >= block.slot:
            raise InvalidBlock(f"slot 必须严格递增: 父 {parent.slot} >= {block.slot}")

        self.blocks[block.hash] = block
        self.children[block.hash] = []
        self.children[block.parent].append(block.hash)
        self.leaves.discard(block.parent)
        self.leaves.add(block.hash)
        self.version += 1
        return self

    def record_attestation(self, attestation: Attestation,
                           registry: Optional[ValidatorRegistry] = None) -> bool:
        """按最新消息规则记录证明，返回池是否变化

        同一 epoch 内只保留最先收到的证明；较新 epoch 的证明替换旧证明。
        """
        if registry is not None and not 0 <= attestation.attester < len(registry):
            raise UnknownAttester(f"未知证明者: {attestation.attester}")
        current = self.attestation_pool.get(attestation.attester)
        if current is not None and (attestation.slot <= current.slot or attestation.epoch == current.epoch):
            return False
        self.attestation_pool[attestation.attester] = attestation
        self.version += 1
        return True

    # ---------- 祖先与分支 ----------

    def ancestors(self, head: bytes) -> Iterator[Block]:
        """从 head (含) 向创世块遍历"""
        block = self.get(head)
        while True:
            yield block
            if block.hash == self.root:
                return
            block = self.blocks[block.parent]

    def ancestor_at_slot(self, head: bytes, slot: int) -> Block:
        """分支上 slot 不超过给定值的最新区块"""
        for block in self.ancestors(head):
            if block.slot <= slot:
                return block
        return self.genesis

    def is_ancestor(self, ancestor: bytes, descendant: bytes) -> bool:
        """ancestor 是否为 descendant 本身或其祖先"""
        target = self.get(ancestor)
        return self.ancestor_at_slot(descendant, target.slot).hash == ancestor

    def included_attestations(self, head: bytes, since_slot: int = 0) -> Iterator[Tuple[Block, Attestation]]:
        """分支上 slot >= since_slot 的区块所包含的证明"""
        for block in self.ancestors(head):
            if block.slot < since_slot:
                return
            for attestation in block.attestations:
                yield block, attestation

    def checkpoint_of_epoch(self, head: bytes, epoch: int) -> Checkpoint:
        return checkpoint_of_epoch(self, head, epoch)

    def debug_dump(self) -> str:
        """按 slot 排序的文本导出"""
        rows = sorted(self.blocks.values(), key=lambda b: (b.slot, b.hash))
        return "\n".join(f"{b.hash.hex()} {b.parent.hex()} {b.slot} {b.proposer}" for b in rows)

    def to_json(self) -> bytes:
        return orjson.dumps({
            "genesis": self.root.hex(),
            "blocks": [
                {"hash": b.hash.hex(), "parent": b.parent.hex(), "slot": b.slot,
                 "proposer": b.proposer, "attestations": len(b.attestations)}
                for b in sorted(self.blocks.values(), key=lambda b: (b.slot, b.hash))
            ],
        })


# ==================== 模块级操作 ====================

def insert_block(tree: BlockTree, block: Block) -> BlockTree:
    return tree.insert_block(block)


def record_attestation(tree: BlockTree, attestation: Attestation,
                       registry: Optional[ValidatorRegistry] = None) -> BlockTree:
    tree.record_attestation(attestation, registry)
    return tree


def checkpoint_of_epoch(tree: BlockTree, branch_head: bytes, epoch: int) -> Checkpoint:
    """epoch 的检查点: 该 epoch 首个 slot 的区块，空缺时取分支上之前最新的区块"""
    block = tree.ancestor_at_slot(branch_head, epoch_start_slot(epoch))
    return Checkpoint(block.hash, epoch)


if __name__ == "__main__":
    tree = BlockTree()
    child = Block.create(slot=1, parent=tree.root, proposer=3, randao_reveal=sha256(b"demo"))
    tree.insert_block(child)
    print(tree.debug_dump())
    print(checkpoint_of_epoch(tree, child.hash, 0).short())
