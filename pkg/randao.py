"""
伪随机性 - Beacon Lab
====================

RANDAO 混合值、每 epoch 种子、swap-or-not 洗牌、提议者抽取与委员会划分。

主要功能:
1. get_randao_mix: 规范分支上某 epoch 全部揭示值哈希的异或
2. get_seed: seed(e) = hash(e + mix(e-2))，e-2 < 0 时使用全零混合值
3. compute_shuffled_index / shuffle_permutation: 90 轮 swap-or-not
4. get_proposer_index: 按有效余额接受候选者
5. compute_committee: 每 slot 一个委员会，32 个委员会划分活跃验证者

作者: Beacon Lab Team
版本: 1.0.0
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np

from chain import (
    BlockTree, ValidatorRegistry, SLOTS_PER_EPOCH, MAX_EFFECTIVE_BALANCE, ZERO_HASH,
    epoch_of, hash_concat, sha256, encode_int,
)


SHUFFLE_ROUND_COUNT = 90
MAX_RANDOM_BYTE = 255


class RandaoError(Exception):
    """伪随机模块错误基类"""


class IndexOutOfRange(RandaoError):
    """洗牌索引越界"""


class NoActiveValidators(RandaoError):
    """没有可选的活跃验证者"""


@dataclass(frozen=True)
class Seed:
    digest: bytes
    epoch: int


# ==================== RANDAO ====================

def randao_reveal(validator: int, epoch: int) -> bytes:
    """确定性的揭示值，代替对 epoch 的签名"""
    return sha256(b"RANDAO" + encode_int(validator) + encode_int(epoch))


def xor_bytes(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def get_randao_mix(tree: BlockTree, head: bytes, epoch: int) -> bytes:
    """head 所在分支上 epoch 内各区块 hash(randao_reveal) 的异或"""
    mix = ZERO_HASH
    if epoch < 0:
        return mix
    for block in tree.ancestors(head):
        block_epoch = epoch_of(block.slot)
        if block_epoch < epoch or block.hash == tree.root:
            break
        if block_epoch == epoch:
            mix = xor_bytes(mix, sha256(block.randao_reveal))
    return mix


def get_seed(tree: BlockTree, head: bytes, epoch: int) -> Seed:
    """epoch 的种子只依赖 epoch-2 及以前的数据"""
    return Seed(hash_concat(epoch, get_randao_mix(tree, head, epoch - 2)), epoch)


# ==================== swap-or-not ====================

def _pivot(seed: bytes, round_index: int, n: int) -> int:
    return int.from_bytes(hash_concat(seed, round_index), 'little') % n


def _bit(seed: bytes, round_index: int, position: int) -> int:
    return hash_concat(seed, round_index, position)[0] & 1


def compute_shuffled_index(index: int, seed: bytes, n: int) -> int:
    """单个索引的 swap-or-not 洗牌结果"""
    if n < 1 or not 0 <= index < n:
        raise IndexOutOfRange(f"索引 {index} 不在 [0, {n}) 内")
    for round_index in range(SHUFFLE_ROUND_COUNT):
        pivot = _pivot(seed, round_index, n)
        flip = (pivot + n - index) % n
        position = max(index, flip)
        if _bit(seed, round_index, position) == 0:
            index = flip
    return index


@lru_cache(maxsize=256)
def shuffle_permutation(seed: bytes, n: int) -> Tuple[int, ...]:
    """整个 [0, n) 的洗牌结果 perm[i] = compute_shuffled_index(i, seed, n)

    每轮中 index 与 flip 共享同一个 position，因此每轮只需约 n/2 次哈希。
    """
    if n < 1:
        raise IndexOutOfRange(f"验证者数量必须为正: {n}")
    current = np.arange(n, dtype=np.int64)
    for round_index in range(SHUFFLE_ROUND_COUNT):
        pivot = _pivot(seed, round_index, n)
        flip = (pivot + n - current) % n
        position = np.maximum(current, flip)
        bits = np.zeros(n, dtype=np.int8)
        for p in np.unique(position).tolist():
            bits[p] = _bit(seed, round_index, p)
        current = np.where(bits[position] == 0, flip, current)
    return tuple(current.tolist())


# ==================== 提议者与委员会 ====================

def get_proposer_index(seed: Seed, slot: int, registry: ValidatorRegistry) -> int:
    """按有效余额加权抽取 slot 的提议者

    候选者按 epoch 洗牌顺序从 hash(seed + slot) 决定的偏移开始依次检查，
    当 effective_balance * 255 >= 32 * random_byte 时接受。
    """
    active = registry.active_indices()
    if not active:
        raise NoActiveValidators(f"slot {slot} 没有活跃验证者")
    if all(registry.effective_balance(v) == 0.0 for v in active):
        raise NoActiveValidators(f"slot {slot} 的活跃验证者有效余额全为 0")
    n = len(active)
    perm = shuffle_permutation(seed.digest, n)
    proposer_seed = hash_concat(seed.digest, slot)
    offset = int.from_bytes(proposer_seed, 'little') % n
    i = 0
    while True:
        candidate = active[perm[(offset + i) % n]]
        random_byte = hash_concat(proposer_seed, i)[0]
        if registry.effective_balance(candidate) * MAX_RANDOM_BYTE >= MAX_EFFECTIVE_BALANCE * random_byte:
            return candidate
        i += 1


def committee_size(n: int) -> int:
    return math.ceil(n / SLOTS_PER_EPOCH)


def compute_committee(seed: Seed, slot: int, registry: ValidatorRegistry) -> List[int]:
    """slot 的证明委员会；n < 32 时末尾的 slot 委员会为空"""
    active = registry.active_indices()
    n = len(active)
    if n == 0:
        return []
    perm = shuffle_permutation(seed.digest, n)
    size = committee_size(n)
    start = (slot % SLOTS_PER_EPOCH) * size
    end = min(((slot % SLOTS_PER_EPOCH) + 1) * size, n)
    return [active[perm[i]] for i in range(start, end)]


def epoch_committees(seed: Seed, registry: ValidatorRegistry) -> List[List[int]]:
    """epoch 内 32 个 slot 的委员会"""
    base = seed.epoch * SLOTS_PER_EPOCH
    return [compute_committee(seed, base + k, registry) for k in range(SLOTS_PER_EPOCH)]


def proposer_schedule(seed: Seed, registry: ValidatorRegistry, slots: Sequence[int]) -> List[int]:
    return [get_proposer_index(seed, slot, registry) for slot in slots]


if __name__ == "__main__":
    registry = ValidatorRegistry.uniform(100)
    tree = BlockTree()
    seed = get_seed(tree, tree.root, 0)
    print("委员会大小:", [len(c) for c in epoch_committees(seed, registry)])
    print("前 8 个提议者:", proposer_schedule(seed, registry, range(8)))
