"""
分叉选择 - Beacon Lab
====================

按权益加权的 LMD-GHOST 头部选择，支持提议者加成 (proposer boost)。

主要功能:
1. accumulate_weights: 通用的自底向上权重累加 (激励博弈模块共用)
2. compute_weights / weight: 子树支持权益
3. get_head_block: 从最高证成检查点出发逐层选最重子节点
4. get_head_with_boost: 临时给当前 slot 的及时区块加 ρa 权重

平局规则: 摘要按无符号字典序较大者胜出。

作者: Beacon Lab Team
版本: 1.0.0
"""

from collections import defaultdict
from typing import Dict, Mapping, Optional, Iterable, Callable, Hashable, Any, List

from chain import BlockTree, Attestation, ValidatorRegistry, UnknownBlock


WeightMap = Dict[bytes, float]


def accumulate_weights(nodes: Iterable[Hashable],
                       parent_of: Callable[[Any], Optional[Hashable]],
                       depth_of: Callable[[Any], float],
                       direct: Mapping[Any, float]) -> Dict[Any, float]:
    """每个节点的权重 = 自身直接票 + 全部子孙的直接票

    Args:
        nodes: 全部节点
        parent_of: 父节点 (根返回 None)
        depth_of: 严格大于父节点的排序键 (slot)
        direct: 节点上的直接投票权重
    """
    ordered = sorted(nodes, key=depth_of, reverse=True)
    totals: Dict[Any, float] = {node: float(direct.get(node, 0.0)) for node in ordered}
    for node in ordered:
        parent = parent_of(node)
        if parent is not None and parent in totals:
            totals[parent] += totals[node]
    return totals


def _stake_of(registry: Optional[ValidatorRegistry], attester: int) -> float:
    return 1.0 if registry is None else registry.effective_balance(attester)


def compute_weights(tree: BlockTree, pool: Mapping[int, Attestation],
                    registry: Optional[ValidatorRegistry] = None) -> WeightMap:
    """整棵树的权重表；registry 为 None 时每个验证者权益为 1"""
    direct: Dict[bytes, float] = defaultdict(float)
    for attester, attestation in pool.items():
        if attestation.block_vote in tree:
            direct[attestation.block_vote] += _stake_of(registry, attester)

    def parent_of(h: bytes) -> Optional[bytes]:
        return None if h == tree.root else tree.blocks[h].parent

    return accumulate_weights(tree.blocks.keys(), parent_of, lambda h: tree.blocks[h].slot, direct)


def weight(tree: BlockTree, pool: Mapping[int, Attestation], block: bytes,
           registry: Optional[ValidatorRegistry] = None) -> float:
    """最新投票为 block 或其后代的验证者权益之和"""
    if block not in tree:
        raise UnknownBlock(f"未知区块: {block.hex()[:16]}")
    total = 0.0
    for attester, attestation in pool.items():
        vote = attestation.block_vote
        if vote in tree and tree.is_ancestor(block, vote):
            total += _stake_of(registry, attester)
    return total


def _path_below(tree: BlockTree, start: bytes, leaf: bytes) -> List[bytes]:
    """start 之下 (不含 start) 到 leaf 的路径"""
    path = []
    for block in tree.ancestors(leaf):
        if block.hash == start:
            break
        path.append(block.hash)
    path.reverse()
    return path


def get_head_with_boost(tree: BlockTree, pool: Mapping[int, Attestation],
                        registry: Optional[ValidatorRegistry],
                        boosted: Optional[bytes], rho_a: float,
                        justified_root: Optional[bytes] = None) -> bytes:
    """带临时加成的头部选择；加成不写回任何状态

    只在存在多个候选叶子时才计算分叉处子节点的权重。
    """
    start = justified_root or tree.root
    start_block = tree.get(start)
    if start == tree.root:
        candidates = sorted(tree.leaves)
    else:
        candidates = sorted(
            leaf for leaf in tree.leaves
            if tree.blocks[leaf].slot >= start_block.slot and tree.is_ancestor(start, leaf)
        )
    if len(candidates) == 1:
        return candidates[0]
    if not candidates:
        return start

    use_boost = boosted is not None and rho_a > 0 and boosted in tree and tree.is_ancestor(start, boosted)
    paths = {leaf: _path_below(tree, start, leaf) for leaf in candidates}
    depth = 0
    while len(candidates) > 1:
        options = sorted({paths[leaf][depth] for leaf in candidates})
        if len(options) > 1:
            def score(child: bytes):
                w = weight(tree, pool, child, registry)
                if use_boost and tree.is_ancestor(child, boosted):
                    w += rho_a
                return (w, child)
            best = max(options, key=score)
            candidates = [leaf for leaf in candidates if paths[leaf][depth] == best]
        depth += 1
    return candidates[0]


def get_head_block(tree: BlockTree, pool: Mapping[int, Attestation],
                   registry: Optional[ValidatorRegistry] = None,
                   justified_root: Optional[bytes] = None) -> bytes:
    """LMD-GHOST 头部"""
    return get_head_with_boost(tree, pool, registry, None, 0.0, justified_root)


if __name__ == "__main__":
    from chain import Block, sha256
    tree = BlockTree()
    a = Block.create(1, tree.root, 1, sha256(b"a"))
    b = Block.create(2, tree.root, 2, sha256(b"b"))
    tree.insert_block(a).insert_block(b)
    print("头部:", get_head_block(tree, {}).hex()[:8], "boost后:", get_head_with_boost(tree, {}, None, a.hash, 0.8).hex()[:8])
