"""
伪随机性测试
===========

测试内容:
1. swap-or-not 洗牌的双射性与逐索引一致性
2. 委员会划分
3. 种子与提议者抽取

使用方法:
pytest test_randao.py
"""

import sys
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

# 添加项目路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from chain import Block, BlockTree, SLOTS_PER_EPOCH, ValidatorRegistry, ZERO_HASH, hash_concat, sha256
from randao import (
    IndexOutOfRange, NoActiveValidators, Seed, compute_committee, compute_shuffled_index,
    epoch_committees, get_proposer_index, get_randao_mix, get_seed, randao_reveal, shuffle_permutation,
    xor_bytes,
)


SEEDS = [sha256(bytes([i])) for i in range(5)]


class TestShuffle:

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", SEEDS)
    def test_bijective_for_all_small_sizes(self, seed):
        for n in range(1, 258):
            assert sorted(shuffle_permutation(seed, n)) == list(range(n))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 300), st.data())
    def test_single_index_matches_permutation(self, n, data):
        index = data.draw(st.integers(0, n - 1))
        seed = SEEDS[n % len(SEEDS)]
        assert compute_shuffled_index(index, seed, n) == shuffle_permutation(seed, n)[index]

    def test_small_sizes_bijective_by_index(self):
        for n in (1, 2, 7, 33):
            assert sorted(compute_shuffled_index(i, SEEDS[0], n) for i in range(n)) == list(range(n))

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            compute_shuffled_index(5, SEEDS[0], 5)
        with pytest.raises(IndexOutOfRange):
            compute_shuffled_index(0, SEEDS[0], 0)


class TestCommittees:

    @pytest.mark.parametrize("n", [32, 100, 1000])
    def test_committees_partition_active_set(self, n):
        registry = ValidatorRegistry.uniform(n)
        committees = epoch_committees(Seed(SEEDS[1], 3), registry)
        members = [v for committee in committees for v in committee]
        assert len(committees) == SLOTS_PER_EPOCH
        assert sorted(members) == list(range(n))

    def test_small_registry_leaves_empty_committees(self):
        registry = ValidatorRegistry.uniform(10)
        sizes = [len(c) for c in epoch_committees(Seed(SEEDS[2], 0), registry)]
        assert sum(sizes) == 10
        assert sizes[-1] == 0

    def test_ejected_validators_excluded(self):
        registry = ValidatorRegistry.uniform(64)
        registry[5].eject()
        members = [v for c in epoch_committees(Seed(SEEDS[0], 1), registry) for v in c]
        assert 5 not in members
        assert len(members) == 63

    def test_committee_is_slot_relative(self):
        registry = ValidatorRegistry.uniform(64)
        seed = Seed(SEEDS[0], 2)
        assert compute_committee(seed, 2 * SLOTS_PER_EPOCH + 4, registry) == compute_committee(seed, 4, registry)


class TestSeedsAndProposers:

    def test_early_epochs_use_zero_mix(self):
        tree = BlockTree()
        assert get_seed(tree, tree.root, 1).digest == hash_concat(1, ZERO_HASH)

    def test_mix_xors_reveals_of_epoch(self):
        tree = BlockTree()
        a = Block.create(1, tree.root, 3, randao_reveal(3, 0))
        b = Block.create(2, a.hash, 4, randao_reveal(4, 0))
        tree.insert_block(a).insert_block(b)
        expected = xor_bytes(sha256(a.randao_reveal), sha256(b.randao_reveal))
        assert get_randao_mix(tree, b.hash, 0) == expected
        assert get_seed(tree, b.hash, 2).digest == hash_concat(2, expected)

    def test_proposer_is_active_and_deterministic(self):
        registry = ValidatorRegistry.uniform(50)
        seed = Seed(SEEDS[3], 0)
        proposers = [get_proposer_index(seed, slot, registry) for slot in range(SLOTS_PER_EPOCH)]
        assert proposers == [get_proposer_index(seed, slot, registry) for slot in range(SLOTS_PER_EPOCH)]
        assert all(0 <= p < 50 for p in proposers)

    def test_no_active_validators(self):
        registry = ValidatorRegistry.uniform(3)
        for record in registry:
            record.eject()
        with pytest.raises(NoActiveValidators):
            get_proposer_index(Seed(SEEDS[0], 0), 1, registry)
