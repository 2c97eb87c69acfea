#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
置换集模块单元测试
"""

import itertools

import pytest

from common.validators import InvalidArgumentError, PermsetParseError
from permutation_set import (
    Permutation,
    PermutationSet,
    describe_permset,
    generate_permutation_set,
    hamming_distance,
    inverse,
    load_permset,
    min_pairwise_distance,
    save_permset,
)


def greedy_reference(n_tiles, count):
    """纯 Python 逐个比较的贪心 max-min 实现，用作独立对照"""
    candidates = list(itertools.permutations(range(n_tiles)))
    chosen = [candidates[0]]
    while len(chosen) < count:
        best, best_score = None, -1
        for cand in candidates:
            if cand in chosen:
                continue
            score = min(sum(a != b for a, b in zip(cand, c)) for c in chosen)
            if score > best_score:
                best, best_score = cand, score
        chosen.append(best)
    return [list(p) for p in chosen]


@pytest.mark.unit
class TestHammingDistance:
    """汉明距离测试"""

    @pytest.mark.parametrize(
        "p, q, expected",
        [
            ((0, 1, 2), (0, 1, 2), 0),
            ((0, 1, 2, 3, 4, 5, 6, 7, 8), (8, 7, 6, 5, 4, 3, 2, 1, 0), 8),
            ((0, 1, 2), (1, 0, 2), 2),
        ],
    )
    def test_known_distances(self, p, q, expected):
        """测试已知距离"""
        assert hamming_distance(Permutation(p), Permutation(q)) == expected

    def test_length_mismatch(self):
        """测试长度不一致"""
        with pytest.raises(InvalidArgumentError):
            hamming_distance(Permutation((0, 1)), Permutation((0, 1, 2)))

    def test_invalid_permutation_rejected(self):
        """测试非双射被拒绝"""
        with pytest.raises(InvalidArgumentError):
            Permutation((0, 0, 1))


@pytest.mark.unit
class TestInverse:
    """逆置换测试"""

    @pytest.mark.parametrize(
        "p, expected",
        [((0, 1, 2), (0, 1, 2)), ((1, 2, 0), (2, 0, 1)), ((1, 0, 3, 2), (1, 0, 3, 2))],
    )
    def test_known_inverses(self, p, expected):
        assert inverse(Permutation(p)).mapping == expected

    def test_composition_is_identity(self):
        """p ∘ p⁻¹ = 恒等"""
        for values in itertools.permutations(range(5)):
            p = Permutation(values)
            q = inverse(p)
            assert tuple(p.mapping[q.mapping[i]] for i in range(5)) == tuple(range(5))


@pytest.mark.unit
class TestGeneratePermutationSet:
    """置换集生成测试"""

    def test_single_permutation_is_identity(self):
        permset = generate_permutation_set(4, 1)
        assert [list(p.mapping) for p in permset] == [[0, 1, 2, 3]]

    def test_two_permutations(self):
        """(4, 2) 取字典序最小的全错位排列"""
        permset = generate_permutation_set(4, 2)
        assert [list(p.mapping) for p in permset] == [[0, 1, 2, 3], [1, 0, 3, 2]]

    @pytest.mark.parametrize("count", range(1, 25))
    def test_matches_reference_for_four_tiles(self, count):
        """n_tiles=4 时与独立实现完全一致"""
        permset = generate_permutation_set(4, count)
        assert permset.as_array().tolist() == greedy_reference(4, count)

    def test_too_many_permutations(self):
        with pytest.raises(InvalidArgumentError):
            generate_permutation_set(3, 7)

    def test_deterministic(self):
        assert generate_permutation_set(5, 10) == generate_permutation_set(5, 10)

    def test_nine_tiles_thirty_permutations(self, permset_9_30):
        """9 块 30 个置换: 首个为恒等；前 9 个构成拉丁方（两两距离 9）；超过 9 个后最小距离为 7 或 8"""
        assert len(permset_9_30) == 30
        assert permset_9_30[0].is_identity()
        assert len({p.mapping for p in permset_9_30}) == 30
        first_nine = permset_9_30.as_array()[:9]
        for column in first_nine.T:
            assert sorted(column.tolist()) == list(range(9))
        assert min_pairwise_distance(permset_9_30) in (7, 8)

    @pytest.mark.slow
    def test_nine_tiles_matches_reference(self, permset_9_30):
        """9 块 30 个置换与全枚举的独立实现一致"""
        reference = greedy_reference(9, 30)
        assert permset_9_30.as_array().tolist() == reference
        expected_min = min(
            sum(a != b for a, b in zip(p, q)) for p, q in itertools.combinations(reference, 2)
        )
        assert min_pairwise_distance(permset_9_30) == expected_min

    def test_hundred_permutations_supported(self):
        permset = generate_permutation_set(9, 100)
        assert len(permset) == 100
        assert describe_permset(permset)["P"] == 100

    def test_describe(self):
        stats = describe_permset(generate_permutation_set(4, 2))
        assert stats["n_tiles"] == 4
        assert stats["min_distance"] == 4
        assert stats["mean_distance"] == 4.0


@pytest.mark.unit
class TestPermsetFile:
    """置换集文件读写测试"""

    def test_round_trip(self, tmp_path):
        permset = generate_permutation_set(4, 2)
        path = save_permset(permset, tmp_path / "perm.txt")
        assert load_permset(path) == permset

    def test_trailing_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "perm.txt"
        path.write_text("3 2\n0 1 2\n1 2 0\n\n\n", encoding="utf-8")
        assert len(load_permset(path)) == 2

    def test_duplicate_row(self, tmp_path):
        path = tmp_path / "perm.txt"
        path.write_text("3 3\n0 1 2\n1 2 0\n1 2 0\n", encoding="utf-8")
        with pytest.raises(PermsetParseError) as exc_info:
            load_permset(path)
        assert exc_info.value.line_number == 4

    def test_header_count_mismatch(self, tmp_path):
        path = tmp_path / "perm.txt"
        path.write_text("3 3\n0 1 2\n1 2 0\n", encoding="utf-8")
        with pytest.raises(PermsetParseError) as exc_info:
            load_permset(path)
        assert exc_info.value.line_number == 1

    def test_non_bijective_row(self, tmp_path):
        path = tmp_path / "perm.txt"
        path.write_text("3 2\n0 1 2\n0 0 2\n", encoding="utf-8")
        with pytest.raises(PermsetParseError) as exc_info:
            load_permset(path)
        assert exc_info.value.line_number == 3
        assert "第3行" in str(exc_info.value)

    def test_first_row_must_be_identity(self, tmp_path):
        path = tmp_path / "perm.txt"
        path.write_text("3 2\n1 0 2\n0 1 2\n", encoding="utf-8")
        with pytest.raises(PermsetParseError) as exc_info:
            load_permset(path)
        assert exc_info.value.line_number == 2

    def test_non_integer(self, tmp_path):
        path = tmp_path / "perm.txt"
        path.write_text("3 1\n0 a 2\n", encoding="utf-8")
        with pytest.raises(PermsetParseError):
            load_permset(path)

    def test_set_requires_identity_first(self):
        with pytest.raises(InvalidArgumentError):
            PermutationSet(n_tiles=2, entries=(Permutation((1, 0)), Permutation((0, 1))))
