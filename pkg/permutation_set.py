"""
拼图置换集模块
生成、保存和查询按最大化汉明距离挑选的 P 个块置换

置换方向约定: 输出第 i 格接收输入第 mapping[i] 块
"""

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, Tuple, Union

import numpy as np

from common.logger import get_logger, log_message
from common.validators import ArgValidator, InvalidArgumentError, PermsetParseError

logger = get_logger("permset")

# 全枚举候选池的上限（9! = 362880）
MAX_ENUMERABLE_TILES = 9


@dataclass(frozen=True)
class Permutation:
    """块置换，mapping 是 {0..n_tiles-1} 上的双射"""

    mapping: Tuple[int, ...]

    def __post_init__(self) -> None:
        mapping = tuple(int(v) for v in self.mapping)
        object.__setattr__(self, "mapping", mapping)
        ArgValidator.require(len(mapping) >= 1, "置换至少包含一个块")
        ArgValidator.require(
            sorted(mapping) == list(range(len(mapping))),
            f"不是合法的置换: {list(mapping)}",
        )

    @classmethod
    def identity(cls, n_tiles: int) -> "Permutation":
        return cls(tuple(range(n_tiles)))

    @property
    def n_tiles(self) -> int:
        return len(self.mapping)

    def is_identity(self) -> bool:
        return self.mapping == tuple(range(self.n_tiles))

    def __len__(self) -> int:
        return len(self.mapping)


@dataclass(frozen=True)
class PermutationSet:
    """有序置换集合，第一个元素为恒等置换（即原图）"""

    n_tiles: int
    entries: Tuple[Permutation, ...]

    def __post_init__(self) -> None:
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        ArgValidator.require(len(entries) >= 1, "置换集不能为空")
        ArgValidator.require(
            len(entries) <= math.factorial(self.n_tiles),
            f"P={len(entries)} 超过 {self.n_tiles}!",
        )
        for perm in entries:
            ArgValidator.require(perm.n_tiles == self.n_tiles, "置换长度与 n_tiles 不一致")
        ArgValidator.require(entries[0].is_identity(), "第一个置换必须是恒等置换")
        ArgValidator.require(
            len({perm.mapping for perm in entries}) == len(entries), "置换集中存在重复置换"
        )

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: int) -> Permutation:
        return self.entries[index]

    def __iter__(self) -> Iterator[Permutation]:
        return iter(self.entries)

    def as_array(self) -> np.ndarray:
        """返回 (P, n_tiles) 的整数数组"""
        return np.array([perm.mapping for perm in self.entries], dtype=np.int64)


def hamming_distance(p: Permutation, q: Permutation) -> int:
    """
    两个置换的汉明距离（映射不同的位置数）

    Raises:
        InvalidArgumentError: 长度不一致
    """
    if p.n_tiles != q.n_tiles:
        raise InvalidArgumentError(f"置换长度不一致: {p.n_tiles} vs {q.n_tiles}")
    return sum(1 for a, b in zip(p.mapping, q.mapping) if a != b)


def inverse(p: Permutation) -> Permutation:
    """逆置换: inverse(p).mapping[p.mapping[i]] = i"""
    result = [0] * p.n_tiles
    for i, target in enumerate(p.mapping):
        result[target] = i
    return Permutation(tuple(result))


def _enumerate_candidates(n_tiles: int) -> np.ndarray:
    # itertools.permutations 按字典序产生，argmax 取第一个最大值即实现字典序最小的平局规则
    return np.array(list(itertools.permutations(range(n_tiles))), dtype=np.int8)


def generate_permutation_set(n_tiles: int, num_permutations: int) -> PermutationSet:
    """
    贪心 max-min 汉明距离选取置换集

    从恒等置换开始，每一步在全部 n_tiles! 个候选中选取到已选集合最小汉明距离
    最大的候选，平局取字典序最小者。结果完全确定，不使用随机数。

    Args:
        n_tiles: 块数 N²（≤ 9）
        num_permutations: 置换数 P

    Returns:
        PermutationSet
    """
    ArgValidator.require_range(n_tiles, 1, MAX_ENUMERABLE_TILES, name="n_tiles")
    total = math.factorial(n_tiles)
    if not 1 <= num_permutations <= total:
        raise InvalidArgumentError(f"P={num_permutations} 必须在 [1, {n_tiles}!={total}] 内")

    candidates = _enumerate_candidates(n_tiles)
    selected = [0]  # 恒等置换是字典序第一个候选
    # 每个候选到已选集合的最小汉明距离
    min_distance = (candidates != candidates[0]).sum(axis=1).astype(np.int32)

    for _ in range(1, num_permutations):
        best = int(np.argmax(min_distance))
        selected.append(best)
        distance_to_new = (candidates != candidates[best]).sum(axis=1)
        np.minimum(min_distance, distance_to_new, out=min_distance)

    entries = tuple(Permutation(tuple(int(v) for v in candidates[i])) for i in selected)
    permset = PermutationSet(n_tiles=n_tiles, entries=entries)
    log_message(
        "置换集",
        f"生成完成: n_tiles={n_tiles}, P={num_permutations}, "
        f"最小汉明距离={min_pairwise_distance(permset)}",
        level="DEBUG",
        logger=logger,
    )
    return permset


def pairwise_distances(permset: PermutationSet) -> np.ndarray:
    """返回 (P, P) 的汉明距离矩阵"""
    arr = permset.as_array()
    return (arr[:, None, :] != arr[None, :, :]).sum(axis=2)


def min_pairwise_distance(permset: PermutationSet) -> int:
    """集合内两两汉明距离的最小值（P=1 时为 n_tiles）"""
    if len(permset) == 1:
        return permset.n_tiles
    distances = pairwise_distances(permset)
    upper = distances[np.triu_indices(len(permset), k=1)]
    return int(upper.min())


def describe_permset(permset: PermutationSet) -> Dict[str, Union[int, float]]:
    """置换集统计信息（供 permset inspect 使用）"""
    stats: Dict[str, Union[int, float]] = {
        "n_tiles": permset.n_tiles,
        "P": len(permset),
        "min_distance": min_pairwise_distance(permset),
        "mean_distance": float(permset.n_tiles),
    }
    if len(permset) > 1:
        distances = pairwise_distances(permset)
        stats["mean_distance"] = float(distances[np.triu_indices(len(permset), k=1)].mean())
    return stats


# ==================== 文件读写 ====================


def save_permset(permset: PermutationSet, destination: Union[str, Path]) -> Path:
    """
    保存置换集

    文件格式: 第1行 `n_tiles P`，之后 P 行，每行 n_tiles 个空格分隔的索引
    """
    path = Path(destination)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{permset.n_tiles} {len(permset)}"]
    lines.extend(" ".join(str(v) for v in perm.mapping) for perm in permset)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _parse_ints(text: str, line_number: int) -> list:
    try:
        return [int(token) for token in text.split()]
    except ValueError:
        raise PermsetParseError(f"包含非整数内容: {text!r}", line_number)


def load_permset(source: Union[str, Path]) -> PermutationSet:
    """
    读取置换集文件

    Raises:
        PermsetParseError: 文件格式错误（带行号）
    """
    path = Path(source)
    try:
        raw_lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise PermsetParseError(f"无法读取文件 {path}: {e}", 0) from e

    # 忽略文件末尾的空行
    while raw_lines and not raw_lines[-1].strip():
        raw_lines.pop()
    if not raw_lines:
        raise PermsetParseError("文件为空", 1)

    header = _parse_ints(raw_lines[0], 1)
    if len(header) != 2:
        raise PermsetParseError("文件头必须是 `n_tiles P`", 1)
    n_tiles, count = header
    if not 1 <= n_tiles <= MAX_ENUMERABLE_TILES or count < 1:
        raise PermsetParseError(f"文件头数值不合法: n_tiles={n_tiles}, P={count}", 1)

    rows = raw_lines[1:]
    if len(rows) != count:
        raise PermsetParseError(f"文件头声明 P={count}，实际有 {len(rows)} 行置换", 1)

    entries = []
    seen: Dict[Tuple[int, ...], int] = {}
    for offset, row in enumerate(rows):
        line_number = offset + 2
        values = _parse_ints(row, line_number)
        if len(values) != n_tiles:
            raise PermsetParseError(f"应有 {n_tiles} 个索引，实际 {len(values)} 个", line_number)
        if sorted(values) != list(range(n_tiles)):
            raise PermsetParseError(f"不是双射: {values}", line_number)
        mapping = tuple(values)
        if mapping in seen:
            raise PermsetParseError(f"与第{seen[mapping]}行重复", line_number)
        if offset == 0 and mapping != tuple(range(n_tiles)):
            raise PermsetParseError("第一个置换必须是恒等置换", line_number)
        seen[mapping] = line_number
        entries.append(Permutation(mapping))

    return PermutationSet(n_tiles=n_tiles, entries=tuple(entries))
