"""
自监督预训练任务模块
对图像施加拼图 (jigsaw) 和旋转 (rotation) 变换 g(·)，并生成 (变换后图像, 自动标签) 样本

图像约定:
- numpy 数组，形状 (H, W) 或 (H, W, C)
- uint8 表示 [0, 255] 强度，浮点表示归一化后的值
- 所有变换保持尺寸、通道数和 dtype 不变
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image
from scipy import ndimage

from common.config_models import JigsawConfig, RotationConfig, SelfSupTask
from common.logger import get_logger, log_message
from common.validators import ArgValidator, InvalidArgumentError
from permutation_set import Permutation, PermutationSet

logger = get_logger("pretext")

# 标签来源：拼图任务为置换集，旋转任务为类别数 K
LabelSource = Union[PermutationSet, int]


@dataclass(frozen=True)
class PretextSample:
    """自监督样本: 变换后的图像、自动生成的标签和任务类型"""

    image: np.ndarray
    label: int
    task: SelfSupTask


def _check_image(image: np.ndarray) -> None:
    ArgValidator.require(image.ndim in (2, 3), f"图像必须是2维或3维数组，当前为 {image.ndim} 维")
    ArgValidator.require(image.shape[0] >= 1 and image.shape[1] >= 1, "图像尺寸必须 ≥ 1")


def apply_gap(
    tile: np.ndarray,
    gap: int,
    fill_value: float = 0.0,
    rng_seed: Optional[Union[int, Sequence[int]]] = None,
) -> np.ndarray:
    """
    随机间隙: 从块中心裁剪 (h-gap, w-gap) 的区域，放到 [0, gap]×[0, gap] 内的随机偏移处

    Args:
        tile: 单个块
        gap: 每个轴上的总留白 G
        fill_value: 其余像素的填充值
        rng_seed: 随机种子（相同种子结果相同）

    Returns:
        与 tile 同尺寸的新数组
    """
    _check_image(tile)
    height, width = tile.shape[:2]
    if gap < 0 or gap >= min(height, width):
        raise InvalidArgumentError(f"gap={gap} 必须在 [0, {min(height, width)}) 内")
    if gap == 0:
        return tile.copy()

    crop_h, crop_w = height - gap, width - gap
    top, left = gap // 2, gap // 2
    crop = tile[top : top + crop_h, left : left + crop_w]

    rng = np.random.default_rng(rng_seed)
    offset_y, offset_x = (int(v) for v in rng.integers(0, gap + 1, size=2))

    output = np.full_like(tile, fill_value)
    output[offset_y : offset_y + crop_h, offset_x : offset_x + crop_w] = crop
    return output


def jigsaw_transform(
    image: np.ndarray,
    perm: Permutation,
    config: JigsawConfig,
    rng_seed: Optional[int] = None,
) -> np.ndarray:
    """
    拼图变换: 输出第 i 格放入输入第 perm.mapping[i] 块（先施加随机间隙）

    Raises:
        InvalidArgumentError: 尺寸不能被 grid_n 整除，或置换长度不是 grid_n²
    """
    _check_image(image)
    n = config.grid_n
    height, width = image.shape[:2]
    ArgValidator.require_divisible(height, n, name="图像高度")
    ArgValidator.require_divisible(width, n, name="图像宽度")
    ArgValidator.require(perm.n_tiles == n * n, f"置换长度 {perm.n_tiles} 与 {n}×{n} 分块不符")

    tile_h, tile_w = height // n, width // n
    if config.gap >= min(tile_h, tile_w):
        raise InvalidArgumentError(f"gap={config.gap} 必须小于块尺寸 {min(tile_h, tile_w)}")

    # 每个块使用独立的子种子，保证结果与处理顺序无关
    tile_seeds = np.random.SeedSequence(rng_seed).generate_state(n * n)
    output = np.empty_like(image)
    for cell, source in enumerate(perm.mapping):
        sy, sx = divmod(source, n)
        dy, dx = divmod(cell, n)
        tile = image[sy * tile_h : (sy + 1) * tile_h, sx * tile_w : (sx + 1) * tile_w]
        if config.gap > 0:
            tile = apply_gap(tile, config.gap, config.fill_value, int(tile_seeds[cell]))
        output[dy * tile_h : (dy + 1) * tile_h, dx * tile_w : (dx + 1) * tile_w] = tile
    return output


def rotate_transform(
    image: np.ndarray,
    k: int,
    config: RotationConfig,
) -> np.ndarray:
    """
    旋转变换: 以图像中心为轴逆时针旋转 k·360/K 度

    方形图像上的 90° 整数倍旋转是精确的像素置换；其他情况用双线性插值，
    超出边界的部分被裁掉，未覆盖区域填充 fill_value。

    Raises:
        InvalidArgumentError: k 不在 [0, K) 内
    """
    _check_image(image)
    num_rotations = config.num_rotations
    if not 0 <= k < num_rotations:
        raise InvalidArgumentError(f"旋转索引 k={k} 必须在 [0, {num_rotations}) 内")

    angle = k * 360.0 / num_rotations
    if angle == 0:
        return image.copy()

    height, width = image.shape[:2]
    quarter_turns, remainder = divmod(angle, 90.0)
    if remainder == 0 and (height == width or int(quarter_turns) % 2 == 0):
        return np.ascontiguousarray(np.rot90(image, int(quarter_turns), axes=(0, 1)))

    rotated = ndimage.rotate(
        image,
        angle,
        axes=(1, 0),
        reshape=False,
        order=1,
        mode="constant",
        cval=config.fill_value,
    )
    return rotated.astype(image.dtype, copy=False)


def num_labels(task: SelfSupTask, source: LabelSource) -> int:
    """标签类别数: 拼图为 P，旋转为 K"""
    if task == SelfSupTask.JIGSAW:
        if not isinstance(source, PermutationSet):
            raise InvalidArgumentError("拼图任务需要置换集")
        return len(source)
    if not isinstance(source, int) or isinstance(source, bool):
        raise InvalidArgumentError("旋转任务需要整数类别数 K")
    return source


def make_pretext_sample(
    image: np.ndarray,
    task: SelfSupTask,
    source: LabelSource,
    rng_seed: Optional[Union[int, Sequence[int]]] = None,
    jigsaw_config: Optional[JigsawConfig] = None,
    fill_value: float = 0.0,
) -> PretextSample:
    """
    生成一个自监督样本，标签在 [0, P) 或 [0, K) 内均匀采样

    Args:
        image: 输入图像
        task: 任务类型
        source: 置换集（拼图）或 K（旋转）
        rng_seed: 随机种子
        jigsaw_config: 拼图配置（grid_n 由置换集推出时可省略）
        fill_value: 旋转未覆盖区域的填充值

    Returns:
        PretextSample
    """
    task = SelfSupTask(task)
    count = num_labels(task, source)
    rng = np.random.default_rng(rng_seed)
    label = int(rng.integers(0, count))

    if task == SelfSupTask.JIGSAW:
        assert isinstance(source, PermutationSet)
        if jigsaw_config is None:
            grid_n = int(round(source.n_tiles**0.5))
            jigsaw_config = JigsawConfig(grid_n=grid_n, gap=0, num_permutations=count)
        gap_seed = int(rng.integers(0, 2**32))
        transformed = jigsaw_transform(image, source[label], jigsaw_config, gap_seed)
    else:
        rotation_config = RotationConfig(num_rotations=count, fill_value=fill_value)
        transformed = rotate_transform(image, label, rotation_config)

    return PretextSample(image=transformed, label=label, task=task)


def make_pretext_batch(
    images: Sequence[np.ndarray],
    task: SelfSupTask,
    source: LabelSource,
    seeds: Sequence[int],
    jigsaw_config: Optional[JigsawConfig] = None,
    fill_value: float = 0.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    对一批图像逐个生成自监督样本

    Returns:
        (图像数组 (B, H, W, C), 标签数组 (B,))
    """
    ArgValidator.require(len(images) == len(seeds), "图像数与种子数不一致")
    ArgValidator.require(len(images) > 0, "批次不能为空")
    samples = [
        make_pretext_sample(image, task, source, int(seed), jigsaw_config, fill_value)
        for image, seed in zip(images, seeds)
    ]
    batch = np.stack([sample.image for sample in samples])
    labels = np.array([sample.label for sample in samples], dtype=np.int64)
    return batch, labels


def write_pretext_preview(
    images: Sequence[np.ndarray],
    task: SelfSupTask,
    source: LabelSource,
    out_dir: Union[str, Path],
    seed: int = 0,
    jigsaw_config: Optional[JigsawConfig] = None,
) -> List[Path]:
    """
    把变换后的样本写成 PNG 供人工检查

    文件名: <task>_<index>_label<b>.png
    """
    output = Path(out_dir)
    output.mkdir(parents=True, exist_ok=True)
    task = SelfSupTask(task)
    paths: List[Path] = []
    for index, image in enumerate(images):
        ArgValidator.require(image.dtype == np.uint8, "预览只支持 uint8 图像")
        sample = make_pretext_sample(image, task, source, [seed, index], jigsaw_config)
        path = output / f"{task.value}_{index:03d}_label{sample.label}.png"
        Image.fromarray(sample.image).save(path)
        paths.append(path)
    log_message("预训练任务", f"已写入 {len(paths)} 张预览图片: {output}", logger=logger)
    return paths
