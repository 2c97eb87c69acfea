"""
合成形状数据集
在带纹理的背景上绘制 1-3 个形状，生成精确的解析掩码

类别: 1=square(vehicle) 2=triangle(person) 3=circle(cycle)，0 为背景
circle 作为少数类，主形状中只占 15%
"""

import math
from collections import Counter
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

import config
from common.config_models import DatasetSpec
from common.logger import get_logger, log_message

logger = get_logger("data")

SQUARE, TRIANGLE, CIRCLE = 1, 2, 3
SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class ShapeSpec:
    """形状几何参数（像素坐标，size 为半边长/外接圆半径/半径）"""

    class_id: int
    cx: float
    cy: float
    size: float


@dataclass(frozen=True)
class LabeledSample:
    """带标签样本

    image: (H, W, 3) uint8
    mask: (H, W) uint8，取值 0..C
    class_label: 主形状（最大、最上层）的类别
    """

    image: np.ndarray
    mask: np.ndarray
    class_label: int
    shapes: Tuple[ShapeSpec, ...] = ()
    domain_tag: str = "day"


def shape_contains(shape: ShapeSpec, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """
    解析形状方程: 判断点 (ys, xs) 是否在形状内

    三角形为正立的等边三角形，顶点在 (cx, cy - size)
    """
    dx, dy = xs - shape.cx, ys - shape.cy
    if shape.class_id == SQUARE:
        return (np.abs(dx) <= shape.size) & (np.abs(dy) <= shape.size)
    if shape.class_id == CIRCLE:
        return dx * dx + dy * dy <= shape.size * shape.size
    if shape.class_id == TRIANGLE:
        below_apex = ys - (shape.cy - shape.size)
        return (dy <= shape.size / 2.0) & (np.abs(dx) <= below_apex / SQRT3)
    raise ValueError(f"未知形状类别: {shape.class_id}")


def _pixel_centers(size: int) -> Tuple[np.ndarray, np.ndarray]:
    coords = np.arange(size, dtype=np.float64) + 0.5
    return np.meshgrid(coords, coords, indexing="ij")


def _render_background(size: int, rng: np.random.Generator) -> np.ndarray:
    # 上亮下暗的渐变（天空/路面）+ 低频纹理 + 像素噪声
    ys, xs = _pixel_centers(size)
    gradient = 170.0 - 90.0 * (ys / size)
    texture = np.zeros_like(gradient)
    for _ in range(2):
        fy, fx = rng.uniform(0.5, 3.0, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        texture += 12.0 * np.sin(2 * np.pi * (fy * ys + fx * xs) / size + phase)
    tint = rng.uniform(-20.0, 20.0, size=3)
    background = gradient[..., None] + texture[..., None] + tint[None, None, :]
    background += rng.normal(0.0, 4.0, size=background.shape)
    return background


def _shape_color(rng: np.random.Generator) -> np.ndarray:
    # 每个通道取暗值或亮值，保证与中间灰度的背景有对比
    bright = rng.random(3) < 0.5
    return np.where(bright, rng.uniform(190, 250, 3), rng.uniform(15, 65, 3))


def _place_shape(class_id: int, size_range: Tuple[float, float], image_size: int, rng: np.random.Generator) -> ShapeSpec:
    size = float(rng.uniform(*size_range))
    margin = size + 1.0
    cx, cy = rng.uniform(margin, image_size - margin, size=2)
    return ShapeSpec(class_id=class_id, cx=float(cx), cy=float(cy), size=size)


def _primary_classes(spec: DatasetSpec, rng: np.random.Generator) -> np.ndarray:
    # 按配额分配主形状类别，circle 占 circle_fraction
    n_circle = int(round(spec.n_samples * spec.circle_fraction))
    rest = spec.n_samples - n_circle
    classes = np.array(
        [CIRCLE] * n_circle + [SQUARE] * (rest - rest // 2) + [TRIANGLE] * (rest // 2),
        dtype=np.int64,
    )
    rng.shuffle(classes)
    return classes


def render_sample(
    primary_class: int,
    spec: DatasetSpec,
    rng: np.random.Generator,
) -> LabeledSample:
    """渲染单个样本，额外形状先画，主形状最后画在最上层"""
    image_size = spec.image_size
    extra_probs = np.array([(1 - spec.circle_fraction) / 2, (1 - spec.circle_fraction) / 2, spec.circle_fraction])

    n_shapes = int(rng.integers(spec.min_shapes, spec.max_shapes + 1))
    extras = [
        _place_shape(int(rng.choice([SQUARE, TRIANGLE, CIRCLE], p=extra_probs)), (0.07 * image_size, 0.13 * image_size), image_size, rng)
        for _ in range(n_shapes - 1)
    ]
    primary = _place_shape(primary_class, (0.12 * image_size, 0.22 * image_size), image_size, rng)
    shapes = tuple(extras + [primary])

    canvas = _render_background(image_size, rng)
    mask = np.zeros((image_size, image_size), dtype=np.uint8)
    ys, xs = _pixel_centers(image_size)
    for shape in shapes:
        inside = shape_contains(shape, ys, xs)
        canvas[inside] = _shape_color(rng)
        mask[inside] = shape.class_id

    image = np.clip(np.rint(canvas), 0, 255).astype(np.uint8)
    return LabeledSample(image=image, mask=mask, class_label=primary_class, shapes=shapes)


def gen_shapes_dataset(spec: DatasetSpec, seed: int) -> Tuple[List[LabeledSample], List[LabeledSample]]:
    """
    生成合成形状数据集并划分训练/测试集

    每个样本使用 (seed, 索引) 派生的随机流，结果只由 (spec, seed) 决定

    Args:
        spec: 数据集规格
        seed: 随机种子

    Returns:
        (训练集, 测试集)，两者不相交
    """
    class_rng = np.random.default_rng([seed, spec.split_seed, 0])
    primaries = _primary_classes(spec, class_rng)

    samples = [
        render_sample(int(primaries[index]), spec, np.random.default_rng([seed, spec.background_seed, index]))
        for index in range(spec.n_samples)
    ]

    n_test = min(spec.n_samples - 1, max(1, int(round(spec.n_samples * spec.test_fraction))))
    order = np.random.default_rng([seed, spec.split_seed, 1]).permutation(spec.n_samples)
    test_index = set(int(i) for i in order[:n_test])
    train = [s for i, s in enumerate(samples) if i not in test_index]
    test = [s for i, s in enumerate(samples) if i in test_index]

    histogram = Counter(s.class_label for s in samples)
    summary = ", ".join(
        f"{config.CLASS_REPORT_NAMES[c]}={histogram.get(c, 0) / spec.n_samples:.3f}" for c in (SQUARE, TRIANGLE, CIRCLE)
    )
    log_message("数据", f"合成数据集: 训练={len(train)}, 测试={len(test)}, 类别占比: {summary}", logger=logger)
    return train, test


def class_histogram(samples: Sequence[LabeledSample]) -> Counter:
    """主形状类别直方图"""
    return Counter(s.class_label for s in samples)
