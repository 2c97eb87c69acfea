"""
数据源模块
合成形状数据集、域迁移/噪声退化变换、无标签图像目录读取
"""

from .shapes import LabeledSample, ShapeSpec, gen_shapes_dataset, shape_contains
from .corruptions import add_gaussian_noise, apply_night, noisy_samples, night_samples
from .image_dir import UnlabeledPool, load_image_dir
from .manifest import load_labeled_dataset, save_labeled_dataset

__all__ = [
    "LabeledSample",
    "ShapeSpec",
    "gen_shapes_dataset",
    "shape_contains",
    "add_gaussian_noise",
    "apply_night",
    "noisy_samples",
    "night_samples",
    "UnlabeledPool",
    "load_image_dir",
    "load_labeled_dataset",
    "save_labeled_dataset",
]
