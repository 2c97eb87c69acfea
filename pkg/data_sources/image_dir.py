"""
无标签图像目录读取
读取真实图像作为自监督分支的额外数据（例如夜间目标域图像）
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd
from PIL import Image, UnidentifiedImageError

from common.logger import get_logger, log_message
from common.validators import ArgValidator, DataSourceError
from data_sources.manifest import MANIFEST_NAME
from data_sources.shapes import LabeledSample

logger = get_logger("data")

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp"}


@dataclass
class UnlabeledPool:
    """无标签图像池 (N_2 张图像)"""

    images: List[np.ndarray]
    domain_tag: str = "day"
    skipped: int = 0
    filenames: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.images)

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledSample], domain_tag: str = "day") -> "UnlabeledPool":
        """丢弃标签，只保留图像"""
        return cls(images=[s.image for s in samples], domain_tag=domain_tag)


def center_crop_resize(image: Image.Image, target_size: int) -> np.ndarray:
    """中心裁剪为正方形后缩放到 target_size × target_size"""
    width, height = image.size
    side = min(width, height)
    left, top = (width - side) // 2, (height - side) // 2
    square = image.crop((left, top, left + side, top + side))
    if side != target_size:
        square = square.resize((target_size, target_size), Image.BILINEAR)
    return np.asarray(square, dtype=np.uint8)


def _list_image_files(directory: Path) -> List[Path]:
    manifest = directory / MANIFEST_NAME
    if manifest.is_file():
        # 与 save_labeled_dataset 写出的目录布局兼容
        names = pd.read_csv(manifest)["filename"].astype(str)
        return sorted((directory / name for name in names), key=lambda p: p.name)
    return sorted(
        (p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS),
        key=lambda p: p.name,
    )


def load_image_dir(
    path: Union[str, Path],
    target_size: int,
    domain_tag: str = "night",
) -> UnlabeledPool:
    """
    读取图像目录为无标签图像池

    Args:
        path: 目录路径（8位RGB图像文件，或带 manifest.csv 的数据集目录）
        target_size: 目标边长，必须能被 3 整除
        domain_tag: 域标签 (day/night)

    Returns:
        按文件名排序的 UnlabeledPool

    Raises:
        DataSourceError: 目录不存在或没有可读图像
    """
    ArgValidator.require_divisible(target_size, 3, name="target_size")
    directory = Path(path)
    if not directory.is_dir():
        raise DataSourceError(f"图像目录不存在: {directory}")

    images: List[np.ndarray] = []
    names: List[str] = []
    skipped = 0
    for file_path in _list_image_files(directory):
        try:
            with Image.open(file_path) as img:
                images.append(center_crop_resize(img.convert("RGB"), target_size))
            names.append(file_path.name)
        except (OSError, UnidentifiedImageError) as e:
            skipped += 1
            log_message("数据", f"跳过无法读取的文件 {file_path.name}: {e}", "WARNING", logger)

    if not images:
        raise DataSourceError(f"目录中没有可读图像: {directory}（跳过 {skipped} 个）")

    log_message("数据", f"读取 {len(images)} 张图像 ({domain_tag})，跳过 {skipped} 个: {directory}", logger=logger)
    return UnlabeledPool(images=images, domain_tag=domain_tag, skipped=skipped, filenames=names)
