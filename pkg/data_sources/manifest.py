"""
数据集持久化
图像和掩码保存为 PNG，清单 manifest.csv 列: filename,class_label,mask_filename,domain_tag
"""

from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd
from PIL import Image

from common.validators import DataSourceError
from data_sources.shapes import LabeledSample

MANIFEST_NAME = "manifest.csv"
MANIFEST_COLUMNS = ["filename", "class_label", "mask_filename", "domain_tag"]


def save_labeled_dataset(samples: Sequence[LabeledSample], out_dir: Union[str, Path], prefix: str = "sample") -> Path:
    """写出图像、掩码和清单，返回清单路径"""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    rows = []
    for index, sample in enumerate(samples):
        filename = f"{prefix}_{index:05d}.png"
        mask_filename = f"{prefix}_{index:05d}_mask.png"
        Image.fromarray(sample.image).save(directory / filename)
        Image.fromarray(sample.mask).save(directory / mask_filename)
        rows.append([filename, sample.class_label, mask_filename, sample.domain_tag])
    manifest = directory / MANIFEST_NAME
    pd.DataFrame(rows, columns=MANIFEST_COLUMNS).to_csv(manifest, index=False)
    return manifest


def load_labeled_dataset(directory: Union[str, Path]) -> List[LabeledSample]:
    """
    按清单读回带标签数据集（不含形状几何参数）

    Raises:
        DataSourceError: 清单缺失或列不完整
    """
    root = Path(directory)
    manifest = root / MANIFEST_NAME
    if not manifest.is_file():
        raise DataSourceError(f"缺少清单文件: {manifest}")
    frame = pd.read_csv(manifest)
    missing = set(MANIFEST_COLUMNS) - set(frame.columns)
    if missing:
        raise DataSourceError(f"清单缺少列: {sorted(missing)}")

    samples = []
    for row in frame.itertuples(index=False):
        image = np.asarray(Image.open(root / row.filename).convert("RGB"), dtype=np.uint8)
        mask = np.asarray(Image.open(root / row.mask_filename), dtype=np.uint8)
        samples.append(
            LabeledSample(image=image, mask=mask, class_label=int(row.class_label), domain_tag=str(row.domain_tag))
        )
    return samples
