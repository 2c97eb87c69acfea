#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
评估指标报告
单个检查点的指标，以及长表 CSV 的读写

CSV 列: run_id,preset,seed,step,metric,class,value,config_hash
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

import config
from common.validators import DataSourceError

METRIC_COLUMNS = ["run_id", "preset", "seed", "step", "metric", "class", "value", "config_hash"]

MEAN_IOU = "mean_iou"
CLASS_IOU = "class_iou"
PIXEL_ACCURACY = "pixel_accuracy"
IMAGE_ACCURACY = "image_accuracy"
PRETEXT_ACCURACY = "pretext_accuracy"


def class_name(class_id: int) -> str:
    """报告用类别名（square→vehicle, triangle→person, circle→cycle）"""
    return config.CLASS_REPORT_NAMES.get(class_id, str(class_id))


@dataclass
class MetricsReport:
    """单个检查点的评估结果"""

    run_id: str
    step: int
    config_hash: str
    seed: int
    per_class_iou: Dict[int, Optional[float]] = field(default_factory=dict)  # 含背景
    mean_iou: Optional[float] = None  # 前景类别平均
    pixel_accuracy: Optional[float] = None
    image_accuracy: Optional[float] = None
    pretext_accuracy: Optional[float] = None

    def scalar_metrics(self) -> Dict[str, Optional[float]]:
        return {
            MEAN_IOU: self.mean_iou,
            PIXEL_ACCURACY: self.pixel_accuracy,
            IMAGE_ACCURACY: self.image_accuracy,
            PRETEXT_ACCURACY: self.pretext_accuracy,
        }

    def to_rows(self, preset: str, metric_suffix: str = "") -> List[dict]:
        """
        展开为长表行，值为 None 的指标不输出

        Args:
            preset: 实验名 (compare/domain/noise/train)
            metric_suffix: 指标名后缀，例如噪声实验的 "@sigma10"
        """
        base = {"run_id": self.run_id, "preset": preset, "seed": self.seed, "step": self.step}
        rows = []
        for metric, value in self.scalar_metrics().items():
            if value is not None:
                rows.append({**base, "metric": metric + metric_suffix, "class": "", "value": value})
        for class_id, value in sorted(self.per_class_iou.items()):
            if value is not None:
                rows.append(
                    {**base, "metric": CLASS_IOU + metric_suffix, "class": class_name(class_id), "value": value}
                )
        for row in rows:
            row["config_hash"] = self.config_hash
        return rows


def metrics_frame(rows: Sequence[dict]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=METRIC_COLUMNS)


def write_metrics_csv(rows: Union[Sequence[dict], pd.DataFrame], path: Union[str, Path]) -> Path:
    """写出长表 CSV"""
    frame = rows if isinstance(rows, pd.DataFrame) else metrics_frame(rows)
    output = Path(path)
    output.parent.mkdir(parents=True, exist_ok=True)
    frame[METRIC_COLUMNS].to_csv(output, index=False)
    return output


def read_metrics_csv(path: Union[str, Path]) -> pd.DataFrame:
    """
    读回长表 CSV

    Raises:
        DataSourceError: 文件不存在或缺少列
    """
    source = Path(path)
    if not source.is_file():
        raise DataSourceError(f"指标文件不存在: {source}")
    frame = pd.read_csv(source, dtype={"class": str, "config_hash": str}, keep_default_na=False)
    missing = set(METRIC_COLUMNS) - set(frame.columns)
    if missing:
        raise DataSourceError(f"指标文件缺少列: {sorted(missing)}")
    frame["value"] = frame["value"].astype(float)
    return frame
