"""
评分模块
分割 IoU、指标报告和模型评估器
"""

from .evaluator import dump_prediction_masks, evaluate_model, pretext_accuracy
from .metrics_report import (
    METRIC_COLUMNS,
    MetricsReport,
    metrics_frame,
    read_metrics_csv,
    write_metrics_csv,
)
from .segmentation import compute_iou, confusion_matrix, iou_from_confusion, mean_iou, pixel_accuracy

__all__ = [
    "METRIC_COLUMNS",
    "MetricsReport",
    "compute_iou",
    "confusion_matrix",
    "dump_prediction_masks",
    "evaluate_model",
    "iou_from_confusion",
    "mean_iou",
    "metrics_frame",
    "pixel_accuracy",
    "pretext_accuracy",
    "read_metrics_csv",
    "write_metrics_csv",
]
