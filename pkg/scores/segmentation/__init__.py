"""
分割评分模块
"""

from .segmentation_scores import compute_iou, confusion_matrix, iou_from_confusion, mean_iou, pixel_accuracy

__all__ = ["compute_iou", "confusion_matrix", "iou_from_confusion", "mean_iou", "pixel_accuracy"]
