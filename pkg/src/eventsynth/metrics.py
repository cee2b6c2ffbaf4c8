"""Segmentation scores and event count-map distances."""

from __future__ import annotations

import numpy as np

from .core import EventStream, ValidationError

IGNORE = 255


def _valid_pairs(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValidationError(f"label maps differ in shape: {pred.shape} vs {gt.shape}")
    keep = gt != IGNORE
    if not keep.any():
        raise ValidationError("every ground-truth pixel is IGNORE")
    return pred[keep].astype(np.int64), gt[keep].astype(np.int64)


def confusion_matrix(pred, gt, num_classes: int) -> np.ndarray:
    """``cm[g, p]`` counts pixels with ground truth g predicted as p (IGNORE skipped).

    The extra last column collects predictions outside ``[0, num_classes)``.
    """
    p, g = _valid_pairs(pred, gt)
    if (g >= num_classes).any() or (g < 0).any():
        raise ValidationError(f"ground-truth class id outside [0, {num_classes})")
    # predictions of IGNORE or out-of-range ids count as wrong for every class
    p = np.where((p >= 0) & (p < num_classes), p, num_classes)
    cm = np.bincount(g * (num_classes + 1) + p, minlength=num_classes * (num_classes + 1))
    return cm.reshape(num_classes, num_classes + 1)


def accuracy(pred, gt) -> float:
    p, g = _valid_pairs(pred, gt)
    return float(np.mean(p == g))


def iou_per_class(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-class IoU and a mask of classes present in gt or prediction."""
    k = cm.shape[0]
    inter = np.diag(cm[:, :k]).astype(np.float64)
    gt_total = cm.sum(axis=1)
    pred_total = cm[:, :k].sum(axis=0)
    union = gt_total + pred_total - inter
    iou = inter / np.maximum(union, 1)
    return iou, union > 0


def miou_from_confusion(cm: np.ndarray, exclude_absent: bool = True) -> float:
    iou, present = iou_per_class(cm)
    if exclude_absent:
        return float(iou[present].mean()) if present.any() else 0.0
    return float(iou.mean())


def miou(pred, gt, num_classes: int, exclude_absent: bool = True) -> float:
    """Mean intersection-over-union.

    By default classes absent from both maps are left out of the mean; with
    ``exclude_absent=False`` they count as IoU 0.
    """
    return miou_from_confusion(confusion_matrix(pred, gt, num_classes), exclude_absent)


def count_maps(stream: EventStream, width: int, height: int) -> np.ndarray:
    """(2, H, W) per-pixel counts, positive polarity first."""
    if (stream.width, stream.height) != (width, height):
        raise ValidationError("stream geometry does not match")
    maps = np.zeros((2, height, width), dtype=np.int64)
    np.add.at(maps, ((stream.p < 0).astype(np.int64), stream.y.astype(np.int64),
                     stream.x.astype(np.int64)), 1)
    return maps


def event_count_distance(a: EventStream, b: EventStream, width: int, height: int,
                         symmetric: bool = False) -> float:
    """L1 distance between count maps, normalized by the event count of ``a``.

    ``symmetric=True`` normalizes by the combined count of both streams instead.
    """
    if len(a) == 0:
        raise ValidationError("reference stream is empty")
    diff = np.abs(count_maps(a, width, height) - count_maps(b, width, height)).sum()
    norm = len(a) + len(b) if symmetric else len(a)
    return float(diff) / norm
