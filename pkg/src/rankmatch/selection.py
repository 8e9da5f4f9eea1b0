"""Dense-to-sparse query selection: hard NMS, top-k and confidence thresholds."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .assignment import Detection
from .geometry import boxes_to_xyxy
from .ranking import descending_order

SELECTOR_MODES = ("topk", "nms")


@dataclass(frozen=True)
class SelectorConfig:
    mode: str = "topk"
    k: int = 100
    nms_iou: float = 0.7

    def __post_init__(self):
        if self.mode not in SELECTOR_MODES:
            raise ValueError(f"selector mode must be one of {SELECTOR_MODES}, got {self.mode!r}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.nms_iou <= 1.0:
            raise ValueError(f"nms_iou must lie in [0, 1], got {self.nms_iou}")


def _scores(dets: Sequence[Detection]) -> np.ndarray:
    return np.array([d.score for d in dets], dtype=np.float64)


def nms(dets: Sequence[Detection], iou_threshold: float) -> list[int]:
    """Category-scoped hard NMS.

    Walks detections by descending score (index tie-break) and keeps one when
    its IoU with every kept detection of the same category is at most
    ``iou_threshold``. Returns kept indices in that walk order.
    """
    if not dets:
        return []
    order = descending_order(_scores(dets))
    cats = np.array([d.category for d in dets], dtype=np.int64)
    kept = kernels.nms_ordered(boxes_to_xyxy([d.box for d in dets]), cats, order, iou_threshold)
    return [int(i) for i in kept]


def topk_select(dets: Sequence[Detection], k: int) -> list[int]:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return [int(i) for i in descending_order(_scores(dets))[:k]]


def confidence_filter(dets: Sequence[Detection], threshold: float) -> list[int]:
    """Indices of detections scoring strictly above ``threshold``, in input order."""
    return [i for i, d in enumerate(dets) if d.score > threshold]


def query_select(dets: Sequence[Detection], cfg: SelectorConfig = SelectorConfig()) -> list[int]:
    if cfg.mode == "topk":
        return topk_select(dets, cfg.k)
    return nms(dets, cfg.nms_iou)[: cfg.k]
