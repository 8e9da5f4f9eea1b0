"""Axis-aligned boxes in normalized center-size form and their overlap metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels


@dataclass(frozen=True)
class BoundingBox:
    """Box with center ``(cx, cy)`` and size ``(w, h)``, normalized to the image."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w >= 0.0 and self.h >= 0.0):
            raise ValueError(f"box sides must be non-negative, got w={self.w}, h={self.h}")

    @classmethod
    def from_xyxy(cls, x1: float, y1: float, x2: float, y2: float) -> "BoundingBox":
        return cls((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1)

    def xyxy(self) -> tuple[float, float, float, float]:
        hw, hh = self.w / 2.0, self.h / 2.0
        return (self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh)

    def cxcywh(self) -> tuple[float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h)

    @property
    def area(self) -> float:
        return self.w * self.h

    def shifted(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.cx + dx, self.cy + dy, self.w, self.h)


def _inter_union_enclose(a: BoundingBox, b: BoundingBox):
    ax1, ay1, ax2, ay2 = a.xyxy()
    bx1, by1, bx2, by2 = b.xyxy()
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = area_a + area_b - inter
    enclose = (max(ax2, bx2) - min(ax1, bx1)) * (max(ay2, by2) - min(ay1, by1))
    return inter, union, enclose


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 when the union is empty."""
    inter, union, _ = _inter_union_enclose(a, b)
    return inter / union if union > 0.0 else 0.0


def giou(a: BoundingBox, b: BoundingBox) -> float:
    """Generalized IoU: IoU minus the empty fraction of the enclosing box."""
    inter, union, enclose = _inter_union_enclose(a, b)
    if enclose <= 0.0:
        return 0.0
    value = inter / union if union > 0.0 else 0.0
    return value - (enclose - union) / enclose


def boxes_to_xyxy(boxes: Sequence[BoundingBox]) -> np.ndarray:
    """Stack boxes into an (n, 4) corner-form array."""
    if len(boxes) == 0:
        return np.zeros((0, 4))
    return np.array([b.xyxy() for b in boxes], dtype=np.float64)


def boxes_to_cxcywh(boxes: Sequence[BoundingBox]) -> np.ndarray:
    if len(boxes) == 0:
        return np.zeros((0, 4))
    return np.array([b.cxcywh() for b in boxes], dtype=np.float64)


def iou_matrix(a: Sequence[BoundingBox], b: Sequence[BoundingBox]) -> np.ndarray:
    return kernels.iou_matrix(boxes_to_xyxy(a), boxes_to_xyxy(b))


def giou_matrix(a: Sequence[BoundingBox], b: Sequence[BoundingBox]) -> np.ndarray:
    return kernels.giou_matrix(boxes_to_xyxy(a), boxes_to_xyxy(b))

