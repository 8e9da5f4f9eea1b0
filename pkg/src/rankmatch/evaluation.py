"""Detection metrics: TP/FP matching, 101-point AP, COCO-style mAP and ideal recall."""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .assignment import Detection, GroundTruth, optimal_pairs
from .geometry import boxes_to_xyxy
from .ranking import descending_order

COCO_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
RECALL_POINTS = 101


@dataclass
class PrMetrics:
    ap_per_threshold: dict[float, float] = field(default_factory=dict)
    ap: float = 0.0
    recall: float = 0.0
    ideal_recall: float = 0.0

    @property
    def ap50(self) -> float:
        return self.ap_per_threshold.get(0.5, 0.0)

    @property
    def ap75(self) -> float:
        return self.ap_per_threshold.get(0.75, 0.0)


def _category_iou(dets: Sequence[Detection], gts: Sequence[GroundTruth]) -> np.ndarray:
    """IoU matrix with cross-category pairs set to -1."""
    iou = kernels.iou_matrix(boxes_to_xyxy([d.box for d in dets]), boxes_to_xyxy([g.box for g in gts]))
    same = np.array([d.category for d in dets])[:, None] == np.array([g.category for g in gts])[None, :]
    return np.where(same, iou, -1.0)


def match_tp_fp(dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_thr: float) -> list[bool]:
    """Flag each detection as TP/FP; detections must already be sorted best-first.

    A detection claims the unclaimed same-category ground truth it overlaps
    most and is a TP when that overlap reaches ``iou_thr``.
    """
    if not dets:
        return []
    if not gts:
        return [False] * len(dets)
    return kernels.claim_matches(_category_iou(dets, gts), iou_thr).tolist()


def average_precision(flags: Sequence[bool], n_gt: int) -> float:
    """101-point interpolated AP of a ranked TP/FP sequence."""
    if n_gt < 0:
        raise ValueError("n_gt must be non-negative")
    f = np.asarray(flags, dtype=bool)
    if n_gt == 0:
        return 1.0 if f.size == 0 else 0.0
    if f.size == 0:
        return 0.0
    tp = np.cumsum(f, dtype=np.int64)
    fp = np.cumsum(~f, dtype=np.int64)
    precision = tp / (tp + fp)
    # best precision at or beyond each position
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    # recall >= i/100  <=>  100 * tp >= i * n_gt, compared in integers
    first = np.searchsorted(100 * tp, np.arange(RECALL_POINTS, dtype=np.int64) * n_gt, side="left")
    # Each envelope value is some tp/(k+1) with k < n; distinct such fractions
    # lie >= 1/n^2 apart, so the nearest one recovers it exactly and the AP
    # comes out correctly rounded.
    total = sum((Fraction(float(envelope[k])).limit_denominator(f.size) for k in first if k < f.size),
                Fraction(0))
    return float(total / RECALL_POINTS)


def _top_budget(dets: Sequence[Detection], max_dets: int | None) -> list[Detection]:
    order = descending_order([d.score for d in dets])
    if max_dets is not None:
        order = order[:max_dets]
    return [dets[i] for i in order]


def ap_at_threshold(dets_per_scene: Sequence[Sequence[Detection]],
                    gts_per_scene: Sequence[Sequence[GroundTruth]],
                    iou_thr: float, max_dets: int | None = 100) -> float:
    """Category-averaged AP at one IoU threshold, pooled over scenes."""
    if len(dets_per_scene) != len(gts_per_scene):
        raise ValueError("detections and ground truths must cover the same scenes")
    categories = sorted({g.category for gts in gts_per_scene for g in gts})
    if not categories:
        return 1.0 if not any(dets_per_scene) else 0.0
    per_category = []
    for cat in categories:
        pooled: list[tuple[float, int, int, bool]] = []
        n_gt = 0
        for s, (dets, gts) in enumerate(zip(dets_per_scene, gts_per_scene)):
            cat_gts = [g for g in gts if g.category == cat]
            n_gt += len(cat_gts)
            ranked = [d for d in _top_budget(dets, max_dets) if d.category == cat]
            for k, (d, flag) in enumerate(zip(ranked, match_tp_fp(ranked, cat_gts, iou_thr))):
                pooled.append((-d.score, s, k, flag))
        pooled.sort(key=lambda t: t[:3])
        per_category.append(average_precision([t[3] for t in pooled], n_gt))
    return math.fsum(per_category) / len(per_category)


def coco_map(dets_per_scene, gts_per_scene, iou_thresholds=COCO_IOU_THRESHOLDS,
             max_dets: int | None = 100) -> float:
    """Mean AP over the IoU thresholds 0.50:0.05:0.95."""
    aps = [ap_at_threshold(dets_per_scene, gts_per_scene, t, max_dets) for t in iou_thresholds]
    return math.fsum(aps) / len(aps)


def _ideal_matches(kept: Sequence[Detection], gts: Sequence[GroundTruth], iou_thr: float) -> int:
    if not kept or not gts:
        return 0
    iou = _category_iou(kept, gts)
    eligible = iou >= iou_thr
    rows = np.flatnonzero(eligible.any(axis=1))
    cols = np.flatnonzero(eligible.any(axis=0))
    if rows.size == 0:
        return 0
    sub_iou = iou[np.ix_(rows, cols)]
    sub_ok = eligible[np.ix_(rows, cols)]
    forbidden = float(min(rows.size, cols.size) + 1)
    cost = np.where(sub_ok, 1.0 - sub_iou, forbidden)
    return sum(1 for r, c in optimal_pairs(cost) if sub_ok[r, c])


def ideal_recall(kept: Sequence[Detection], gts: Sequence[GroundTruth], iou_thr: float = 0.5) -> float:
    """Fraction of ground truths coverable by a one-to-one matching with ``kept``.

    Pairs must share a category and overlap by at least ``iou_thr``.
    """
    if not gts:
        return 1.0
    return _ideal_matches(kept, gts, iou_thr) / len(gts)


def pooled_ideal_recall(kept_per_scene, gts_per_scene, iou_thr: float = 0.5) -> float:
    total = sum(len(g) for g in gts_per_scene)
    if total == 0:
        return 1.0
    hits = sum(_ideal_matches(k, g, iou_thr) for k, g in zip(kept_per_scene, gts_per_scene))
    return hits / total


def budget_recall(dets_per_scene, gts_per_scene, iou_thr: float = 0.5, max_dets: int | None = 100) -> float:
    """Pooled recall of the top ``max_dets`` detections per scene."""
    total = sum(len(g) for g in gts_per_scene)
    if total == 0:
        return 1.0
    hits = 0
    for dets, gts in zip(dets_per_scene, gts_per_scene):
        hits += sum(match_tp_fp(_top_budget(dets, max_dets), gts, iou_thr))
    return hits / total


def evaluate(dets_per_scene, gts_per_scene, max_dets: int | None = 100) -> PrMetrics:
    per = {t: ap_at_threshold(dets_per_scene, gts_per_scene, t, max_dets) for t in COCO_IOU_THRESHOLDS}
    return PrMetrics(
        ap_per_threshold=per,
        ap=math.fsum(per.values()) / len(per),
        recall=budget_recall(dets_per_scene, gts_per_scene, 0.5, max_dets),
        ideal_recall=pooled_ideal_recall(dets_per_scene, gts_per_scene, 0.5),
    )
