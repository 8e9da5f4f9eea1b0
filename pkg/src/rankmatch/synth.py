"""Seeded generator of crowded, duplicate-heavy detection scenes.

Each scene draws from its own Philox stream keyed by ``(seed, scene_index)``,
so a scene's content never depends on which other scenes were generated or
in what order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assignment import Detection, GroundTruth
from .geometry import BoundingBox, iou

SCORE_MIN = 0.05
SCORE_MAX = 0.99
_PLACE_ATTEMPTS = 60
_SCENE_RESTARTS = 25


@dataclass(frozen=True)
class SynthConfig:
    n_gts: int = 6
    categories: int = 3
    gt_overlap: float = 0.0
    dups_per_gt: int = 5
    jitter_sigma: float = 0.02
    score_iou_corr: float = 0.5
    fp_rate: float = 0.0
    seed: int = 0
    # knobs below shape the draws but are not part of the crowding regime
    box_size: tuple[float, float] = (0.08, 0.2)
    base_score: tuple[float, float] = (0.3, 0.95)
    dup_score_spread: float = 0.05
    image_size: tuple[int, int] = (640, 640)

    def __post_init__(self):
        if self.n_gts < 0 or self.dups_per_gt < 0 or self.fp_rate < 0:
            raise ValueError("n_gts, dups_per_gt and fp_rate must be non-negative")
        if self.categories < 1:
            raise ValueError(f"need at least one category, got {self.categories}")
        if not 0.0 <= self.gt_overlap < 1.0:
            raise ValueError(f"gt_overlap must lie in [0, 1), got {self.gt_overlap}")
        if self.jitter_sigma < 0:
            raise ValueError(f"jitter_sigma must be non-negative, got {self.jitter_sigma}")
        if not -1.0 <= self.score_iou_corr <= 1.0:
            raise ValueError(f"score_iou_corr must lie in [-1, 1], got {self.score_iou_corr}")
        lo, hi = self.box_size
        if not 0.0 < lo <= hi < 1.0:
            raise ValueError(f"box_size must satisfy 0 < lo <= hi < 1, got {self.box_size}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class Scene:
    scene_id: str
    image_size: tuple[int, int]
    ground_truths: tuple[GroundTruth, ...]
    detections: tuple[Detection, ...]


class SceneGenerationError(ValueError):
    pass


def _stream(seed: int, scene_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, scene_index]))


def _inside(box: BoundingBox) -> bool:
    x1, y1, x2, y2 = box.xyxy()
    return x1 >= 0.0 and y1 >= 0.0 and x2 <= 1.0 and y2 <= 1.0


def _step_to_overlap(prev: BoundingBox, w: float, h: float, angle: float, target: float) -> BoundingBox | None:
    """Place a (w, h) box along ``angle`` from ``prev`` so their IoU equals ``target``."""
    dx, dy = math.cos(angle), math.sin(angle)
    half_w, half_h = (prev.w + w) / 2.0, (prev.h + h) / 2.0
    area = prev.w * prev.h + w * h
    # overlap extents shrink linearly until the boxes touch
    touch = min(half_w / abs(dx) if dx else math.inf, half_h / abs(dy) if dy else math.inf)

    def overlap(t):
        ow = min(half_w - abs(t * dx), prev.w, w)
        oh = min(half_h - abs(t * dy), prev.h, h)
        inter = max(ow, 0.0) * max(oh, 0.0)
        return inter / (area - inter)

    if overlap(0.0) < target:
        return None
    if target == 0.0:
        hi = touch
    else:
        lo, hi = 0.0, touch
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            if overlap(mid) > target:
                lo = mid
            else:
                hi = mid
    return BoundingBox(prev.cx + hi * dx, prev.cy + hi * dy, w, h)


def _place_chain(cfg: SynthConfig, rng: np.random.Generator) -> list[BoundingBox] | None:
    lo, hi = cfg.box_size
    w0, h0 = (float(x) for x in rng.uniform(lo, hi, size=2))
    boxes: list[BoundingBox] = []
    for g in range(cfg.n_gts):
        for _ in range(_PLACE_ATTEMPTS):
            w, h = w0 * float(rng.uniform(0.9, 1.1)), h0 * float(rng.uniform(0.9, 1.1))
            if not boxes:
                cand = BoundingBox(float(rng.uniform(w / 2, 1 - w / 2)), float(rng.uniform(h / 2, 1 - h / 2)), w, h)
            else:
                angle = float(rng.uniform(0.0, 2.0 * math.pi))
                cand = _step_to_overlap(boxes[-1], w, h, angle, cfg.gt_overlap)
                if cand is None:
                    continue
                if cfg.gt_overlap == 0.0:
                    gap = float(rng.uniform(0.0, 0.5 * min(w, h)))
                    cand = cand.shifted(gap * math.cos(angle), gap * math.sin(angle))
            if not _inside(cand):
                continue
            if any(iou(cand, b) > cfg.gt_overlap for b in boxes[:-1]):
                continue
            boxes.append(cand)
            break
        else:
            return None
    return boxes


def _jitter(box: BoundingBox, sigma: float, rng: np.random.Generator) -> BoundingBox:
    if sigma == 0.0:
        return box
    x1, y1, x2, y2 = np.clip(np.array(box.xyxy()) + rng.normal(0.0, sigma, size=4), 0.0, 1.0)
    x2, y2 = max(x1, x2), max(y1, y2)
    return BoundingBox.from_xyxy(float(x1), float(y1), float(x2), float(y2))


def _normal_cdf(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.vectorize(math.erf)(x / math.sqrt(2.0)))


def _cluster_scores(base: float, ious: np.ndarray, cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Scores just below ``base`` whose within-cluster order follows IoU per the corr knob."""
    spread = ious.std()
    z = (ious - ious.mean()) / spread if spread > 1e-12 else np.zeros_like(ious)
    c = cfg.score_iou_corr
    latent = c * z + math.sqrt(max(0.0, 1.0 - c * c)) * rng.normal(size=ious.size)
    scores = base - cfg.dup_score_spread * (1.0 - _normal_cdf(latent))
    return np.clip(scores, SCORE_MIN, SCORE_MAX)


def gen_scene(cfg: SynthConfig, scene_index: int) -> Scene:
    """Generate scene ``scene_index``; a pure function of ``(cfg, scene_index)``."""
    rng = _stream(cfg.seed, scene_index)
    for _ in range(_SCENE_RESTARTS):
        boxes = _place_chain(cfg, rng)
        if boxes is not None:
            break
    else:
        raise SceneGenerationError(
            f"scene {scene_index}: could not place {cfg.n_gts} boxes at overlap {cfg.gt_overlap}"
        )

    gts = [GroundTruth(b, int(rng.integers(cfg.categories))) for b in boxes]
    dets: list[Detection] = []
    for gt in gts:
        if cfg.dups_per_gt == 0:
            continue
        dup_boxes = [_jitter(gt.box, cfg.jitter_sigma, rng) for _ in range(cfg.dups_per_gt)]
        ious = np.array([iou(b, gt.box) for b in dup_boxes])
        base = float(rng.uniform(*cfg.base_score))
        scores = _cluster_scores(base, ious, cfg, rng)
        dets.extend(Detection(b, float(s), gt.category) for b, s in zip(dup_boxes, scores))

    lo, hi = cfg.box_size
    for _ in range(int(rng.poisson(cfg.fp_rate))):
        w, h = rng.uniform(lo, hi, size=2)
        box = BoundingBox(float(rng.uniform(w / 2, 1 - w / 2)), float(rng.uniform(h / 2, 1 - h / 2)),
                          float(w), float(h))
        dets.append(Detection(box, float(rng.uniform(SCORE_MIN, 0.3)), int(rng.integers(cfg.categories))))

    order = rng.permutation(len(dets))
    return Scene(
        scene_id=f"scene-{scene_index:06d}",
        image_size=tuple(cfg.image_size),
        ground_truths=tuple(gts),
        detections=tuple(dets[i] for i in order),
    )


def gen_dataset(cfg: SynthConfig, n_scenes: int) -> list[Scene]:
    if n_scenes < 1:
        raise ValueError(f"n_scenes must be >= 1, got {n_scenes}")
    return [gen_scene(cfg, i) for i in range(n_scenes)]


def with_detections(scene: Scene, dets: Sequence[Detection]) -> Scene:
    return Scene(scene.scene_id, scene.image_size, scene.ground_truths, tuple(dets))
