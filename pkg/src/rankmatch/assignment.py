"""Matching costs, exact one-to-one assignment and greedy-matching labels."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .geometry import BoundingBox, boxes_to_cxcywh, boxes_to_xyxy, giou


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float
    category: int

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")
        if self.category < 0:
            raise ValueError(f"category must be non-negative, got {self.category}")


@dataclass(frozen=True)
class GroundTruth:
    box: BoundingBox
    category: int

    def __post_init__(self):
        if self.category < 0:
            raise ValueError(f"category must be non-negative, got {self.category}")


@dataclass(frozen=True)
class CostWeights:
    w_category: float = 2.0
    w_l1: float = 5.0
    w_giou: float = 2.0

    def __post_init__(self):
        ws = (self.w_category, self.w_l1, self.w_giou)
        if min(ws) < 0.0 or max(ws) == 0.0:
            raise ValueError(f"cost weights must be non-negative and not all zero, got {ws}")


@dataclass(frozen=True)
class GreedyMatchConfig:
    theta: int = 30
    iou_floor: float = 0.6
    weights: CostWeights = field(default_factory=CostWeights)

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError(f"theta must be non-negative, got {self.theta}")
        if not 0.0 <= self.iou_floor <= 1.0:
            raise ValueError(f"iou_floor must lie in [0, 1], got {self.iou_floor}")


@dataclass
class LabelAssignment:
    """Per-detection greedy-matching outcome, aligned with the detection list."""

    assigned_gt: list[Optional[int]]
    keep: list[int]
    demoted: list[bool]
    rank: list[int]

    def __len__(self):
        return len(self.keep)

    def kept_indices(self) -> list[int]:
        return [i for i, k in enumerate(self.keep) if k]


def pair_cost(d: Detection, g: GroundTruth, w: CostWeights = CostWeights()) -> float:
    category_cost = (1.0 - d.score) if d.category == g.category else (1.0 + d.score)
    l1 = 0.0
    for a, b in zip(d.box.cxcywh(), g.box.cxcywh()):
        l1 += abs(a - b)
    return w.w_category * category_cost + w.w_l1 * l1 + w.w_giou * (1.0 - giou(d.box, g.box))


def cost_matrix(dets: Sequence[Detection], gts: Sequence[GroundTruth],
                w: CostWeights = CostWeights()) -> np.ndarray:
    """``pair_cost`` for every (detection, ground truth) pair, shape (n_det, n_gt)."""
    if not dets or not gts:
        return np.zeros((len(dets), len(gts)))
    scores = np.array([d.score for d in dets])
    same = np.array([d.category for d in dets])[:, None] == np.array([g.category for g in gts])[None, :]
    category_cost = np.where(same, 1.0 - scores[:, None], 1.0 + scores[:, None])
    dc = boxes_to_cxcywh([d.box for d in dets])
    gc = boxes_to_cxcywh([g.box for g in gts])
    diff = np.abs(dc[:, None, :] - gc[None, :, :])
    l1 = ((diff[..., 0] + diff[..., 1]) + diff[..., 2]) + diff[..., 3]
    gi = kernels.giou_matrix(boxes_to_xyxy([d.box for d in dets]), boxes_to_xyxy([g.box for g in gts]))
    return w.w_category * category_cost + w.w_l1 * l1 + w.w_giou * (1.0 - gi)


def _solve(square: np.ndarray, rows: list[int], cols: list[int]):
    """Solve the sub-assignment on ``rows x cols``; returns (row->col dict, u dict, v dict)."""
    if not rows:
        return {}, {}, {}
    sub = square[np.ix_(rows, cols)]
    col_of_row, u, v = kernels.lsa_square(sub)
    sol = {r: cols[int(c)] for r, c in zip(rows, col_of_row)}
    return sol, dict(zip(rows, u.tolist())), dict(zip(cols, v.tolist()))


def _checked(cost) -> np.ndarray:
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError(f"cost must be a 2-D matrix, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix contains non-finite entries")
    return c


def _pad_square(c: np.ndarray) -> np.ndarray:
    """Zero-pad to square; dummy rows/columns stand for "unmatched"."""
    size = max(c.shape)
    square = np.zeros((size, size))
    square[: c.shape[0], : c.shape[1]] = c
    return square


def optimal_pairs(cost) -> list[tuple[int, int]]:
    """One minimum-cost assignment, without the lexicographic tie-break."""
    c = _checked(cost)
    n, m = c.shape
    if n == 0 or m == 0:
        return []
    col_of_row, _, _ = kernels.lsa_square(_pad_square(c))
    return [(i, int(col_of_row[i])) for i in range(n) if col_of_row[i] < m]


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-cost one-to-one assignment of a rectangular cost matrix.

    Returns ``min(n_rows, n_cols)`` ``(row, col)`` pairs sorted by row. Among
    optimal assignments, the lexicographically smallest pair list is chosen.
    """
    c = _checked(cost)
    n, m = c.shape
    if n == 0 or m == 0:
        return []
    size = max(n, m)
    square = _pad_square(c)
    tol = 1e-12 * size * max(1.0, float(np.max(np.abs(c))))

    rows = list(range(size))
    cols = list(range(size))
    sol, u, v = _solve(square, rows, cols)
    target = sum(square[r, sol[r]] for r in rows)

    fixed_cost = 0.0
    assignment: dict[int, int] = {}
    for i in range(n):
        current = sol[i]
        # a dummy column means "row unmatched"; any real column beats it
        limit = current if current < m else m
        for j in cols:
            if j >= limit:
                break
            if square[i, j] - u[i] - v[j] > tol:
                continue
            rest_rows = [r for r in rows if r != i]
            rest_cols = [k for k in cols if k != j]
            trial, tu, tv = _solve(square, rest_rows, rest_cols)
            total = fixed_cost + square[i, j] + sum(square[r, trial[r]] for r in rest_rows)
            if total <= target + tol:
                sol, u, v = trial, tu, tv
                sol[i] = j
                current = j
                break
        assignment[i] = current
        fixed_cost += square[i, current]
        rows.remove(i)
        cols.remove(current)
    return [(i, j) for i, j in sorted(assignment.items()) if j < m]


def one_to_one_targets(dets: Sequence[Detection], gts: Sequence[GroundTruth],
                       w: CostWeights = CostWeights()) -> list[Optional[int]]:
    """Ground-truth index per detection under optimal one-to-one matching."""
    if not dets:
        raise ValueError("one_to_one_targets needs at least one detection")
    out: list[Optional[int]] = [None] * len(dets)
    if not gts:
        return out
    for r, g in hungarian(cost_matrix(dets, gts, w)):
        out[r] = g
    return out


def greedy_match(dets: Sequence[Detection], gts: Sequence[GroundTruth],
                 ranks: Sequence[int], cfg: GreedyMatchConfig = GreedyMatchConfig()) -> LabelAssignment:
    """Cluster detections on their cheapest ground truth and keep one per cluster.

    A detection is demoted when it overlaps its ground truth below
    ``cfg.iou_floor`` while ranking inside the top ``cfg.theta``. Within a
    cluster the best-ranked detection that is not demoted and clears the
    floor is kept; clusters without such a member keep nothing.
    """
    n = len(dets)
    if len(ranks) != n:
        raise ValueError(f"expected {n} ranks, got {len(ranks)}")
    rank = [int(r) for r in ranks]
    if sorted(rank) != list(range(n)):
        raise ValueError("ranks must be a permutation of 0..n-1")
    if not gts:
        return LabelAssignment([None] * n, [0] * n, [False] * n, rank)
    if n == 0:
        return LabelAssignment([], [], [], [])

    costs = cost_matrix(dets, gts, cfg.weights)
    assigned = np.argmin(costs, axis=1)
    ious = kernels.iou_matrix(boxes_to_xyxy([d.box for d in dets]),
                              boxes_to_xyxy([g.box for g in gts]))
    overlap = ious[np.arange(n), assigned]
    rank_arr = np.asarray(rank)
    demoted = (overlap < cfg.iou_floor) & (rank_arr < cfg.theta)
    eligible = ~demoted & (overlap >= cfg.iou_floor)

    keep = [0] * n
    best: dict[int, int] = {}
    for i in np.flatnonzero(eligible):
        g = int(assigned[i])
        if g not in best or rank[i] < rank[best[g]]:
            best[g] = int(i)
    for i in best.values():
        keep[i] = 1
    return LabelAssignment([int(g) for g in assigned], keep, demoted.tolist(), rank)
