"""Pure-Python/numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and the same floating-point operation order, so both backends return
bit-identical results.
"""
import math

import numpy as np


def iou_matrix(a, b):
    """Pairwise IoU between corner-form boxes ``a`` (n, 4) and ``b`` (m, 4)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.maximum(iw, 0.0) * np.maximum(ih, 0.0)
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def giou_matrix(a, b):
    """Pairwise generalized IoU between corner-form boxes."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.maximum(iw, 0.0) * np.maximum(ih, 0.0)
    union = area_a[:, None] + area_b[None, :] - inter
    iou = np.zeros_like(inter)
    np.divide(inter, union, out=iou, where=union > 0.0)
    ew = np.maximum(a[:, None, 2], b[None, :, 2]) - np.minimum(a[:, None, 0], b[None, :, 0])
    eh = np.maximum(a[:, None, 3], b[None, :, 3]) - np.minimum(a[:, None, 1], b[None, :, 1])
    enclose = ew * eh
    penalty = np.zeros_like(inter)
    np.divide(enclose - union, enclose, out=penalty, where=enclose > 0.0)
    return np.where(enclose > 0.0, iou - penalty, 0.0)


def nms_ordered(boxes, categories, order, iou_threshold):
    """Greedy same-category suppression over ``order`` (indices, best first)."""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    cats = np.asarray(categories, dtype=np.int64)
    kept = []
    for i in order:
        i = int(i)
        x1, y1, x2, y2 = boxes[i]
        area_i = (x2 - x1) * (y2 - y1)
        survive = True
        for j in kept:
            if cats[j] != cats[i]:
                continue
            bx1, by1, bx2, by2 = boxes[j]
            iw = min(x2, bx2) - max(x1, bx1)
            ih = min(y2, by2) - max(y1, by1)
            if iw <= 0.0 or ih <= 0.0:
                continue
            inter = iw * ih
            union = area_i + (bx2 - bx1) * (by2 - by1) - inter
            if union > 0.0 and inter / union > iou_threshold:
                survive = False
                break
        if survive:
            kept.append(i)
    return np.asarray(kept, dtype=np.int64)


def lsa_square(cost):
    """Minimum-cost perfect matching on a square matrix.

    Shortest-augmenting-path Hungarian method with row/column potentials.
    Returns ``(col_of_row, u, v)`` where ``u``/``v`` are the dual potentials;
    reduced costs ``cost[i, j] - u[i] - v[j]`` are non-negative and vanish on
    the returned assignment.
    """
    c = np.asarray(cost, dtype=np.float64)
    n = c.shape[0]
    rows = c.tolist()
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = rows[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row, np.asarray(u[1:]), np.asarray(v[1:])


def claim_matches(iou, iou_threshold):
    """Sequentially claim ground truths for detections in row order.

    ``iou`` is (n_det, n_gt) with negative entries marking forbidden pairs
    (category mismatch). Each row claims the unclaimed column of maximal IoU
    (first index on ties) when that IoU reaches the threshold.
    """
    iou = np.asarray(iou, dtype=np.float64)
    n_det, n_gt = iou.shape
    claimed = [False] * n_gt
    flags = np.zeros(n_det, dtype=bool)
    for i in range(n_det):
        best = -1
        best_iou = -1.0
        row = iou[i]
        for j in range(n_gt):
            if claimed[j] or row[j] < 0.0:
                continue
            if row[j] > best_iou:
                best_iou = row[j]
                best = j
        if best >= 0 and best_iou >= iou_threshold:
            claimed[best] = True
            flags[i] = True
    return flags
