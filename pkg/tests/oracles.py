"""Slow, obviously-correct reference implementations used only by the tests."""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

RASTER = 1000


def raster_iou(a, b, n=RASTER):
    """IoU of two corner-form boxes estimated on an n x n grid of pixel centers over [0,1]^2."""
    centers = (np.arange(n) + 0.5) / n

    def mask(box):
        x1, y1, x2, y2 = box
        mx = (centers >= x1) & (centers < x2)
        my = (centers >= y1) & (centers < y2)
        return np.outer(my, mx)

    ma, mb = mask(a), mask(b)
    union = np.count_nonzero(ma | mb)
    return np.count_nonzero(ma & mb) / union if union else 0.0


def exact_iou(a, b):
    """IoU of two corner-form boxes in exact rational arithmetic, rounded once."""
    a, b = [Fraction(float(v)) for v in a], [Fraction(float(v)) for v in b]
    iw = max(Fraction(0), min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(Fraction(0), min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return float(inter / union) if union else 0.0


def brute_assignment_cost(cost):
    """Minimum total cost over every injective map of the smaller side into the larger.

    Totals are exactly rounded sums, so the result does not depend on pair order.
    """
    c = np.asarray(cost, dtype=float)
    n, m = c.shape
    if n == 0 or m == 0:
        return 0.0
    if n <= m:
        return min(math.fsum(c[i, p[i]] for i in range(n)) for p in itertools.permutations(range(m), n))
    return min(math.fsum(c[p[j], j] for j in range(m)) for p in itertools.permutations(range(n), m))


def _injective_pair_lists(n, m):
    if n <= m:
        for p in itertools.permutations(range(m), n):
            yield [(i, p[i]) for i in range(n)]
    else:
        for p in itertools.permutations(range(n), m):
            yield sorted((p[j], j) for j in range(m))


def brute_assignment_lex(cost):
    """Lexicographically smallest pair list among the exact-minimum assignments."""
    c = np.asarray(cost, dtype=float)
    n, m = c.shape
    if n == 0 or m == 0:
        return []
    scored = [(sum(c[i, j] for i, j in pairs), pairs) for pairs in _injective_pair_lists(n, m)]
    return min(scored)[1]


def reference_ap(flags, n_gt):
    """101-point interpolated AP in exact rational arithmetic."""
    if n_gt == 0:
        return Fraction(1) if not flags else Fraction(0)
    tp = fp = 0
    curve = []
    for f in flags:
        tp += bool(f)
        fp += not f
        curve.append((Fraction(tp, n_gt), Fraction(tp, tp + fp)))
    total = Fraction(0)
    for i in range(101):
        r = Fraction(i, 100)
        total += max((p for rec, p in curve if rec >= r), default=Fraction(0))
    return total / 101


def brute_claims(iou, thr):
    """TP/FP flags by literally walking detections in order and claiming GTs."""
    claimed = set()
    flags = []
    for row in iou:
        best, best_j = -1.0, None
        for j, v in enumerate(row):
            if j in claimed:
                continue
            if v > best:
                best, best_j = v, j
        if best_j is not None and best >= thr:
            claimed.add(best_j)
            flags.append(True)
        else:
            flags.append(False)
    return flags


def brute_max_matching(eligible):
    """Size of a maximum bipartite matching by exhaustive search."""
    e = np.asarray(eligible, dtype=bool)
    n, m = e.shape
    for size in range(min(n, m), 0, -1):
        for rs in itertools.combinations(range(n), size):
            for cs in itertools.permutations(range(m), size):
                if all(e[r, c] for r, c in zip(rs, cs)):
                    return size
    return 0


def numeric_gradient(f, arr, step=1e-5):
    """Central finite differences of scalar ``f()`` w.r.t. every entry of ``arr`` (mutated in place)."""
    grad = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + step
        up = f()
        flat[i] = old - step
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2.0 * step)
    return grad


def relative_error(analytic, numeric, floor=1e-6):
    """Entrywise |a - n| / max(|a|, |n|, floor), maximized over entries."""
    a, n = np.asarray(analytic, dtype=float), np.asarray(numeric, dtype=float)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))
