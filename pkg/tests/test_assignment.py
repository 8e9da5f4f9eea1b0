import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rankmatch.assignment import (CostWeights, Detection, GreedyMatchConfig, GroundTruth, cost_matrix,
                                  greedy_match, hungarian, one_to_one_targets, optimal_pairs, pair_cost)
from rankmatch.geometry import BoundingBox, iou
from rankmatch.ranking import rank_indices

from builders import box, det, det_with_iou, gt
from oracles import brute_assignment_cost, brute_assignment_lex

W = CostWeights()


# -- pair_cost -------------------------------------------------------------------

def test_pair_cost_examples():
    b = box(0.1, 0.1, 0.4, 0.5)
    assert pair_cost(Detection(b, 1.0, 2), GroundTruth(b, 2), W) == 0.0
    assert pair_cost(Detection(b, 0.5, 2), GroundTruth(b, 2), W) == pytest.approx(1.0, abs=1e-15)
    assert pair_cost(Detection(b, 0.5, 1), GroundTruth(b, 2), CostWeights(1, 0, 0)) == pytest.approx(1.5)


def test_pair_cost_l1_and_giou_terms():
    d = det(0.0, 0.0, 0.2, 0.2, score=1.0)
    g = gt(0.1, 0.0, 0.3, 0.2)
    # centers differ by 0.1 in x; IoU 1/3, enclosure equals union
    assert pair_cost(d, g, CostWeights(0, 1, 0)) == pytest.approx(0.1, abs=1e-15)
    assert pair_cost(d, g, CostWeights(0, 0, 1)) == pytest.approx(2 / 3, abs=1e-12)


def test_cost_matrix_matches_pair_cost():
    rng = np.random.default_rng(0)
    dets = [Detection(BoundingBox(*rng.uniform(0.2, 0.4, 4)), float(rng.random()), int(rng.integers(2)))
            for _ in range(6)]
    gts = [GroundTruth(BoundingBox(*rng.uniform(0.2, 0.4, 4)), int(rng.integers(2))) for _ in range(4)]
    m = cost_matrix(dets, gts, W)
    for i, j in itertools.product(range(6), range(4)):
        assert m[i, j] == pytest.approx(pair_cost(dets[i], gts[j], W), abs=1e-12)


def test_cost_weights_validation():
    with pytest.raises(ValueError):
        CostWeights(0, 0, 0)
    with pytest.raises(ValueError):
        CostWeights(-1, 1, 1)
    with pytest.raises(ValueError):
        GreedyMatchConfig(iou_floor=1.5)
    with pytest.raises(ValueError):
        Detection(box(0, 0, 1, 1), 1.2, 0)


# -- hungarian -------------------------------------------------------------------

def test_hungarian_small_example():
    pairs = hungarian([[1, 2], [2, 4]])
    assert pairs == [(0, 1), (1, 0)]


def test_hungarian_identity():
    c = np.full((5, 5), 100.0)
    np.fill_diagonal(c, 0.0)
    assert hungarian(c) == [(i, i) for i in range(5)]


def test_hungarian_rectangular_and_empty():
    assert hungarian(np.zeros((0, 3))) == []
    assert hungarian(np.zeros((3, 5))) == [(0, 0), (1, 1), (2, 2)]
    assert hungarian(np.zeros((5, 3))) == [(0, 0), (1, 1), (2, 2)]
    assert len(hungarian(np.random.default_rng(0).random((4, 7)))) == 4


def test_hungarian_rejects_non_finite():
    with pytest.raises(ValueError):
        hungarian([[1.0, np.nan], [0.0, 1.0]])
    with pytest.raises(ValueError):
        hungarian([[1.0, np.inf], [0.0, 1.0]])
    with pytest.raises(ValueError):
        hungarian([1.0, 2.0])


def test_hungarian_random_6x6_against_enumeration():
    rng = np.random.default_rng(42)
    for _ in range(20):
        c = rng.normal(size=(6, 6))
        total = sum(c[i, j] for i, j in hungarian(c))
        assert total == pytest.approx(brute_assignment_cost(c), abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_hungarian_tie_break_is_lexicographic(seed, backend):
    # integer costs make ties common and totals exact
    rng = np.random.default_rng(seed)
    for _ in range(60):
        n, m = rng.integers(1, 6, size=2)
        c = rng.integers(0, 3, size=(n, m)).astype(float)
        assert hungarian(c) == brute_assignment_lex(c)


@given(st.integers(1, 5), st.integers(1, 5), st.data())
def test_hungarian_optimal_property(n, m, data):
    vals = data.draw(st.lists(st.floats(-50, 50, allow_nan=False), min_size=n * m, max_size=n * m))
    c = np.array(vals).reshape(n, m)
    pairs = hungarian(c)
    assert len(pairs) == min(n, m)
    assert len({j for _, j in pairs}) == len(pairs)
    assert sum(c[i, j] for i, j in pairs) <= brute_assignment_cost(c) + 1e-9
    assert sum(c[i, j] for i, j in optimal_pairs(c)) == pytest.approx(brute_assignment_cost(c), abs=1e-9)


# -- one_to_one_targets ------------------------------------------------------------

def test_one_to_one_examples():
    g = [gt(0.1, 0.1, 0.3, 0.3)]
    assert one_to_one_targets([det(0.1, 0.1, 0.3, 0.3, 0.9)], g) == [0]
    twins = [det(0.1, 0.1, 0.3, 0.3, 0.9), det(0.1, 0.1, 0.3, 0.3, 0.9)]
    out = one_to_one_targets(twins, g)
    assert sorted(out, key=lambda v: v is None) == [0, None]


def test_one_to_one_three_dets_two_gts_by_enumeration():
    gts = [gt(0.1, 0.1, 0.3, 0.3), gt(0.25, 0.1, 0.45, 0.3)]
    dets = [det(0.12, 0.1, 0.32, 0.3, 0.8), det(0.2, 0.1, 0.4, 0.3, 0.7), det(0.26, 0.12, 0.44, 0.3, 0.6)]
    c = cost_matrix(dets, gts)
    out = one_to_one_targets(dets, gts)
    total = sum(c[i, g] for i, g in enumerate(out) if g is not None)
    assert total == pytest.approx(brute_assignment_cost(c), abs=1e-12)
    assert sum(g is not None for g in out) == 2


def test_one_to_one_errors_and_empty_gts():
    with pytest.raises(ValueError):
        one_to_one_targets([], [gt(0, 0, 1, 1)])
    assert one_to_one_targets([det(0, 0, 1, 1)], []) == [None]


# -- greedy_match ------------------------------------------------------------------

def _greedy(dets, gts, cfg=GreedyMatchConfig()):
    return greedy_match(dets, gts, rank_indices([d.score for d in dets]), cfg)


def test_greedy_two_clusters():
    gts = [gt(0.1, 0.1, 0.3, 0.3), gt(0.6, 0.6, 0.8, 0.8)]
    dets = [det(0.1, 0.1, 0.3, 0.31, 0.7), det(0.61, 0.6, 0.8, 0.8, 0.4),
            det(0.1, 0.1, 0.31, 0.3, 0.8), det(0.6, 0.6, 0.8, 0.81, 0.5)]
    labels = _greedy(dets, gts)
    assert labels.assigned_gt == [0, 1, 0, 1]
    assert labels.keep == [0, 0, 1, 1]


def _confident_but_misplaced():
    g = gt(0.2, 0.2, 0.6, 0.6)
    a = det_with_iou(g, 0.3, 0.9)
    b = det_with_iou(g, 0.9, 0.6)
    assert iou(a.box, g.box) == pytest.approx(0.3)
    assert iou(b.box, g.box) == pytest.approx(0.9)
    return [a, b], [g]


@pytest.mark.parametrize("theta", [1, 2, 30])
def test_theta_demotes_poorly_localized_top_box(theta):
    dets, gts = _confident_but_misplaced()
    labels = _greedy(dets, gts, GreedyMatchConfig(theta=theta, iou_floor=0.6))
    assert labels.demoted == [True, False]
    assert labels.keep == [0, 1]


def test_without_floor_keeps_top_box():
    dets, gts = _confident_but_misplaced()
    labels = _greedy(dets, gts, GreedyMatchConfig(theta=0, iou_floor=0.0))
    assert labels.demoted == [False, False]
    assert labels.keep == [1, 0]


def test_floor_alone_rules_out_top_box():
    # theta 0 never demotes, yet the floor alone still rules out the top box
    dets, gts = _confident_but_misplaced()
    labels = _greedy(dets, gts, GreedyMatchConfig(theta=0, iou_floor=0.6))
    assert labels.demoted == [False, False]
    assert labels.keep == [0, 1]


def test_abandoned_cluster():
    g = gt(0.2, 0.2, 0.6, 0.6)
    dets = [det_with_iou(g, 0.3, 0.9), det_with_iou(g, 0.4, 0.5)]
    labels = _greedy(dets, [g])
    assert labels.keep == [0, 0]
    assert labels.assigned_gt == [0, 0]


@pytest.mark.parametrize("k", [1, 2, 7, 40])
def test_identical_duplicates_one_keep(k):
    g = gt(0.3, 0.3, 0.5, 0.6)
    dets = [det(0.3, 0.3, 0.5, 0.6, 0.7)] * k
    labels = _greedy(dets, [g])
    assert labels.keep == [1] + [0] * (k - 1)
    assert labels.rank == list(range(k))


def test_greedy_empty_inputs():
    labels = _greedy([det(0, 0, 1, 1)], [])
    assert labels.keep == [0] and labels.assigned_gt == [None] and labels.demoted == [False]
    assert len(greedy_match([], [gt(0, 0, 1, 1)], [])) == 0


def test_greedy_rejects_bad_ranks():
    dets = [det(0, 0, 1, 1), det(0, 0, 1, 1)]
    with pytest.raises(ValueError):
        greedy_match(dets, [gt(0, 0, 1, 1)], [0, 0])
    with pytest.raises(ValueError):
        greedy_match(dets, [gt(0, 0, 1, 1)], [0])


coord = st.floats(0.0, 0.9, allow_nan=False)


@st.composite
def scenes(draw):
    def a_box():
        x, y = draw(coord), draw(coord)
        return BoundingBox.from_xyxy(x, y, x + draw(st.floats(0.01, 0.1)), y + draw(st.floats(0.01, 0.1)))
    gts = [GroundTruth(a_box(), draw(st.integers(0, 2))) for _ in range(draw(st.integers(1, 5)))]
    dets = []
    for _ in range(draw(st.integers(1, 12))):
        if draw(st.booleans()):
            g = gts[draw(st.integers(0, len(gts) - 1))].box
            b = g.shifted(draw(st.floats(-0.02, 0.02)), draw(st.floats(-0.02, 0.02)))
        else:
            b = a_box()
        dets.append(Detection(b, draw(st.floats(0.0, 1.0)), draw(st.integers(0, 2))))
    return dets, gts


@given(scenes(), st.integers(0, 12), st.floats(0.0, 1.0))
def test_greedy_invariants(scene, theta, floor):
    dets, gts = scene
    labels = _greedy(dets, gts, GreedyMatchConfig(theta=theta, iou_floor=floor))
    kept = labels.kept_indices()
    owners = [labels.assigned_gt[i] for i in kept]
    assert len(owners) == len(set(owners)) <= min(len(dets), len(gts))
    for i in kept:
        assert not labels.demoted[i]
        assert iou(dets[i].box, gts[labels.assigned_gt[i]].box) >= floor


@given(scenes(), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_raising_floor_never_adds_keeps(scene, f1, f2):
    dets, gts = scene
    lo, hi = sorted((f1, f2))
    n_lo = sum(_greedy(dets, gts, GreedyMatchConfig(iou_floor=lo)).keep)
    n_hi = sum(_greedy(dets, gts, GreedyMatchConfig(iou_floor=hi)).keep)
    assert n_hi <= n_lo


@given(scenes(), st.randoms(use_true_random=False))
def test_permutation_equivariance(scene, rnd):
    dets, gts = scene
    scores = [d.score for d in dets]
    if len(set(scores)) != len(scores):
        return
    perm = list(range(len(dets)))
    rnd.shuffle(perm)
    base = _greedy(dets, gts)
    moved = _greedy([dets[i] for i in perm], gts)
    assert moved.keep == [base.keep[i] for i in perm]
    assert moved.assigned_gt == [base.assigned_gt[i] for i in perm]
    assert moved.demoted == [base.demoted[i] for i in perm]
    assert moved.rank == [base.rank[i] for i in perm]


def test_one_to_one_instability_witness():
    g = [gt(0.2, 0.2, 0.5, 0.5)]
    b = box(0.21, 0.2, 0.5, 0.5)
    twins = [Detection(b, 0.7, 0), Detection(b, 0.7, 0)]
    c = cost_matrix(twins, g)
    assert abs(c[0, 0] - c[1, 0]) < 1e-12
    assert one_to_one_targets(twins, g) == [0, None]

    for bumped, winner in ((1, 1), (0, 0)):
        dets = list(twins)
        dets[bumped] = Detection(b, 0.7 + 1e-6, 0)
        assert one_to_one_targets(dets, g)[winner] == 0
        labels = _greedy(dets, g)
        assert labels.keep[labels.rank.index(0)] == 1
    lowered = [Detection(b, 0.7 - 1e-6, 0), twins[1]]
    assert one_to_one_targets(lowered, g) == [None, 0]
    labels = _greedy(lowered, g)
    assert labels.keep == [0, 1]
