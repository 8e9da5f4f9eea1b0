import numpy as np
import pytest
from hypothesis import given, strategies as st

from rankmatch.assignment import Detection
from rankmatch.evaluation import ideal_recall
from rankmatch.geometry import BoundingBox, iou
from rankmatch.selection import SelectorConfig, confidence_filter, nms, query_select, topk_select
from rankmatch.synth import SynthConfig, gen_dataset, gen_scene

from builders import det


def test_nms_examples():
    a = det(0.0, 0.0, 0.4, 0.1, 0.9)
    b = det(0.1, 0.0, 0.5, 0.1, 0.8)  # IoU 0.6 with a
    assert iou(a.box, b.box) == pytest.approx(0.6)
    assert nms([a, b], 0.5) == [0]
    assert nms([b, a], 0.5) == [1]
    other = Detection(b.box, 0.8, 1)
    assert nms([a, other], 0.5) == [0, 1]
    assert nms([a, b, a], 1.0) == [0, 2, 1]


def test_nms_keeps_at_equality():
    a = det(0.0, 0.0, 0.4, 0.1, 0.9)
    b = det(0.1, 0.0, 0.5, 0.1, 0.8)
    assert nms([a, b], iou(a.box, b.box)) == [0, 1]


def test_nms_empty():
    assert nms([], 0.5) == []


@st.composite
def pools(draw):
    n = draw(st.integers(0, 25))
    out = []
    for _ in range(n):
        x, y = draw(st.floats(0, 0.8)), draw(st.floats(0, 0.8))
        w, h = draw(st.floats(0.01, 0.2)), draw(st.floats(0.01, 0.2))
        out.append(Detection(BoundingBox.from_xyxy(x, y, x + w, y + h), draw(st.floats(0, 1)), draw(st.integers(0, 2))))
    return out


@given(pools(), st.floats(0.0, 1.0))
def test_nms_survivors_pairwise_below_threshold(dets, thr):
    kept = nms(dets, thr)
    scores = [dets[i].score for i in kept]
    assert scores == sorted(scores, reverse=True)
    for a in kept:
        for b in kept:
            if a != b and dets[a].category == dets[b].category:
                assert iou(dets[a].box, dets[b].box) <= thr


@given(pools(), st.randoms(use_true_random=False), st.integers(1, 30))
def test_permutation_invariance(dets, rnd, k):
    if len({d.score for d in dets}) != len(dets):
        return
    perm = list(range(len(dets)))
    rnd.shuffle(perm)
    moved = [dets[i] for i in perm]
    assert [perm[i] for i in nms(moved, 0.5)] == nms(dets, 0.5)
    assert [perm[i] for i in topk_select(moved, k)] == topk_select(dets, k)


def test_lowering_threshold_can_increase_kept_count():
    # A overlaps the wide box B a little; B swallows C and D, which are disjoint
    h = (0.0, 0.1)
    a = det(0.0, h[0], 0.25, h[1], 0.9)
    b = det(0.15, h[0], 0.8, h[1], 0.8)
    c = det(0.3, h[0], 0.55, h[1], 0.7)
    d = det(0.55, h[0], 0.8, h[1], 0.6)
    dets = [a, b, c, d]
    assert nms(dets, 0.3) == [0, 1]
    assert nms(dets, 0.1) == [0, 2, 3]


def test_lowering_threshold_monotone_on_synthetic_scenes():
    for overlap in (0.0, 0.3, 0.6):
        for scene in gen_dataset(SynthConfig(n_gts=5, gt_overlap=overlap, seed=3), 40):
            counts = [len(nms(scene.detections, t)) for t in (0.1, 0.3, 0.5, 0.7, 0.9)]
            assert counts == sorted(counts)


def test_topk_examples():
    dets = [det(0, 0, 0.1, 0.1, s) for s in (0.2, 0.9, 0.5)]
    assert topk_select(dets, 2) == [1, 2]
    assert topk_select(dets, 10) == [1, 2, 0]
    with pytest.raises(ValueError):
        topk_select(dets, 0)


def test_topk_dominated_by_duplicates():
    scene = gen_scene(SynthConfig(n_gts=6, dups_per_gt=10, jitter_sigma=0.002, seed=5), 0)
    kept = [scene.detections[i] for i in topk_select(scene.detections, 10)]
    owners = [max(range(6), key=lambda g: iou(d.box, scene.ground_truths[g].box)) for d in kept]
    assert max(owners.count(o) for o in set(owners)) >= 5
    assert len(set(owners)) < 6


def test_confidence_filter_examples():
    dets = [det(0, 0, 0.1, 0.1, s) for s in (0.05, 0.1, 0.3)]
    assert confidence_filter(dets, 0.1) == [2]
    assert confidence_filter(dets, 1.0) == []
    zero = [det(0, 0, 0.1, 0.1, 0.0)] + dets
    assert confidence_filter(zero, 0.0) == [1, 2, 3]


def test_selector_config_validation():
    with pytest.raises(ValueError):
        SelectorConfig(mode="softnms")
    with pytest.raises(ValueError):
        SelectorConfig(k=0)
    with pytest.raises(ValueError):
        SelectorConfig(nms_iou=1.2)


def test_query_select_examples():
    rng = np.random.default_rng(0)
    dets = [det(x, 0.0, x + 0.02, 0.02, float(s)) for x, s in zip(np.linspace(0, 0.9, 40), rng.random(40))]
    assert sorted(query_select(dets, SelectorConfig("topk", 100))) == list(range(40))
    assert query_select(dets, SelectorConfig("nms", 100, 0.9)) == query_select(dets, SelectorConfig("topk", 100))
    assert len(query_select(dets, SelectorConfig("nms", 7, 0.9))) == 7


def test_nms_pool_covers_more_ground_truths_than_topk():
    cfg = SynthConfig(n_gts=8, dups_per_gt=10, jitter_sigma=0.005, seed=2)
    totals = {"nms": 0.0, "topk": 0.0}
    for scene in gen_dataset(cfg, 10):
        for mode in totals:
            pool = [scene.detections[i] for i in query_select(scene.detections, SelectorConfig(mode, 20, 0.5))]
            totals[mode] += ideal_recall(pool, scene.ground_truths)
    assert totals["nms"] > totals["topk"]
