"""Greedy-matching label assignment and rank-aware query filtering for detection pools."""
from .assignment import (CostWeights, Detection, GreedyMatchConfig, GroundTruth, LabelAssignment,
                         greedy_match, hungarian, one_to_one_targets, pair_cost)
from .evaluation import PrMetrics, average_precision, coco_map, ideal_recall, match_tp_fp
from .filtermodel import (FilterConfig, FilterParams, apply_filter, featurize, filter_backward,
                          filter_forward, focal_loss, load_checkpoint, save_checkpoint, train_filter)
from .geometry import BoundingBox, giou, iou
from .harness import PipelineConfig, run_pipeline, sweep
from .ranking import RankEmbedding, rank_embed, rank_indices
from .selection import SelectorConfig, confidence_filter, nms, query_select, topk_select
from .synth import Scene, SynthConfig, gen_dataset, gen_scene

__version__ = "0.1.0"

__all__ = [
    "BoundingBox", "iou", "giou",
    "Detection", "GroundTruth", "CostWeights", "GreedyMatchConfig", "LabelAssignment",
    "pair_cost", "hungarian", "one_to_one_targets", "greedy_match",
    "RankEmbedding", "rank_indices", "rank_embed",
    "SelectorConfig", "nms", "topk_select", "confidence_filter", "query_select",
    "FilterConfig", "FilterParams", "featurize", "filter_forward", "focal_loss", "filter_backward",
    "train_filter", "apply_filter", "save_checkpoint", "load_checkpoint",
    "PrMetrics", "match_tp_fp", "average_precision", "coco_map", "ideal_recall",
    "SynthConfig", "Scene", "gen_scene", "gen_dataset",
    "PipelineConfig", "run_pipeline", "sweep",
]
