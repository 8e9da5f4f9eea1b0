"""Pipeline orchestration, file formats and ablation sweeps.

Scene files are JSON lines; configs are one JSON document whose keys mirror
:class:`PipelineConfig`; metrics are CSV with a fixed column order.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .assignment import CostWeights, Detection, GreedyMatchConfig, GroundTruth, LabelAssignment, greedy_match
from .evaluation import PrMetrics, budget_recall, coco_map, evaluate, pooled_ideal_recall
from .filtermodel import FilterConfig, FilterParams, apply_filter
from .geometry import BoundingBox
from .ranking import rank_indices
from .selection import SelectorConfig, nms, query_select, topk_select
from .synth import Scene, SynthConfig, gen_dataset, with_detections

log = logging.getLogger(__name__)

RUN_COLUMNS = ("scene_count", "ap", "ap50", "ap75", "recall", "ideal_recall")
SWEEP_COLUMNS = ("axis", "value", "nms_ap", "nms_recall", "nms_ideal_recall",
                 "greedy_ap", "greedy_recall", "greedy_ideal_recall", "topk_ideal_recall")
SWEEP_AXES = ("nms_iou", "theta", "dups_per_gt", "gt_overlap")


class InputError(ValueError):
    """Malformed or inconsistent user input (files, configs, flags)."""


class InvariantViolation(RuntimeError):
    """An internal postcondition failed."""


# -- config -------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    selector: SelectorConfig = field(default_factory=SelectorConfig)
    greedy: GreedyMatchConfig = field(default_factory=GreedyMatchConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    scenes_path: str | None = None
    checkpoint_path: str | None = None
    output_path: str | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise InputError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise InputError(f"{where}: unknown field(s) {unknown}")
    kwargs = {}
    for key, value in data.items():
        if key == "weights" and cls is GreedyMatchConfig:
            value = _build(CostWeights, value, f"{where}.weights")
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}: {exc}") from exc


_SECTIONS = {"selector": SelectorConfig, "greedy": GreedyMatchConfig,
             "filter": FilterConfig, "synth": SynthConfig}


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise InputError("config must be a JSON object")
    unknown = sorted(set(data) - {f.name for f in dataclasses.fields(PipelineConfig)})
    if unknown:
        raise InputError(f"config: unknown field(s) {unknown}")
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = _build(_SECTIONS[key], value, key) if key in _SECTIONS else value
    return PipelineConfig(**kwargs)


def apply_overrides(data: dict, overrides: Iterable[str]) -> dict:
    """Apply ``section.field=value`` assignments; values parse as JSON when possible."""
    out = json.loads(json.dumps(data))
    for item in overrides:
        if "=" not in item:
            raise InputError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise InputError(f"override {item!r}: {part} is not a section")
        node[parts[-1]] = value
    return out


def load_config(path: str | None, overrides: Iterable[str] = ()) -> PipelineConfig:
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise InputError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return config_from_dict(apply_overrides(data, overrides))


# -- scene files ----------------------------------------------------------------

def scene_to_json(scene: Scene) -> dict:
    return {
        "scene_id": scene.scene_id,
        "image_size": list(scene.image_size),
        "ground_truths": [{"box": list(g.box.cxcywh()), "category": g.category} for g in scene.ground_truths],
        "detections": [{"box": list(d.box.cxcywh()), "score": d.score, "category": d.category}
                       for d in scene.detections],
    }


def _box(raw, where) -> BoundingBox:
    if not (isinstance(raw, list) and len(raw) == 4 and all(isinstance(v, (int, float)) for v in raw)):
        raise InputError(f"{where}: box must be four numbers [cx, cy, w, h]")
    return BoundingBox(*(float(v) for v in raw))


def scene_from_json(obj: Any, where: str = "scene") -> Scene:
    try:
        sid = obj["scene_id"]
        size = tuple(int(v) for v in obj["image_size"])
        gts = tuple(GroundTruth(_box(g["box"], f"{where} ground truth {i}"), int(g["category"]))
                    for i, g in enumerate(obj["ground_truths"]))
        dets = tuple(Detection(_box(d["box"], f"{where} detection {i}"), float(d["score"]), int(d["category"]))
                     for i, d in enumerate(obj["detections"]))
    except InputError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{where}: malformed scene ({type(exc).__name__}: {exc})") from exc
    if not isinstance(sid, str) or len(size) != 2:
        raise InputError(f"{where}: scene_id must be a string and image_size two integers")
    return Scene(sid, size, gts, dets)


def write_scenes(scenes: Iterable[Scene], path) -> None:
    with open(path, "w") as fh:
        for scene in scenes:
            fh.write(json.dumps(scene_to_json(scene)) + "\n")


def read_scenes(path) -> list[Scene]:
    try:
        text = Path(path).read_text()
    except FileNotFoundError as exc:
        raise InputError(f"scene file not found: {path}") from exc
    scenes = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
        scenes.append(scene_from_json(obj, f"{path}:{lineno}"))
    return scenes


def labels_to_json(scene_id: str, pool: Sequence[int], labels: LabelAssignment) -> dict:
    return {"scene_id": scene_id, "pool": list(pool), "assigned_gt": labels.assigned_gt,
            "keep": labels.keep, "demoted": labels.demoted, "rank": labels.rank}


# -- pipeline -------------------------------------------------------------------

def select_pool(scene: Scene, selector: SelectorConfig) -> tuple[list[int], Scene]:
    """Sparse query pool of a scene: selected indices and the restricted scene."""
    idx = query_select(scene.detections, selector)
    return idx, with_detections(scene, [scene.detections[i] for i in idx])


def check_labels(labels: LabelAssignment, scene: Scene, cfg: GreedyMatchConfig) -> None:
    kept = labels.kept_indices()
    owners = [labels.assigned_gt[i] for i in kept]
    if len(set(owners)) != len(owners) or len(kept) > len(scene.ground_truths):
        raise InvariantViolation(f"{scene.scene_id}: greedy matching kept two detections for one ground truth")
    for i in kept:
        if labels.demoted[i] or labels.assigned_gt[i] is None:
            raise InvariantViolation(f"{scene.scene_id}: kept detection {i} is demoted or unassigned")


def label_pool(pool: Scene, cfg: GreedyMatchConfig) -> LabelAssignment:
    ranks = rank_indices([d.score for d in pool.detections])
    labels = greedy_match(pool.detections, pool.ground_truths, ranks, cfg)
    check_labels(labels, pool, cfg)
    return labels


def training_set(scenes: Sequence[Scene], cfg: PipelineConfig) -> list[tuple[Scene, LabelAssignment]]:
    out = []
    for scene in scenes:
        _, pool = select_pool(scene, cfg.selector)
        out.append((pool, label_pool(pool, cfg.greedy)))
    return out


def check_dims(params: FilterParams, cfg: FilterConfig) -> None:
    expected = (cfg.max_rank, cfg.embed_dim, cfg.d, cfg.h)
    got = (params.rank_table.shape[0], params.rank_table.shape[1], params.d, params.h)
    if expected != got:
        raise InputError(
            f"checkpoint dims (max_rank, embed_dim, d, h)={got} do not match config dims {expected}"
        )


@dataclass
class PipelineResult:
    detections: list[list[Detection]]
    metrics: PrMetrics | None
    scene_ids: list[str]


def run_pipeline(scenes: Sequence[Scene], params: FilterParams, cfg: PipelineConfig) -> PipelineResult:
    """select -> rank -> featurize -> filter -> gate, then evaluate."""
    check_dims(params, cfg.filter)
    finals = []
    for scene in scenes:
        _, pool = select_pool(scene, cfg.selector)
        ranks = rank_indices([d.score for d in pool.detections])
        finals.append(apply_filter(params, pool.detections, ranks, cfg.filter))
    metrics = evaluate(finals, [s.ground_truths for s in scenes]) if scenes else None
    return PipelineResult(finals, metrics, [s.scene_id for s in scenes])


# -- sweeps -----------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _sweep_cfg(base: PipelineConfig, axis: str, value) -> PipelineConfig:
    if axis == "nms_iou":
        return dataclasses.replace(base, selector=dataclasses.replace(base.selector, nms_iou=float(value)))
    if axis == "theta":
        return dataclasses.replace(base, greedy=dataclasses.replace(base.greedy, theta=int(value)))
    if axis == "dups_per_gt":
        return dataclasses.replace(base, synth=dataclasses.replace(base.synth, dups_per_gt=int(value)))
    return dataclasses.replace(base, synth=dataclasses.replace(base.synth, gt_overlap=float(value)))


def sweep_row(scenes: Sequence[Scene], cfg: PipelineConfig) -> dict:
    """NMS-filtered, greedy-keep and raw top-k candidate sets of each scene, scored.

    NMS and greedy matching both see every detection of the scene, so the two
    label assigners are compared on equal footing; top-k keeps ``selector.k``.
    """
    gts = [s.ground_truths for s in scenes]
    nms_sets, greedy_sets, topk_sets = [], [], []
    for scene in scenes:
        dets = scene.detections
        nms_sets.append([dets[i] for i in nms(dets, cfg.selector.nms_iou)])
        labels = label_pool(scene, cfg.greedy)
        greedy_sets.append([dets[i] for i in labels.kept_indices()])
        topk_sets.append([dets[i] for i in topk_select(dets, cfg.selector.k)])
    return {
        "nms_ap": coco_map(nms_sets, gts),
        "nms_recall": budget_recall(nms_sets, gts),
        "nms_ideal_recall": pooled_ideal_recall(nms_sets, gts),
        "greedy_ap": coco_map(greedy_sets, gts),
        "greedy_recall": budget_recall(greedy_sets, gts),
        "greedy_ideal_recall": pooled_ideal_recall(greedy_sets, gts),
        "topk_ideal_recall": pooled_ideal_recall(topk_sets, gts),
    }


def sweep(axis: str, values: Sequence, base: PipelineConfig, n_scenes: int = 50,
          scenes: Sequence[Scene] | None = None) -> list[dict]:
    """One metrics row per axis value.

    Synthetic axes regenerate scenes per value; the others reuse ``scenes``
    when given, else a dataset generated from ``base.synth``.
    """
    if axis not in SWEEP_AXES:
        raise InputError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    if len(values) < 2:
        raise InputError("a sweep needs at least two axis values")
    regenerate = axis in ("dups_per_gt", "gt_overlap")
    if not regenerate and scenes is None:
        scenes = gen_dataset(base.synth, n_scenes)
    rows = []
    for value in values:
        try:
            cfg = _sweep_cfg(base, axis, value)
        except (TypeError, ValueError) as exc:
            raise InputError(f"sweep value {value!r} invalid for {axis}: {exc}") from exc
        data = gen_dataset(cfg.synth, n_scenes) if regenerate else scenes
        row = {"axis": axis, "value": value}
        row.update(sweep_row(data, cfg))
        log.info("sweep %s=%s: %s", axis, value, row)
        rows.append(row)
    return rows


def format_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def run_rows(result: PipelineResult) -> list[dict]:
    if result.metrics is None:
        return []
    m = result.metrics
    return [{"scene_count": len(result.scene_ids), "ap": m.ap, "ap50": m.ap50, "ap75": m.ap75,
             "recall": m.recall, "ideal_recall": m.ideal_recall}]
