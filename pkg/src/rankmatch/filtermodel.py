"""Trainable query filter.

Each candidate becomes a ``d``-vector (projected box/score/category features
plus its rank embedding). One single-head self-attention layer with a
residual connection lets candidates see each other, and a two-layer tanh head
maps every candidate to a keep probability. Training minimizes the mean focal
loss against greedy-matching labels with plain gradient descent; gradients are
derived by hand.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .assignment import Detection, LabelAssignment
from .ranking import RankEmbedding
from .synth import Scene

CATEGORY_CAP = 8
RAW_DIM = 5 + CATEGORY_CAP + 1  # cx, cy, w, h, score, one-hot categories, overflow slot
PROB_EPS = 1e-7
CHECKPOINT_FORMAT = "rankmatch-filter-checkpoint"
PARAM_NAMES = ("rank_table", "w_in", "w_q", "w_k", "w_v", "w_o", "w1", "b1", "w2", "b2")


@dataclass(frozen=True)
class FilterConfig:
    conf_threshold: float = 0.1
    alpha: float = 0.25
    gamma: float = 2.0
    learning_rate: float = 0.5
    epochs: int = 60
    seed: int = 0
    d: int = 32
    h: int = 32
    embed_dim: int = 32
    max_rank: int = 300
    use_rank: bool = True

    def __post_init__(self):
        if not 0.0 <= self.conf_threshold <= 1.0:
            raise ValueError(f"conf_threshold must lie in [0, 1], got {self.conf_threshold}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if min(self.d, self.h, self.embed_dim, self.max_rank) < 1:
            raise ValueError("d, h, embed_dim and max_rank must be positive")
        if self.epochs < 0 or self.learning_rate < 0:
            raise ValueError("epochs and learning_rate must be non-negative")


@dataclass
class FilterParams:
    rank_table: np.ndarray  # (max_rank, embed_dim)
    w_in: np.ndarray        # (RAW_DIM, d)
    w_q: np.ndarray         # (d, d)
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray
    w1: np.ndarray          # (d, h)
    b1: np.ndarray          # (h,)
    w2: np.ndarray          # (h,)
    b2: np.ndarray          # ()

    @property
    def d(self) -> int:
        return self.w_q.shape[0]

    @property
    def h(self) -> int:
        return self.w1.shape[1]

    @property
    def embedding(self) -> RankEmbedding:
        return RankEmbedding(self.rank_table)

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "FilterParams":
        return FilterParams(**{k: v.copy() for k, v in self.arrays().items()})

    def validate(self) -> None:
        d, h = self.d, self.h
        expected = {
            "w_in": (RAW_DIM, d), "w_q": (d, d), "w_k": (d, d), "w_v": (d, d), "w_o": (d, d),
            "w1": (d, h), "b1": (h,), "w2": (h,), "b2": (),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"parameter {name} has shape {got}, expected {shape}")
        if self.rank_table.ndim != 2:
            raise ValueError(f"rank_table must be 2-D, got shape {self.rank_table.shape}")
        for name, arr in self.arrays().items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"parameter {name} has non-finite entries")

    @classmethod
    def zeros(cls, d: int = 32, h: int = 32, embed_dim: int = 32, max_rank: int = 300) -> "FilterParams":
        return cls(
            rank_table=np.zeros((max_rank, embed_dim)), w_in=np.zeros((RAW_DIM, d)),
            w_q=np.zeros((d, d)), w_k=np.zeros((d, d)), w_v=np.zeros((d, d)), w_o=np.zeros((d, d)),
            w1=np.zeros((d, h)), b1=np.zeros(h), w2=np.zeros(h), b2=np.zeros(()),
        )


def init_params(cfg: FilterConfig) -> FilterParams:
    """Seeded initialization; the rank table is uniform on [-0.05, 0.05]."""
    rng = np.random.default_rng(cfg.seed)
    d, h = cfg.d, cfg.h

    def dense(fan_in, shape):
        return rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=shape)

    table = RankEmbedding.uniform(rng, cfg.max_rank, cfg.embed_dim).table
    params = FilterParams(
        rank_table=table if cfg.use_rank else np.zeros_like(table),
        w_in=dense(RAW_DIM, (RAW_DIM, d)),
        w_q=dense(d, (d, d)), w_k=dense(d, (d, d)), w_v=dense(d, (d, d)), w_o=dense(d, (d, d)),
        w1=dense(d, (d, h)), b1=np.zeros(h), w2=dense(h, (h,)), b2=np.zeros(()),
    )
    return params


# -- features -----------------------------------------------------------------

def raw_features(dets: Sequence[Detection]) -> np.ndarray:
    out = np.zeros((len(dets), RAW_DIM))
    for i, d in enumerate(dets):
        out[i, :4] = d.box.cxcywh()
        out[i, 4] = d.score
        out[i, 5 + min(d.category, CATEGORY_CAP)] = 1.0
    return out


def _rank_rows(ranks: Sequence[int], max_rank: int) -> np.ndarray:
    r = np.asarray(ranks, dtype=np.int64)
    if r.size and r.min() < 0:
        raise ValueError("ranks must be non-negative")
    return np.minimum(r, max_rank - 1)


def _embed(params: FilterParams, rows: np.ndarray) -> np.ndarray:
    """Rank embeddings zero-padded or truncated to width d."""
    d = params.d
    e = params.rank_table[rows]
    out = np.zeros((rows.size, d))
    k = min(d, e.shape[1])
    out[:, :k] = e[:, :k]
    return out


def featurize(det: Detection, rank: int, params: FilterParams) -> np.ndarray:
    """Projected raw features of one detection plus its rank embedding."""
    return (raw_features([det]) @ params.w_in + _embed(params, _rank_rows([rank], params.rank_table.shape[0])))[0]


def featurize_all(dets: Sequence[Detection], ranks: Sequence[int], params: FilterParams) -> np.ndarray:
    rows = _rank_rows(ranks, params.rank_table.shape[0])
    return raw_features(dets) @ params.w_in + _embed(params, rows)


# -- forward / loss / backward ------------------------------------------------

def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _forward(params: FilterParams, x: np.ndarray):
    d = params.d
    q, k, v = x @ params.w_q, x @ params.w_k, x @ params.w_v
    s = (q @ k.T) / math.sqrt(d)
    s = s - s.max(axis=1, keepdims=True)
    a = np.exp(s)
    a /= a.sum(axis=1, keepdims=True)
    z = a @ v
    hid = x + z @ params.w_o
    g = np.tanh(hid @ params.w1 + params.b1)
    logit = g @ params.w2 + params.b2
    p = _sigmoid(logit)
    cache = {"x": x, "q": q, "k": k, "v": v, "a": a, "z": z, "hid": hid, "g": g}
    return p, cache


def filter_forward(params: FilterParams, features: np.ndarray) -> np.ndarray:
    """Keep probability of each candidate row of ``features`` (n x d)."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.d:
        raise ValueError(f"features must be (n, {params.d}), got {x.shape}")
    return _forward(params, x)[0]


def focal_loss(p, label, alpha: float = 0.25, gamma: float = 2.0):
    """Elementwise binary focal loss; ``p`` is clamped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(label, dtype=np.float64)
    pos = -alpha * (1.0 - p) ** gamma * np.log(p)
    neg = -(1.0 - alpha) * p ** gamma * np.log(1.0 - p)
    out = np.where(y > 0.5, pos, neg)
    return float(out) if out.ndim == 0 else out


def _focal_dp(p: np.ndarray, y: np.ndarray, alpha: float, gamma: float) -> np.ndarray:
    """d focal / d p, zero where the clamp is active."""
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    one_minus = 1.0 - pc
    if gamma == 0.0:
        d_pos = -alpha / pc
        d_neg = (1.0 - alpha) / one_minus
    else:
        d_pos = -alpha * (-gamma * one_minus ** (gamma - 1.0) * np.log(pc) + one_minus ** gamma / pc)
        d_neg = -(1.0 - alpha) * (gamma * pc ** (gamma - 1.0) * np.log(one_minus) - pc ** gamma / one_minus)
    grad = np.where(y > 0.5, d_pos, d_neg)
    inside = (p >= PROB_EPS) & (p <= 1.0 - PROB_EPS)
    return np.where(inside, grad, 0.0)


@dataclass
class FilterBatch:
    """One scene's candidates in model-ready form."""

    raw: np.ndarray       # (n, RAW_DIM)
    ranks: np.ndarray     # (n,) rank indices
    labels: np.ndarray    # (n,) 0/1 keep targets

    @classmethod
    def from_scene(cls, scene: Scene, labels: LabelAssignment) -> "FilterBatch":
        if len(labels) != len(scene.detections):
            raise ValueError(f"{len(labels)} labels for {len(scene.detections)} detections in {scene.scene_id}")
        return cls(raw_features(scene.detections), np.asarray(labels.rank, dtype=np.int64),
                    np.asarray(labels.keep, dtype=np.float64))


def batch_loss(params: FilterParams, batch: FilterBatch, cfg: FilterConfig) -> float:
    x = batch.raw @ params.w_in + _embed(params, _rank_rows(batch.ranks, params.rank_table.shape[0]))
    p, _ = _forward(params, x)
    return float(np.mean(focal_loss(p, batch.labels, cfg.alpha, cfg.gamma)))


def filter_backward(params: FilterParams, batch: FilterBatch, cfg: FilterConfig):
    """Mean focal loss of ``batch`` and its gradient w.r.t. every parameter."""
    rows = _rank_rows(batch.ranks, params.rank_table.shape[0])
    x = batch.raw @ params.w_in + _embed(params, rows)
    p, c = _forward(params, x)
    n = x.shape[0]
    loss = float(np.mean(focal_loss(p, batch.labels, cfg.alpha, cfg.gamma)))

    d_logit = _focal_dp(p, batch.labels, cfg.alpha, cfg.gamma) * p * (1.0 - p) / n
    grads = {"b2": np.asarray(d_logit.sum()), "w2": c["g"].T @ d_logit}
    d_pre = np.outer(d_logit, params.w2) * (1.0 - c["g"] ** 2)
    grads["w1"] = c["hid"].T @ d_pre
    grads["b1"] = d_pre.sum(axis=0)
    d_hid = d_pre @ params.w1.T
    grads["w_o"] = c["z"].T @ d_hid
    d_z = d_hid @ params.w_o.T
    a = c["a"]
    d_a = d_z @ c["v"].T
    d_v = a.T @ d_z
    d_s = a * (d_a - np.sum(d_a * a, axis=1, keepdims=True)) / math.sqrt(params.d)
    d_q = d_s @ c["k"]
    d_k = d_s.T @ c["q"]
    grads["w_q"] = x.T @ d_q
    grads["w_k"] = x.T @ d_k
    grads["w_v"] = x.T @ d_v
    d_x = d_hid + d_q @ params.w_q.T + d_k @ params.w_k.T + d_v @ params.w_v.T
    grads["w_in"] = batch.raw.T @ d_x
    d_table = np.zeros_like(params.rank_table)
    k = min(params.d, d_table.shape[1])
    np.add.at(d_table[:, :k], rows, d_x[:, :k])
    grads["rank_table"] = d_table
    return loss, grads


# -- training / inference -----------------------------------------------------

@dataclass
class TrainResult:
    params: FilterParams
    loss_trace: list[float] = field(default_factory=list)


def train_filter(dataset: Sequence[tuple[Scene, LabelAssignment]], cfg: FilterConfig = FilterConfig()) -> TrainResult:
    """Gradient descent, one full-scene step at a time, for ``cfg.epochs`` passes.

    With ``cfg.use_rank`` false the rank table stays at zero and is never
    updated.
    """
    if not dataset:
        raise ValueError("cannot train on an empty dataset")
    batches = [FilterBatch.from_scene(scene, labels) for scene, labels in dataset]
    batches = [b for b in batches if b.raw.shape[0] > 0]
    if not batches:
        raise ValueError("every scene in the dataset has an empty candidate pool")
    params = init_params(cfg)
    trace = []
    for _ in range(cfg.epochs):
        losses = []
        for batch in batches:
            loss, grads = filter_backward(params, batch, cfg)
            losses.append(loss)
            for name in PARAM_NAMES:
                if name == "rank_table" and not cfg.use_rank:
                    continue
                arr = getattr(params, name)
                arr -= cfg.learning_rate * grads[name]
        trace.append(float(np.mean(losses)))
    return TrainResult(params, trace)


def keep_probabilities(params: FilterParams, dets: Sequence[Detection], ranks: Sequence[int]) -> np.ndarray:
    if not dets:
        return np.zeros(0)
    return filter_forward(params, featurize_all(dets, ranks, params))


def gate_scores(dets: Sequence[Detection], keep_prob: Sequence[float], conf_threshold: float) -> list[Detection]:
    """Scale each score by its keep probability; keep those above the threshold."""
    out = []
    for d, p in zip(dets, keep_prob):
        score = d.score * float(p)
        if score > conf_threshold:
            out.append(Detection(d.box, score, d.category))
    return out


def apply_filter(params: FilterParams, dets: Sequence[Detection], ranks: Sequence[int],
                 cfg: FilterConfig = FilterConfig()) -> list[Detection]:
    return gate_scores(dets, keep_probabilities(params, dets, ranks), cfg.conf_threshold)


# -- checkpoints --------------------------------------------------------------

def save_checkpoint(params: FilterParams, path, cfg: FilterConfig | None = None) -> None:
    """Write a self-describing JSON checkpoint; floats round-trip exactly."""
    record = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "dims": {"d": params.d, "h": params.h, "raw_dim": RAW_DIM,
                 "max_rank": params.rank_table.shape[0], "embed_dim": params.rank_table.shape[1]},
        "config": asdict(cfg) if cfg is not None else None,
        "tensors": {name: {"shape": list(arr.shape), "data": [float(x) for x in arr.ravel()]}
                    for name, arr in params.arrays().items()},
    }
    Path(path).write_text(json.dumps(record, indent=1) + "\n")


def load_checkpoint(path) -> FilterParams:
    try:
        record = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not a JSON checkpoint ({exc})") from exc
    if not isinstance(record, dict) or record.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    tensors = record.get("tensors", {})
    missing = [n for n in PARAM_NAMES if n not in tensors]
    if missing:
        raise ValueError(f"{path}: checkpoint lacks tensors {missing}")
    arrays = {}
    for name in PARAM_NAMES:
        shape = tuple(tensors[name]["shape"])
        data = np.asarray(tensors[name]["data"], dtype=np.float64)
        if data.size != math.prod(shape):
            raise ValueError(f"{path}: tensor {name} holds {data.size} values for shape {shape}")
        arrays[name] = data.reshape(shape)
    params = FilterParams(**arrays)
    params.validate()
    return params
