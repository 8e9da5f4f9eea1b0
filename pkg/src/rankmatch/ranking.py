"""Confidence ranks and the learnable rank-embedding table."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def rank_indices(scores: Sequence[float]) -> list[int]:
    """Rank of each score in descending order; 0 is the highest.

    Equal scores are ordered by original index, so every element gets a
    distinct rank even when confidences coincide.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        return []
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    order = np.lexsort((np.arange(s.size), -s))
    ranks = np.empty(s.size, dtype=np.int64)
    ranks[order] = np.arange(s.size)
    return ranks.tolist()


def descending_order(scores: Sequence[float]) -> np.ndarray:
    """Indices sorted by descending score, index tie-break."""
    s = np.asarray(scores, dtype=np.float64)
    return np.lexsort((np.arange(s.size), -s)).astype(np.int64)


@dataclass
class RankEmbedding:
    """A ``max_rank x embed_dim`` lookup table; ranks past the end share the last row."""

    table: np.ndarray

    @property
    def max_rank(self) -> int:
        return self.table.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.table.shape[1]

    @classmethod
    def zeros(cls, max_rank: int = 300, embed_dim: int = 32) -> "RankEmbedding":
        return cls(np.zeros((max_rank, embed_dim)))

    @classmethod
    def uniform(cls, rng: np.random.Generator, max_rank: int = 300, embed_dim: int = 32,
                scale: float = 0.05) -> "RankEmbedding":
        if max_rank < 1 or embed_dim < 1:
            raise ValueError("max_rank and embed_dim must be positive")
        return cls(rng.uniform(-scale, scale, size=(max_rank, embed_dim)))

    def row_index(self, rank: int) -> int:
        if rank < 0:
            raise ValueError(f"rank must be non-negative, got {rank}")
        return min(int(rank), self.max_rank - 1)


def rank_embed(rank: int, emb: RankEmbedding) -> np.ndarray:
    return emb.table[emb.row_index(rank)].copy()
