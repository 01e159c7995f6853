"""Greedy ball-packing on the spectral embedding, its sampled variant, and a
Lloyd k-means baseline.

Each of the first k-1 iterations picks the vertex whose closed ball of radius
2R holds the most still-unclustered points, cuts that ball out, and moves on;
whatever is left becomes the last cluster.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional
import logging
import math

import numpy as np
from scipy.spatial.distance import cdist

from errors import DataError, UsageError
from graph_core import Graph, Partition, make_rng
from spectral import Embedding

logger = logging.getLogger(__name__)

# Sample size of the fast variant is ceil(SAMPLE_CONSTANT / epsilon * ln n).
SAMPLE_CONSTANT = 4.0
# Candidate rows per distance block; bounds memory at ~8 MB per block for n=1000.
_CHUNK_ROWS = 1024


class RadiusMode(str, Enum):
    THEORY = 'theory'
    SCALED = 'scaled'
    EXPLICIT = 'explicit'


def theoretical_radius(g: Graph, k: int) -> float:
    """R = 1 / (26 * d_max * sqrt(n * k))."""
    if g.d_max == 0:
        raise DataError("theoretical radius is undefined for a graph without edges")
    return 1.0 / (26.0 * g.d_max * math.sqrt(g.n * k))


@dataclass(frozen=True)
class GreedyConfig:
    """Parameters shared by greedy_cluster and fast_cluster.

    radius_value is gamma for SCALED mode and R itself for EXPLICIT mode.
    full_sample makes the fast variant score every active vertex.
    """

    k: int
    radius_mode: RadiusMode = RadiusMode.THEORY
    radius_value: Optional[float] = None
    epsilon: Optional[float] = None
    seed: int = 0
    sample_constant: float = SAMPLE_CONSTANT
    full_sample: bool = False
    tie_break: str = 'lowest-id'

    def __post_init__(self):
        object.__setattr__(self, 'radius_mode', RadiusMode(self.radius_mode))
        if self.k < 2:
            raise UsageError(f"greedy clustering needs k >= 2, got {self.k}")
        if self.radius_mode is RadiusMode.THEORY:
            if self.radius_value is not None:
                raise UsageError("theory radius mode takes no radius value")
        elif self.radius_value is None or not self.radius_value > 0:
            raise UsageError(f"{self.radius_mode.value} radius mode needs a positive value")
        if self.tie_break != 'lowest-id':
            raise UsageError("only the lowest-id tie break is supported")

    def radius(self, g: Graph) -> float:
        """Resolved R for this graph; balls use 2R."""
        if self.radius_mode is RadiusMode.EXPLICIT:
            return float(self.radius_value)
        base = theoretical_radius(g, self.k)
        if self.radius_mode is RadiusMode.SCALED:
            return float(self.radius_value) * base
        return base


@dataclass
class TraceStep:
    iter: int
    center: Optional[int]
    ball_size: int
    remaining: int
    sampled_ids: Optional[list[int]] = None
    exhausted: bool = False

    def to_record(self) -> dict:
        record = {'iter': self.iter, 'center': self.center,
                  'ball_size': self.ball_size, 'remaining': self.remaining}
        if self.sampled_ids is not None:
            record['sampled_ids'] = self.sampled_ids
        if self.exhausted:
            record['exhausted'] = True
        return record


@dataclass
class ClusterTrace:
    method: str
    radius: float
    steps: list[TraceStep] = field(default_factory=list)
    final_size: int = 0
    empty_clusters: list[int] = field(default_factory=list)

    @property
    def ball_radius(self) -> float:
        return 2.0 * self.radius

    def to_records(self) -> list[dict]:
        return [step.to_record() for step in self.steps]


def _as_active(active, n: int) -> np.ndarray:
    arr = np.asarray(active)
    if arr.dtype == bool:
        if arr.size != n:
            raise DataError("active mask length does not match the embedding")
        return np.flatnonzero(arr)
    return np.unique(arr.astype(np.int64))


def ball_count(emb: Embedding, center: int, radius: float, active) -> int:
    """|{w in active : ||f(center) - f(w)||_2 <= radius}| (closed ball)."""
    idx = _as_active(active, emb.n)
    pos = np.searchsorted(idx, center)
    if pos >= idx.size or idx[pos] != center:
        raise UsageError(f"center {center} is not in the active set")
    return int(_ball_counts(emb.points, np.array([center]), idx, radius)[0])


def _ball_counts(points: np.ndarray, candidates: np.ndarray, active: np.ndarray,
                 radius: float) -> np.ndarray:
    counts = np.empty(candidates.size, dtype=np.int64)
    targets = points[active]
    for start in range(0, candidates.size, _CHUNK_ROWS):
        block = candidates[start:start + _CHUNK_ROWS]
        dists = cdist(points[block], targets)
        counts[start:start + block.size] = np.count_nonzero(dists <= radius, axis=1)
    return counts


def _check_inputs(g: Graph, emb: Embedding, cfg: GreedyConfig) -> None:
    if emb.n != g.n:
        raise DataError(f"embedding has {emb.n} points but graph has n={g.n}")
    if emb.k != cfg.k:
        raise DataError(f"embedding dimension {emb.k} does not match k={cfg.k}")
    g.require_positive_degrees()


CandidateFn = Callable[[np.ndarray], tuple[np.ndarray, Optional[list[int]]]]


def _ball_packing(g: Graph, emb: Embedding, cfg: GreedyConfig,
                  candidates_for: CandidateFn, method: str) -> tuple[Partition, ClusterTrace]:
    _check_inputs(g, emb, cfg)
    radius = cfg.radius(g)
    ball = 2.0 * radius
    points = emb.points
    labels = np.full(g.n, -1, dtype=np.int64)
    active = np.arange(g.n)
    trace = ClusterTrace(method=method, radius=radius)
    for i in range(1, cfg.k):
        if active.size == 0:
            trace.steps.append(TraceStep(i, None, 0, 0, exhausted=True))
            continue
        candidates, sampled = candidates_for(active)
        scored = np.unique(candidates)
        counts = _ball_counts(points, scored, active, ball)
        # np.unique sorts, so argmax lands on the lowest id among the maxima.
        center = int(scored[np.argmax(counts)])
        inside = cdist(points[[center]], points[active])[0] <= ball
        members = active[inside]
        labels[members] = i - 1
        active = active[~inside]
        trace.steps.append(TraceStep(i, center, int(members.size), int(active.size), sampled))
        logger.debug("%s iteration %d: center=%d ball=%d remaining=%d",
                     method, i, center, members.size, active.size)
    labels[active] = cfg.k - 1
    trace.final_size = int(active.size)
    partition = Partition(labels=labels, k=cfg.k)
    trace.empty_clusters = partition.empty_clusters()
    if trace.empty_clusters:
        logger.warning("%s clustering left empty clusters %s", method, trace.empty_clusters)
    logger.info("%s clustering done: R=%.6g sizes=%s", method, radius, partition.sizes().tolist())
    return partition, trace


def greedy_cluster(g: Graph, emb: Embedding, cfg: GreedyConfig) -> tuple[Partition, ClusterTrace]:
    """Exact greedy: every active vertex is a candidate center."""
    return _ball_packing(g, emb, cfg, lambda active: (active, None), 'greedy')


def sample_size(n_active: int, n: int, epsilon: float,
                sample_constant: float = SAMPLE_CONSTANT) -> int:
    """min(|V_i|, ceil(c_s / epsilon * ln n)), at least one draw."""
    draws = math.ceil(sample_constant / epsilon * math.log(max(n, 1)))
    return max(1, min(n_active, draws))


def fast_cluster(g: Graph, emb: Embedding, cfg: GreedyConfig) -> tuple[Partition, ClusterTrace]:
    """Sampled greedy: the argmax ranges over a uniform multiset drawn with replacement."""
    if cfg.epsilon is None or not cfg.epsilon > 0:
        raise UsageError("fast clustering needs epsilon > 0")
    rng = make_rng(cfg.seed)

    def candidates_for(active: np.ndarray):
        if cfg.full_sample:
            return active, active.tolist()
        size = sample_size(active.size, g.n, cfg.epsilon, cfg.sample_constant)
        drawn = active[rng.integers(0, active.size, size=size)]
        return drawn, drawn.tolist()

    return _ball_packing(g, emb, cfg, candidates_for, 'fast')


def _reseed_empty(labels: np.ndarray, dists: np.ndarray, k: int) -> np.ndarray:
    """Move the point farthest from its own center into each empty cluster."""
    sizes = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(sizes == 0):
        own = dists[np.arange(labels.size), labels].copy()
        own[sizes[labels] <= 1] = -np.inf
        j = int(np.argmax(own))
        sizes[labels[j]] -= 1
        labels[j] = c
        sizes[c] = 1
    return labels


def kmeans_baseline(emb: Embedding | np.ndarray, k: int, seed: int,
                    max_iter: int = 300) -> Partition:
    """Lloyd's algorithm from k distinct data points drawn uniformly at random."""
    points = emb.points if isinstance(emb, Embedding) else np.asarray(emb, dtype=np.float64)
    n = points.shape[0]
    if k < 2:
        raise UsageError(f"k-means needs k >= 2, got {k}")
    if k > n:
        raise UsageError(f"k={k} exceeds the {n} points")
    if max_iter < 1:
        raise UsageError("max_iter must be positive")
    rng = make_rng(seed)
    centers = points[rng.choice(n, size=k, replace=False)].copy()
    labels: Optional[np.ndarray] = None
    for iteration in range(1, max_iter + 1):
        dists = cdist(points, centers)
        assigned = _reseed_empty(np.argmin(dists, axis=1), dists, k)
        if labels is not None and np.array_equal(assigned, labels):
            logger.info("k-means converged after %d iterations", iteration)
            break
        labels = assigned
        centers = np.vstack([points[labels == c].mean(axis=0) for c in range(k)])
    else:
        logger.warning("k-means stopped at max_iter=%d without stable assignments", max_iter)
    return Partition(labels=labels, k=k)
