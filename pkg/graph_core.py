"""Graph container, file formats and synthetic graph generators.

Vertices are dense 0-based integers. A `Graph` is immutable once built; every
constructor goes through `Graph.from_edges`, which rejects self-loops and
duplicate edges and checks the handshake identity.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence
import logging
import re

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from sklearn.neighbors import NearestNeighbors

from errors import DataError, DegreeError, GraphFormatError, PartitionError, UsageError
from fs_utils import atomic_write_text, require_file

logger = logging.getLogger(__name__)

# All randomness in the repo comes from numpy's PCG64 bit generator, so a
# published seed reproduces on any platform numpy supports.
RNG_NAME = 'numpy.random.PCG64'

_VERTICES_DIRECTIVE = re.compile(r'^#\s*vertices\s*:\s*(\d+)\s*$')


def make_rng(seed: Optional[int]) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph on vertices 0..n-1.

    `edges` is an (m, 2) int64 array with u < v in every row, sorted
    lexicographically; `deg` is the per-vertex degree.
    """

    n: int
    edges: np.ndarray
    deg: np.ndarray

    def __post_init__(self):
        if self.edges.size and (self.edges.min() < 0 or self.edges.max() >= self.n):
            raise GraphFormatError("edge endpoint outside [0, n)")
        if int(self.deg.sum()) != 2 * len(self.edges):
            raise DataError("handshake identity violated: sum(deg) != 2|E|")
        _freeze(self.edges)
        _freeze(self.deg)

    @classmethod
    def from_edges(cls, n: int, pairs: Iterable[Sequence[int]] | np.ndarray) -> 'Graph':
        """Build a graph from unordered vertex pairs, rejecting loops and repeats."""
        arr = np.asarray(pairs if isinstance(pairs, np.ndarray) else list(pairs), dtype=np.int64)
        arr = arr.reshape(-1, 2)
        if n < 0:
            raise UsageError("vertex count must be non-negative")
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise GraphFormatError(f"edge endpoint outside [0, {n})")
        loops = np.flatnonzero(arr[:, 0] == arr[:, 1])
        if loops.size:
            u = int(arr[loops[0], 0])
            raise GraphFormatError(f"self-loop at vertex {u}")
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        order = np.lexsort((hi, lo))
        edges = np.column_stack([lo[order], hi[order]]).astype(np.int64)
        if len(edges) > 1:
            dup = np.flatnonzero(np.all(edges[1:] == edges[:-1], axis=1))
            if dup.size:
                u, v = edges[dup[0]]
                raise GraphFormatError(f"duplicate edge ({u}, {v})")
        deg = np.bincount(edges.ravel(), minlength=n).astype(np.int64)
        return cls(n=int(n), edges=edges, deg=deg)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def d_max(self) -> int:
        return int(self.deg.max()) if self.n else 0

    @property
    def vol_total(self) -> int:
        return int(self.deg.sum())

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency matrix in CSR form with sorted indices."""
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.ones(rows.size, dtype=np.float64)
        adj = sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))
        adj.sort_indices()
        return adj

    def neighbors(self, u: int) -> np.ndarray:
        adj = self.adjacency
        return adj.indices[adj.indptr[u]:adj.indptr[u + 1]]

    def volume(self, s: Iterable[int] | np.ndarray) -> int:
        idx = np.asarray(s if isinstance(s, np.ndarray) else list(s), dtype=np.int64)
        return int(self.deg[idx].sum())

    def isolated_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.deg == 0)

    def require_positive_degrees(self) -> None:
        isolated = self.isolated_vertices()
        if isolated.size:
            raise DegreeError(int(isolated[0]))

    def component_labels(self) -> tuple[int, np.ndarray]:
        count, labels = connected_components(self.adjacency, directed=False)
        return int(count), labels

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.num_edges}, d_max={self.d_max})"


@dataclass(frozen=True, eq=False)
class Partition:
    """Per-vertex cluster labels in [0, k). Clusters may be empty only in reports."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        object.__setattr__(self, 'labels', _freeze(labels.copy()))
        if self.k < 1:
            raise PartitionError("a partition needs k >= 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise PartitionError(f"cluster labels must lie in [0, {self.k})")

    @classmethod
    def from_labels(cls, labels: Sequence[int] | np.ndarray, k: Optional[int] = None) -> 'Partition':
        arr = np.asarray(labels, dtype=np.int64)
        if k is None:
            k = int(arr.max()) + 1 if arr.size else 1
        return cls(labels=arr, k=k)

    @classmethod
    def from_clusters(cls, n: int, clusters: Sequence[Iterable[int]], k: Optional[int] = None) -> 'Partition':
        """Build from explicit vertex sets; they must be disjoint and cover 0..n-1."""
        labels = np.full(n, -1, dtype=np.int64)
        for cid, members in enumerate(clusters):
            idx = np.asarray(list(members), dtype=np.int64)
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise PartitionError(f"cluster {cid} has a vertex outside [0, {n})")
            if np.any(labels[idx] != -1) or len(np.unique(idx)) != len(idx):
                raise PartitionError(f"cluster {cid} overlaps another cluster")
            labels[idx] = cid
        missing = np.flatnonzero(labels == -1)
        if missing.size:
            raise PartitionError(f"vertex {int(missing[0])} is in no cluster")
        return cls(labels=labels, k=k if k is not None else len(clusters))

    @property
    def n(self) -> int:
        return int(self.labels.size)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def clusters(self) -> list[np.ndarray]:
        order = np.argsort(self.labels, kind='stable')
        bounds = np.cumsum(self.sizes())[:-1]
        return [np.sort(part) for part in np.split(order, bounds)]

    def empty_clusters(self) -> list[int]:
        return [int(c) for c in np.flatnonzero(self.sizes() == 0)]


@dataclass(frozen=True)
class PlantedModel:
    """Three-level planted partition: p_in inside a block, p_mid between blocks
    of the same supergroup, p_out across supergroups."""

    block_sizes: tuple[int, ...]
    p_in: float
    p_mid: float
    p_out: float
    supergroups: Optional[tuple[tuple[int, ...], ...]] = None
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        object.__setattr__(self, 'block_sizes', sizes)
        if not sizes or min(sizes) < 1:
            raise UsageError("block sizes must be positive and non-empty")
        if not 1.0 >= self.p_in >= self.p_mid >= self.p_out >= 0.0:
            raise UsageError("need 1 >= p_in >= p_mid >= p_out >= 0")
        groups = self.supergroups
        if groups is None:
            groups = (tuple(range(len(sizes))),)
        groups = tuple(tuple(int(b) for b in grp) for grp in groups)
        flat = sorted(b for grp in groups for b in grp)
        if flat != list(range(len(sizes))) or any(not grp for grp in groups):
            raise UsageError("supergroups must partition the block indices")
        object.__setattr__(self, 'supergroups', groups)

    @classmethod
    def two_level_default(cls, seed: int = 7) -> 'PlantedModel':
        """Five blocks of 40 split {0,1} | {2,3,4}, with a visible gap at k=2 and k=5."""
        return cls(block_sizes=(40,) * 5, p_in=0.5, p_mid=0.05, p_out=0.005,
                   supergroups=((0, 1), (2, 3, 4)), seed=seed)

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    @property
    def k(self) -> int:
        return len(self.block_sizes)

    def supergroup_of(self, block: int) -> int:
        for gid, grp in enumerate(self.supergroups):
            if block in grp:
                return gid
        raise UsageError(f"block {block} is in no supergroup")

    def probability(self, a: int, b: int) -> float:
        if a == b:
            return self.p_in
        if self.supergroup_of(a) == self.supergroup_of(b):
            return self.p_mid
        return self.p_out

    def candidate_pairs(self) -> dict[str, int]:
        """Number of vertex pairs drawn at each probability level."""
        counts = {'in': 0, 'mid': 0, 'out': 0}
        sizes = self.block_sizes
        for a, sa in enumerate(sizes):
            counts['in'] += sa * (sa - 1) // 2
            for b in range(a + 1, len(sizes)):
                level = 'mid' if self.supergroup_of(a) == self.supergroup_of(b) else 'out'
                counts[level] += sa * sizes[b]
        return counts

    def block_labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.k), self.block_sizes)

    def supergroup_labels(self) -> np.ndarray:
        block_to_group = np.array([self.supergroup_of(b) for b in range(self.k)])
        return block_to_group[self.block_labels()]


def generate_planted(model: PlantedModel) -> tuple[Graph, Partition]:
    """Sample a planted-partition graph; returns it with the ground-truth blocks.

    Block pairs are visited in (a, b) order with a <= b and each candidate edge
    costs exactly one uniform draw, so the output depends only on the seed.
    """
    rng = make_rng(model.seed)
    sizes = model.block_sizes
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    chunks = []
    for a, sa in enumerate(sizes):
        for b in range(a, len(sizes)):
            p = model.probability(a, b)
            if a == b:
                iu, ju = np.triu_indices(sa, k=1)
                keep = rng.random(iu.size) < p
                u, v = offsets[a] + iu[keep], offsets[a] + ju[keep]
            else:
                hits = rng.random((sa, sizes[b])) < p
                iu, ju = np.nonzero(hits)
                u, v = offsets[a] + iu, offsets[b] + ju
            chunks.append(np.column_stack([u, v]))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    graph = Graph.from_edges(model.n, edges)
    partition = Partition(labels=model.block_labels(), k=model.k)
    logger.info("Generated planted graph: n=%d m=%d blocks=%s seed=%s",
                graph.n, graph.num_edges, list(sizes), model.seed)
    return graph, partition


def induced_subgraph(g: Graph, s: Iterable[int] | np.ndarray) -> tuple[Graph, np.ndarray]:
    """G[s] with vertices relabeled 0..|s|-1 in increasing original id.

    Returns the subgraph and the map new id -> original id.
    """
    idx = np.unique(np.asarray(s if isinstance(s, np.ndarray) else list(s), dtype=np.int64))
    if idx.size == 0:
        raise DataError("induced subgraph of an empty vertex set")
    if idx.min() < 0 or idx.max() >= g.n:
        raise DataError(f"subset has a vertex outside [0, {g.n})")
    new_id = np.full(g.n, -1, dtype=np.int64)
    new_id[idx] = np.arange(idx.size)
    u, v = g.edges[:, 0], g.edges[:, 1]
    keep = (new_id[u] >= 0) & (new_id[v] >= 0)
    sub_edges = np.column_stack([new_id[u[keep]], new_id[v[keep]]])
    return Graph.from_edges(idx.size, sub_edges), idx


# Standard small graphs

def complete_graph(n: int) -> Graph:
    iu, ju = np.triu_indices(n, k=1)
    return Graph.from_edges(n, np.column_stack([iu, ju]))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise UsageError("a cycle needs at least 3 vertices")
    u = np.arange(n)
    return Graph.from_edges(n, np.column_stack([u, (u + 1) % n]))


def path_graph(n: int) -> Graph:
    u = np.arange(max(n - 1, 0))
    return Graph.from_edges(n, np.column_stack([u, u + 1]))


def petersen_graph() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return Graph.from_edges(10, outer + spokes + inner)


def two_triangles_bridge() -> Graph:
    """Triangles {0,1,2} and {3,4,5} joined by the edge (2, 3)."""
    return Graph.from_edges(6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)])


def disjoint_union(*graphs: Graph) -> Graph:
    offset = 0
    chunks = []
    for g in graphs:
        chunks.append(g.edges + offset)
        offset += g.n
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    return Graph.from_edges(offset, edges)


def knn_graph(points: np.ndarray, n_neighbors: int) -> Graph:
    """Symmetrized k-nearest-neighbour graph of a point cloud.

    u ~ v whenever either is among the other's `n_neighbors` nearest points.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("points must be a 2-D array with at least two rows")
    m = X.shape[0]
    if not 1 <= n_neighbors < m:
        raise UsageError(f"n_neighbors must be in [1, {m - 1}]")
    nn = NearestNeighbors(n_neighbors=n_neighbors).fit(X)
    # Without a query argument sklearn excludes each point from its own list.
    idx = nn.kneighbors(return_distance=False)
    rows = np.repeat(np.arange(m), n_neighbors)
    cols = idx.ravel()
    pairs = np.column_stack([np.minimum(rows, cols), np.maximum(rows, cols)])
    pairs = np.unique(pairs, axis=0)
    graph = Graph.from_edges(m, pairs)
    logger.info("Built %d-NN graph on %d points: m=%d", n_neighbors, m, graph.num_edges)
    return graph


# File formats

def load_edge_list(path: Path, max_n: Optional[int] = None) -> Graph:
    """Parse a whitespace-separated "u v" edge list.

    Lines starting with '#' are comments; a `# vertices: N` comment fixes the
    vertex count so trailing isolated vertices survive a save/load cycle.
    Vertex ids are never compacted: gaps become degree-0 vertices.
    With `max_n` set, a vertex count above it raises UsageError before any
    per-vertex array is allocated.
    """
    path = require_file(path, 'graph')
    pairs: list[tuple[int, int]] = []
    seen: dict[tuple[int, int], int] = {}
    declared_n: Optional[int] = None
    with open(path, 'rb') as fh:
        for lineno, raw_bytes in enumerate(fh, start=1):
            try:
                raw = raw_bytes.decode('utf-8')
            except UnicodeDecodeError as e:
                raise GraphFormatError(f"invalid UTF-8 at byte {e.start}", lineno) from None
            line = raw.strip()
            if not line:
                continue
            if line.startswith('#'):
                directive = _VERTICES_DIRECTIVE.match(line)
                if directive:
                    declared_n = int(directive.group(1))
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphFormatError(f"expected 2 fields, got {len(parts)}", lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(f"non-integer vertex id in {line!r}", lineno) from None
            if u < 0 or v < 0:
                raise GraphFormatError("vertex ids must be non-negative", lineno)
            if u == v:
                raise GraphFormatError(f"self-loop at vertex {u}", lineno)
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphFormatError(
                    f"duplicate edge {key} (first seen on line {seen[key]})", lineno)
            seen[key] = lineno
            pairs.append(key)
    max_id = max((v for _, v in pairs), default=-1)
    n = max_id + 1
    if declared_n is not None:
        if declared_n < n:
            raise GraphFormatError(f"declared {declared_n} vertices but ids reach {max_id}")
        n = declared_n
    if n == 0:
        raise GraphFormatError("edge list contains no edges")
    if max_n is not None and n > max_n:
        raise UsageError(f"n={n} exceeds the guard {max_n}; pass --force to override")
    graph = Graph.from_edges(n, pairs)
    isolated = graph.isolated_vertices()
    logger.info("Loaded graph %s: n=%d m=%d", path, graph.n, graph.num_edges)
    if isolated.size:
        logger.warning("%d vertices have degree 0 (first: %d)", isolated.size, int(isolated[0]))
    return graph


def format_edge_list(g: Graph) -> str:
    lines = [f"# vertices: {g.n}", f"# edges: {g.num_edges}"]
    lines.extend(f"{u} {v}" for u, v in g.edges)
    return '\n'.join(lines) + '\n'


def save_edge_list(g: Graph, path: Path) -> Path:
    return atomic_write_text(Path(path), format_edge_list(g))


def read_partition(path: Path, n: Optional[int] = None, k: Optional[int] = None) -> Partition:
    """Read a "vertex,cluster" CSV with exactly one row per vertex."""
    path = require_file(path, 'partition')
    try:
        df = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise PartitionError(f"cannot parse partition file {path}: {e}") from e
    if list(df.columns) != ['vertex', 'cluster']:
        raise PartitionError(f"partition header must be 'vertex,cluster', got {list(df.columns)}")
    if df.empty:
        raise PartitionError("partition file has no rows")
    for col in ('vertex', 'cluster'):
        if not pd.api.types.is_integer_dtype(df[col]):
            raise PartitionError(f"column '{col}' must hold integers")
    vertices = df['vertex'].to_numpy(dtype=np.int64)
    clusters = df['cluster'].to_numpy(dtype=np.int64)
    expected_n = len(df) if n is None else n
    if len(df) != expected_n or not np.array_equal(np.sort(vertices), np.arange(expected_n)):
        raise PartitionError(
            f"partition must list every vertex 0..{expected_n - 1} exactly once")
    if clusters.min() < 0:
        raise PartitionError("cluster ids must be non-negative")
    labels = np.empty(expected_n, dtype=np.int64)
    labels[vertices] = clusters
    return Partition.from_labels(labels, k=k if k is not None else int(clusters.max()) + 1)


def format_partition(p: Partition) -> str:
    df = pd.DataFrame({'vertex': np.arange(p.n), 'cluster': p.labels})
    return df.to_csv(index=False, lineterminator='\n')


def write_partition(p: Partition, path: Path) -> Path:
    return atomic_write_text(Path(path), format_partition(p))


def read_points(path: Path) -> np.ndarray:
    """Numeric columns of a CSV point cloud (header row required)."""
    path = require_file(path, 'points')
    try:
        df = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"cannot parse points file {path}: {e}") from e
    numeric = df.select_dtypes(include='number')
    if numeric.shape[1] == 0:
        raise DataError(f"no numeric columns in {path}")
    return numeric.to_numpy(dtype=np.float64)
