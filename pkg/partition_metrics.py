"""Conductance, partition distance and the spectral sanity checks.

External conductance is exact. Internal conductance is exact by enumeration
for small clusters; otherwise it is bracketed by the Cheeger lower bound
lambda_2/2 of the induced subgraph and the best sweep cut of its second
eigenvector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional
import logging
import math

import numpy as np
from scipy.optimize import linear_sum_assignment

import config
from errors import ConductanceError, DataError, EmptyClusterError, PartitionError, UsageError
from graph_core import Graph, Partition, induced_subgraph
from spectral import KERNEL_TOL, Embedding, Spectrum, compute_spectrum

logger = logging.getLogger(__name__)

# Absolute slack when comparing a measured quantity against a bound.
CHECK_SLACK = 1e-12
# Subsets scored per block during exact enumeration.
_ENUM_CHUNK = 1 << 15
_MODES = ('exact', 'bounds', 'auto')


class Verdict(str, Enum):
    STRONG = 'strong'
    NOT_STRONG = 'not-strong'
    UNKNOWN = 'unknown'


def _subset(g: Graph, s: Iterable[int] | np.ndarray) -> np.ndarray:
    idx = np.asarray(s if isinstance(s, np.ndarray) else list(s), dtype=np.int64)
    idx = np.unique(idx)
    if idx.size == 0:
        raise ConductanceError("conductance of an empty set is undefined")
    if idx[0] < 0 or idx[-1] >= g.n:
        raise DataError(f"subset has a vertex outside [0, {g.n})")
    return idx


def cut_size(g: Graph, s: Iterable[int] | np.ndarray) -> int:
    """|E(S, V \\ S)|, read off the CSR rows of S in O(vol(S))."""
    idx = _subset(g, s)
    inside = np.zeros(g.n, dtype=bool)
    inside[idx] = True
    rows = g.adjacency[idx]
    return int(rows.indices.size - np.count_nonzero(inside[rows.indices]))


def external_conductance(g: Graph, s: Iterable[int] | np.ndarray) -> float:
    """phi_out(S) = |E(S, V \\ S)| / vol(S)."""
    idx = _subset(g, s)
    vol = int(g.deg[idx].sum())
    if vol == 0:
        raise ConductanceError("external conductance needs vol(S) > 0")
    return cut_size(g, idx) / vol


def _exact_conductance(h: Graph) -> float:
    """min over T with 0 < vol(T) <= vol(H)/2 of |E(T, H \\ T)| / vol(T), by enumeration."""
    m = h.n
    deg = h.deg.astype(np.int64)
    vol_h = int(deg.sum())
    eu, ev = h.edges[:, 0], h.edges[:, 1]
    shifts = np.arange(m, dtype=np.int64)
    best = math.inf
    total = 1 << m
    for start in range(1, total, _ENUM_CHUNK):
        masks = np.arange(start, min(start + _ENUM_CHUNK, total), dtype=np.int64)
        bits = ((masks[:, None] >> shifts) & 1).astype(bool)
        vol = bits.astype(np.int64) @ deg
        internal = np.count_nonzero(bits[:, eu] & bits[:, ev], axis=1)
        cut = vol - 2 * internal
        ok = (vol > 0) & (2 * vol <= vol_h)
        if ok.any():
            best = min(best, float(np.min(cut[ok] / vol[ok])))
    return best


def _sweep_upper(h: Graph, x: np.ndarray) -> float:
    """Best conductance among the prefixes of the vertices sorted by x."""
    order = np.argsort(x, kind='stable')
    rank = np.empty(h.n, dtype=np.int64)
    rank[order] = np.arange(h.n)
    deg = h.deg.astype(np.int64)
    vol_h = int(deg.sum())
    vol = np.cumsum(deg[order])[:-1]
    # An edge lies inside the prefix of size j once both endpoints rank below j.
    last = np.maximum(rank[h.edges[:, 0]], rank[h.edges[:, 1]])
    internal = np.cumsum(np.bincount(last, minlength=h.n))[:-1]
    cut = vol - 2 * internal
    return float(np.min(cut / np.minimum(vol, vol_h - vol)))


@dataclass(frozen=True)
class ConductanceBounds:
    phi_out: float
    phi_in_lower: float
    phi_in_upper: float
    phi_in_exact: Optional[float] = None
    cheeger_lower: Optional[float] = None
    sweep_upper: Optional[float] = None

    @property
    def certified(self) -> bool:
        return self.phi_in_exact is not None


def internal_conductance(g: Graph, s: Iterable[int] | np.ndarray, mode: str = 'auto',
                         brute_limit: Optional[int] = None) -> ConductanceBounds:
    """phi_in(S) = phi(G[S]) together with phi_out(S).

    mode 'exact' enumerates all subsets (|S| <= brute_limit), 'bounds' only
    computes the spectral bracket, 'auto' picks exact when |S| is small.
    """
    if mode not in _MODES:
        raise UsageError(f"unknown conductance mode {mode!r}")
    brute_limit = config.BRUTE_LIMIT if brute_limit is None else brute_limit
    idx = _subset(g, s)
    if idx.size < 2:
        raise ConductanceError(f"internal conductance of a {idx.size}-vertex set is undefined")
    if mode == 'exact' and idx.size > brute_limit:
        raise ConductanceError(
            f"exact internal conductance refused for |S|={idx.size} > {brute_limit}")
    phi_out = external_conductance(g, idx)
    exact = mode == 'exact' or (mode == 'auto' and idx.size <= brute_limit)
    h, _ = induced_subgraph(g, idx)
    components, _ = h.component_labels()
    if components > 1:
        return ConductanceBounds(phi_out, 0.0, 0.0, 0.0 if exact else None, 0.0, 0.0)

    spec = compute_spectrum(h, 2)
    lam2 = max(float(spec.eigenvalues[1]), 0.0)
    cheeger = lam2 / 2.0
    sweep = _sweep_upper(h, spec.eigenvectors[:, 1] / np.sqrt(h.deg))
    if not exact:
        return ConductanceBounds(phi_out, cheeger, sweep, None, cheeger, sweep)
    phi = _exact_conductance(h)
    return ConductanceBounds(phi_out, phi, phi, phi, cheeger, sweep)


@dataclass
class ClusterStrength:
    cluster: int
    size: int
    phi_out: float
    bounds: Optional[ConductanceBounds] = None
    diagnostic: Optional[str] = None


@dataclass
class StrengthReport:
    clusters: list[ClusterStrength]
    alpha_out: float
    alpha_in_lower: Optional[float]
    alpha_in_upper: Optional[float]
    diagnostics: list[str] = field(default_factory=list)

    def verdict(self, alpha_in: float, alpha_out: float) -> Verdict:
        """Is the partition (alpha_in, alpha_out)-strong?

        A cluster with undefined internal conductance makes it not-strong.
        """
        if self.diagnostics or self.alpha_in_lower is None:
            return Verdict.NOT_STRONG
        if self.alpha_out > alpha_out or self.alpha_in_upper < alpha_in:
            return Verdict.NOT_STRONG
        if self.alpha_in_lower >= alpha_in:
            return Verdict.STRONG
        return Verdict.UNKNOWN


def strength_report(g: Graph, p: Partition, mode: str = 'auto',
                    brute_limit: Optional[int] = None) -> StrengthReport:
    if p.n != g.n:
        raise PartitionError(f"partition covers {p.n} vertices but graph has n={g.n}")
    empty = p.empty_clusters()
    if empty:
        raise EmptyClusterError(empty)
    entries: list[ClusterStrength] = []
    diagnostics: list[str] = []
    for cid, members in enumerate(p.clusters()):
        if members.size < 2:
            message = f"cluster {cid}: internal conductance undefined for a singleton"
            diagnostics.append(message)
            logger.warning("%s", message)
            entries.append(ClusterStrength(cid, 1, external_conductance(g, members),
                                           diagnostic=message))
            continue
        bounds = internal_conductance(g, members, mode, brute_limit)
        entries.append(ClusterStrength(cid, int(members.size), bounds.phi_out, bounds))
    defined = [e.bounds for e in entries if e.bounds is not None]
    return StrengthReport(
        clusters=entries,
        alpha_out=max(e.phi_out for e in entries),
        alpha_in_lower=min(b.phi_in_lower for b in defined) if defined else None,
        alpha_in_upper=min(b.phi_in_upper for b in defined) if defined else None,
        diagnostics=diagnostics)


def partition_distance(a: Partition, c: Partition) -> tuple[int, tuple[int, ...]]:
    """min over bijections sigma of sum_i |A_i symmetric-difference C_sigma(i)|.

    The shorter partition is padded with empty clusters. Returns the distance
    and sigma as a tuple mapping cluster i of `a` to cluster sigma[i] of `c`.
    """
    if a.n != c.n:
        raise PartitionError(f"partitions cover {a.n} and {c.n} vertices")
    k = max(a.k, c.k)
    overlap = np.zeros((k, k), dtype=np.int64)
    np.add.at(overlap, (a.labels, c.labels), 1)
    size_a = np.bincount(a.labels, minlength=k)
    size_c = np.bincount(c.labels, minlength=k)
    cost = size_a[:, None] + size_c[None, :] - 2 * overlap
    rows, cols = linear_sum_assignment(cost)
    sigma = np.empty(k, dtype=np.int64)
    sigma[rows] = cols
    return int(cost[rows, cols].sum()), tuple(int(j) for j in sigma)


def _require_spectrum(spec: Spectrum, k: int) -> float:
    if spec.m < k:
        raise UsageError(f"need {k} eigenpairs, spectrum has {spec.m}")
    return max(float(spec.eigenvalues[k - 1]), 0.0)


@dataclass(frozen=True)
class ConcentrationReport:
    """r_i = sum_u (x_i(u) - mean of x_i over the cluster of u)^2, per coordinate."""

    residuals: tuple[float, ...]
    lambda_k: float
    d_max: int
    alpha_in: float
    statement_bound: float
    proof_bound: float

    @property
    def holds_statement(self) -> bool:
        return all(r <= self.statement_bound + CHECK_SLACK for r in self.residuals)

    @property
    def holds_proof(self) -> bool:
        return all(r <= self.proof_bound + CHECK_SLACK for r in self.residuals)


def concentration_check(g: Graph, emb: Embedding, p: Partition, spec: Spectrum,
                        alpha_in: float) -> ConcentrationReport:
    """Both bounds are reported: 2k lambda_k d_max^3 / alpha^2 and the tighter
    2k lambda_k d_max / alpha^2."""
    if not alpha_in > 0:
        raise UsageError("concentration check needs alpha_in > 0")
    if p.n != emb.n or emb.n != g.n:
        raise PartitionError("graph, embedding and partition sizes differ")
    k = emb.k
    lam_k = _require_spectrum(spec, k)
    scale = 2.0 * k * lam_k / alpha_in ** 2
    return ConcentrationReport(concentration_residuals(emb, p), lam_k, g.d_max, alpha_in,
                               scale * g.d_max ** 3, scale * g.d_max)


def concentration_residuals(emb: Embedding, p: Partition) -> tuple[float, ...]:
    """||x_i - x~_i||^2 where x~_i replaces x_i by its mean on each cluster."""
    if p.n != emb.n:
        raise PartitionError(f"partition covers {p.n} vertices, embedding {emb.n}")
    empty = p.empty_clusters()
    if empty:
        raise EmptyClusterError(empty)
    sizes = p.sizes()
    residuals = []
    for i in range(emb.k):
        x = emb.points[:, i]
        means = np.bincount(p.labels, weights=x, minlength=p.k) / sizes
        residuals.append(float(np.sum((x - means[p.labels]) ** 2)))
    return tuple(residuals)


@dataclass(frozen=True)
class PairSumReport:
    size: int
    volume: int
    lambda_k: float
    bound: float
    pair_sums: tuple[float, ...]

    @property
    def holds(self) -> bool:
        return all(s <= self.bound + CHECK_SLACK for s in self.pair_sums)


def pairsum_check(g: Graph, emb: Embedding, cluster: Iterable[int] | np.ndarray,
                  phi_in_lower: float) -> PairSumReport:
    """sum over ordered pairs (u, v) in C of (x_i(u) - x_i(v))^2 against
    4 lambda_k vol(C) / phi_in^2, for each coordinate i."""
    if not phi_in_lower > 0:
        raise UsageError("pair-sum check needs a positive internal conductance bound")
    idx = _subset(g, cluster)
    pts = emb.points[idx]
    size = idx.size
    # sum_{u,v} (a_u - a_v)^2 = 2|C| sum a^2 - 2 (sum a)^2
    sums = 2.0 * size * np.sum(pts * pts, axis=0) - 2.0 * np.sum(pts, axis=0) ** 2
    sums = np.maximum(sums, 0.0)
    lam_k = _require_spectrum(emb.spectrum, emb.k)
    vol = int(g.deg[idx].sum())
    bound = 4.0 * lam_k * vol / phi_in_lower ** 2
    return PairSumReport(int(size), vol, lam_k, bound, tuple(float(s) for s in sums))


@dataclass(frozen=True)
class GapReport:
    k: int
    lambda_k: float
    lambda_k1: float
    ratio: float
    cheeger_bound_ok: Optional[bool] = None


def gap_report(spec: Spectrum, k: int, strength: Optional[StrengthReport] = None) -> GapReport:
    """Upsilon = lambda_{k+1} / (k^2 sqrt(lambda_k)); inf when lambda_k = 0 < lambda_{k+1}."""
    if k < 1:
        raise UsageError("gap report needs k >= 1")
    if spec.m < k + 1:
        raise UsageError(f"gap report needs {k + 1} eigenpairs, spectrum has {spec.m}")
    lam_k = float(spec.eigenvalues[k - 1])
    lam_k1 = float(spec.eigenvalues[k])
    if lam_k < KERNEL_TOL:
        ratio = math.inf if lam_k1 >= KERNEL_TOL else 0.0
    else:
        ratio = lam_k1 / (k * k * math.sqrt(lam_k))
    cheeger_ok = None
    if strength is not None:
        cheeger_ok = lam_k <= 2.0 * strength.alpha_out + 1e-9
    return GapReport(k, lam_k, lam_k1, ratio, cheeger_ok)


@dataclass(frozen=True)
class GuaranteeReport:
    """Recovery hypothesis alpha_in >= 9 (k d_max)^(3/2) sqrt(lambda_k) and the
    predicted error scale lambda_k d_max^3 k^4 n / alpha_in^2."""

    required_alpha_in: float
    required_alpha_in_fast: Optional[float]
    hypothesis_met: Optional[bool]
    fast_hypothesis_met: Optional[bool]
    error_scale: Optional[float]


def _met(strength: StrengthReport, required: float) -> Optional[bool]:
    if strength.alpha_in_lower is None:
        return False
    if strength.alpha_in_lower >= required:
        return True
    if strength.alpha_in_upper < required:
        return False
    return None


def guarantee_report(g: Graph, spec: Spectrum, k: int, strength: StrengthReport,
                     epsilon: Optional[float] = None) -> GuaranteeReport:
    lam_k = _require_spectrum(spec, k)
    required = 9.0 * (k * g.d_max) ** 1.5 * math.sqrt(lam_k)
    required_fast = None
    if epsilon is not None:
        if not 0 < epsilon <= 1:
            raise UsageError("epsilon must lie in (0, 1]")
        required_fast = required / math.sqrt(epsilon)
    alpha = strength.alpha_in_lower
    error_scale = None
    if alpha:
        error_scale = lam_k * g.d_max ** 3 * k ** 4 * g.n / alpha ** 2
    return GuaranteeReport(
        required, required_fast, _met(strength, required),
        _met(strength, required_fast) if required_fast is not None else None,
        error_scale)
