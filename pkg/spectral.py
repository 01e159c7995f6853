"""Normalized Laplacian, its lowest eigenpairs and the degree-rescaled embedding.

Vectors are rows applied from the left (v -> v L); L is symmetric so this is
the same as L v. The iterative solver works on M = 2I - L, whose largest
eigenpairs are the smallest of L, so no linear solves are needed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional
import logging

import numpy as np
import scipy.linalg

import config
from errors import ConvergenceError, DataError, UsageError
from graph_core import Graph, make_rng

logger = logging.getLogger(__name__)

# Eigenvalues below this count as zero (kernel of L).
KERNEL_TOL = 1e-8
# Hard limit for the O(n^3) dense path.
DENSE_GUARD = 2000
# Seed of the Lanczos start vector (and of any restart vectors).
START_VECTOR_SEED = 20170301


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenpairs of L sorted by ascending eigenvalue.

    `eigenvectors[:, i]` is the unit vector of `eigenvalues[i]`; `residuals[i]`
    is ||xi_i L - lambda_i xi_i||_2.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    method: str

    @property
    def m(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def n(self) -> int:
        return int(self.eigenvectors.shape[0])

    def truncated(self, m: int) -> 'Spectrum':
        return Spectrum(self.eigenvalues[:m].copy(), self.eigenvectors[:, :m].copy(),
                        self.residuals[:m].copy(), self.method)

    def kernel_dimension(self, tol: float = KERNEL_TOL) -> int:
        return int(np.count_nonzero(self.eigenvalues < tol))


@dataclass(frozen=True, eq=False)
class Embedding:
    """points[u, i] = xi_i(u) * deg(u)^(-1/2) for i < k."""

    points: np.ndarray
    graph: Graph
    spectrum: Spectrum

    @property
    def k(self) -> int:
        return int(self.points.shape[1])

    @property
    def n(self) -> int:
        return int(self.points.shape[0])


def _inv_sqrt_degrees(g: Graph) -> np.ndarray:
    g.require_positive_degrees()
    return 1.0 / np.sqrt(g.deg.astype(np.float64))


def laplacian_apply(g: Graph, v: np.ndarray) -> np.ndarray:
    """v L computed matrix-free in O(|E| + n); accepts a vector or an (n, b) block."""
    inv_sqrt = _inv_sqrt_degrees(g)
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != g.n:
        raise DataError(f"vector length {v.shape[0]} does not match n={g.n}")
    scale = inv_sqrt if v.ndim == 1 else inv_sqrt[:, None]
    return v - scale * (g.adjacency @ (scale * v))


def dense_laplacian(g: Graph) -> np.ndarray:
    inv_sqrt = _inv_sqrt_degrees(g)
    normalized = g.adjacency.multiply(inv_sqrt[:, None]).multiply(inv_sqrt[None, :])
    return np.eye(g.n) - normalized.toarray()


def _canonical_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    if vecs.size == 0:
        return vecs
    pivots = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivots, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _residuals(g: Graph, values: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    return np.linalg.norm(laplacian_apply(g, vecs) - vecs * values, axis=0)


def _dense_pairs(g: Graph) -> Spectrum:
    values, vecs = scipy.linalg.eigh(dense_laplacian(g))
    vecs = _canonical_signs(vecs)
    return Spectrum(values, vecs, _residuals(g, values, vecs), 'dense')


def dense_spectrum_oracle(g: Graph) -> Spectrum:
    """Full spectrum via LAPACK's symmetric eigensolver; used as ground truth."""
    if g.n > DENSE_GUARD:
        raise UsageError(f"dense oracle refused for n={g.n} > {DENSE_GUARD}")
    if g.n == 0:
        raise DataError("graph has no vertices")
    return _dense_pairs(g)


def _orthogonalize(x: np.ndarray, *bases: np.ndarray) -> np.ndarray:
    # Two passes of classical Gram-Schmidt keep the basis orthogonal to
    # working precision.
    for _ in range(2):
        for basis in bases:
            if basis.shape[1]:
                x = x - basis @ (basis.T @ x)
    return x


class _ShiftedLanczos:
    """Thick-restart Lanczos with full reorthogonalization and locking on M = 2I - L."""

    def __init__(self, g: Graph, tol: float, max_iter: int, basis_cap: Optional[int] = None):
        self.g = g
        self.n = g.n
        self.tol = tol
        self.max_iter = max_iter
        self.basis_cap = basis_cap
        self.rng = make_rng(START_VECTOR_SEED)
        self.matvecs = 0
        self.locked_vecs = np.empty((self.n, 0))
        self.locked_theta: list[float] = []
        self.V = np.empty((self.n, 0))
        self.W = np.empty((self.n, 0))

    def _apply(self, q: np.ndarray) -> np.ndarray:
        self.matvecs += 1
        return 2.0 * q - laplacian_apply(self.g, q)

    def _fresh(self) -> np.ndarray:
        return _orthogonalize(self.rng.standard_normal(self.n), self.locked_vecs, self.V)

    def _extend(self, candidate: np.ndarray, cap: int) -> None:
        while self.V.shape[1] < cap:
            x = _orthogonalize(candidate, self.locked_vecs, self.V)
            norm = np.linalg.norm(x)
            if norm <= 1e-10 * max(1.0, np.linalg.norm(candidate)):
                # Invariant subspace reached: continue from a new random direction.
                x = self._fresh()
                norm = np.linalg.norm(x)
                if norm <= 1e-10:
                    return
            q = x / norm
            w = self._apply(q)
            self.V = np.column_stack([self.V, q])
            self.W = np.column_stack([self.W, w])
            candidate = w

    def _ritz(self):
        H = self.V.T @ self.W
        H = 0.5 * (H + H.T)
        theta, S = scipy.linalg.eigh(H)
        order = np.argsort(-theta, kind='stable')
        theta, S = theta[order], S[:, order]
        Y = self.V @ S
        MY = self.W @ S
        res = np.linalg.norm(MY - Y * theta, axis=0)
        return theta, Y, MY, res

    def _lock(self, Y: np.ndarray, theta: np.ndarray) -> None:
        self.locked_vecs = np.column_stack([self.locked_vecs, Y])
        self.locked_theta.extend(float(t) for t in theta)

    def solve(self, target: int) -> tuple[np.ndarray, np.ndarray]:
        """Lock `target` converged pairs, largest theta first."""
        cap_default = max(2 * target + 20, 40) if self.basis_cap is None else self.basis_cap
        candidate = self._fresh()
        while len(self.locked_theta) < target:
            room = self.n - self.locked_vecs.shape[1]
            cap = min(cap_default, room)
            self._extend(candidate, cap)
            if self.V.shape[1] == 0:
                break
            theta, Y, MY, res = self._ritz()
            need = target - len(self.locked_theta)
            nlock = 0
            while nlock < min(need, theta.size) and res[nlock] <= self.tol:
                nlock += 1
            if nlock:
                self._lock(Y[:, :nlock], theta[:nlock])
                logger.debug("Locked %d pairs (total %d) after %d matvecs",
                             nlock, len(self.locked_theta), self.matvecs)
            if len(self.locked_theta) >= target:
                break
            if self.matvecs >= self.max_iter:
                raise ConvergenceError(
                    f"eigensolver did not converge within {self.max_iter} operator applications",
                    res[nlock:nlock + need])
            keep = min(theta.size - nlock, need - nlock + 10, max(cap // 2, 1))
            self.V = Y[:, nlock:nlock + keep]
            self.W = MY[:, nlock:nlock + keep]
            if keep:
                candidate = MY[:, nlock] - theta[nlock] * Y[:, nlock]
            else:
                candidate = self._fresh()
        return np.asarray(self.locked_theta), self.locked_vecs

    def missed_pair(self) -> bool:
        """Probe the complement of the locked space for a pair that should outrank the locked ones."""
        if self.locked_vecs.shape[1] >= self.n:
            return False
        self.V = np.empty((self.n, 0))
        self.W = np.empty((self.n, 0))
        room = self.n - self.locked_vecs.shape[1]
        cap = min(max(2 * len(self.locked_theta) + 20, 40) if self.basis_cap is None
                  else self.basis_cap, room)
        self._extend(self._fresh(), cap)
        if self.V.shape[1] == 0:
            return False
        theta, _, _, _ = self._ritz()
        return bool(theta[0] > min(self.locked_theta) + self.tol)


def _lanczos_spectrum(g: Graph, k: int, tol: float, max_iter: int,
                      basis_cap: Optional[int] = None) -> Spectrum:
    solver = _ShiftedLanczos(g, tol, max_iter, basis_cap)
    target = k
    limit = min(k + 5, g.n)
    solver.solve(target)
    # Single-vector Krylov spaces see one direction per eigenspace; a test vector
    # orthogonal to the locked vectors catches a copy of a repeated eigenvalue
    # that was skipped, and we take one more pair for each one found.
    while target < limit and solver.missed_pair():
        target += 1
        solver.solve(target)
    theta = np.asarray(solver.locked_theta)
    order = np.argsort(-theta, kind='stable')[:k]
    values = 2.0 - theta[order]
    vecs = solver.locked_vecs[:, order]
    vecs = _canonical_signs(vecs / np.linalg.norm(vecs, axis=0))
    logger.info("Lanczos converged: n=%d k=%d pairs=%d matvecs=%d",
                g.n, k, len(solver.locked_theta), solver.matvecs)
    return Spectrum(values, vecs, _residuals(g, values, vecs), 'lanczos')


def compute_spectrum(g: Graph, k: int, tol: Optional[float] = None,
                     max_iter: Optional[int] = None,
                     dense_cutoff: Optional[int] = None,
                     basis_cap: Optional[int] = None) -> Spectrum:
    """The k algebraically smallest eigenpairs of L.

    Graphs with n <= dense_cutoff go through the dense solver; larger ones
    through restarted Lanczos on 2I - L. Deterministic for a given graph.
    """
    tol = config.SOLVER_TOL if tol is None else tol
    dense_cutoff = config.DENSE_CUTOFF if dense_cutoff is None else dense_cutoff
    max_iter = 10 * g.n if max_iter is None else max_iter
    if not 1 <= k <= g.n:
        raise UsageError(f"k must be in [1, n={g.n}], got {k}")
    g.require_positive_degrees()
    if g.n <= dense_cutoff:
        spec = _dense_pairs(g).truncated(k)
        logger.info("Dense spectrum: n=%d k=%d lambda_k=%.6g", g.n, k, spec.eigenvalues[-1])
        return spec
    return _lanczos_spectrum(g, k, tol, max_iter, basis_cap)


def embed(g: Graph, spec: Spectrum, k: int) -> Embedding:
    """f(u) = deg(u)^(-1/2) (xi_1(u), ..., xi_k(u))."""
    if k < 1 or k > spec.m:
        raise UsageError(f"embedding dimension {k} exceeds the {spec.m} available eigenpairs")
    if spec.n != g.n:
        raise DataError(f"spectrum has length {spec.n} but graph has n={g.n}")
    inv_sqrt = _inv_sqrt_degrees(g)
    points = spec.eigenvectors[:, :k] * inv_sqrt[:, None]
    return Embedding(points=points, graph=g, spectrum=spec)


def embedding_identities(emb: Embedding) -> tuple[np.ndarray, np.ndarray]:
    """Per coordinate: (sum over edges of (x_i(u) - x_i(v))^2, sum_u deg(u) x_i(u)^2).

    For exact eigenpairs the first equals lambda_i and the second equals 1.
    """
    g = emb.graph
    u, v = g.edges[:, 0], g.edges[:, 1]
    diffs = emb.points[u] - emb.points[v]
    edge_energy = np.sum(diffs * diffs, axis=0)
    weighted_norm = np.sum(g.deg[:, None] * emb.points * emb.points, axis=0)
    return edge_energy, weighted_norm
