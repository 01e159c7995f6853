import math

import numpy as np
import pytest

from errors import ConvergenceError, DataError, DegreeError, UsageError
from graph_core import (
    Graph, PlantedModel, complete_graph, cycle_graph, generate_planted, path_graph,
    petersen_graph, two_triangles_bridge,
)
from spectral import (
    compute_spectrum, dense_laplacian, dense_spectrum_oracle, embed, embedding_identities,
    laplacian_apply,
)


def _corpus():
    """Fifty graphs mixing complete graphs, cycles and small planted partitions."""
    graphs = []
    for i in range(50):
        kind = i % 5
        if kind == 0:
            graphs.append(complete_graph(4 + i % 23))
        elif kind == 1:
            graphs.append(cycle_graph(5 + i))
        else:
            blocks = 2 + i % 4
            model = PlantedModel(block_sizes=(15 + (i % 7) * 5,) * blocks, p_in=0.7,
                                 p_mid=0.08, p_out=0.02, seed=100 + i)
            graphs.append(generate_planted(model)[0])
    graphs.append(generate_planted(PlantedModel(block_sizes=(100, 100, 100), p_in=0.3,
                                                p_mid=0.02, p_out=0.02, seed=5))[0])
    return graphs


CORPUS = _corpus()


def _projector(vecs):
    return vecs @ vecs.T


@pytest.mark.parametrize('n', range(3, 13))
def test_complete_graph_spectrum(n):
    spec = compute_spectrum(complete_graph(n), n)
    expected = [0.0] + [n / (n - 1)] * (n - 1)
    np.testing.assert_allclose(spec.eigenvalues, expected, atol=1e-10)


@pytest.mark.parametrize('n', range(3, 13))
def test_cycle_spectrum(n):
    spec = compute_spectrum(cycle_graph(n), n)
    expected = np.sort(1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))
    np.testing.assert_allclose(spec.eigenvalues, expected, atol=1e-10)


def test_petersen_second_eigenvalue():
    spec = compute_spectrum(petersen_graph(), 7)
    np.testing.assert_allclose(spec.eigenvalues, [0.0] + [2.0 / 3.0] * 5 + [5.0 / 3.0], atol=1e-10)


def test_two_triangles_kernel(two_k3):
    spec = dense_spectrum_oracle(two_k3)
    assert spec.kernel_dimension() == 2
    np.testing.assert_allclose(spec.eigenvalues, [0, 0, 1.5, 1.5, 1.5, 1.5], atol=1e-12)


@pytest.mark.parametrize('index', range(len(CORPUS)))
def test_lanczos_matches_dense_oracle(index):
    g = CORPUS[index]
    k = min(6, g.n)
    spec = compute_spectrum(g, k, dense_cutoff=0)
    assert spec.method == 'lanczos'
    oracle = dense_spectrum_oracle(g)
    np.testing.assert_allclose(spec.eigenvalues, oracle.eigenvalues[:k], atol=1e-8)
    assert np.max(spec.residuals) <= 1e-8
    np.testing.assert_allclose(spec.eigenvectors.T @ spec.eigenvectors, np.eye(k), atol=1e-8)
    # Eigenvectors are only defined up to the eigenspace; compare projectors
    # when the k-th eigenvalue is separated from the next.
    if k < g.n and oracle.eigenvalues[k] - oracle.eigenvalues[k - 1] > 1e-6:
        np.testing.assert_allclose(_projector(spec.eigenvectors),
                                   _projector(oracle.eigenvectors[:, :k]), atol=1e-6)


@pytest.mark.parametrize('index', range(0, len(CORPUS), 3))
def test_kernel_dimension_counts_components(index):
    g = CORPUS[index]
    components, _ = g.component_labels()
    assert dense_spectrum_oracle(g).kernel_dimension() == components


@pytest.mark.parametrize('index', range(len(CORPUS)))
def test_rayleigh_and_normalization_identities(index):
    g = CORPUS[index]
    k = min(5, g.n)
    spec = compute_spectrum(g, k)
    energy, norms = embedding_identities(embed(g, spec, k))
    np.testing.assert_allclose(energy, spec.eigenvalues, atol=1e-6)
    np.testing.assert_allclose(norms, np.ones(k), atol=1e-8)


def test_lanczos_handles_disconnected_graph(two_k3):
    spec = compute_spectrum(two_k3, 3, dense_cutoff=0)
    np.testing.assert_allclose(spec.eigenvalues, [0.0, 0.0, 1.5], atol=1e-10)


def test_spectrum_is_deterministic(planted):
    g, _, _ = planted
    a = compute_spectrum(g, 5, dense_cutoff=0)
    b = compute_spectrum(g, 5, dense_cutoff=0)
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
    np.testing.assert_array_equal(a.eigenvectors, b.eigenvectors)


def test_eigenvector_signs_are_canonical(planted_spectrum):
    vecs = planted_spectrum.eigenvectors
    pivots = np.argmax(np.abs(vecs), axis=0)
    assert np.all(vecs[pivots, np.arange(vecs.shape[1])] > 0)


def test_planted_spectrum_has_gaps_at_two_and_five(planted_spectrum):
    lam = planted_spectrum.eigenvalues
    assert lam[5] - lam[4] > lam[4] - lam[3]
    assert lam[2] - lam[1] > lam[1] - lam[0]


def test_convergence_failure_reports_residuals(planted):
    g, _, _ = planted
    with pytest.raises(ConvergenceError) as err:
        compute_spectrum(g, 5, tol=0.0, max_iter=50, dense_cutoff=0)
    assert err.value.residuals
    assert 'worst residual' in str(err.value)
    assert err.value.exit_code == 3


def test_laplacian_apply_matches_dense_matrix():
    g = two_triangles_bridge()
    rng = np.random.default_rng(1)
    v = rng.standard_normal(g.n)
    block = rng.standard_normal((g.n, 3))
    L = dense_laplacian(g)
    np.testing.assert_allclose(laplacian_apply(g, v), L @ v, atol=1e-14)
    np.testing.assert_allclose(laplacian_apply(g, block), L @ block, atol=1e-14)
    with pytest.raises(DataError):
        laplacian_apply(g, np.ones(g.n + 1))


def test_spectral_ops_refuse_degree_zero():
    g = Graph.from_edges(3, [(0, 1)])
    with pytest.raises(DegreeError):
        laplacian_apply(g, np.ones(3))
    with pytest.raises(DegreeError):
        compute_spectrum(g, 2)


def test_compute_spectrum_rejects_bad_k():
    g = cycle_graph(5)
    with pytest.raises(UsageError):
        compute_spectrum(g, 6)
    with pytest.raises(UsageError):
        compute_spectrum(g, 0)


def test_dense_oracle_size_guard():
    with pytest.raises(UsageError):
        dense_spectrum_oracle(cycle_graph(2001))


def test_embedding_of_single_edge():
    g = path_graph(2)
    emb = embed(g, compute_spectrum(g, 2), 2)
    assert emb.points[0, 0] == pytest.approx(1.0 / math.sqrt(2.0))
    assert emb.points[0, 0] == pytest.approx(emb.points[1, 0])


def test_one_dimensional_embedding_is_constant():
    g = two_triangles_bridge()
    emb = embed(g, compute_spectrum(g, 1), 1)
    np.testing.assert_allclose(emb.points[:, 0], emb.points[0, 0], atol=1e-12)


def test_two_triangles_embedding_is_constant_per_component(two_k3):
    emb = embed(two_k3, compute_spectrum(two_k3, 2), 2)
    np.testing.assert_allclose(emb.points[:3], np.tile(emb.points[0], (3, 1)), atol=1e-12)
    np.testing.assert_allclose(emb.points[3:], np.tile(emb.points[3], (3, 1)), atol=1e-12)
    assert np.linalg.norm(emb.points[0] - emb.points[3]) == pytest.approx(math.sqrt(1 / 6 + 1 / 6))


def test_embed_rejects_missing_pairs():
    g = cycle_graph(6)
    spec = compute_spectrum(g, 2)
    with pytest.raises(UsageError):
        embed(g, spec, 3)
    with pytest.raises(DataError):
        embed(cycle_graph(7), spec, 2)
