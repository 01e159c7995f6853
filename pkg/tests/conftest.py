import pytest

from graph_core import (
    PlantedModel, complete_graph, disjoint_union, generate_planted, save_edge_list,
)
from spectral import compute_spectrum, embed


@pytest.fixture(scope='session')
def planted():
    """The seed-7 five-block instance: (graph, blocks, model)."""
    model = PlantedModel.two_level_default(seed=7)
    g, blocks = generate_planted(model)
    return g, blocks, model


@pytest.fixture(scope='session')
def planted_spectrum(planted):
    g, _, _ = planted
    return compute_spectrum(g, 6)


@pytest.fixture(scope='session')
def planted_embedding(planted, planted_spectrum):
    g, _, _ = planted
    return embed(g, planted_spectrum, 5)


@pytest.fixture
def two_k3():
    return disjoint_union(complete_graph(3), complete_graph(3))


@pytest.fixture
def graph_file(tmp_path):
    """Write a graph to an edge-list file and return its path."""
    def _write(g, name='graph.txt'):
        return save_edge_list(g, tmp_path / name)
    return _write
