import math

import numpy as np
import pytest

from errors import DataError, DegreeError, GraphFormatError, PartitionError, UsageError
from graph_core import (
    Graph, Partition, PlantedModel, complete_graph, cycle_graph, disjoint_union,
    generate_planted, induced_subgraph, knn_graph, load_edge_list, path_graph,
    petersen_graph, read_partition, save_edge_list, two_triangles_bridge, write_partition,
)


def test_from_edges_canonical_order_and_degrees():
    g = Graph.from_edges(4, [(3, 1), (0, 2), (1, 0)])
    assert g.edges.tolist() == [[0, 1], [0, 2], [1, 3]]
    assert g.deg.tolist() == [2, 2, 1, 1]
    assert g.vol_total == 2 * g.num_edges
    assert g.d_max == 2
    assert g.neighbors(0).tolist() == [1, 2]


def test_graph_is_immutable():
    g = cycle_graph(5)
    with pytest.raises(ValueError):
        g.edges[0, 0] = 3


@pytest.mark.parametrize('pairs, fragment', [
    ([(0, 0)], 'self-loop'),
    ([(0, 1), (1, 0)], 'duplicate'),
    ([(0, 7)], 'outside'),
])
def test_from_edges_rejects_bad_pairs(pairs, fragment):
    with pytest.raises(GraphFormatError, match=fragment):
        Graph.from_edges(3, pairs)


def test_degree_zero_vertices_are_kept_but_refused_by_spectral_ops():
    g = Graph.from_edges(4, [(0, 1), (1, 2)])
    assert g.isolated_vertices().tolist() == [3]
    with pytest.raises(DegreeError):
        g.require_positive_degrees()


def test_standard_graphs():
    assert complete_graph(5).num_edges == 10
    assert cycle_graph(6).deg.tolist() == [2] * 6
    assert path_graph(4).deg.tolist() == [1, 2, 2, 1]
    pet = petersen_graph()
    assert pet.num_edges == 15 and set(pet.deg.tolist()) == {3}
    bridge = two_triangles_bridge()
    assert bridge.num_edges == 7
    assert (2, 3) in bridge.edge_set()
    with pytest.raises(UsageError):
        cycle_graph(2)


def test_disjoint_union_components(two_k3):
    count, labels = two_k3.component_labels()
    assert count == 2
    assert labels[:3].tolist() == [labels[0]] * 3
    assert labels[0] != labels[3]
    assert disjoint_union(path_graph(2), path_graph(3)).n == 5


def test_induced_subgraph_relabels_in_id_order():
    g = two_triangles_bridge()
    h, idx = induced_subgraph(g, [5, 2, 3, 4])
    assert idx.tolist() == [2, 3, 4, 5]
    assert h.edge_set() == {(0, 1), (1, 2), (1, 3), (2, 3)}
    with pytest.raises(DataError):
        induced_subgraph(g, [])


def test_induced_subgraph_small_cases():
    k3, idx = induced_subgraph(complete_graph(4), {0, 1, 2})
    assert idx.tolist() == [0, 1, 2]
    assert k3.edge_set() == complete_graph(3).edge_set()
    pair, idx = induced_subgraph(path_graph(3), {0, 2})
    assert idx.tolist() == [0, 2]
    assert pair.n == 2 and pair.num_edges == 0


@pytest.mark.parametrize('g', [cycle_graph(7), petersen_graph(), two_triangles_bridge()])
def test_induced_subgraph_on_all_vertices_is_identity(g):
    h, idx = induced_subgraph(g, range(g.n))
    assert idx.tolist() == list(range(g.n))
    assert h.n == g.n
    np.testing.assert_array_equal(h.edges, g.edges)


def test_load_edge_list_with_comments_and_vertex_directive(tmp_path):
    path = tmp_path / 'g.txt'
    path.write_text("# a comment\n# vertices: 6\n0 1\n\n1 2\n4 2\n", encoding='utf-8')
    g = load_edge_list(path)
    assert g.n == 6
    assert g.isolated_vertices().tolist() == [3, 5]
    assert g.edge_set() == {(0, 1), (1, 2), (2, 4)}


def test_gaps_in_vertex_ids_become_isolated_vertices(tmp_path):
    path = tmp_path / 'g.txt'
    path.write_text("0 1\n1 3\n", encoding='utf-8')
    g = load_edge_list(path)
    assert g.n == 4
    assert g.isolated_vertices().tolist() == [2]


@pytest.mark.parametrize('body, line, fragment', [
    ("0 1\n1 2 3\n", 2, 'expected 2 fields'),
    ("0 1\n# ok\nx 2\n", 3, 'non-integer'),
    ("0 1\n2 2\n", 2, 'self-loop'),
    ("0 1\n1 2\n1 0\n", 3, 'duplicate edge'),
    ("0 -1\n", 1, 'non-negative'),
])
def test_load_edge_list_reports_line_numbers(tmp_path, body, line, fragment):
    path = tmp_path / 'bad.txt'
    path.write_text(body, encoding='utf-8')
    with pytest.raises(GraphFormatError) as err:
        load_edge_list(path)
    assert str(err.value).startswith(f"line {line}:")
    assert fragment in str(err.value)
    assert err.value.line == line


def test_load_edge_list_rejects_invalid_utf8_with_line(tmp_path):
    path = tmp_path / 'binary.txt'
    path.write_bytes(b'0 1\n1 2\n\xff\xfe 3\n')
    with pytest.raises(GraphFormatError) as err:
        load_edge_list(path)
    assert err.value.line == 3
    assert 'UTF-8' in str(err.value)


def test_load_edge_list_vertex_guard_runs_before_allocation(tmp_path):
    path = tmp_path / 'huge.txt'
    path.write_text('0 1\n0 2000000000\n', encoding='utf-8')
    with pytest.raises(UsageError, match='--force'):
        load_edge_list(path, max_n=1_000_000)
    declared = tmp_path / 'declared.txt'
    declared.write_text('# vertices: 11\n0 1\n', encoding='utf-8')
    with pytest.raises(UsageError):
        load_edge_list(declared, max_n=10)
    assert load_edge_list(declared, max_n=11).n == 11


def test_load_edge_list_empty_and_missing(tmp_path):
    path = tmp_path / 'empty.txt'
    path.write_text("# nothing here\n", encoding='utf-8')
    with pytest.raises(GraphFormatError):
        load_edge_list(path)
    with pytest.raises(DataError, match='not found'):
        load_edge_list(tmp_path / 'missing.txt')


def test_save_and_load_preserve_trailing_isolated_vertices(tmp_path):
    g = Graph.from_edges(5, [(0, 1), (1, 2)])
    path = save_edge_list(g, tmp_path / 'g.txt')
    text = path.read_text(encoding='utf-8')
    assert text.splitlines()[:3] == ['# vertices: 5', '# edges: 2', '0 1']
    back = load_edge_list(path)
    assert back.n == 5
    np.testing.assert_array_equal(back.edges, g.edges)


def test_partition_from_clusters_checks_cover_and_overlap():
    p = Partition.from_clusters(5, [[0, 1], [2, 3, 4]])
    assert p.labels.tolist() == [0, 0, 1, 1, 1]
    assert p.sizes().tolist() == [2, 3]
    assert [c.tolist() for c in p.clusters()] == [[0, 1], [2, 3, 4]]
    with pytest.raises(PartitionError, match='overlaps'):
        Partition.from_clusters(3, [[0, 1], [1, 2]])
    with pytest.raises(PartitionError, match='no cluster'):
        Partition.from_clusters(3, [[0], [1]])
    with pytest.raises(PartitionError):
        Partition(labels=np.array([0, 2]), k=2)


def test_partition_reports_empty_clusters():
    p = Partition(labels=np.array([0, 0, 2]), k=4)
    assert p.empty_clusters() == [1, 3]
    assert [c.size for c in p.clusters()] == [2, 0, 1, 0]


def test_partition_csv_round_trip(tmp_path):
    p = Partition.from_labels([1, 0, 1, 2])
    path = write_partition(p, tmp_path / 'p.csv')
    assert path.read_text(encoding='utf-8').splitlines()[0] == 'vertex,cluster'
    back = read_partition(path, n=4)
    assert back.labels.tolist() == [1, 0, 1, 2]
    assert back.k == 3


@pytest.mark.parametrize('body, fragment', [
    ("node,cluster\n0,0\n", 'header'),
    ("vertex,cluster\n0,0\n0,1\n", 'exactly once'),
    ("vertex,cluster\n0,0\n1,a\n", 'integers'),
    ("vertex,cluster\n0,0\n1,-1\n", 'non-negative'),
])
def test_read_partition_rejects_malformed_files(tmp_path, body, fragment):
    path = tmp_path / 'p.csv'
    path.write_text(body, encoding='utf-8')
    with pytest.raises(PartitionError, match=fragment):
        read_partition(path)


def test_read_partition_checks_vertex_count(tmp_path):
    path = write_partition(Partition.from_labels([0, 1, 1]), tmp_path / 'p.csv')
    with pytest.raises(PartitionError):
        read_partition(path, n=4)


def test_planted_model_validation():
    with pytest.raises(UsageError):
        PlantedModel(block_sizes=(3, 3), p_in=0.1, p_mid=0.5, p_out=0.0)
    with pytest.raises(UsageError):
        PlantedModel(block_sizes=(3, 3), p_in=0.5, p_mid=0.1, p_out=0.0, supergroups=((0,),))
    model = PlantedModel.two_level_default()
    assert model.n == 200 and model.k == 5
    assert model.probability(0, 1) == 0.05
    assert model.probability(1, 2) == 0.005
    assert model.supergroup_labels()[[0, 79, 80, 199]].tolist() == [0, 0, 1, 1]


def test_planted_generation_is_deterministic():
    model = PlantedModel(block_sizes=(10, 12), p_in=0.6, p_mid=0.1, p_out=0.1, seed=3)
    g1, _ = generate_planted(model)
    g2, _ = generate_planted(model)
    np.testing.assert_array_equal(g1.edges, g2.edges)
    other, _ = generate_planted(PlantedModel(block_sizes=(10, 12), p_in=0.6, p_mid=0.1,
                                             p_out=0.1, seed=4))
    assert other.edge_set() != g1.edge_set()


def test_planted_extreme_probabilities():
    g, blocks = generate_planted(PlantedModel(block_sizes=(3, 3), p_in=1.0, p_mid=0.0,
                                              p_out=0.0, seed=1))
    assert g.edge_set() == disjoint_union(complete_graph(3), complete_graph(3)).edge_set()
    assert blocks.labels.tolist() == [0, 0, 0, 1, 1, 1]
    empty, blocks = generate_planted(PlantedModel(block_sizes=(2,), p_in=0.0, p_mid=0.0,
                                                  p_out=0.0, seed=1))
    assert empty.n == 2 and empty.num_edges == 0
    assert empty.deg.tolist() == [0, 0]
    assert blocks.k == 1


def test_planted_edge_counts_within_four_sigma(planted):
    g, blocks, model = planted
    groups = model.supergroup_labels()
    u, v = g.edges[:, 0], g.edges[:, 1]
    same_block = blocks.labels[u] == blocks.labels[v]
    same_group = groups[u] == groups[v]
    observed = {
        'in': int(np.count_nonzero(same_block)),
        'mid': int(np.count_nonzero(~same_block & same_group)),
        'out': int(np.count_nonzero(~same_group)),
    }
    probs = {'in': model.p_in, 'mid': model.p_mid, 'out': model.p_out}
    for level, pairs in model.candidate_pairs().items():
        p = probs[level]
        sigma = math.sqrt(pairs * p * (1 - p))
        assert abs(observed[level] - pairs * p) <= 4 * sigma, level


def test_planted_blocks_are_ground_truth(planted):
    g, blocks, _ = planted
    assert blocks.sizes().tolist() == [40] * 5
    assert g.isolated_vertices().size == 0


def test_knn_graph_on_two_separated_clouds():
    rng = np.random.default_rng(0)
    points = np.vstack([rng.normal(0.0, 0.1, size=(15, 2)),
                        rng.normal(10.0, 0.1, size=(15, 2))])
    g = knn_graph(points, 3)
    count, labels = g.component_labels()
    assert count == 2
    assert len(set(labels[:15])) == 1
    assert g.deg.min() >= 3
    assert np.all(g.edges[:, 0] < g.edges[:, 1])
    with pytest.raises(UsageError):
        knn_graph(points, 30)
