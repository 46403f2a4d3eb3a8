import heapq
import json
import math

import numpy as np
import pytest

from sstgcn.roadgraph import (
    FILTER_KINDS,
    DegenerateGraphError,
    Road,
    RoadNetwork,
    adjacency_weight_matrix,
    build_subgraph,
    distance_weight_matrix,
    floyd_warshall,
    gcn_filter,
    khop_subgraph,
    normalized_laplacian,
    road_midpoint_metric,
)


def make_road(rid, length=100.0, heading=0.0):
    return Road(
        id=rid,
        lanes=2,
        speed_limit=50,
        length_m=length,
        bump=0,
        camera=0,
        poi=[0] * 10,
        heading_deg=heading,
    )


def path_network(n):
    net = RoadNetwork()
    for i in range(n):
        net.add_road(make_road(i))
    for i in range(n - 1):
        net.add_edge(i, i + 1)
    return net


def random_network(rng, n, extra_edges=None):
    net = RoadNetwork()
    for i in range(n):
        net.add_road(make_road(i, length=float(rng.uniform(20, 500))))
    # random spanning tree keeps it connected
    order = rng.permutation(n)
    for idx in range(1, n):
        u = int(order[idx])
        v = int(order[rng.integers(0, idx)])
        net.add_edge(u, v)
    m = extra_edges if extra_edges is not None else n
    for _ in range(m):
        u, v = rng.integers(0, n, 2)
        if u != v:
            net.add_edge(int(u), int(v))
    return net


def dijkstra(nodes, edge_length, src_idx):
    n = len(nodes)
    dist = [math.inf] * n
    dist[src_idx] = 0.0
    heap = [(0.0, src_idx)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v in range(n):
            if v == u:
                continue
            w = edge_length(nodes[u], nodes[v])
            if w is None:
                continue
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


class TestKhop:
    def test_path_by_hand(self):
        net = path_network(4)
        assert khop_subgraph(net, 0, 2) == [0, 1, 2]

    def test_saturation_covers_component(self):
        net = path_network(5)
        assert set(khop_subgraph(net, 2, 10)) == {0, 1, 2, 3, 4}

    def test_unknown_center(self):
        net = path_network(3)
        with pytest.raises(KeyError, match="unknown road id"):
            khop_subgraph(net, 99, 1)

    def test_center_first_then_hop_then_id(self):
        net = RoadNetwork()
        for i in range(5):
            net.add_road(make_road(i))
        net.add_edge(2, 4)
        net.add_edge(2, 1)
        net.add_edge(4, 0)
        net.add_edge(1, 3)
        out = khop_subgraph(net, 2, 2)
        assert out == [2, 1, 4, 0, 3]

    def test_matches_brute_force_on_random_graph(self):
        rng = np.random.default_rng(42)
        net = random_network(rng, 50)
        for center in rng.integers(0, 50, 5):
            center = int(center)
            # independent oracle: frontier expansion k times
            reach = {center}
            for _ in range(3):
                reach |= {v for u in list(reach) for v in net.adjacency[u]}
            assert set(khop_subgraph(net, center, 3)) == reach

    def test_monotone_in_k(self):
        rng = np.random.default_rng(7)
        net = random_network(rng, 30)
        for k in range(1, 5):
            assert set(khop_subgraph(net, 0, k)) <= set(khop_subgraph(net, 0, k + 1))


class TestFloydWarshall:
    def test_triangle_shortcut(self):
        lengths = {(0, 1): 1.0, (1, 2): 2.0, (0, 2): 4.0}

        def edge(u, v):
            return lengths.get((min(u, v), max(u, v)))

        d = floyd_warshall([0, 1, 2], edge)
        assert d[0, 2] == 3.0

    def test_single_node(self):
        d = floyd_warshall([0], lambda u, v: None)
        np.testing.assert_array_equal(d, [[0.0]])

    def test_disconnected_pair_is_inf(self):
        d = floyd_warshall([0, 1], lambda u, v: None)
        assert math.isinf(d[0, 1])

    def test_negative_length_rejected(self):
        with pytest.raises(ValueError, match="must be positive"):
            floyd_warshall([0, 1], lambda u, v: -1.0)

    def test_matches_dijkstra_on_random_graphs(self):
        rng = np.random.default_rng(3)
        net = random_network(rng, 12)
        nodes = net.road_ids
        metric = road_midpoint_metric(net)
        d = floyd_warshall(nodes, metric)
        for i in range(len(nodes)):
            np.testing.assert_allclose(d[i], dijkstra(nodes, metric, i), atol=1e-9)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(4)
        net = random_network(rng, 10)
        d = floyd_warshall(net.road_ids, road_midpoint_metric(net))
        n = d.shape[0]
        for k in range(n):
            assert np.all(d <= d[:, k, None] + d[None, k, :] + 1e-9)


class TestDistanceWeights:
    def test_single_node_is_identity(self):
        np.testing.assert_array_equal(distance_weight_matrix(np.array([[0.0]])), [[1.0]])

    def test_two_nodes_at_sigma(self):
        d = np.array([[0.0, 5.0], [5.0, 0.0]])
        w = distance_weight_matrix(d)
        assert w[0, 1] == pytest.approx(math.exp(-1.0))
        assert w[0, 0] == pytest.approx(1.0)

    def test_equidistant_triangle_symmetric(self):
        d = np.full((3, 3), 2.0)
        np.fill_diagonal(d, 0.0)
        w = distance_weight_matrix(d)
        off = w[~np.eye(3, dtype=bool)]
        assert np.allclose(off, off[0])

    def test_disconnected_weight_is_zero(self):
        d = np.array([[0.0, np.inf], [np.inf, 0.0]])
        w = distance_weight_matrix(d)
        assert w[0, 1] == 0.0 and w[0, 0] == 1.0

    def test_entries_bounded(self):
        rng = np.random.default_rng(5)
        net = random_network(rng, 15)
        d = floyd_warshall(net.road_ids, road_midpoint_metric(net))
        w = distance_weight_matrix(d)
        assert np.all(w >= 0.0) and np.all(w <= 1.0)
        assert np.all(np.diag(w) >= 1.0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(6)
        net = random_network(rng, 8)
        nodes = net.road_ids
        d = floyd_warshall(nodes, road_midpoint_metric(net))
        w = distance_weight_matrix(d)
        perm = rng.permutation(len(nodes))
        dp = d[np.ix_(perm, perm)]
        wp = distance_weight_matrix(dp)
        np.testing.assert_allclose(wp, w[np.ix_(perm, perm)], atol=1e-12)


class TestFilters:
    def test_gcn_filter_hand_value(self):
        a = np.array([[1.0, 1.0], [1.0, 1.0]])
        np.testing.assert_allclose(gcn_filter(a), [[0.5, 0.5], [0.5, 0.5]])

    def test_identity_fixed_point(self):
        np.testing.assert_array_equal(gcn_filter(np.eye(3)), np.eye(3))

    def test_spectrum_in_unit_interval(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            n = int(rng.integers(2, 9))
            a = rng.uniform(0, 1, (n, n))
            a = (a + a.T) / 2 + np.eye(n)
            eig = np.linalg.eigvalsh(gcn_filter(a))
            assert eig.min() >= -1 - 1e-9 and eig.max() <= 1 + 1e-9

    def test_zero_row_sum_rejected(self):
        with pytest.raises(DegenerateGraphError, match="zero row sum"):
            gcn_filter(np.zeros((2, 2)))

    def test_laplacian_hand_value(self):
        a = np.array([[1.0, 1.0], [1.0, 1.0]])
        np.testing.assert_allclose(normalized_laplacian(a), [[0.5, -0.5], [-0.5, 0.5]])

    def test_laplacian_of_identity_is_zero(self):
        np.testing.assert_array_equal(normalized_laplacian(np.eye(4)), np.zeros((4, 4)))

    def test_laplacian_eigenvalues_in_zero_two(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            n = int(rng.integers(2, 9))
            a = rng.uniform(0, 1, (n, n))
            a = (a + a.T) / 2 + np.eye(n)
            eig = np.linalg.eigvalsh(normalized_laplacian(a))
            assert eig.min() >= -1e-9 and eig.max() <= 2 + 1e-9

    def test_laplacian_annihilates_constant_on_regular_graphs(self):
        # cycle graph: every node has the same degree
        n = 6
        a = np.eye(n)
        for i in range(n):
            a[i, (i + 1) % n] = a[(i + 1) % n, i] = 1.0
        lap = normalized_laplacian(a)
        np.testing.assert_allclose(lap @ np.ones(n), np.zeros(n), atol=1e-12)

    def test_filters_sum_to_identity_exactly(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            n = int(rng.integers(2, 10))
            a = rng.uniform(0, 1, (n, n))
            a = (a + a.T) / 2 + np.eye(n)
            total = gcn_filter(a) + normalized_laplacian(a)
            assert np.array_equal(total, np.eye(n))

    def test_both_outputs_symmetric(self):
        rng = np.random.default_rng(11)
        a = rng.uniform(0, 1, (7, 7))
        a = (a + a.T) / 2 + np.eye(7)
        g = gcn_filter(a)
        lap = normalized_laplacian(a)
        assert np.array_equal(g, g.T)
        assert np.array_equal(lap, lap.T)


class TestBuildSubgraph:
    def test_four_variants_distinct(self):
        rng = np.random.default_rng(12)
        net = random_network(rng, 10)
        ops = [build_subgraph(net, 0, 2, kind).laplacian for kind in FILTER_KINDS]
        for i in range(len(ops)):
            for j in range(i + 1, len(ops)):
                assert not np.allclose(ops[i], ops[j])

    def test_center_first_and_symmetric(self):
        rng = np.random.default_rng(13)
        net = random_network(rng, 12)
        sub = build_subgraph(net, 3, 2, "dist-lap")
        assert sub.nodes[sub.center_index] == 3
        assert np.array_equal(sub.laplacian, sub.laplacian.T)
        eig = np.linalg.eigvalsh(sub.laplacian)
        assert eig.min() >= -1e-9 and eig.max() <= 2 + 1e-9

    def test_bad_filter_kind(self):
        net = path_network(3)
        with pytest.raises(ValueError, match="filter_kind"):
            build_subgraph(net, 0, 1, "spectral")

    def test_adjacency_matrix_binary_plus_identity(self):
        net = path_network(3)
        a = adjacency_weight_matrix(net, [0, 1, 2])
        np.testing.assert_array_equal(a, [[1, 1, 0], [1, 1, 1], [0, 1, 1]])


class TestRoadNetworkIO:
    def test_json_roundtrip(self, tmp_path):
        rng = np.random.default_rng(14)
        net = random_network(rng, 9)
        p = tmp_path / "net.json"
        net.save(p)
        back = RoadNetwork.load(p)
        assert back.to_json() == net.to_json()

    def test_schema_shape(self, tmp_path):
        net = path_network(2)
        p = tmp_path / "net.json"
        net.save(p)
        doc = json.loads(p.read_text())
        assert set(doc) == {"roads", "edges"}
        assert set(doc["roads"][0]) == {
            "id", "lanes", "speed_limit", "length_m", "bump", "camera", "poi", "heading_deg",
        }

    def test_validation(self):
        net = RoadNetwork()
        with pytest.raises(ValueError, match="lanes"):
            net.add_road(make_road(0).__class__(**{**make_road(0).__dict__, "lanes": 9}))
        with pytest.raises(ValueError, match="positive"):
            net.add_road(make_road(1, length=-5.0))

    def test_self_edge_rejected(self):
        net = path_network(2)
        with pytest.raises(ValueError, match="self-edge"):
            net.add_edge(1, 1)

    def test_adjacency_symmetric(self):
        net = path_network(3)
        assert 0 in net.adjacency[1] and 1 in net.adjacency[0]
