#!/usr/bin/env python3
"""
🧪 GRAPH TOPOLOGY TESTING SUITE 🧪

Validates the communication-graph layer:
• Snapshot construction, self-edges and edge validation
• Strong connectivity and window unions
• B-connectivity and the cut-crossing condition
• Seeded random sequences with connectivity repair
• JSON round trips for snapshots and sequences
"""

import json

import numpy as np
import pytest

from core.graph_topology import (
    AvgnetError,
    GraphSnapshot,
    PeriodicTopology,
    RandomGraphTopology,
    RoundCache,
    StaticTopology,
    TopologyRangeError,
    check_b_connectivity,
    check_cut_assumption,
    cut_assumption_holds,
    is_strongly_connected,
    load_sequence,
    make_rng,
    save_sequence,
    sorted_order,
    union_graph,
)


class TestGraphSnapshot:
    """Test snapshot construction"""

    def test_self_edges_always_present(self):
        g = GraphSnapshot(3, frozenset())
        assert g.edges == {(0, 0), (1, 1), (2, 2)}
        assert g.cross_edges.shape == (0, 2)

    def test_out_of_range_edge_rejected(self):
        with pytest.raises(AvgnetError):
            GraphSnapshot(3, frozenset({(0, 3)}))

    def test_undirected_builder_adds_reverse_edges(self):
        g = GraphSnapshot.from_edges(3, [(0, 1)], undirected=True)
        assert (1, 0) in g.edges and (0, 1) in g.edges
        assert g.is_undirected()

    def test_directed_cycle_is_not_undirected(self):
        g = GraphSnapshot.from_edges(3, [(0, 1), (1, 2), (2, 0)])
        assert not g.is_undirected()

    def test_from_matrix_uses_positive_entries(self):
        # a_10 > 0 means node 1 receives from node 0
        g = GraphSnapshot.from_matrix(np.array([[1.0, 0.0], [0.5, 0.5]]))
        assert (0, 1) in g.edges
        assert (1, 0) not in g.edges

    def test_neighbors_and_degree(self):
        g = GraphSnapshot.star(4)
        assert g.neighbors[0] == (1, 2, 3)
        assert g.neighbors[2] == (0,)
        assert g.degree(0) == 3
        assert g.degree(3) == 1

    def test_complete_graph_edges(self):
        g = GraphSnapshot.complete(4)
        assert len(g.edges) == 16


class TestStrongConnectivity:
    """Test reachability checks"""

    def test_self_edges_only_disconnected(self):
        assert not is_strongly_connected(GraphSnapshot(3, frozenset()))

    def test_directed_cycle_connected(self):
        g = GraphSnapshot.from_edges(3, [(0, 1), (1, 2), (2, 0)])
        assert is_strongly_connected(g)

    def test_single_directed_edge_not_connected(self):
        g = GraphSnapshot.from_edges(2, [(0, 1)])
        assert not is_strongly_connected(g)

    def test_single_node_connected(self):
        assert is_strongly_connected(GraphSnapshot(1, frozenset()))


class TestUnionGraph:
    """Test window unions"""

    def test_single_round_window(self):
        g = GraphSnapshot.path(4)
        seq = StaticTopology(g)
        assert union_graph(seq, 5, 5) == g

    def test_union_collects_edges_of_each_round(self):
        a = GraphSnapshot.from_edges(3, [(0, 1)])
        b = GraphSnapshot.from_edges(3, [(1, 2)])
        union = union_graph(PeriodicTopology([a, b], window=2), 0, 1)
        assert (0, 1) in union.edges and (1, 2) in union.edges

    def test_identical_snapshots_idempotent(self):
        g = GraphSnapshot.cycle(5)
        assert union_graph(StaticTopology(g, window=4), 0, 3) == g

    def test_empty_range_rejected(self):
        with pytest.raises(AvgnetError):
            union_graph(StaticTopology(GraphSnapshot.path(3)), 2, 1)


class TestBConnectivity:
    """Test the window connectivity checker"""

    def test_static_complete_graph(self):
        assert check_b_connectivity(StaticTopology(GraphSnapshot.complete(5), window=3), 4)

    def test_alternating_pairs_form_path(self):
        first = GraphSnapshot.from_edges(3, [(0, 1)], undirected=True)
        second = GraphSnapshot.from_edges(3, [(1, 2)], undirected=True)
        seq = PeriodicTopology([first, second], window=2)
        assert check_b_connectivity(seq, 5)

    def test_alternating_pairs_fail_with_unit_window(self):
        first = GraphSnapshot.from_edges(3, [(0, 1)], undirected=True)
        second = GraphSnapshot.from_edges(3, [(1, 2)], undirected=True)
        assert not check_b_connectivity(PeriodicTopology([first, second], window=1), 2)

    def test_split_graph_never_connected(self):
        split = GraphSnapshot.from_edges(4, [(0, 1), (2, 3)], undirected=True)
        assert not check_b_connectivity(StaticTopology(split, window=3), 2)


class TestCutAssumption:
    """Test the cut-crossing condition"""

    def test_constant_x_always_holds(self):
        seq = StaticTopology(GraphSnapshot(4, frozenset()))
        assert check_cut_assumption(seq, 0, [2.0, 2.0, 2.0, 2.0])

    def test_long_edge_crosses_both_cuts(self):
        g = GraphSnapshot.from_edges(3, [(0, 2)], undirected=True)
        assert check_cut_assumption(StaticTopology(g), 0, [3.0, 2.0, 1.0])

    def test_uncrossed_cut_fails(self):
        g = GraphSnapshot.from_edges(3, [(0, 1)], undirected=True)
        assert not check_cut_assumption(StaticTopology(g), 0, [3.0, 2.0, 1.0])

    def test_equal_values_exempt_cut(self):
        g = GraphSnapshot.from_edges(3, [(0, 1)], undirected=True)
        assert cut_assumption_holds([g], [3.0, 1.0, 1.0])

    def test_direction_does_not_matter(self):
        g = GraphSnapshot.from_edges(3, [(2, 0)])
        assert cut_assumption_holds([g], [3.0, 2.0, 1.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(AvgnetError):
            check_cut_assumption(StaticTopology(GraphSnapshot.path(3)), 0, [1.0, 2.0])

    @pytest.mark.parametrize("seed", range(100))
    def test_b_connectivity_implies_cut_condition(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 12))
        window = int(rng.integers(1, 4))
        seq = RandomGraphTopology(n, seed, window=window, p=0.15)
        assert check_b_connectivity(seq, 3)
        for index in range(3):
            x = rng.integers(0, 4, size=n).astype(float)
            assert check_cut_assumption(seq, index, x)


class TestRandomGraphTopology:
    """Test seeded random sequences"""

    def test_same_seed_same_snapshots(self):
        a = RandomGraphTopology(10, 7, window=2)
        b = RandomGraphTopology(10, 7, window=2)
        for k in (0, 1, 2, 9, 4):
            assert a.snapshot(k) == b.snapshot(k)

    def test_access_order_does_not_matter(self):
        forward = RandomGraphTopology(8, 3, window=3)
        backward = RandomGraphTopology(8, 3, window=3)
        expected = [forward.snapshot(k) for k in range(12)]
        assert [backward.snapshot(k) for k in reversed(range(12))] == expected[::-1]

    def test_repair_makes_sparse_windows_connected(self):
        seq = RandomGraphTopology(15, 1, window=2, p=0.01)
        assert check_b_connectivity(seq, 5)

    def test_snapshots_are_undirected(self):
        seq = RandomGraphTopology(12, 4, model="geometric", radius=0.3)
        assert all(seq.snapshot(k).is_undirected() for k in range(5))

    def test_unknown_model_rejected(self):
        with pytest.raises(AvgnetError):
            RandomGraphTopology(5, 0, model="barabasi")

    def test_horizon_enforced(self):
        seq = RandomGraphTopology(5, 0, horizon=3)
        seq.snapshot(3)
        with pytest.raises(TopologyRangeError):
            seq.snapshot(4)


class TestHelpers:
    """Test PRNG, ordering and caching helpers"""

    @pytest.mark.parametrize("algorithm", ["PCG64", "MT19937", "Philox", "SFC64"])
    def test_make_rng_reproducible(self, algorithm):
        a = make_rng(5, 2, algorithm=algorithm).random(4)
        b = make_rng(5, 2, algorithm=algorithm).random(4)
        np.testing.assert_array_equal(a, b)

    def test_make_rng_keys_separate_streams(self):
        assert make_rng(5, 1).random() != make_rng(5, 2).random()

    def test_unknown_algorithm_rejected(self):
        with pytest.raises(AvgnetError):
            make_rng(1, algorithm="Xorshift")

    def test_sorted_order_ties_by_index(self):
        np.testing.assert_array_equal(sorted_order([1.0, 3.0, 1.0, 3.0]), [1, 3, 0, 2])

    def test_round_cache_evicts_oldest(self):
        built = []
        cache = RoundCache(2)
        for k in (0, 1, 2, 0):
            cache.get_or_build(k, lambda r: built.append(r) or r)
        assert built == [0, 1, 2, 0]


class TestSequenceFiles:
    """Test JSON persistence"""

    def test_sequence_round_trip(self, tmp_path):
        seq = PeriodicTopology([GraphSnapshot.path(4), GraphSnapshot.star(4)], window=2)
        path = save_sequence(seq, tmp_path / "seq.json")
        loaded = load_sequence(path)
        assert loaded.window == 2
        assert loaded.snapshots == seq.snapshots

    def test_bare_snapshot_loads_as_static(self, tmp_path):
        path = tmp_path / "g.json"
        path.write_text(json.dumps({"n": 3, "edges": [[0, 1], [1, 0]]}))
        seq = load_sequence(path)
        assert seq.snapshot(7) == GraphSnapshot.from_edges(3, [(0, 1)], undirected=True)

    def test_fixture_sequence_is_b_connected(self, fixtures_dir):
        seq = load_sequence(fixtures_dir / "alternating_path.json")
        assert seq.window == 2
        assert check_b_connectivity(seq, 3)
