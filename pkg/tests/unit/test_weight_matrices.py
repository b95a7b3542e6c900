#!/usr/bin/env python3
"""
🧪 WEIGHT MATRIX TESTING SUITE 🧪

Validates averaging weights:
• Doubly-stochastic validation and violation reports
• Gram weights and the pairwise decomposition
• Equal-neighbor and circulant constructions
• Random Birkhoff combinations and weighted sequences
"""

import math

import numpy as np
import pytest

from core.graph_topology import GraphSnapshot, RandomGraphTopology, StaticTopology
from core.weight_matrices import (
    BirkhoffTopology,
    EqualNeighborTopology,
    PeriodicWeights,
    WeightMatrix,
    WeightMatrixError,
    circulant_lambda2,
    circulant_matrix,
    circulant_second_eigenvector,
    circulant_time_lower_bound,
    equal_neighbor_matrix,
    gram_decomposition_residual,
    gram_weights,
    load_matrix,
    load_weight_sequence,
    random_birkhoff_matrix,
    save_matrix,
    validate_assumption_1,
)

AVERAGING_PAIR = np.array([[0.5, 0.5], [0.5, 0.5]])


class TestValidation:
    """Test the averaging-matrix checks"""

    def test_identity_passes(self):
        assert validate_assumption_1(np.eye(4), eta=1.0).passed

    def test_symmetric_pair_passes(self):
        assert validate_assumption_1(AVERAGING_PAIR, eta=0.5).passed

    def test_row_stochastic_only_fails_column_sums(self):
        report = validate_assumption_1(np.array([[1.0, 0.0], [0.5, 0.5]]), eta=0.5)
        assert not report.passed
        columns = [v for v in report.violations if v.condition == "column_sum"]
        assert [v.indices for v in columns] == [(0,), (1,)]
        assert columns[0].value == pytest.approx(1.5)

    def test_row_only_mode_accepts_row_stochastic(self):
        report = validate_assumption_1(np.array([[1.0, 0.0], [0.5, 0.5]]), eta=0.5, doubly=False)
        assert report.passed

    def test_small_entry_below_eta_reported(self):
        a = np.array([[0.9, 0.1], [0.1, 0.9]])
        report = validate_assumption_1(a, eta=0.2)
        assert {v.condition for v in report.violations} == {"eta"}
        assert {v.indices for v in report.violations} == {(0, 1), (1, 0)}

    def test_zero_diagonal_and_negative_entries(self):
        a = np.array([[0.0, 1.0, 0.0], [1.2, 0.0, -0.2], [-0.2, 0.0, 1.2]])
        conditions = {v.condition for v in validate_assumption_1(a, eta=0.1).violations}
        assert {"nonnegative", "diagonal"} <= conditions

    def test_raw_array_needs_eta(self):
        with pytest.raises(WeightMatrixError):
            validate_assumption_1(np.eye(2))

    def test_non_square_rejected(self):
        with pytest.raises(WeightMatrixError):
            WeightMatrix(np.ones((2, 3)) / 3, 1 / 3)

    def test_summary_lists_violations(self):
        report = validate_assumption_1(np.array([[1.0, 0.0], [0.5, 0.5]]), eta=0.5)
        assert "column 0" in report.summary()
        assert report.to_dict()["passed"] is False


class TestGramWeights:
    """Test AᵀA and its decomposition"""

    def test_identity(self):
        np.testing.assert_array_equal(gram_weights(WeightMatrix(np.eye(3), 1.0)).entries, np.eye(3))

    def test_averaging_pair(self):
        np.testing.assert_allclose(gram_weights(WeightMatrix(AVERAGING_PAIR, 0.5)).entries, 0.5)

    def test_thirds(self):
        a = WeightMatrix(np.array([[2 / 3, 1 / 3], [1 / 3, 2 / 3]]), 1 / 3)
        w = gram_weights(a).entries
        assert w[0, 0] == pytest.approx(5 / 9)
        assert w[1, 1] == pytest.approx(5 / 9)
        assert w[0, 1] == pytest.approx(4 / 9)

    @pytest.mark.parametrize("seed", range(25))
    def test_decomposition_holds_for_birkhoff(self, seed):
        n = 2 + seed % 10
        a = random_birkhoff_matrix(n, 4, 0.1, seed)
        assert gram_decomposition_residual(a) <= 1e-10


class TestEqualNeighbor:
    """Test equal-neighbor weights"""

    def test_star_graph(self):
        a = equal_neighbor_matrix(GraphSnapshot.star(3), 0.25).entries
        expected = np.array([[0.5, 0.25, 0.25], [0.25, 0.75, 0.0], [0.25, 0.0, 0.75]])
        np.testing.assert_allclose(a, expected)

    def test_no_edges_gives_identity(self):
        a = equal_neighbor_matrix(GraphSnapshot(4, frozenset()), 0.3)
        np.testing.assert_array_equal(a.entries, np.eye(4))

    def test_complete_graph_eps_limits(self):
        a = equal_neighbor_matrix(GraphSnapshot.complete(3), 0.4)
        np.testing.assert_allclose(np.diag(a.entries), 0.2)
        assert a.eta == pytest.approx(0.2)
        with pytest.raises(WeightMatrixError):
            equal_neighbor_matrix(GraphSnapshot.complete(3), 0.5)

    def test_directed_graph_rejected(self):
        with pytest.raises(WeightMatrixError):
            equal_neighbor_matrix(GraphSnapshot.from_edges(3, [(0, 1)]), 0.2)

    def test_result_is_doubly_stochastic(self):
        a = equal_neighbor_matrix(GraphSnapshot.path(6), 0.3)
        assert validate_assumption_1(a).passed


class TestCirculant:
    """Test the circulant tightness construction"""

    def test_rows_for_n4(self):
        a = circulant_matrix(4, 0.25).entries
        np.testing.assert_allclose(a[0], [0.5, 0.25, 0.0, 0.25])
        for i in range(4):
            np.testing.assert_allclose(a[i], np.roll(a[0], i))

    def test_rows_for_n3(self):
        np.testing.assert_allclose(circulant_matrix(3, 0.25).entries[0], [0.5, 0.25, 0.25])

    @pytest.mark.parametrize("n,eta", [(3, 0.1), (7, 0.25), (20, 0.4)])
    def test_doubly_stochastic(self, n, eta):
        assert validate_assumption_1(circulant_matrix(n, eta)).passed

    def test_lambda2_values(self):
        assert circulant_lambda2(4, 0.25) == pytest.approx(0.5)
        assert circulant_lambda2(10, 0.0) == 1.0
        assert circulant_lambda2(100, 0.25) >= 1 - 4 * 0.25 * math.pi ** 2 / 100 ** 2

    @pytest.mark.parametrize("n", [4, 9, 16])
    def test_lambda2_matches_eigenvalues(self, n):
        eigenvalues = np.sort(np.linalg.eigvalsh(circulant_matrix(n, 0.3).entries))
        assert eigenvalues[-2] == pytest.approx(circulant_lambda2(n, 0.3), abs=1e-12)

    def test_second_eigenvector(self):
        np.testing.assert_allclose(circulant_second_eigenvector(4), [1, 0, -1, 0], atol=1e-15)
        np.testing.assert_allclose(circulant_second_eigenvector(3), [1, -0.5, -0.5], atol=1e-15)
        assert abs(circulant_second_eigenvector(11).mean()) <= 1e-12

    def test_eigenvector_relation(self):
        v = circulant_second_eigenvector(12)
        a = circulant_matrix(12, 0.2).entries
        np.testing.assert_allclose(a @ v, circulant_lambda2(12, 0.2) * v, atol=1e-14)

    def test_invalid_eta_rejected(self):
        with pytest.raises(WeightMatrixError):
            circulant_matrix(5, 0.5)
        with pytest.raises(WeightMatrixError):
            circulant_matrix(2, 0.25)

    def test_time_lower_bound(self):
        expected = (100 ** 2 / 0.25) * math.log(100) / (8 * math.pi ** 2)
        assert circulant_time_lower_bound(100, 0.25, 0.01) == pytest.approx(expected)


class TestBirkhoff:
    """Test random Birkhoff combinations"""

    def test_single_permutation_is_identity(self):
        np.testing.assert_array_equal(random_birkhoff_matrix(5, 1, 0.2, 0).entries, np.eye(5))

    @pytest.mark.parametrize("seed", range(20))
    def test_output_valid(self, seed):
        a = random_birkhoff_matrix(2 + seed % 8, 3, 0.2, seed)
        assert validate_assumption_1(a).passed

    def test_deterministic(self):
        a = random_birkhoff_matrix(6, 4, 0.1, 42)
        b = random_birkhoff_matrix(6, 4, 0.1, 42)
        np.testing.assert_array_equal(a.entries, b.entries)

    def test_infeasible_eta_rejected(self):
        with pytest.raises(WeightMatrixError):
            random_birkhoff_matrix(4, 5, 0.3, 0)


class TestWeightSequences:
    """Test weighted topology sequences"""

    def test_equal_neighbor_sequence_declares_common_eta(self):
        seq = EqualNeighborTopology(RandomGraphTopology(8, 2, window=2), 0.1)
        assert seq.eta == pytest.approx(min(0.1, 1 - 0.1 * 7))
        for k in range(6):
            A = seq.matrix(k)
            assert validate_assumption_1(A).passed
            assert A.graph == seq.snapshot(k)

    def test_equal_neighbor_eps_range(self):
        with pytest.raises(WeightMatrixError):
            EqualNeighborTopology(StaticTopology(GraphSnapshot.path(5)), 0.25)

    def test_birkhoff_sequence_reproducible(self):
        a = BirkhoffTopology(5, 3, 0.2, seed=9)
        b = BirkhoffTopology(5, 3, 0.2, seed=9)
        np.testing.assert_array_equal(a.matrix(4).entries, b.matrix(4).entries)
        assert not np.array_equal(a.matrix(4).entries, a.matrix(5).entries)

    def test_periodic_weights_cycle(self):
        first, second = circulant_matrix(4, 0.25), WeightMatrix(np.eye(4), 1.0)
        seq = PeriodicWeights([first, second])
        assert seq.matrix(2) is first and seq.matrix(3) is second
        assert seq.eta == 0.25


class TestMatrixFiles:
    """Test matrix JSON persistence"""

    def test_round_trip(self, tmp_path):
        a = circulant_matrix(5, 0.2)
        loaded = load_matrix(save_matrix(a, tmp_path / "a.json"))
        np.testing.assert_array_equal(loaded.entries, a.entries)
        assert loaded.eta == a.eta

    def test_fixture_matrix(self, fixtures_dir):
        assert validate_assumption_1(load_matrix(fixtures_dir / "averaging_pair.json")).passed
        assert not validate_assumption_1(load_matrix(fixtures_dir / "row_stochastic_only.json")).passed

    def test_bare_matrix_loads_as_static_sequence(self, fixtures_dir):
        seq = load_weight_sequence(fixtures_dir / "averaging_pair.json")
        assert seq.matrix(10).n == 2

    def test_malformed_matrix(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"eta": 0.5}')
        with pytest.raises(WeightMatrixError):
            load_matrix(path)
