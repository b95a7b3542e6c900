#!/usr/bin/env python3
"""
🧪 CONSENSUS ENGINE TESTING SUITE 🧪

Validates the unquantized iteration:
• Single steps and trivial runs
• Circulant tightness: V(k)/V(0) = λ₂^{2k} and the time lower bound
• Per-window relative decrease on compliant sequences
• Assumption audits, matrix violations and CSV output
"""

import math

import numpy as np
import pandas as pd
import pytest

from core.consensus_engine import TRAJECTORY_COLUMNS, convergence_time_bound, run, step
from core.graph_topology import AvgnetError, RandomGraphTopology, StaticTopology, GraphSnapshot
from core.weight_matrices import (
    EqualNeighborTopology,
    PeriodicWeights,
    StaticWeights,
    WeightMatrix,
    circulant_lambda2,
    circulant_matrix,
    circulant_second_eigenvector,
    circulant_time_lower_bound,
)


def decrease_round_budget(n: int, eta: float, B: int) -> int:
    return math.ceil((2 * n * n / eta) * B * math.log(100)) + B


class TestStep:
    """Test x(k+1) = A(k)x(k)"""

    def test_identity(self):
        np.testing.assert_array_equal(step([1.0, 2.0, 3.0], WeightMatrix(np.eye(3), 1.0)), [1.0, 2.0, 3.0])

    def test_averaging_pair(self):
        a = WeightMatrix(np.array([[0.5, 0.5], [0.5, 0.5]]), 0.5)
        np.testing.assert_allclose(step([1.0, -1.0], a), [0.0, 0.0])

    def test_circulant_eigenvector_halves(self):
        np.testing.assert_allclose(step([1.0, 0.0, -1.0, 0.0], circulant_matrix(4, 0.25)),
                                   [0.5, 0.0, -0.5, 0.0], atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(AvgnetError):
            step([1.0, 2.0], circulant_matrix(3, 0.2))


class TestTrivialRuns:
    """Test boundary behavior of run"""

    def test_constant_start_converged_at_zero(self):
        report = run([2.0, 2.0, 2.0], StaticWeights(circulant_matrix(3, 0.2)), 0.01, 100)
        assert report.convergence_time == 0
        assert report.rounds_run == 0

    def test_identity_never_converges(self):
        report = run([1.0, 0.0, 0.0], StaticWeights(WeightMatrix(np.eye(3), 1.0)), 0.01, 50)
        assert report.convergence_time is None
        assert not report.converged
        assert report.rounds_run == 50
        assert report.trajectory[-1].k == 50
        assert all(not w.b_connected for w in report.windows)

    def test_graph_only_sequence_rejected(self):
        with pytest.raises(AvgnetError):
            run([1.0, 0.0, 0.0], StaticTopology(GraphSnapshot.complete(3)), 0.01, 10)

    def test_epsilon_range(self):
        with pytest.raises(AvgnetError):
            run([1.0, 0.0, 0.0], StaticWeights(circulant_matrix(3, 0.2)), 1.0, 10)

    def test_invalid_matrix_rounds_recorded(self):
        row_only = WeightMatrix(np.array([[1.0, 0.0], [0.5, 0.5]]), 0.5)
        good = WeightMatrix(np.array([[0.5, 0.5], [0.5, 0.5]]), 0.5)
        report = run([1.0, 0.0], PeriodicWeights([row_only, good]), 0.01, 3)
        assert report.matrix_violations == [0]


class TestCirculantTightness:
    """Test the circulant lower-bound construction at n=100, η=0.25"""

    @pytest.fixture(scope="class")
    def report(self):
        n, eta = 100, 0.25
        return run(circulant_second_eigenvector(n), StaticWeights(circulant_matrix(n, eta)), 0.01, 5000)

    def test_variance_ratio_follows_lambda2(self, report):
        lam = circulant_lambda2(100, 0.25)
        v0 = report.trajectory[0].V
        for record in report.trajectory[:201]:
            expected = lam ** (2 * record.k)
            assert record.V / v0 == pytest.approx(expected, rel=1e-6)

    def test_time_meets_lower_bound(self, report):
        assert report.converged
        assert report.convergence_time >= circulant_time_lower_bound(100, 0.25, 0.01) - report.window

    def test_time_matches_spectral_prediction(self, report):
        lam = circulant_lambda2(100, 0.25)
        assert report.convergence_time == math.ceil(math.log(0.01) / (2 * math.log(lam)))

    def test_windows_pass_audit(self, report):
        assert all(w.b_connected and w.cut_ok for w in report.windows)


class TestWindowDecrease:
    """Test per-window relative decrease and the resulting round budget"""

    @pytest.mark.parametrize("n", [5, 12, 30])
    def test_circulant_windows(self, n):
        eta = 0.2
        x0 = np.random.default_rng(n).normal(size=n)
        report = run(x0, StaticWeights(circulant_matrix(n, eta)), 0.01, decrease_round_budget(n, eta, 1))
        assert report.converged
        for w in report.windows:
            assert w.decrease >= (eta / 2) * w.gap_energy - 1e-10
            if w.lyapunov_start > 0:
                assert w.relative_decrease >= eta / (2 * n * n) - 1e-12

    @pytest.mark.parametrize("seed", range(8))
    @pytest.mark.parametrize("window", [1, 3])
    def test_random_compliant_sequences(self, seed, window):
        n = 10 + seed * 2
        graphs = RandomGraphTopology(n, seed, window=window, p=0.2)
        seq = EqualNeighborTopology(graphs, 1.0 / n)
        x0 = np.random.default_rng(seed).uniform(-1, 1, size=n)
        budget = decrease_round_budget(n, seq.eta, window)

        report = run(x0, seq, 0.01, budget)
        assert report.converged
        assert report.convergence_time <= budget
        assert all(w.b_connected and w.cut_ok for w in report.windows)
        for w in report.windows:
            assert w.decrease >= (seq.eta / 2) * w.gap_energy - 1e-10
            if w.lyapunov_start > 0:
                assert w.relative_decrease >= seq.eta / (2 * n * n) - 1e-12

    def test_variance_monotone_and_mean_constant(self):
        x0 = np.random.default_rng(1).uniform(size=15)
        seq = EqualNeighborTopology(RandomGraphTopology(15, 1, window=2, p=0.2), 1 / 15)
        report = run(x0, seq, 1e-6, 2000)
        variances = [r.V for r in report.trajectory]
        assert all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(variances, variances[1:]))
        assert all(abs(r.mean - x0.mean()) <= 1e-9 for r in report.trajectory)
        assert report.limit_deviation < 1e-2


class TestReportOutput:
    """Test report serialization"""

    def test_csv_columns_and_stride(self, tmp_path):
        report = run([1.0, 0.0, 0.0, 0.0], StaticWeights(circulant_matrix(4, 0.25)), 1e-6, 500, stride=5)
        path = report.write_csv(tmp_path / "out" / "run.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == TRAJECTORY_COLUMNS
        ks = frame["k"].tolist()
        assert ks[0] == 0 and ks[-1] == report.rounds_run
        assert all(k % 5 == 0 for k in ks[:-1])

    def test_summary_fields(self):
        report = run([1.0, 0.0, 0.0], StaticWeights(circulant_matrix(3, 0.25)), 0.01, 100)
        summary = report.summary()
        assert summary["convergence_time"] == report.convergence_time
        assert summary["windows_not_connected"] == 0
        assert len(summary["assumption_audit"]) == len(report.windows)


class TestConvergenceTimeBound:
    """Test c·(n²/η)·B·log(1/ε)"""

    def test_reference_value(self):
        assert convergence_time_bound(100, 1, 0.25, 0.01, 1.0) == pytest.approx(40000 * math.log(100))

    def test_scaling(self):
        base = convergence_time_bound(10, 2, 0.2, 0.1, 1.0)
        assert convergence_time_bound(20, 2, 0.2, 0.1, 1.0) == pytest.approx(4 * base)
        assert convergence_time_bound(10, 2, 0.1, 0.1, 1.0) == pytest.approx(2 * base)
