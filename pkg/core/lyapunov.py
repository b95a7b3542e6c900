#!/usr/bin/env python3
"""
📉 LYAPUNOV FUNCTIONS 📉
Sample variance V, min-anchored variance V̲, and the exact decrease
identities and cut bounds used to certify convergence.
"""

import logging
from dataclasses import dataclass
from typing import FrozenSet, Iterable, Iterator, Sequence, Union

import numpy as np

from core.graph_topology import AvgnetError, sorted_order
from core.weight_matrices import (
    GramMatrix,
    WeightMatrix,
    WeightMatrixError,
    gram_weights,
    validate_assumption_1,
)

logger = logging.getLogger(__name__)

NodeVector = np.ndarray

# Sums of two vectors count as equal within this absolute tolerance
MEAN_MATCH_TOL = 1e-9


def as_node_vector(values: Union[Sequence[float], np.ndarray]) -> NodeVector:
    """Validated float64 copy: one finite value per node, at least one node"""
    x = np.array(values, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise AvgnetError(f"Node vector must be one-dimensional and nonempty, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise AvgnetError("Node vector has non-finite entries")
    return x


@dataclass(frozen=True)
class CutPartition:
    """Split of the nodes into two nonempty sides S⁻ and S⁺"""
    s_minus: FrozenSet[int]
    s_plus: FrozenSet[int]

    def __post_init__(self):
        if not self.s_minus or not self.s_plus:
            raise AvgnetError("Both sides of a cut must be nonempty")
        if self.s_minus & self.s_plus:
            raise AvgnetError(f"Cut sides overlap on {sorted(self.s_minus & self.s_plus)}")

    def covers(self, n: int) -> bool:
        return self.s_minus | self.s_plus == frozenset(range(n))

    @classmethod
    def from_sides(cls, s_minus: Iterable[int], s_plus: Iterable[int]) -> "CutPartition":
        return cls(frozenset(s_minus), frozenset(s_plus))


def all_cuts(n: int) -> Iterator[CutPartition]:
    """The 2^(n-1) - 1 distinct cuts of n nodes, node 0 always in S⁻"""
    nodes = range(1, n)
    for mask in range(1, 2 ** (n - 1)):
        s_plus = frozenset(i for i in nodes if mask >> (i - 1) & 1)
        yield CutPartition(frozenset(range(n)) - s_plus, s_plus)


def sample_variance(x: Sequence[float]) -> float:
    """V(x) = Σ (x_i - x̄)², two-pass"""
    values = np.asarray(x, dtype=float)
    return float(np.sum((values - values.mean()) ** 2))


def min_anchored_variance(x: Sequence[float]) -> float:
    """V̲(x) = Σ (x_i - min x)²"""
    values = np.asarray(x, dtype=float)
    return float(np.sum((values - values.min()) ** 2))


@dataclass
class DecreaseRecord:
    """Both sides of V(x) - V(Ax) = Σ_{i<j} w_ij (x_i - x_j)²"""
    lhs: float
    rhs: float
    residual: float


def pairwise_gram_energy(x: Sequence[float], W: GramMatrix) -> float:
    """Σ_{i<j} w_ij (x_i - x_j)²"""
    values = np.asarray(x, dtype=float)
    diffs = values[:, None] - values[None, :]
    return float(np.sum(np.triu(W.entries, k=1) * diffs ** 2))


def variance_decrease(x: Sequence[float], A: WeightMatrix) -> DecreaseRecord:
    """Evaluate both sides of the variance-decrease identity independently"""
    values = as_node_vector(x)
    if values.size != A.n:
        raise AvgnetError(f"x has {values.size} entries, matrix is {A.n}x{A.n}")
    report = validate_assumption_1(A)
    if not report.passed:
        raise WeightMatrixError(f"Variance identity needs a doubly stochastic matrix:\n{report.summary()}")

    lhs = sample_variance(values) - sample_variance(A.entries @ values)
    rhs = pairwise_gram_energy(values, gram_weights(A))
    return DecreaseRecord(lhs, rhs, abs(lhs - rhs))


def cut_weight_sum(W: GramMatrix, cut: CutPartition) -> float:
    """Σ w_ij over i ∈ S⁻, j ∈ S⁺"""
    minus = sorted(cut.s_minus)
    plus = sorted(cut.s_plus)
    return float(W.entries[np.ix_(minus, plus)].sum())


def min_positive_gram_entry(W: GramMatrix) -> float:
    positive = W.entries[W.entries > 0]
    return float(positive.min()) if positive.size else 0.0


def sorted_gap_energy(x: Sequence[float]) -> float:
    """Σ (x_(i) - x_(i+1))² over the nonincreasing ordering"""
    values = np.asarray(x, dtype=float)
    ordered = values[sorted_order(values)]
    return float(np.sum(np.diff(ordered) ** 2))


def constant_difference_check(u: Sequence[float], w: Sequence[float], z_samples: Iterable[float],
                              tol: float = MEAN_MATCH_TOL) -> bool:
    """
    For equal-sum u and w, f(z) = Σ(u_i - z)² - Σ(w_i - z)² must not depend on z.

    Returns whether f agrees (relative tolerance) across all z samples.
    """
    a = as_node_vector(u)
    b = as_node_vector(w)
    if a.size != b.size:
        raise AvgnetError(f"Vectors differ in length: {a.size} vs {b.size}")
    if abs(a.sum() - b.sum()) > tol:
        raise AvgnetError(f"Sums differ: {a.sum():.12g} vs {b.sum():.12g}")

    values = [float(np.sum((a - z) ** 2) - np.sum((b - z) ** 2)) for z in z_samples]
    if not values:
        return True
    reference = values[0]
    scale = max(1.0, abs(reference))
    return all(abs(v - reference) <= tol * scale for v in values)


def sandwich_holds(x: Sequence[float], slack: float = 1e-12) -> bool:
    """V(x) ≤ V̲(x) ≤ 4n·V(x)"""
    values = np.asarray(x, dtype=float)
    v = sample_variance(values)
    v_under = min_anchored_variance(values)
    scale = max(1.0, v_under)
    return v <= v_under + slack * scale and v_under <= 4 * values.size * v + slack * scale
