#!/usr/bin/env python3
"""
⚖️ WEIGHT MATRICES ⚖️
Construction and validation of the averaging weights A(k).

Covers:
- WeightMatrix / GramMatrix value types
- Doubly-stochastic validation with a per-violation report
- Gram weights AᵀA and the pairwise decomposition check
- Equal-neighbor weights, the circulant tightness construction
- Random Birkhoff combinations for test inputs
- Weighted topology sequences (static, periodic, equal-neighbor, Birkhoff)
"""

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.graph_topology import (
    AvgnetError,
    GraphSnapshot,
    RoundCache,
    TopologySequence,
    make_rng,
)

logger = logging.getLogger(__name__)

# Absolute tolerance on every row/column sum and on the eta floor
STOCHASTIC_TOL = 1e-12


class WeightMatrixError(AvgnetError):
    """Malformed weight matrix or infeasible construction parameters"""


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Dense n×n averaging weights with declared minimum positive entry eta"""
    entries: np.ndarray
    eta: float

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise WeightMatrixError(f"Weight matrix must be square, got shape {entries.shape}")
        if entries.shape[0] < 1:
            raise WeightMatrixError("Weight matrix must have at least one row")
        if not np.all(np.isfinite(entries)):
            raise WeightMatrixError("Weight matrix has non-finite entries")
        if not self.eta > 0:
            raise WeightMatrixError(f"eta must be positive, got {self.eta}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "eta", float(self.eta))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def graph(self) -> GraphSnapshot:
        """E(A): edge (j, i) for every positive a_ij"""
        return GraphSnapshot.from_matrix(self.entries)

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "eta": self.eta, "rows": self.entries.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "WeightMatrix":
        try:
            matrix = cls(np.array(data["rows"], dtype=float), float(data["eta"]))
        except (KeyError, TypeError) as e:
            raise WeightMatrixError(f"Malformed weight matrix: {e}") from e
        if "n" in data and int(data["n"]) != matrix.n:
            raise WeightMatrixError(f"Declared n={data['n']} but rows give {matrix.n}")
        return matrix


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """w_ij = (AᵀA)_ij"""
    entries: np.ndarray


@dataclass
class Violation:
    """One failed condition of a validation"""
    condition: str  # nonnegative, row_sum, column_sum, diagonal, eta
    indices: Tuple[int, ...]
    value: float
    description: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            'condition': self.condition,
            'indices': list(self.indices),
            'value': self.value,
            'description': self.description,
        }


@dataclass
class ValidationReport:
    """Outcome of a weight-matrix validation"""
    passed: bool
    n: int
    eta: float
    doubly: bool
    violations: List[Violation] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'passed': self.passed,
            'n': self.n,
            'eta': self.eta,
            'doubly_stochastic_required': self.doubly,
            'violations': [v.to_dict() for v in self.violations],
        }

    def summary(self) -> str:
        if self.passed:
            return f"✅ {self.n}x{self.n} matrix satisfies all conditions (eta={self.eta:g})"
        lines = [f"❌ {self.n}x{self.n} matrix has {len(self.violations)} violation(s):"]
        lines.extend(f"  - {v.description}" for v in self.violations)
        return "\n".join(lines)


def _as_weight_matrix(A: Union[WeightMatrix, np.ndarray], eta: Optional[float]) -> WeightMatrix:
    if isinstance(A, WeightMatrix):
        return A if eta is None else WeightMatrix(A.entries, eta)
    if eta is None:
        raise WeightMatrixError("A raw array needs an explicit eta")
    return WeightMatrix(np.asarray(A, dtype=float), eta)


def validate_assumption_1(A: Union[WeightMatrix, np.ndarray], eta: Optional[float] = None,
                          doubly: bool = True, tol: float = STOCHASTIC_TOL) -> ValidationReport:
    """
    Check nonnegativity, unit row sums (and column sums when `doubly`),
    a strictly positive diagonal and the eta floor on positive entries.

    Every violated condition is listed with its indices; the check itself
    never raises except for non-square input.
    """
    matrix = _as_weight_matrix(A, eta)
    a = matrix.entries
    violations: List[Violation] = []

    for i, j in zip(*np.nonzero(a < 0)):
        violations.append(Violation('nonnegative', (int(i), int(j)), float(a[i, j]),
                                    f"entry ({i}, {j}) = {a[i, j]:.3g} is negative"))

    for i, total in enumerate(a.sum(axis=1)):
        if abs(total - 1.0) > tol:
            violations.append(Violation('row_sum', (i,), float(total), f"row {i} sums to {total:.15g}"))

    if doubly:
        for j, total in enumerate(a.sum(axis=0)):
            if abs(total - 1.0) > tol:
                violations.append(Violation('column_sum', (j,), float(total),
                                            f"column {j} sums to {total:.15g}"))

    for i, value in enumerate(np.diag(a)):
        if not value > 0:
            violations.append(Violation('diagonal', (i,), float(value), f"diagonal entry {i} is {value:.3g}"))

    floor = matrix.eta - tol
    for i, j in zip(*np.nonzero((a > 0) & (a < floor))):
        violations.append(Violation('eta', (int(i), int(j)), float(a[i, j]),
                                    f"entry ({i}, {j}) = {a[i, j]:.6g} is below eta = {matrix.eta:.6g}"))

    return ValidationReport(not violations, matrix.n, matrix.eta, doubly, violations)


def gram_weights(A: WeightMatrix) -> GramMatrix:
    """AᵀA in working precision"""
    return GramMatrix(A.entries.T @ A.entries)


def gram_decomposition_residual(A: WeightMatrix) -> float:
    """
    Largest entrywise gap between AᵀA and I - Σ_{i<j} w_ij (e_i - e_j)(e_i - e_j)ᵀ.

    The pairwise sum is the Laplacian of the off-diagonal Gram weights, so
    the identity holds exactly for doubly stochastic A.
    """
    w = gram_weights(A).entries
    off = w - np.diag(np.diag(w))
    laplacian = np.diag(off.sum(axis=1)) - off
    return float(np.max(np.abs(w - (np.eye(A.n) - laplacian))))


def equal_neighbor_matrix(g: GraphSnapshot, eps: float) -> WeightMatrix:
    """
    a_ij = eps for every neighbor j of i, a_ii = 1 - eps·deg(i).

    Requires an undirected graph and eps·deg(i) < 1 for every node.
    """
    if not eps > 0:
        raise WeightMatrixError(f"eps must be positive, got {eps}")
    if not g.is_undirected():
        raise WeightMatrixError("Equal-neighbor weights need an undirected graph")

    degrees = np.array([g.degree(i) for i in range(g.n)], dtype=float)
    too_high = np.nonzero(eps * degrees >= 1.0)[0]
    if too_high.size:
        i = int(too_high[0])
        raise WeightMatrixError(
            f"eps={eps} with degree {int(degrees[i])} at node {i} leaves no positive self-weight"
        )

    entries = np.zeros((g.n, g.n))
    if g.cross_edges.size:
        sources, targets = g.cross_edges[:, 0], g.cross_edges[:, 1]
        entries[targets, sources] = eps
    diagonal = 1.0 - eps * degrees
    entries[np.diag_indices(g.n)] = diagonal
    return WeightMatrix(entries, min(eps, float(diagonal.min())))


def _check_circulant_params(n: int, eta: float, allow_zero: bool = False):
    if n < 3:
        raise WeightMatrixError(f"Circulant construction needs n >= 3, got {n}")
    low_ok = eta >= 0 if allow_zero else eta > 0
    if not (low_ok and eta < 0.5):
        raise WeightMatrixError(f"Circulant eta must lie in (0, 1/2), got {eta}")


def circulant_matrix(n: int, eta: float) -> WeightMatrix:
    """(1 - 2η)I + ηP + ηP⁻¹ with P the cyclic shift"""
    _check_circulant_params(n, eta)
    identity = np.eye(n)
    shift = np.roll(identity, 1, axis=1)
    entries = (1.0 - 2.0 * eta) * identity + eta * shift + eta * shift.T
    return WeightMatrix(entries, min(eta, 1.0 - 2.0 * eta))


def circulant_lambda2(n: int, eta: float) -> float:
    """Second largest eigenvalue 1 - 2η + 2η·cos(2π/n)"""
    _check_circulant_params(n, eta, allow_zero=True)
    return 1.0 - 2.0 * eta + 2.0 * eta * math.cos(2.0 * math.pi / n)


def circulant_second_eigenvector(n: int) -> np.ndarray:
    """v_i = cos(2πi/n), a real eigenvector for the second eigenvalue"""
    if n < 3:
        raise WeightMatrixError(f"Circulant construction needs n >= 3, got {n}")
    return np.cos(2.0 * np.pi * np.arange(n) / n)


def circulant_time_lower_bound(n: int, eta: float, epsilon: float) -> float:
    """(1/(8π²))·(n²/η)·ln(1/ε): rounds the circulant needs before V ≤ εV(0)"""
    return (n * n / eta) * math.log(1.0 / epsilon) / (8.0 * math.pi ** 2)


def random_birkhoff_matrix(n: int, num_permutations: int, eta: float, seed: int,
                           algorithm: str = "PCG64") -> WeightMatrix:
    """
    Convex combination of the identity and num_permutations - 1 random
    permutation matrices, every coefficient at least eta.

    Coefficients are eta plus a Dirichlet share of the remaining mass, so
    they sum to one and the result is doubly stochastic by construction.
    """
    if n < 1:
        raise WeightMatrixError(f"Dimension must be positive, got {n}")
    if num_permutations < 1:
        raise WeightMatrixError(f"Need at least one permutation, got {num_permutations}")
    if num_permutations == 1:
        return WeightMatrix(np.eye(n), 1.0)
    if not eta > 0 or eta * num_permutations > 1.0:
        raise WeightMatrixError(
            f"Infeasible coefficients: {num_permutations} terms each >= eta={eta} cannot sum to 1"
        )

    rng = make_rng(seed, algorithm=algorithm)
    shares = rng.dirichlet(np.ones(num_permutations))
    coefficients = eta + (1.0 - eta * num_permutations) * shares

    entries = coefficients[0] * np.eye(n)
    rows = np.arange(n)
    for c in coefficients[1:]:
        entries[rows, rng.permutation(n)] += c
    return WeightMatrix(entries, eta)


class WeightSequence(TopologySequence):
    """Topology sequence whose rounds carry weight matrices; snapshots are E(A(k))"""

    is_weighted = True

    def __init__(self, n: int, window: int, eta: float, horizon: Optional[int] = None):
        super().__init__(n, window, horizon)
        self.eta = eta

    def matrix(self, k: int) -> WeightMatrix:
        self._check_round(k)
        return self._matrix(k)

    def _snapshot(self, k: int) -> GraphSnapshot:
        return self._matrix(k).graph

    def _matrix(self, k: int) -> WeightMatrix:
        raise NotImplementedError


class PeriodicWeights(WeightSequence):
    """Round-robin over a fixed list of matrices"""

    def __init__(self, matrices: Sequence[WeightMatrix], window: int = 1, horizon: Optional[int] = None):
        if not matrices:
            raise WeightMatrixError("Periodic weights need at least one matrix")
        sizes = {A.n for A in matrices}
        if len(sizes) != 1:
            raise WeightMatrixError(f"Matrices disagree on dimension: {sorted(sizes)}")
        super().__init__(matrices[0].n, window, min(A.eta for A in matrices), horizon)
        self.matrices = tuple(matrices)

    def _matrix(self, k: int) -> WeightMatrix:
        return self.matrices[k % len(self.matrices)]


class StaticWeights(PeriodicWeights):
    """The same matrix every round"""

    def __init__(self, matrix: WeightMatrix, window: int = 1, horizon: Optional[int] = None):
        super().__init__([matrix], window, horizon)


class EqualNeighborTopology(WeightSequence):
    """Equal-neighbor weights laid over an undirected graph sequence"""

    def __init__(self, graphs: TopologySequence, eps: float):
        if not (eps > 0 and eps * (graphs.n - 1) < 1.0):
            raise WeightMatrixError(f"eps must lie in (0, 1/(n-1)) for n={graphs.n}, got {eps}")
        super().__init__(graphs.n, graphs.window, min(eps, 1.0 - eps * (graphs.n - 1)), graphs.horizon)
        self.graphs = graphs
        self.eps = eps
        self._cache = RoundCache(2 * graphs.window + 2)

    def _build(self, k: int) -> WeightMatrix:
        built = equal_neighbor_matrix(self.graphs.snapshot(k), self.eps)
        return WeightMatrix(built.entries, self.eta)

    def _matrix(self, k: int) -> WeightMatrix:
        return self._cache.get_or_build(k, self._build)


class BirkhoffTopology(WeightSequence):
    """A fresh random Birkhoff matrix every round, seeded by (seed, k)"""

    def __init__(self, n: int, num_permutations: int, eta: float, seed: int, window: int = 1,
                 algorithm: str = "PCG64", horizon: Optional[int] = None):
        super().__init__(n, window, eta if num_permutations > 1 else 1.0, horizon)
        self.num_permutations = num_permutations
        self.seed = seed
        self.algorithm = algorithm
        self._cache = RoundCache(2 * window + 2)

    def _build(self, k: int) -> WeightMatrix:
        round_seed = int(make_rng(self.seed, k, algorithm=self.algorithm).integers(2**63 - 1))
        return random_birkhoff_matrix(self.n, self.num_permutations, self.eta, round_seed,
                                      algorithm=self.algorithm)

    def _matrix(self, k: int) -> WeightMatrix:
        return self._cache.get_or_build(k, self._build)


def load_matrix(path: Union[str, Path]) -> WeightMatrix:
    with open(path, "r", encoding="utf-8") as f:
        return WeightMatrix.from_dict(json.load(f))


def save_matrix(A: WeightMatrix, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(A.to_dict(), f, indent=2)
    return path


def load_weight_sequence(path: Union[str, Path]) -> PeriodicWeights:
    """Read {"B": int, "matrices": [...]} or a single matrix"""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if "matrices" not in data:
        return StaticWeights(WeightMatrix.from_dict(data), window=int(data.get("B", 1)))
    return PeriodicWeights([WeightMatrix.from_dict(m) for m in data["matrices"]],
                           window=int(data.get("B", 1)))
