#!/usr/bin/env python3
"""
🧮 QUANTIZED CONSENSUS 🧮
Floor-quantized averaging: x(k+1) = ⌊A(k)x(k)⌋ on the grid of multiples of 1/Q.

Node values are held as integer numerators over the resolution Q, so
termination (all values equal) and the mean drift are exact. Only the
pre-floor combination is computed in floating point.

Also here: the quantized balancing variant, the shadowing comparison with
the unquantized run, and the complete-subgraph construction whose final
value ends up 1/2 away from the true average.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from core.balancing_protocol import balancing_round
from core.consensus_engine import TrajectoryRecorder, WindowAudit
from core.graph_topology import AvgnetError, GraphSnapshot, TopologySequence, make_rng
from core.lyapunov import as_node_vector, min_anchored_variance, sample_variance
from core.weight_matrices import (
    PeriodicWeights,
    WeightMatrix,
    equal_neighbor_matrix,
    validate_assumption_1,
)

logger = logging.getLogger(__name__)

# v·Q within this distance of an integer snaps to that integer
FLOOR_GUARD = 1e-9
# numerators are int64; |v·Q| must stay below 2**63
INT64_LIMIT = float(2**63)

QUANTIZED_COLUMNS = ["k", "V_underbar", "V", "min_numerator", "max_numerator", "mean"]
PROTOCOLS = ("matrices", "balancing")


class QuantizationError(AvgnetError):
    """Invalid resolution, off-grid values or infeasible construction parameters"""


def _check_resolution(q: int):
    if isinstance(q, bool) or int(q) != q or q < 1:
        raise QuantizationError(f"Resolution Q must be a positive integer, got {q}")


def _check_int64_range(scaled: np.ndarray):
    outside = np.nonzero(~(np.abs(scaled) < INT64_LIMIT))[0]
    if outside.size:
        i = int(outside[0])
        raise QuantizationError(f"Scaled value {scaled[i]} does not fit an int64 numerator")


def _guarded_floor(scaled: np.ndarray) -> np.ndarray:
    _check_int64_range(scaled)
    nearest = np.rint(scaled)
    return np.where(np.abs(scaled - nearest) <= FLOOR_GUARD, nearest, np.floor(scaled)).astype(np.int64)


def floor_quantize(v: float, q: int) -> int:
    """Largest m with m/Q ≤ v, except that v·Q within the guard of an integer snaps to it"""
    _check_resolution(q)
    if not math.isfinite(v):
        raise QuantizationError(f"Cannot quantize non-finite value {v}")
    return int(_guarded_floor(np.array([v * q]))[0])


@dataclass(frozen=True, eq=False)
class QuantizedVector:
    """Node values numerators[i] / resolution_q"""
    numerators: np.ndarray
    resolution_q: int

    def __post_init__(self):
        _check_resolution(self.resolution_q)
        nums = np.array(self.numerators)
        if nums.ndim != 1 or nums.size < 1:
            raise QuantizationError(f"Numerators must be a nonempty vector, got shape {nums.shape}")
        if not np.issubdtype(nums.dtype, np.integer):
            if not np.all(np.isfinite(nums)) or np.any(nums != np.rint(nums)):
                raise QuantizationError("Numerators must be integers")
        nums = nums.astype(np.int64)
        nums.setflags(write=False)
        object.__setattr__(self, "numerators", nums)
        object.__setattr__(self, "resolution_q", int(self.resolution_q))

    @classmethod
    def from_values(cls, values: Sequence[float], q: int) -> "QuantizedVector":
        """Values must already be multiples of 1/Q (up to the floor guard)"""
        _check_resolution(q)
        x = as_node_vector(values)
        scaled = x * q
        _check_int64_range(scaled)
        nearest = np.rint(scaled)
        off_grid = np.nonzero(np.abs(scaled - nearest) > FLOOR_GUARD)[0]
        if off_grid.size:
            i = int(off_grid[0])
            raise QuantizationError(f"x[{i}]={x[i]} is not a multiple of 1/{q}")
        return cls(nearest.astype(np.int64), q)

    @classmethod
    def floor_of(cls, values: Sequence[float], q: int) -> "QuantizedVector":
        """⌊x⌋ componentwise"""
        _check_resolution(q)
        return cls(_guarded_floor(as_node_vector(values) * q), q)

    @property
    def n(self) -> int:
        return self.numerators.size

    @property
    def values(self) -> np.ndarray:
        return self.numerators / self.resolution_q

    @property
    def all_equal(self) -> bool:
        return bool(self.numerators.min() == self.numerators.max())

    @property
    def k_levels(self) -> int:
        """K = (U - L)·Q"""
        return int(self.numerators.max() - self.numerators.min())

    @property
    def exact_mean(self) -> Fraction:
        return Fraction(int(self.numerators.sum()), self.n * self.resolution_q)

    def to_dict(self) -> Dict[str, Any]:
        return {'Q': self.resolution_q, 'numerators': self.numerators.tolist()}


def random_quantized_vector(n: int, q: int, seed: int, low: float = 0.0, high: float = 1.0,
                            algorithm: str = "PCG64") -> QuantizedVector:
    """Uniform random multiples of 1/Q in [low, high]"""
    _check_resolution(q)
    lo = math.ceil(low * q - FLOOR_GUARD)
    hi = math.floor(high * q + FLOOR_GUARD)
    if lo > hi:
        raise QuantizationError(f"No multiple of 1/{q} lies in [{low}, {high}]")
    rng = make_rng(seed, algorithm=algorithm)
    return QuantizedVector(rng.integers(lo, hi + 1, size=n), q)


def quantized_step(x: QuantizedVector, A: WeightMatrix) -> QuantizedVector:
    """x_i(k+1) = ⌊Σ_j a_ij x_j(k)⌋"""
    if x.n != A.n:
        raise AvgnetError(f"x has {x.n} entries, matrix is {A.n}x{A.n}")
    # Σ a_ij (num_j / Q) · Q
    scaled = A.entries @ x.numerators.astype(float)
    return QuantizedVector(_guarded_floor(scaled), x.resolution_q)


def equal_by_lyapunov(x: QuantizedVector) -> bool:
    """V̲(x) < 1/Q² forces every value onto the minimum"""
    return min_anchored_variance(x.values) < 1.0 / x.resolution_q ** 2


@dataclass
class QuantizedRoundRecord:
    k: int
    V_underbar: float
    V: float
    min_numerator: int
    max_numerator: int
    mean: float
    numerator_sum: int

    @classmethod
    def of(cls, k: int, x: QuantizedVector) -> "QuantizedRoundRecord":
        values = x.values
        return cls(k, min_anchored_variance(values), sample_variance(values),
                   int(x.numerators.min()), int(x.numerators.max()), float(values.mean()),
                   int(x.numerators.sum()))


@dataclass
class QuantizedRunReport:
    """Record of a quantized run with exact final value and drift"""
    n: int
    window: int
    resolution_q: int
    protocol: str
    k_levels: int
    initial_numerators: np.ndarray
    trajectory: List[QuantizedRoundRecord]
    termination_round: Optional[int]
    rounds_run: int
    final_numerators: np.ndarray
    windows: List[WindowAudit] = field(default_factory=list)
    matrix_violations: List[int] = field(default_factory=list)
    min_sum_drop: Optional[int] = None
    max_sum_drop: Optional[int] = None
    epsilon: Optional[float] = None
    convergence_time: Optional[int] = None

    @property
    def terminated(self) -> bool:
        return self.termination_round is not None

    @property
    def initial_mean(self) -> Fraction:
        return Fraction(int(np.sum(self.initial_numerators)), self.n * self.resolution_q)

    @property
    def final_value(self) -> Optional[Fraction]:
        """x_f; absent until all numerators agree"""
        if not self.terminated:
            return None
        return Fraction(int(self.final_numerators[0]), self.resolution_q)

    @property
    def mean_drift(self) -> Optional[Fraction]:
        """|x_f - mean(x(0))|, exact"""
        if not self.terminated:
            return None
        return abs(self.final_value - self.initial_mean)

    @property
    def mean_drops_in_range(self) -> bool:
        """Every round lowered the numerator sum by an amount in [0, n)"""
        if self.min_sum_drop is None:
            return True
        return self.min_sum_drop >= 0 and self.max_sum_drop < self.n

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.trajectory], columns=QUANTIZED_COLUMNS)

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        logger.info(f"💾 Wrote {len(self.trajectory)} quantized trajectory rows to {path}")
        return path

    def summary(self) -> Dict[str, Any]:
        final_value = self.final_value
        drift = self.mean_drift
        return {
            'n': self.n,
            'B': self.window,
            'Q': self.resolution_q,
            'protocol': self.protocol,
            'K': self.k_levels,
            'termination_round': self.termination_round,
            'rounds_run': self.rounds_run,
            'final_numerator': int(self.final_numerators[0]) if self.terminated else None,
            'final_value': str(final_value) if final_value is not None else None,
            'final_value_float': float(final_value) if final_value is not None else None,
            'initial_mean': str(self.initial_mean),
            'mean_drift': str(drift) if drift is not None else None,
            'mean_drift_float': float(drift) if drift is not None else None,
            'min_sum_drop': self.min_sum_drop,
            'max_sum_drop': self.max_sum_drop,
            'epsilon': self.epsilon,
            'convergence_time': self.convergence_time,
            'windows_not_connected': sum(not w.b_connected for w in self.windows),
            'windows_cut_failed': sum(not w.cut_ok for w in self.windows),
            'matrix_violation_rounds': self.matrix_violations,
            'windows': [w.to_dict() for w in self.windows],
        }


def run_quantized(x0: QuantizedVector, seq: TopologySequence, max_rounds: int,
                  protocol: str = "matrices", epsilon: Optional[float] = None,
                  stride: int = 1) -> QuantizedRunReport:
    """
    Iterate quantized steps until all numerators agree or max_rounds.

    With protocol="balancing" each round's matrix is the balancing
    protocol's implied matrix for the current quantized values on the
    round's graph. Windows are audited with V̲.
    """
    if protocol not in PROTOCOLS:
        raise AvgnetError(f"Unknown quantized protocol '{protocol}', expected one of {PROTOCOLS}")
    if seq.n != x0.n:
        raise AvgnetError(f"x0 has {x0.n} entries, sequence has {seq.n} nodes")
    if protocol == "matrices" and not seq.is_weighted:
        raise AvgnetError(f"{type(seq).__name__} provides no weight matrices")
    if epsilon is not None and not 0 < epsilon < 1:
        raise AvgnetError(f"epsilon must lie in (0, 1), got {epsilon}")

    q = x0.resolution_q
    current = x0
    recorder = TrajectoryRecorder(
        seq.window, stride, lyapunov=min_anchored_variance,
        record=lambda k, values: QuantizedRoundRecord.of(k, QuantizedVector.floor_of(values, q)),
    )
    recorder.record(0, current.values, force=True)
    report = QuantizedRunReport(x0.n, seq.window, q, protocol, x0.k_levels, x0.numerators,
                                recorder.trajectory, None, 0, x0.numerators, recorder.windows,
                                epsilon=epsilon)
    v0 = sample_variance(current.values)
    threshold = None if epsilon is None else epsilon * v0
    if threshold is not None and v0 == 0:
        report.convergence_time = 0

    logger.info(f"▶️ Quantized run ({protocol}): n={x0.n}, B={seq.window}, Q={q}, K={x0.k_levels}")
    last_matrix, last_ok = None, True
    drops: List[int] = []
    k = 0
    while not current.all_equal and k < max_rounds:
        if protocol == "balancing":
            connectivity = seq.snapshot(k)
            A = balancing_round(current.values, connectivity).implied_matrix
        else:
            A = seq.matrix(k)
            connectivity = A.graph
        if A is not last_matrix:
            last_matrix, last_ok = A, validate_assumption_1(A).passed
        if not last_ok:
            report.matrix_violations.append(k)

        recorder.begin_round(k, current.values)
        nxt = quantized_step(current, A)
        drops.append(int(current.numerators.sum() - nxt.numerators.sum()))
        current = nxt
        recorder.end_round(k, current.values, connectivity, A.graph)
        k += 1

        if threshold is not None and report.convergence_time is None \
                and sample_variance(current.values) <= threshold:
            report.convergence_time = k
        recorder.record(k, current.values)

    recorder.record(k, current.values, force=True)
    report.rounds_run = k
    report.final_numerators = current.numerators
    if drops:
        report.min_sum_drop, report.max_sum_drop = min(drops), max(drops)
    if current.all_equal:
        report.termination_round = k
        if threshold is not None and report.convergence_time is None:
            report.convergence_time = k

    violations = recorder.violation_summary()
    if any(violations.values()) or report.matrix_violations:
        logger.warning(f"⚠️ Assumption violations during quantized run: {violations}, "
                       f"invalid matrices in {len(report.matrix_violations)} round(s)")
    if report.terminated:
        logger.info(f"✅ All values equal at round {k}: x_f={report.final_value}, drift={report.mean_drift}")
    else:
        logger.info(f"⏹️ Values still differ after {max_rounds} rounds")
    return report


def error_bound(n: int, eta: float, B: int, q: int, u: float, l: float, c: float) -> float:
    """(c/Q)·(n²/η)·B·log(Q·n·(U - L))"""
    if not u > l:
        raise QuantizationError(f"Need U > L, got U={u}, L={l}")
    if q < 1:
        raise QuantizationError(f"Resolution Q must be at least 1, got {q}")
    return (c / q) * (n * n / eta) * B * math.log(q * n * (u - l))


def equalization_bound(n: int, B: int, k_levels: int) -> int:
    """n·B·K rounds suffice for all values to agree"""
    if n < 1 or B < 1 or k_levels < 0:
        raise QuantizationError(f"Need n, B >= 1 and K >= 0, got n={n}, B={B}, K={k_levels}")
    return n * B * k_levels


@dataclass
class ConverseScenario:
    """Phase schedule that floors every one to zero"""
    n: int
    resolution_q: int
    x0: QuantizedVector
    schedule: PeriodicWeights
    snapshots: List[GraphSnapshot]

    @property
    def phases(self) -> int:
        return self.n // 2

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n': self.n,
            'Q': self.resolution_q,
            'x0': self.x0.to_dict(),
            'snapshots': [g.to_dict() for g in self.snapshots],
        }


def converse_scenario(n: int, q: int) -> ConverseScenario:
    """
    Nodes 0..n/2-1 start at 0, nodes n/2..n-1 start at 1.

    In phase p the clique over every current zero plus node n/2+p averages
    with equal weights 1/(n/2+p+1); since that clique has more than Q
    members, the node's share 1/(n/2+p+1) floors to 0. The remaining ones
    keep their values.
    """
    _check_resolution(q)
    if n < 2 or n % 2:
        raise QuantizationError(f"Converse construction needs an even n >= 2, got {n}")
    half = n // 2
    if not q < half:
        raise QuantizationError(f"Converse construction needs Q < n/2, got Q={q}, n={n}")

    x0 = QuantizedVector(np.array([0] * half + [q] * half), q)
    snapshots, matrices = [], []
    for p in range(half):
        members = list(range(half + p + 1))
        g = GraphSnapshot.from_edges(n, [(i, j) for i in members for j in members if i != j])
        snapshots.append(g)
        matrices.append(equal_neighbor_matrix(g, 1.0 / len(members)))

    schedule = PeriodicWeights(matrices, window=half, horizon=half - 1)
    return ConverseScenario(n, q, x0, schedule, snapshots)


def simulate_converse(scenario: ConverseScenario) -> QuantizedRunReport:
    """Run the phase schedule; x_f ends at 0 and the drift at exactly 1/2"""
    report = run_quantized(scenario.x0, scenario.schedule, max_rounds=scenario.phases)
    logger.info(f"🎯 Converse n={scenario.n}, Q={scenario.resolution_q}: "
                f"x_f={report.final_value}, true mean={report.initial_mean}, error={report.mean_drift}")
    return report


@dataclass
class ShadowReport:
    """Quantized and unquantized runs from the same ⌊x(0)⌋ under identical matrices"""
    resolution_q: int
    horizon: int
    max_violation: float
    lyapunov_exact: np.ndarray
    lyapunov_quantized: np.ndarray

    def holds(self, tol: float = 1e-12) -> bool:
        """x_i(t) ≥ x̂_i(t) ≥ x_i(t) - t/Q everywhere, within tol"""
        return self.max_violation <= tol

    def ratio_deviation(self, min_ratio: float = 0.1) -> float:
        """
        Largest relative gap between V̲(t)/V̲(0) of the two runs, over the
        rounds where the unquantized ratio is still at least min_ratio.
        """
        if self.lyapunov_exact[0] == 0:
            return 0.0
        exact = self.lyapunov_exact / self.lyapunov_exact[0]
        quantized = self.lyapunov_quantized / self.lyapunov_quantized[0]
        mask = exact >= min_ratio
        if not mask.any():
            return 0.0
        return float(np.max(np.abs(quantized[mask] - exact[mask]) / exact[mask]))


def shadow_run(x0: Sequence[float], seq: TopologySequence, q: int, horizon: int) -> ShadowReport:
    """Run both iterations for `horizon` rounds tracking the componentwise sandwich"""
    _check_resolution(q)
    if not seq.is_weighted:
        raise AvgnetError(f"{type(seq).__name__} provides no weight matrices")
    quantized = QuantizedVector.floor_of(x0, q)
    if quantized.n != seq.n:
        raise AvgnetError(f"x0 has {quantized.n} entries, sequence has {seq.n} nodes")
    exact = quantized.values

    v_exact = np.empty(horizon + 1)
    v_quant = np.empty(horizon + 1)
    v_exact[0] = v_quant[0] = min_anchored_variance(exact)
    worst = 0.0
    for t in range(1, horizon + 1):
        A = seq.matrix(t - 1)
        exact = A.entries @ exact
        quantized = quantized_step(quantized, A)
        x_hat = quantized.values
        worst = max(worst, float(np.max(x_hat - exact)), float(np.max(exact - t / q - x_hat)))
        v_exact[t] = min_anchored_variance(exact)
        v_quant[t] = min_anchored_variance(x_hat)

    logger.info(f"🪞 Shadow run Q={q}, horizon={horizon}: max violation {worst:.3g}")
    return ShadowReport(q, horizon, worst, v_exact, v_quant)
