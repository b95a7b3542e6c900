#!/usr/bin/env python3
"""
🔁 CONSENSUS ENGINE 🔁
Unquantized iteration x(k+1) = A(k)x(k) with trajectory recording,
per-window assumption audits and convergence-time measurement.

Assumption violations found during a run are recorded in the report and
logged; they never abort the run.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from core.graph_topology import (
    AvgnetError,
    GraphSnapshot,
    TopologySequence,
    cut_assumption_holds,
    is_strongly_connected,
)
from core.lyapunov import (
    NodeVector,
    as_node_vector,
    min_anchored_variance,
    sample_variance,
    sorted_gap_energy,
)
from core.weight_matrices import WeightMatrix, validate_assumption_1

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["k", "V", "V_underbar", "min", "max", "mean"]


@dataclass
class RoundRecord:
    """Lyapunov values and extremes of x(k)"""
    k: int
    V: float
    V_underbar: float
    min: float
    max: float
    mean: float

    @classmethod
    def of(cls, k: int, x: np.ndarray) -> "RoundRecord":
        return cls(k, sample_variance(x), min_anchored_variance(x),
                   float(x.min()), float(x.max()), float(x.mean()))


@dataclass
class WindowAudit:
    """
    One window kB..(k+1)B-1: Lyapunov value at both ends and the
    assumption checks for the window's edge sets.
    """
    index: int
    start_round: int
    lyapunov_start: float
    lyapunov_end: float
    gap_energy: float
    b_connected: bool
    cut_ok: bool

    @property
    def decrease(self) -> float:
        return self.lyapunov_start - self.lyapunov_end

    @property
    def relative_decrease(self) -> Optional[float]:
        if self.lyapunov_start <= 0:
            return None
        return self.decrease / self.lyapunov_start

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['relative_decrease'] = self.relative_decrease
        return data


class TrajectoryRecorder:
    """
    Shared bookkeeping for a run: strided round records and window audits.

    `connectivity` snapshots feed the B-connectivity flag, `realized`
    snapshots (the edge sets E(A(k)) actually used) feed the cut check.
    """

    def __init__(self, window: int, stride: int = 1,
                 lyapunov: Callable[[np.ndarray], float] = sample_variance,
                 record: Callable[[int, np.ndarray], Any] = RoundRecord.of):
        if stride < 1:
            raise AvgnetError(f"Recording stride must be positive, got {stride}")
        self.window = window
        self.stride = stride
        self.lyapunov = lyapunov
        self._make_record = record
        self.trajectory: List[Any] = []
        self.windows: List[WindowAudit] = []
        self._window_start: Optional[np.ndarray] = None
        self._connectivity: List[GraphSnapshot] = []
        self._realized: List[GraphSnapshot] = []

    def record(self, k: int, x: np.ndarray, force: bool = False):
        if force or k % self.stride == 0:
            if not self.trajectory or self.trajectory[-1].k != k:
                self.trajectory.append(self._make_record(k, x))

    def begin_round(self, k: int, x: np.ndarray):
        if k % self.window == 0:
            self._window_start = x.copy()
            self._connectivity = []
            self._realized = []

    def end_round(self, k: int, x_next: np.ndarray, connectivity: GraphSnapshot,
                  realized: Optional[GraphSnapshot] = None):
        self._connectivity.append(connectivity)
        self._realized.append(realized if realized is not None else connectivity)
        if (k + 1) % self.window == 0 and self._window_start is not None:
            self._close_window(k + 1 - self.window, x_next)

    def _close_window(self, start: int, x_end: np.ndarray):
        union = self._connectivity[0]
        for g in self._connectivity[1:]:
            union = union.union(g)
        audit = WindowAudit(
            index=start // self.window,
            start_round=start,
            lyapunov_start=self.lyapunov(self._window_start),
            lyapunov_end=self.lyapunov(x_end),
            gap_energy=sorted_gap_energy(self._window_start),
            b_connected=is_strongly_connected(union),
            cut_ok=cut_assumption_holds(self._realized, self._window_start),
        )
        self.windows.append(audit)
        logger.debug(f"Window {audit.index}: decrease={audit.decrease:.6g} "
                     f"connected={audit.b_connected} cut_ok={audit.cut_ok}")

    def violation_summary(self) -> Dict[str, int]:
        return {
            'windows_not_connected': sum(not w.b_connected for w in self.windows),
            'windows_cut_failed': sum(not w.cut_ok for w in self.windows),
        }


@dataclass
class RunReport:
    """Full record of an unquantized run"""
    n: int
    window: int
    eta: float
    epsilon: float
    trajectory: List[RoundRecord]
    convergence_time: Optional[int]
    rounds_run: int
    final_values: NodeVector
    initial_mean: float
    windows: List[WindowAudit] = field(default_factory=list)
    matrix_violations: List[int] = field(default_factory=list)

    @property
    def assumption_audit(self) -> List[Dict[str, Any]]:
        return [{'window': w.index, 'b_connected': w.b_connected, 'cut_ok': w.cut_ok} for w in self.windows]

    @property
    def limit_deviation(self) -> float:
        """max_i |x_i(final) - mean(x(0))|"""
        return float(np.max(np.abs(self.final_values - self.initial_mean)))

    @property
    def converged(self) -> bool:
        return self.convergence_time is not None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.trajectory], columns=TRAJECTORY_COLUMNS)

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        logger.info(f"💾 Wrote {len(self.trajectory)} trajectory rows to {path}")
        return path

    def summary(self) -> Dict[str, Any]:
        return {
            'n': self.n,
            'B': self.window,
            'eta': self.eta,
            'epsilon': self.epsilon,
            'convergence_time': self.convergence_time,
            'rounds_run': self.rounds_run,
            'initial_mean': self.initial_mean,
            'final_values': self.final_values.tolist(),
            'limit_deviation': self.limit_deviation,
            'windows_not_connected': sum(not w.b_connected for w in self.windows),
            'windows_cut_failed': sum(not w.cut_ok for w in self.windows),
            'matrix_violation_rounds': self.matrix_violations,
            'windows': [w.to_dict() for w in self.windows],
            'assumption_audit': self.assumption_audit,
        }


def step(x: Sequence[float], A: WeightMatrix) -> NodeVector:
    """x(k+1) = A(k)x(k)"""
    values = np.asarray(x, dtype=float)
    if values.ndim != 1 or values.size != A.n:
        raise AvgnetError(f"x has shape {values.shape}, matrix is {A.n}x{A.n}")
    return A.entries @ values


def _require_weighted(seq: TopologySequence, n: int):
    if not seq.is_weighted:
        raise AvgnetError(f"{type(seq).__name__} provides no weight matrices")
    if seq.n != n:
        raise AvgnetError(f"x0 has {n} entries, sequence has {seq.n} nodes")


def run(x0: Sequence[float], seq: TopologySequence, epsilon: float, max_rounds: int,
        stride: int = 1) -> RunReport:
    """
    Iterate until V(k) ≤ ε·V(0) or max_rounds.

    V(0) = 0 counts as converged at round 0. Every matrix is validated
    once; rounds using an invalid matrix are listed in the report.
    """
    if not 0 < epsilon < 1:
        raise AvgnetError(f"epsilon must lie in (0, 1), got {epsilon}")
    x = as_node_vector(x0)
    _require_weighted(seq, x.size)

    recorder = TrajectoryRecorder(seq.window, stride)
    recorder.record(0, x, force=True)
    v0 = sample_variance(x)
    threshold = epsilon * v0
    report = RunReport(x.size, seq.window, seq.eta, epsilon, recorder.trajectory, None, 0,
                       x, float(x.mean()), recorder.windows)
    if v0 == 0:
        report.convergence_time = 0
        return report

    logger.info(f"▶️ Unquantized run: n={x.size}, B={seq.window}, eta={seq.eta:g}, epsilon={epsilon:g}")
    last_matrix, last_ok = None, True
    k = 0
    while k < max_rounds:
        A = seq.matrix(k)
        if A is not last_matrix:
            last_matrix, last_ok = A, validate_assumption_1(A).passed
        if not last_ok:
            report.matrix_violations.append(k)

        recorder.begin_round(k, x)
        x = step(x, A)
        recorder.end_round(k, x, A.graph)
        k += 1

        if sample_variance(x) <= threshold:
            report.convergence_time = k
            break
        recorder.record(k, x)

    recorder.record(k, x, force=True)
    report.rounds_run = k
    report.final_values = x

    violations = recorder.violation_summary()
    if any(violations.values()) or report.matrix_violations:
        logger.warning(f"⚠️ Assumption violations during run: {violations}, "
                       f"invalid matrices in {len(report.matrix_violations)} round(s)")
    if report.converged:
        logger.info(f"✅ Converged at round {k}")
    else:
        logger.info(f"⏹️ No convergence within {max_rounds} rounds")
    return report


def convergence_time_bound(n: int, B: int, eta: float, epsilon: float, c: float) -> float:
    """c·(n²/η)·B·log(1/ε)"""
    return c * (n * n / eta) * B * math.log(1.0 / epsilon)
