#!/usr/bin/env python3
"""
🤝 BALANCING PROTOCOL 🤝
Decentralized weight selection by offer / accept exchanges.

Each synchronous round runs four phases over an undirected graph:
  1. every node broadcasts its value to its neighbors
  2. a node with a strictly smaller neighbor offers (x_C - x_D)/3 to a
     smallest such neighbor D (lowest index on ties)
  3. every node accepts its largest incoming offer (lowest offerer index
     on ties) and rejects the rest
  4. offerers whose offer was accepted pay the offered amount

No node observes another node's update from the same phase. The implied
doubly stochastic matrix is assembled while the exchanges settle.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from core.consensus_engine import RunReport, TrajectoryRecorder
from core.graph_topology import AvgnetError, GraphSnapshot, TopologySequence
from core.lyapunov import NodeVector, as_node_vector, sample_variance
from core.weight_matrices import WeightMatrix, validate_assumption_1

logger = logging.getLogger(__name__)

# Every nonzero implied weight is a multiple of one third
BALANCING_ETA = 1.0 / 3.0


class ProtocolError(AvgnetError):
    """The balancing protocol was asked to run on an unsupported graph"""


@dataclass(frozen=True)
class Exchange:
    """An accepted offer: `offerer` pays `amount` to `acceptor`"""
    offerer: int
    acceptor: int
    amount: float

    def to_dict(self) -> Dict[str, Any]:
        return {'offerer': self.offerer, 'acceptor': self.acceptor, 'amount': self.amount}


@dataclass
class RoundOutcome:
    """New values, the implied matrix and the exchanges of one round"""
    new_values: NodeVector
    implied_matrix: WeightMatrix
    accepted_exchanges: List[Exchange] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'new_values': self.new_values.tolist(),
            'implied_matrix': self.implied_matrix.to_dict(),
            'accepted_exchanges': [e.to_dict() for e in self.accepted_exchanges],
        }


def _collect_offers(x: np.ndarray, g: GraphSnapshot) -> Dict[int, List[Tuple[float, int]]]:
    """Phases 1-2: offers keyed by the receiving node"""
    incoming: Dict[int, List[Tuple[float, int]]] = defaultdict(list)
    for c, nbrs in enumerate(g.neighbors):
        smaller = [d for d in nbrs if x[d] < x[c]]
        if not smaller:
            continue
        target = min(smaller, key=lambda d: (x[d], d))
        incoming[target].append(((x[c] - x[target]) / 3.0, c))
    return incoming


def balancing_round(x: Sequence[float], g: GraphSnapshot) -> RoundOutcome:
    """Run one lockstep round of the four balancing phases"""
    values = as_node_vector(x)
    if values.size != g.n:
        raise AvgnetError(f"x has {values.size} entries, graph has {g.n} nodes")
    if not g.is_undirected():
        raise ProtocolError("The balancing protocol needs an undirected graph")

    incoming = _collect_offers(values, g)

    accepted: List[Exchange] = []
    for acceptor in sorted(incoming):
        amount, offerer = max(incoming[acceptor], key=lambda offer: (offer[0], -offer[1]))
        accepted.append(Exchange(offerer, acceptor, amount))

    new_values = values.copy()
    implied = np.eye(g.n)
    third = 1.0 / 3.0
    for exchange in accepted:
        i, j = exchange.offerer, exchange.acceptor
        new_values[j] += exchange.amount
        new_values[i] -= exchange.amount
        implied[i, i] -= third
        implied[i, j] += third
        implied[j, j] -= third
        implied[j, i] += third

    return RoundOutcome(new_values, WeightMatrix(implied, BALANCING_ETA), accepted)


def run_balancing(x0: Sequence[float], seq: TopologySequence, epsilon: float, max_rounds: int,
                  stride: int = 1) -> RunReport:
    """
    Iterate balancing rounds until V(k) ≤ ε·V(0) or max_rounds.

    Window audits use the supplied graphs for connectivity and the realized
    edge sets E(A(k)) of the implied matrices for the cut condition.
    Rounds whose implied matrix fails validation are listed in the report.
    """
    if not 0 < epsilon < 1:
        raise AvgnetError(f"epsilon must lie in (0, 1), got {epsilon}")
    x = as_node_vector(x0)
    if seq.n != x.size:
        raise AvgnetError(f"x0 has {x.size} entries, sequence has {seq.n} nodes")

    recorder = TrajectoryRecorder(seq.window, stride)
    recorder.record(0, x, force=True)
    v0 = sample_variance(x)
    report = RunReport(x.size, seq.window, BALANCING_ETA, epsilon, recorder.trajectory, None, 0,
                       x, float(x.mean()), recorder.windows)
    if v0 == 0:
        report.convergence_time = 0
        return report

    logger.info(f"▶️ Balancing run: n={x.size}, B={seq.window}, epsilon={epsilon:g}")
    threshold = epsilon * v0
    k = 0
    while k < max_rounds:
        g = seq.snapshot(k)
        recorder.begin_round(k, x)
        outcome = balancing_round(x, g)
        if not validate_assumption_1(outcome.implied_matrix).passed:
            report.matrix_violations.append(k)
        x = outcome.new_values
        recorder.end_round(k, x, g, outcome.implied_matrix.graph)
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
        logger.warning(f"⚠️ Balancing audit found violations: {violations}, "
                       f"invalid implied matrices in {len(report.matrix_violations)} round(s)")
    logger.info(f"✅ Balancing run finished after {k} rounds (converged={report.converged})")
    return report
