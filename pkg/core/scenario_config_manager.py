#!/usr/bin/env python3
"""
🎛️ SCENARIO CONFIGURATION MANAGER 🎛️
Loading, validation and execution of averaging scenarios.

A scenario names a protocol, the network size and window, the weight
parameters, an optional resolution Q and an initial condition. Files may
be JSON or YAML; `execute` builds the topology, runs it and writes the
trajectory CSV plus a JSON summary that embeds the resolved configuration.
"""

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_core import PydanticCustomError

from core.balancing_protocol import run_balancing
from core.consensus_engine import RunReport, run
from core.graph_topology import (
    AvgnetError,
    GraphSnapshot,
    RandomGraphTopology,
    StaticTopology,
    TopologySequence,
    load_sequence,
    make_rng,
)
from core.quantized_consensus import (
    QuantizedRunReport,
    QuantizedVector,
    converse_scenario,
    random_quantized_vector,
    run_quantized,
    simulate_converse,
)
from core.weight_matrices import (
    BirkhoffTopology,
    EqualNeighborTopology,
    StaticWeights,
    circulant_matrix,
    circulant_second_eigenvector,
    load_weight_sequence,
)

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "AVGNET_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "results"

Protocol = Literal["matrix-sequence", "equal-neighbor", "balancing", "circulant", "converse"]
GraphModel = Literal["random-erdos-renyi", "random-geometric", "complete", "path", "cycle", "star", "file"]


class ScenarioConfigError(AvgnetError):
    """Invalid scenario; `fields` names every offending setting"""

    def __init__(self, message: str, fields: Optional[List[str]] = None):
        super().__init__(message)
        self.fields = fields or []


class GraphSpec(BaseModel):
    """Where the per-round graphs come from"""
    model_config = ConfigDict(extra="forbid")

    model: GraphModel = "random-erdos-renyi"
    p: float = Field(0.3, gt=0, le=1)
    radius: float = Field(0.3, gt=0)
    repair: bool = True
    file: Optional[str] = None


class InitialSpec(BaseModel):
    """Initial condition: explicit values, seeded uniform draws or the circulant eigenvector"""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["explicit", "uniform", "eigenvector"] = "uniform"
    values: Optional[List[float]] = None
    low: float = 0.0
    high: float = 1.0


def _invalid(field: str, message: str) -> PydanticCustomError:
    return PydanticCustomError("scenario", "{field}: {message}", {"field": field, "message": message})


class ScenarioConfig(BaseModel):
    """One averaging experiment"""
    model_config = ConfigDict(extra="forbid")

    name: str = Field("scenario", min_length=1)
    protocol: Protocol = "matrix-sequence"
    n: int = Field(10, ge=1)
    B: int = Field(1, ge=1)
    eta: float = Field(0.25, gt=0, le=1)
    eps: Optional[float] = Field(None, gt=0, lt=1)
    epsilon: float = Field(0.01, gt=0, lt=1)
    Q: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = Field(None, ge=0)
    rng: Literal["PCG64", "MT19937", "Philox", "SFC64"] = "PCG64"
    max_rounds: int = Field(100_000, ge=1)
    stride: int = Field(1, ge=1)
    num_permutations: int = Field(3, ge=1)
    matrix_file: Optional[str] = None
    graph: GraphSpec = Field(default_factory=GraphSpec)
    initial: InitialSpec = Field(default_factory=InitialSpec)

    @model_validator(mode="after")
    def _check_combination(self) -> "ScenarioConfig":
        if self.protocol == "converse":
            if self.Q is None:
                raise _invalid("Q", "the converse construction needs a resolution Q")
            if self.n % 2:
                raise _invalid("n", "the converse construction needs an even n")
            if not self.Q < self.n // 2:
                raise _invalid("Q", f"the converse construction needs Q < n/2 = {self.n // 2}")
        if self.protocol == "circulant":
            if self.n < 3:
                raise _invalid("n", "the circulant construction needs n >= 3")
            if not self.eta < 0.5:
                raise _invalid("eta", "the circulant construction needs eta < 1/2")
        if self.protocol == "matrix-sequence" and self.matrix_file is None \
                and self.num_permutations > 1 and self.eta * self.num_permutations > 1:
            raise _invalid("eta", f"{self.num_permutations} coefficients of at least eta cannot sum to 1")
        if self.protocol == "equal-neighbor" and self.eps is not None and self.eps * (self.n - 1) >= 1:
            raise _invalid("eps", f"eps must be below 1/(n-1) = {1 / max(self.n - 1, 1):g}")
        if self.graph.model == "file" and not self.graph.file:
            raise _invalid("graph.file", "graph model 'file' needs a file path")
        if self.initial.kind == "explicit":
            if self.initial.values is None or len(self.initial.values) != self.n:
                raise _invalid("initial.values", f"explicit initial values need exactly n={self.n} entries")
        elif not self.initial.low <= self.initial.high:
            raise _invalid("initial.high", "high must not be below low")
        if self.seed is None and self.randomized_pieces:
            raise _invalid("seed", f"a seed is needed for {', '.join(self.randomized_pieces)}")
        return self

    @property
    def randomized_pieces(self) -> List[str]:
        """Parts of the scenario drawn from the seeded generator"""
        if self.protocol == "converse":
            return []
        pieces = []
        if self.protocol == "matrix-sequence" and self.matrix_file is None:
            pieces.append("Birkhoff matrices")
        if self.protocol in ("equal-neighbor", "balancing") and self.graph.model.startswith("random-"):
            pieces.append(f"{self.graph.model} graphs")
        if self.initial.kind == "uniform":
            pieces.append("uniform initial values")
        return pieces

    @property
    def quantized(self) -> bool:
        return self.Q is not None


def _error_fields(error: ValidationError) -> List[str]:
    fields = []
    for item in error.errors():
        ctx = item.get("ctx") or {}
        if "field" in ctx:
            fields.append(str(ctx["field"]))
        elif item.get("loc"):
            fields.append(".".join(str(part) for part in item["loc"]))
    return fields


def parse_config(data: Dict[str, Any]) -> ScenarioConfig:
    """Validate a raw mapping, converting pydantic errors into ScenarioConfigError"""
    if not isinstance(data, dict):
        raise ScenarioConfigError(f"Scenario must be a mapping, got {type(data).__name__}")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        fields = _error_fields(e)
        raise ScenarioConfigError(f"Invalid scenario ({', '.join(fields)}):\n{e}", fields) from e


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """Read a JSON or YAML scenario file"""
    path = Path(path)
    if not path.exists():
        raise ScenarioConfigError(f"Scenario file not found: {path}", ["path"])
    try:
        with open(path, "r", encoding="utf-8") as f:
            if path.suffix.lower() in (".yaml", ".yml"):
                data = yaml.safe_load(f)
            else:
                data = json.load(f)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ScenarioConfigError(f"Cannot parse {path}: {e}", ["path"]) from e
    config = parse_config(data)
    logger.info(f"✅ Loaded scenario '{config.name}' ({config.protocol}) from {path}")
    return config


def build_graphs(config: ScenarioConfig) -> TopologySequence:
    """The per-round graph sequence described by `config.graph`"""
    spec = config.graph
    if spec.model == "file":
        return load_sequence(spec.file)
    if spec.model.startswith("random-"):
        return RandomGraphTopology(config.n, config.seed, window=config.B,
                                   model=spec.model[len("random-"):].replace("-", "_"),
                                   p=spec.p, radius=spec.radius, repair=spec.repair,
                                   algorithm=config.rng)
    builders = {
        "complete": GraphSnapshot.complete,
        "path": GraphSnapshot.path,
        "cycle": GraphSnapshot.cycle,
        "star": GraphSnapshot.star,
    }
    return StaticTopology(builders[spec.model](config.n), window=config.B)


def build_topology(config: ScenarioConfig) -> TopologySequence:
    """Weighted sequence for matrix protocols, graph sequence for balancing"""
    if config.protocol == "matrix-sequence":
        if config.matrix_file:
            return load_weight_sequence(config.matrix_file)
        return BirkhoffTopology(config.n, config.num_permutations, config.eta, config.seed,
                                window=config.B, algorithm=config.rng)
    if config.protocol == "circulant":
        return StaticWeights(circulant_matrix(config.n, config.eta), window=config.B)
    if config.protocol == "equal-neighbor":
        eps = config.eps if config.eps is not None else 1.0 / config.n
        return EqualNeighborTopology(build_graphs(config), eps)
    if config.protocol == "balancing":
        return build_graphs(config)
    return converse_scenario(config.n, config.Q).schedule


def build_initial(config: ScenarioConfig) -> Union[np.ndarray, QuantizedVector]:
    """x(0) as reals, or as a QuantizedVector when Q is set"""
    spec = config.initial
    q = config.Q
    if spec.kind == "explicit":
        values = np.array(spec.values, dtype=float)
        return QuantizedVector.from_values(values, q) if q else values
    if spec.kind == "eigenvector":
        values = circulant_second_eigenvector(config.n) if config.n >= 3 else np.zeros(config.n)
        return QuantizedVector.floor_of(values, q) if q else values
    if q:
        return random_quantized_vector(config.n, q, config.seed, spec.low, spec.high, config.rng)
    return make_rng(config.seed, algorithm=config.rng).uniform(spec.low, spec.high, size=config.n)


@dataclass
class ExperimentResult:
    """Outcome of one executed scenario"""
    config: ScenarioConfig
    report: Union[RunReport, QuantizedRunReport]
    csv_path: Optional[Path] = None
    json_path: Optional[Path] = None

    @property
    def quantized(self) -> bool:
        return isinstance(self.report, QuantizedRunReport)

    @property
    def time(self) -> Optional[int]:
        """Convergence time (unquantized) or termination round (quantized)"""
        if self.quantized:
            return self.report.termination_round
        return self.report.convergence_time

    @property
    def final_error(self) -> Optional[float]:
        """Mean drift (quantized) or largest deviation from the initial mean"""
        if self.quantized:
            drift = self.report.mean_drift
            return float(drift) if drift is not None else None
        return self.report.limit_deviation

    def to_dict(self) -> Dict[str, Any]:
        return {
            'config': self.config.model_dump(mode="json"),
            'quantized': self.quantized,
            'time': self.time,
            'final_error': self.final_error,
            'report': self.report.summary(),
        }


def resolve_output_dir(output_dir: Optional[Union[str, Path]] = None) -> Path:
    """Explicit directory, else AVGNET_OUTPUT_DIR, else ./results"""
    return Path(output_dir or os.getenv(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)


def execute(config: ScenarioConfig, output_dir: Optional[Union[str, Path]] = None,
            write: bool = True) -> ExperimentResult:
    """Build and run the scenario; write <name>.csv and <name>.json when asked"""
    logger.info(f"🚀 Executing scenario '{config.name}' ({config.protocol}, "
                f"{'Q=' + str(config.Q) if config.quantized else 'unquantized'})")

    if config.protocol == "converse":
        report = simulate_converse(converse_scenario(config.n, config.Q))
    else:
        seq = build_topology(config)
        x0 = build_initial(config)
        if config.quantized:
            report = run_quantized(x0, seq, config.max_rounds,
                                   protocol="balancing" if config.protocol == "balancing" else "matrices",
                                   epsilon=config.epsilon, stride=config.stride)
        elif config.protocol == "balancing":
            report = run_balancing(x0, seq, config.epsilon, config.max_rounds, stride=config.stride)
        else:
            report = run(x0, seq, config.epsilon, config.max_rounds, stride=config.stride)

    result = ExperimentResult(config, report)
    if write:
        directory = resolve_output_dir(output_dir)
        directory.mkdir(parents=True, exist_ok=True)
        result.csv_path = report.write_csv(directory / f"{config.name}.csv")
        result.json_path = directory / f"{config.name}.json"
        with open(result.json_path, "w", encoding="utf-8") as f:
            json.dump(result.to_dict(), f, indent=2)
        logger.info(f"💾 Saved summary to {result.json_path}")
    return result
