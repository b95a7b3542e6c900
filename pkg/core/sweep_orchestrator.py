#!/usr/bin/env python3
"""
🚀 SWEEP ORCHESTRATOR 🚀
Runs one scenario across a list of values for a single parameter.

Rows execute concurrently on a thread pool; a failing row is reported in
the table instead of aborting the sweep. The table is always sorted by the
swept value, so the result does not depend on completion order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd

from core.graph_topology import AvgnetError
from core.scenario_config_manager import (
    ScenarioConfig,
    ScenarioConfigError,
    execute,
    parse_config,
    resolve_output_dir,
)

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["value", "status", "time", "final_error", "error"]
SWEEPABLE_AXES = ("n", "B", "eta", "eps", "epsilon", "Q", "seed", "max_rounds", "stride", "num_permutations")


def _row_config(base: ScenarioConfig, axis: str, value: Any) -> ScenarioConfig:
    data = base.model_dump()
    data[axis] = value
    data["name"] = f"{base.name}_{axis}_{value}"
    return parse_config(data)


def _run_row(base: ScenarioConfig, axis: str, value: Any, output_dir: Optional[Path]) -> Dict[str, Any]:
    config = _row_config(base, axis, value)
    result = execute(config, output_dir, write=output_dir is not None)
    return {
        'value': value,
        'status': 'ok',
        'time': result.time,
        'final_error': result.final_error,
        'error': None,
    }


def sweep(base: ScenarioConfig, axis: str, values: Sequence[Any],
          output_dir: Optional[Union[str, Path]] = None, max_workers: int = 4) -> pd.DataFrame:
    """
    Execute `base` once per value of `axis`.

    Returns one row per value with columns value, status, time, final_error
    and error. With output_dir set, each row's CSV/JSON and the table
    itself (<name>_sweep_<axis>.csv) are written there.
    """
    if axis not in SWEEPABLE_AXES:
        raise ScenarioConfigError(f"Cannot sweep '{axis}'; numeric axes are {', '.join(SWEEPABLE_AXES)}", [axis])
    if max_workers < 1:
        raise AvgnetError(f"max_workers must be positive, got {max_workers}")
    directory = resolve_output_dir(output_dir) if output_dir is not None else None

    logger.info(f"🚀 Sweeping {axis} over {len(values)} value(s) with {max_workers} worker(s)")
    rows: List[Dict[str, Any]] = []
    if values:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            futures = {executor.submit(_run_row, base, axis, v, directory): v for v in values}
            for future in as_completed(futures):
                value = futures[future]
                try:
                    rows.append(future.result())
                except Exception as e:
                    logger.warning(f"⚠️ Sweep row {axis}={value} failed: {e}")
                    rows.append({'value': value, 'status': 'failed', 'time': None,
                                 'final_error': None, 'error': str(e)})

    table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    if not table.empty:
        table = table.sort_values('value', kind='stable', key=lambda col: col.map(_sort_key)).reset_index(drop=True)
    table.insert(0, 'axis', axis)

    if directory is not None:
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{base.name}_sweep_{axis}.csv"
        table.to_csv(path, index=False)
        logger.info(f"💾 Wrote sweep table to {path}")

    failed = int((table['status'] == 'failed').sum()) if not table.empty else 0
    logger.info(f"✅ Sweep finished: {len(table) - failed} ok, {failed} failed")
    return table


def _sort_key(value: Any):
    # numbers first by magnitude, anything else by its text
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (0, float(value), "")
    return (1, 0.0, str(value))
