#!/usr/bin/env python3
"""
🎯 AVGNET CLI
Command-line interface for averaging experiments

Usage:
  python avgnet_cli.py run --scenario scenarios/circulant.yaml
  python avgnet_cli.py run --protocol balancing --graph-seq graphs.json --x0 '[1, 0, 0]' --out results/bal.csv
  python avgnet_cli.py run --protocol matrix-sequence --n 20 --quantized --q 8 --seed 3
  python avgnet_cli.py sweep --scenario scenarios/quantized.yaml --axis Q --values 10,100,1000,10000
  python avgnet_cli.py verify matrix --matrix A.json
  python avgnet_cli.py verify assumptions --graph-seq graphs.json --windows 5 --x '[3, 1, 2]'
  python avgnet_cli.py converse --n 6 --q 2
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from dotenv import load_dotenv

# Add the project root to path for imports
sys.path.append(str(Path(__file__).parent))

from core.graph_topology import AvgnetError, check_b_connectivity, check_cut_assumption, load_sequence
from core.quantized_consensus import converse_scenario, simulate_converse
from core.scenario_config_manager import (
    ExperimentResult,
    ScenarioConfigError,
    execute,
    load_config,
    parse_config,
    resolve_output_dir,
)
from core.sweep_orchestrator import sweep
from core.weight_matrices import load_matrix, validate_assumption_1

LOG_LEVEL_ENV = "AVGNET_LOG_LEVEL"
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _read_scenario_data(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    return load_config(path).model_dump(exclude_unset=True)


def _read_vector(text: str) -> List[float]:
    """A JSON file holding a list, or an inline JSON list"""
    if Path(text).exists():
        with open(text, 'r', encoding='utf-8') as f:
            data = json.load(f)
    else:
        data = json.loads(text)
    if not isinstance(data, list):
        raise ScenarioConfigError(f"Expected a JSON list of node values, got {type(data).__name__}", ["x0"])
    return [float(v) for v in data]


def _parse_value(text: str) -> Any:
    text = text.strip()
    for parse in (int, float):
        try:
            return parse(text)
        except ValueError:
            pass
    return yaml.safe_load(text)


class AvgnetCLI:
    """Command-line interface for averaging experiments"""

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = resolve_output_dir(output_dir)

    def run(self, args: argparse.Namespace) -> int:
        """Execute one scenario from a file, flags, or both (flags win)"""
        data = _read_scenario_data(args.scenario)
        output_dir = self.output_dir

        overrides = {
            'name': args.name,
            'protocol': args.protocol,
            'n': args.n,
            'B': args.B,
            'eta': args.eta,
            'eps': args.eps,
            'epsilon': args.epsilon,
            'seed': args.seed,
            'rng': args.rng,
            'max_rounds': args.max_rounds,
            'stride': args.stride,
            'matrix_file': args.matrices,
        }
        data.update({k: v for k, v in overrides.items() if v is not None})
        if args.quantized or args.q is not None:
            data['Q'] = args.q if args.q is not None else data.get('Q')
            if data['Q'] is None:
                raise ScenarioConfigError("--quantized needs --q", ["Q"])
        if args.graph_seq:
            data['graph'] = {'model': 'file', 'file': args.graph_seq}
            if 'n' not in data:
                data['n'] = load_sequence(args.graph_seq).n
        if args.x0:
            try:
                data['seed'] = int(args.x0) if args.seed is None else data['seed']
                data['initial'] = {'kind': 'uniform'}
            except ValueError:
                values = _read_vector(args.x0)
                data['initial'] = {'kind': 'explicit', 'values': values}
                data.setdefault('n', len(values))
        if args.out:
            out = Path(args.out)
            if out.suffix.lower() == '.csv':
                output_dir = out.parent
                data['name'] = out.stem
            else:
                output_dir = out

        config = parse_config(data)
        result = execute(config, output_dir)
        self._print_result(result)
        return EXIT_OK

    def _print_result(self, result: ExperimentResult):
        summary = result.report.summary()
        print("\n" + "=" * 60)
        print(f"📊 RESULTS: {result.config.name} ({result.config.protocol})")
        print("=" * 60)
        print(f"🔢 n={summary['n']}, B={summary['B']}")
        if result.quantized:
            print(f"🧮 Q={summary['Q']}, K={summary['K']}")
            print(f"🏁 Termination round: {summary['termination_round']}")
            print(f"🎯 Final value: {summary['final_value']}")
            print(f"📏 Mean drift: {summary['mean_drift']}")
        else:
            print(f"⏱️  Convergence time: {summary['convergence_time']} (epsilon={summary['epsilon']:g})")
            print(f"📏 Limit deviation: {summary['limit_deviation']:.3e}")
        print(f"🔁 Rounds run: {summary['rounds_run']}")
        print(f"⚠️  Windows not B-connected: {summary['windows_not_connected']}, "
              f"cut condition failed: {summary['windows_cut_failed']}")
        if result.csv_path:
            print(f"💾 Trajectory: {result.csv_path}")
            print(f"💾 Summary: {result.json_path}")
        print("=" * 60)

    def sweep(self, args: argparse.Namespace) -> int:
        """Run the scenario once per value and print the table"""
        config = load_config(args.scenario)
        values = [_parse_value(v) for v in args.values.split(',') if v.strip()]
        table = sweep(config, args.axis, values, output_dir=args.out or self.output_dir,
                      max_workers=args.workers)

        print(f"\n📈 SWEEP {config.name}: {args.axis}")
        print("=" * 60)
        print(table.to_string(index=False) if not table.empty else "(no values)")
        print("=" * 60)
        return EXIT_FAILED if (table['status'] == 'failed').any() else EXIT_OK

    def verify_matrix(self, args: argparse.Namespace) -> int:
        """Validate a weight matrix file against the averaging conditions"""
        A = load_matrix(args.matrix)
        report = validate_assumption_1(A, eta=args.eta, doubly=not args.row_only)
        print(report.summary())
        return EXIT_OK if report.passed else EXIT_FAILED

    def verify_assumptions(self, args: argparse.Namespace) -> int:
        """B-connectivity over the given windows, and the cut condition for window 0"""
        seq = load_sequence(args.graph_seq)
        connected = check_b_connectivity(seq, args.windows)
        print(f"{'✅' if connected else '❌'} B-connectivity over {args.windows} window(s) (B={seq.window}): "
              f"{'holds' if connected else 'fails'}")
        ok = connected
        if args.x:
            x = _read_vector(args.x)
            cut_ok = check_cut_assumption(seq, 0, x)
            print(f"{'✅' if cut_ok else '❌'} Cut condition for window 0: {'holds' if cut_ok else 'fails'}")
            ok = ok and cut_ok
        return EXIT_OK if ok else EXIT_FAILED

    def converse(self, args: argparse.Namespace) -> int:
        """Simulate the complete-subgraph schedule and print its error"""
        scenario = converse_scenario(args.n, args.q)
        report = simulate_converse(scenario)

        print("\n🎯 CONVERSE CONSTRUCTION")
        print("=" * 50)
        print(f"🔢 n={args.n}, Q={args.q}, phases={scenario.phases}")
        print(f"🏁 Final value: {report.final_value}")
        print(f"📐 True average: {report.initial_mean}")
        print(f"📏 Error: {report.mean_drift}")
        print("=" * 50)

        if args.out:
            directory = Path(args.out)
            directory.mkdir(parents=True, exist_ok=True)
            path = directory / f"converse_n{args.n}_q{args.q}.json"
            with open(path, 'w', encoding='utf-8') as f:
                json.dump({'scenario': scenario.to_dict(), 'report': report.summary()}, f, indent=2)
            print(f"💾 Saved to {path}")
        return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='avgnet',
        description="🎯 Distributed averaging over time-varying graphs",
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument('--log-level', type=str, default=None,
                        help=f'Logging level (default: ${LOG_LEVEL_ENV} or INFO)')

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    # Run command
    run_parser = subparsers.add_parser('run', help='Run one scenario')
    run_parser.add_argument('--scenario', type=str, help='Scenario file (JSON or YAML)')
    run_parser.add_argument('--name', type=str, help='Scenario name (output file stem)')
    run_parser.add_argument('--protocol', type=str,
                            choices=['matrix-sequence', 'equal-neighbor', 'balancing', 'circulant', 'converse'])
    run_parser.add_argument('--n', type=int, help='Number of nodes')
    run_parser.add_argument('--B', type=int, help='Window length')
    run_parser.add_argument('--graph-seq', type=str, help='Graph sequence JSON file')
    run_parser.add_argument('--matrices', type=str, help='Weight matrix sequence JSON file')
    run_parser.add_argument('--x0', type=str, help='Initial values: JSON file, inline JSON list, or integer seed')
    run_parser.add_argument('--quantized', action='store_true', help='Use floor quantization')
    run_parser.add_argument('--q', type=int, help='Quantization resolution Q')
    run_parser.add_argument('--eta', type=float)
    run_parser.add_argument('--eps', type=float, help='Equal-neighbor weight')
    run_parser.add_argument('--seed', type=int)
    run_parser.add_argument('--rng', type=str, choices=['PCG64', 'MT19937', 'Philox', 'SFC64'])
    run_parser.add_argument('--epsilon', type=float, help='Convergence threshold on V(k)/V(0)')
    run_parser.add_argument('--max-rounds', type=int)
    run_parser.add_argument('--stride', type=int, help='Record every stride-th round')
    run_parser.add_argument('--out', type=str, help='Output directory, or a .csv path')

    # Sweep command
    sweep_parser = subparsers.add_parser('sweep', help='Run a scenario across parameter values')
    sweep_parser.add_argument('--scenario', type=str, required=True)
    sweep_parser.add_argument('--axis', type=str, required=True, help='Scenario field to vary')
    sweep_parser.add_argument('--values', type=str, required=True, help='Comma-separated values')
    sweep_parser.add_argument('--workers', type=int, default=4, help='Worker threads (default: 4)')
    sweep_parser.add_argument('--out', type=str, help='Output directory')

    # Verify commands
    verify_parser = subparsers.add_parser('verify', help='Check matrices and assumptions')
    verify_sub = verify_parser.add_subparsers(dest='target', help='What to verify')
    matrix_parser = verify_sub.add_parser('matrix', help='Validate a weight matrix')
    matrix_parser.add_argument('--matrix', type=str, required=True)
    matrix_parser.add_argument('--eta', type=float, help='Override the declared eta')
    matrix_parser.add_argument('--row-only', action='store_true', help='Require row sums only')
    assumptions_parser = verify_sub.add_parser('assumptions', help='Check connectivity and the cut condition')
    assumptions_parser.add_argument('--graph-seq', type=str, required=True)
    assumptions_parser.add_argument('--windows', type=int, required=True)
    assumptions_parser.add_argument('--x', type=str, help='Values at window 0 start (JSON)')

    # Converse command
    converse_parser = subparsers.add_parser('converse', help='Simulate the quantized converse construction')
    converse_parser.add_argument('--n', type=int, required=True)
    converse_parser.add_argument('--q', type=int, required=True)
    converse_parser.add_argument('--out', type=str, help='Output directory')

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point"""
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)

    level = (args.log_level or os.getenv(LOG_LEVEL_ENV) or 'INFO').upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT)

    if not args.command or (args.command == 'verify' and not args.target):
        parser.print_help()
        return EXIT_OK

    cli = AvgnetCLI()
    try:
        if args.command == 'run':
            return cli.run(args)
        elif args.command == 'sweep':
            return cli.sweep(args)
        elif args.command == 'verify' and args.target == 'matrix':
            return cli.verify_matrix(args)
        elif args.command == 'verify':
            return cli.verify_assumptions(args)
        elif args.command == 'converse':
            return cli.converse(args)

    except KeyboardInterrupt:
        print("\n⚠️  Operation cancelled by user")
        return EXIT_FAILED
    except ScenarioConfigError as e:
        print(f"❌ Invalid configuration: {e}")
        return EXIT_CONFIG
    except (AvgnetError, OSError, json.JSONDecodeError) as e:
        print(f"❌ Command failed: {e}")
        return EXIT_FAILED
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
