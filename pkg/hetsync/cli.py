#!/usr/bin/env python3
""" CLI tool to solve barriers, compare synchronization strategies and sweep M.

Exit codes: 0 success, 2 config/parse error, 3 infeasible strategy,
4 output directory not writable, 5 any other run failure (scan or event
budget exceeded, numerical failure).
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

from hetsync.config import load_cluster, load_experiment
from hetsync.exceptions import ConfigError, HetsyncError, InfeasibleClusterError, OutputDirError
from hetsync.harness import reference_runs, run_experiment, sweep_staleness, write_experiment
from hetsync.solver import solve_barrier, staleness_gap
from hetsync.utils import ensure_output_dir, write_csv

logger = logging.getLogger('hetsync')

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_OUTPUT = 4
EXIT_FAILURE = 5

SWEEP_PARAMS = ('M',)


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog='hetsync',
                                     description='Synchronization strategies for heterogeneous data-parallel SGD.')
    parser.add_argument('--verbose', '-v', action='store_true', help='Log debug messages.')
    commands = parser.add_subparsers(dest='command', required=True)

    solve = commands.add_parser('solve', help='Print the optimal barrier for a cluster config as JSON.')
    solve.add_argument('path', type=str, help='Cluster or experiment config file.')

    simulate = commands.add_parser('simulate', help='Run every strategy and seed of an experiment config.')
    simulate.add_argument('path', type=str, help='Experiment config file.')
    simulate.add_argument('--jobs', '-j', type=int, default=1,
                          help='Number of processes for independent runs.')
    simulate.add_argument('--output_dir', '-o', type=str, default=None,
                          help='Override the output directory of the config.')

    sweep = commands.add_parser('sweep', help='Solve and simulate load-balanced SGD over a range of M.')
    sweep.add_argument('path', type=str, help='Experiment config file.')
    sweep.add_argument('--param', type=str, default='M', choices=SWEEP_PARAMS,
                       help='Parameter to sweep.')
    sweep.add_argument('--from', dest='lo', type=int, required=True, help='First value (inclusive).')
    sweep.add_argument('--to', dest='hi', type=int, required=True, help='Last value (inclusive).')
    sweep.add_argument('--jobs', '-j', type=int, default=1,
                       help='Number of processes for independent runs.')
    sweep.add_argument('--output_dir', '-o', type=str, default=None,
                       help='Override the output directory of the config.')
    return parser.parse_args(argv)


def cmd_solve(args: argparse.Namespace) -> int:
    cluster = load_cluster(args.path)
    solution = solve_barrier(cluster)
    output = solution.to_dict()
    output['staleness_gap'] = staleness_gap(solution.barrier_ticks, cluster)
    print(json.dumps(output, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    experiment = load_experiment(args.path)
    output_dir = ensure_output_dir(args.output_dir or experiment.output_dir)
    results = run_experiment(experiment, jobs=args.jobs)
    write_experiment(experiment, results, reference_runs(experiment), output_dir=output_dir)
    logger.info('%d runs written to %s', len(results), output_dir)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    experiment = load_experiment(args.path)
    if args.lo < 1 or args.hi < args.lo:
        raise ConfigError(f'sweep range must satisfy 1 <= from <= to, got {args.lo}..{args.hi}')
    output_dir = ensure_output_dir(args.output_dir or experiment.output_dir)
    frame = sweep_staleness(experiment, args.lo, args.hi, jobs=args.jobs)
    path = write_csv(frame, output_dir / f'sweep_{args.param}.csv')
    logger.info('wrote %s', path)
    return EXIT_OK


COMMANDS = {
    'solve': cmd_solve,
    'simulate': cmd_simulate,
    'sweep': cmd_sweep,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f'hetsync: config error: {err}', file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleClusterError as err:
        print(f'hetsync: infeasible: {err}', file=sys.stderr)
        return EXIT_INFEASIBLE
    except OutputDirError as err:
        print(f'hetsync: {err}', file=sys.stderr)
        return EXIT_OUTPUT
    except HetsyncError as err:
        print(f'hetsync: {err}', file=sys.stderr)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
