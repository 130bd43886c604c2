""" Experiment runs: build tasks, simulate every (strategy, seed), write results. """

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from hetsync.config import ExperimentConfig, TaskConfig
from hetsync.exceptions import ConfigError, InfeasibleClusterError
from hetsync.simulator import (EventKind, SimConfig, SimReport, idle_fraction, idle_ticks_until,
                               simulate, speedup, ticks_to_loss)
from hetsync.solver import ClusterSpec, solve_barrier
from hetsync.strategies import BSP, LoadBalanced, StrategySpec, plan_round
from hetsync.training import ModelKind, TrainingTask, generate_synthetic_dataset, partition
from hetsync.utils import ensure_output_dir, write_csv, write_json, write_lines

logger = logging.getLogger(__name__)

METRICS_COLUMNS = ['strategy', 'seed', 'tick', 'loss', 'accuracy', 'iters', 'idle_frac']
SWEEP_COLUMNS = ['M', 'status', 'barrier_ticks', 'max_wait', 'idle_fraction', 'final_loss']

# relative slack over the single-node final loss that counts as converged
THRESHOLD_SLACK = 0.02

MS_PER_HOUR = 3_600_000


@dataclass(frozen=True, eq=False)
class RunResult:
    strategy: StrategySpec
    seed: int
    report: SimReport


def build_task(task: TaskConfig, cluster: ClusterSpec, strategy: StrategySpec, seed: int) -> TrainingTask:
    """Generate the dataset for `seed` and shard it for `strategy`.

    With the 'auto' partition, load-balanced runs give worker i a data share
    proportional to its local steps tau_i; every other run splits evenly.
    """
    dataset = generate_synthetic_dataset(task.num_examples, task.dimension, seed)
    weights = [1] * cluster.size
    if task.partition == 'auto' and isinstance(strategy, LoadBalanced):
        weights = list(plan_round(strategy, cluster).target_list(cluster))
    try:
        return TrainingTask(kind=ModelKind.parse(task.kind),
                            dimension=task.dimension,
                            dataset=partition(dataset, weights),
                            learning_rate=task.learning_rate,
                            batch_size=task.batch_size,
                            seed=seed,
                            hidden_units=task.hidden_units)
    except ValueError as err:
        raise ConfigError(f'task does not fit a {cluster.size}-worker {strategy.label} run: {err}') from err


def build_sim_config(experiment: ExperimentConfig,
                     strategy: StrategySpec,
                     seed: int,
                     cluster: Optional[ClusterSpec] = None) -> SimConfig:
    cluster = cluster or experiment.cluster
    return SimConfig(cluster=cluster,
                     strategy=strategy,
                     task=build_task(experiment.task, cluster, strategy, seed),
                     horizon_ticks=experiment.horizon_ticks,
                     eval_every_ticks=experiment.eval_every_ticks,
                     jitter_pct=experiment.jitter_pct,
                     seed=seed,
                     sync_latency_ticks=experiment.sync_latency_ticks,
                     averaging=experiment.averaging,
                     max_events=experiment.max_events)


def single_node_config(experiment: ExperimentConfig, seed: int) -> SimConfig:
    """The slowest worker alone on the full dataset, the reference for speedup and convergence."""
    cluster = ClusterSpec.from_iter_ticks([max(experiment.cluster.iter_ticks)], staleness_bound=1)
    return build_sim_config(experiment, BSP(), seed, cluster=cluster)


def check_feasible(experiment: ExperimentConfig) -> None:
    """Plan every strategy once so infeasible ones fail before any run starts."""
    for strategy in experiment.strategies:
        plan_round(strategy, experiment.cluster)


def _run_one(job: Tuple[ExperimentConfig, StrategySpec, int]) -> RunResult:
    experiment, strategy, seed = job
    return RunResult(strategy, seed, simulate(build_sim_config(experiment, strategy, seed)))


def _map(jobs: list, function, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [function(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(function, jobs))


def run_experiment(experiment: ExperimentConfig, jobs: int = 1) -> List[RunResult]:
    """Simulate every (strategy, seed) pair, in config order.

    Args:
        experiment (ExperimentConfig): What to run.
        jobs (int): Worker processes; runs are independent so results do not
            depend on this.
    """
    check_feasible(experiment)
    work = [(experiment, strategy, seed)
            for strategy in experiment.strategies
            for seed in experiment.repeat_seeds]
    return _map(work, _run_one, jobs)


def reference_runs(experiment: ExperimentConfig) -> Dict[int, SimReport]:
    """Single-node run per seed."""
    return {seed: simulate(single_node_config(experiment, seed))
            for seed in experiment.repeat_seeds}


def metrics_frame(report: SimReport, seed: int) -> pd.DataFrame:
    """One row per evaluation: loss, accuracy, iterations and idle fraction so far."""
    ticks = np.array([p.tick for p in report.loss_curve], dtype=np.int64)
    ends = np.array([e.tick for e in report.events if e.kind is EventKind.ITER_END], dtype=np.int64)
    iters = np.searchsorted(ends, ticks, side='right')
    idle = idle_ticks_until(report, ticks)
    capacity = len(report.per_worker) * ticks
    idle_frac = np.divide(idle, capacity, out=np.zeros(len(ticks)), where=capacity > 0)
    return pd.DataFrame({
        'strategy': report.strategy_label,
        'seed': seed,
        'tick': ticks,
        'loss': [p.loss for p in report.loss_curve],
        'accuracy': [p.accuracy for p in report.loss_curve],
        'iters': iters,
        'idle_frac': idle_frac,
    }, columns=METRICS_COLUMNS)


def summarize(experiment: ExperimentConfig,
              results: Sequence[RunResult],
              references: Optional[Dict[int, SimReport]] = None) -> Dict[str, object]:
    """Per-strategy means over seeds, keyed by strategy label."""
    rows = []
    for result in results:
        report = result.report
        reached = None
        relative = np.nan
        if references is not None:
            reference = references[result.seed]
            reached = ticks_to_loss(report, reference.final_loss * (1.0 + THRESHOLD_SLACK))
            relative = speedup(report, reference)
        rows.append({
            'strategy': report.strategy_label,
            'final_loss': report.final_loss,
            'final_accuracy': report.final_accuracy,
            'throughput_iters_per_ktick': report.throughput_iters_per_ktick,
            'idle_fraction': idle_fraction(report),
            'ticks_to_threshold': np.nan if reached is None else float(reached),
            'speedup': relative,
            'max_staleness': report.max_staleness,
        })
    frame = pd.DataFrame(rows)
    means = frame.groupby('strategy', sort=False).agg({
        'final_loss': 'mean',
        'final_accuracy': 'mean',
        'throughput_iters_per_ktick': 'mean',
        'idle_fraction': 'mean',
        'ticks_to_threshold': 'mean',
        'speedup': 'mean',
        'max_staleness': 'max',
    })

    strategies = {}
    for strategy in experiment.strategies:
        row = means.loc[strategy.label]
        entry = {
            'final_loss': float(row['final_loss']),
            'final_accuracy': float(row['final_accuracy']),
            'throughput_iters_per_ktick': float(row['throughput_iters_per_ktick']),
            'idle_fraction': float(row['idle_fraction']),
            'ticks_to_threshold': None if np.isnan(row['ticks_to_threshold'])
                                  else float(row['ticks_to_threshold']),
            'speedup': None if np.isnan(row['speedup']) else float(row['speedup']),
            'max_staleness': int(row['max_staleness']),
        }
        if experiment.tick_ms is not None:
            ticks_per_hour = MS_PER_HOUR / experiment.tick_ms
            entry['iterations_per_hour'] = entry['throughput_iters_per_ktick'] * ticks_per_hour / 1000.0
        plan = plan_round(strategy, experiment.cluster)
        if plan.solution is not None:
            entry['barrier_ticks'] = plan.solution.barrier_ticks
            entry['local_steps'] = list(plan.solution.local_steps)
        strategies[strategy.label] = entry

    return {
        'horizon_ticks': experiment.horizon_ticks,
        'seeds': list(experiment.repeat_seeds),
        'threshold_slack': THRESHOLD_SLACK,
        'strategies': strategies,
    }


def run_file_stem(result: RunResult) -> str:
    return f'{result.report.strategy_label}_seed{result.seed}'


def write_experiment(experiment: ExperimentConfig,
                     results: Sequence[RunResult],
                     references: Optional[Dict[int, SimReport]] = None,
                     output_dir: Optional[Path] = None) -> List[Path]:
    """Metrics CSV and event log per run, then summary.json once at the end."""
    output_dir = ensure_output_dir(output_dir or experiment.output_dir)
    written = []
    for result in results:
        stem = run_file_stem(result)
        written.append(write_csv(metrics_frame(result.report, result.seed),
                                 output_dir / f'{stem}_metrics.csv'))
        written.append(write_lines(result.report.event_lines(), output_dir / f'{stem}_events.log'))
    written.append(write_json(summarize(experiment, results, references), output_dir / 'summary.json'))
    for path in written:
        logger.info('wrote %s', path)
    return written


def sweep_staleness(experiment: ExperimentConfig, lo: int, hi: int, jobs: int = 1) -> pd.DataFrame:
    """Solve and simulate load-balanced local SGD for every M in [lo, hi].

    Infeasible bounds stay in the table with status 'infeasible'.
    """
    if lo < 1 or hi < lo:
        raise ValueError(f'sweep range must satisfy 1 <= lo <= hi, got {lo}..{hi}')
    rows = []
    for bound in range(lo, hi + 1):
        cluster = experiment.cluster.with_staleness_bound(bound)
        try:
            solution = solve_barrier(cluster)
        except InfeasibleClusterError as err:
            logger.info('M=%d infeasible: %s', bound, err)
            rows.append({'M': bound, 'status': 'infeasible'})
            continue
        strategy = LoadBalanced(staleness_bound=bound)
        work = [(experiment, strategy, seed) for seed in experiment.repeat_seeds]
        reports = [r.report for r in _map(work, _run_one, jobs)]
        rows.append({
            'M': bound,
            'status': 'ok',
            'barrier_ticks': solution.barrier_ticks,
            'max_wait': solution.max_wait_ticks,
            'idle_fraction': float(np.mean([idle_fraction(r) for r in reports])),
            'final_loss': float(np.mean([r.final_loss for r in reports])),
        })
    frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    return frame.astype({'barrier_ticks': 'Int64', 'max_wait': 'Int64'})
