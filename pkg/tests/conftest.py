import json
from typing import Optional, Sequence

import pytest

from hetsync.simulator import SimConfig
from hetsync.solver import ClusterSpec
from hetsync.strategies import StrategySpec
from hetsync.training import ModelKind, TrainingTask, generate_synthetic_dataset, partition

REFERENCE_TICKS = [10, 12, 15, 20]


def _make_task(n_workers: int,
               kind: str = 'logistic_regression',
               n: int = 200,
               dim: int = 4,
               seed: int = 1,
               learning_rate: float = 0.05,
               batch_size: int = 4,
               hidden_units: int = 8,
               weights: Optional[Sequence[int]] = None) -> TrainingTask:
    dataset = generate_synthetic_dataset(n, dim, seed)
    shards = partition(dataset, weights or [1] * n_workers)
    return TrainingTask(kind=ModelKind(kind), dimension=dim, dataset=shards,
                        learning_rate=learning_rate, batch_size=batch_size, seed=seed,
                        hidden_units=hidden_units)


def _make_config(iter_ticks: Sequence[int],
                 strategy: StrategySpec,
                 horizon_ticks: int,
                 staleness_bound: int = 2,
                 task: Optional[TrainingTask] = None,
                 task_seed: int = 1,
                 **kwargs) -> SimConfig:
    cluster = ClusterSpec.from_iter_ticks(iter_ticks, staleness_bound)
    task = task or _make_task(len(iter_ticks), seed=task_seed)
    return SimConfig(cluster=cluster, strategy=strategy, task=task, horizon_ticks=horizon_ticks, **kwargs)


@pytest.fixture
def make_task():
    return _make_task


@pytest.fixture
def make_config():
    return _make_config


@pytest.fixture
def write_config(tmp_path):
    """Write a dict as JSON under tmp_path and return the path."""
    def _write(data, name='config.json'):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path
    return _write


@pytest.fixture
def reference_experiment(tmp_path):
    return {
        'schema_version': '1.0',
        'cluster': {'iter_ticks': REFERENCE_TICKS, 'staleness_bound': 4},
        'task': {'kind': 'logistic_regression', 'num_examples': 1000, 'dimension': 10,
                 'learning_rate': 0.05, 'batch_size': 16},
        'strategies': [{'name': 'bsp'},
                       {'name': 'local', 'period_steps': 2},
                       {'name': 'load_balanced', 'staleness_bound': 4}],
        'horizon_ticks': 5000,
        'eval_every_ticks': 100,
        'jitter_pct': 0.0,
        'repeat_seeds': [1, 2, 3],
        'output_dir': str(tmp_path / 'runs'),
    }
