""" JSON experiment configs.

A config mirrors `ExperimentConfig`; see the README for the schema. A file that
only holds `iter_ticks` and `staleness_bound` is a cluster config, which is all
`hetsync solve` needs.
"""

import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from packaging import version

from hetsync.exceptions import ConfigError
from hetsync.simulator import AVERAGING_MODES, MAX_EVENTS
from hetsync.solver import ClusterSpec
from hetsync.strategies import StrategySpec
from hetsync.training import ModelKind

logger = logging.getLogger(__name__)

SCHEMA_VERSION = '1.0'
SEED_ENV_VAR = 'HETSYNC_SEED'
PARTITION_MODES = ('auto', 'uniform')


def _int(data: Dict[str, Any], key: str, default: Optional[int] = None, minimum: int = 1) -> int:
    value = data.get(key, default)
    if value is None:
        raise ConfigError(f'missing required field {key!r}')
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f'{key!r} must be an integer, got {value!r}')
    if value < minimum:
        raise ConfigError(f'{key!r} must be at least {minimum}, got {value}')
    return value


def _float(data: Dict[str, Any], key: str, default: float) -> float:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f'{key!r} must be a number, got {value!r}')
    return float(value)


def _choice(data: Dict[str, Any], key: str, default: str, options) -> str:
    value = data.get(key, default)
    if value not in options:
        raise ConfigError(f'{key!r} must be one of: {list(options)}, got {value!r}')
    return value


def cluster_from_dict(data: Dict[str, Any]) -> ClusterSpec:
    ticks = data.get('iter_ticks')
    if not isinstance(ticks, list) or not ticks:
        raise ConfigError(f"'iter_ticks' must be a non-empty list of integers, got {ticks!r}")
    for t in ticks:
        if isinstance(t, bool) or not isinstance(t, int) or t < 1:
            raise ConfigError(f"'iter_ticks' entries must be integers >= 1, got {t!r}")
    return ClusterSpec.from_iter_ticks(ticks, _int(data, 'staleness_bound'))


def cluster_to_dict(cluster: ClusterSpec) -> Dict[str, Any]:
    return {'iter_ticks': list(cluster.iter_ticks), 'staleness_bound': cluster.staleness_bound}


@dataclass(frozen=True)
class TaskConfig:
    """Recipe for a `TrainingTask`; the dataset itself is generated per seed."""
    kind: str = ModelKind.LOGISTIC_REGRESSION.value
    num_examples: int = 1000
    dimension: int = 10
    learning_rate: float = 0.05
    batch_size: int = 16
    hidden_units: int = 16
    partition: str = 'auto'

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TaskConfig':
        defaults = cls()
        learning_rate = _float(data, 'learning_rate', defaults.learning_rate)
        if learning_rate <= 0:
            raise ConfigError(f"'learning_rate' must be positive, got {learning_rate}")
        return cls(kind=_choice(data, 'kind', defaults.kind, [k.value for k in ModelKind]),
                   num_examples=_int(data, 'num_examples', defaults.num_examples, minimum=10),
                   dimension=_int(data, 'dimension', defaults.dimension, minimum=2),
                   learning_rate=learning_rate,
                   batch_size=_int(data, 'batch_size', defaults.batch_size),
                   hidden_units=_int(data, 'hidden_units', defaults.hidden_units),
                   partition=_choice(data, 'partition', defaults.partition, PARTITION_MODES))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'num_examples': self.num_examples,
            'dimension': self.dimension,
            'learning_rate': self.learning_rate,
            'batch_size': self.batch_size,
            'hidden_units': self.hidden_units,
            'partition': self.partition,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    """A comparison of strategies on one cluster and task over several seeds."""
    cluster: ClusterSpec
    strategies: Tuple[StrategySpec, ...]
    task: TaskConfig = field(default_factory=TaskConfig)
    horizon_ticks: int = 5000
    eval_every_ticks: int = 100
    jitter_pct: float = 0.0
    sync_latency_ticks: int = 0
    averaging: str = 'uniform'
    repeat_seeds: Tuple[int, ...] = (1,)
    output_dir: str = 'runs'
    tick_ms: Optional[float] = None
    max_events: int = MAX_EVENTS
    schema_version: str = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        if not isinstance(data, dict):
            raise ConfigError(f'an experiment config must be a JSON object, got {type(data).__name__}')
        schema = str(data.get('schema_version', SCHEMA_VERSION))
        _check_schema(schema)
        try:
            cluster = cluster_from_dict(data.get('cluster') or {})
            strategies = tuple(StrategySpec.from_dict(s) for s in data.get('strategies') or [])
            task = TaskConfig.from_dict(data.get('task') or {})
        except (ValueError, TypeError, AttributeError) as err:
            raise ConfigError(str(err)) from err
        if not strategies:
            raise ConfigError("'strategies' must list at least one strategy")
        labels = [s.label for s in strategies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"'strategies' lists the same strategy twice: {labels}")

        seeds = data.get('repeat_seeds', [1])
        if (not isinstance(seeds, list) or not seeds
                or any(isinstance(s, bool) or not isinstance(s, int) for s in seeds)):
            raise ConfigError(f"'repeat_seeds' must be a non-empty list of integers, got {seeds!r}")
        jitter = _float(data, 'jitter_pct', 0.0)
        if not 0.0 <= jitter < 1.0:
            raise ConfigError(f"'jitter_pct' must be in [0, 1), got {jitter}")
        tick_ms = data.get('tick_ms')
        if tick_ms is not None:
            tick_ms = _float(data, 'tick_ms', 0.0)
            if tick_ms <= 0:
                raise ConfigError(f"'tick_ms' must be positive, got {tick_ms}")
        output_dir = data.get('output_dir', 'runs')
        if not isinstance(output_dir, str) or not output_dir:
            raise ConfigError(f"'output_dir' must be a path string, got {output_dir!r}")

        horizon = _int(data, 'horizon_ticks', 5000)
        if horizon < max(cluster.iter_ticks):
            raise ConfigError(f"'horizon_ticks' {horizon} is shorter than the slowest iteration "
                              f'({max(cluster.iter_ticks)} ticks)')
        return cls(cluster=cluster,
                   strategies=strategies,
                   task=task,
                   horizon_ticks=horizon,
                   eval_every_ticks=_int(data, 'eval_every_ticks', 100),
                   jitter_pct=jitter,
                   sync_latency_ticks=_int(data, 'sync_latency_ticks', 0, minimum=0),
                   averaging=_choice(data, 'averaging', 'uniform', AVERAGING_MODES),
                   repeat_seeds=tuple(seeds),
                   output_dir=output_dir,
                   tick_ms=tick_ms,
                   max_events=_int(data, 'max_events', MAX_EVENTS),
                   schema_version=schema)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'schema_version': self.schema_version,
            'cluster': cluster_to_dict(self.cluster),
            'task': self.task.to_dict(),
            'strategies': [s.to_dict() for s in self.strategies],
            'horizon_ticks': self.horizon_ticks,
            'eval_every_ticks': self.eval_every_ticks,
            'jitter_pct': self.jitter_pct,
            'sync_latency_ticks': self.sync_latency_ticks,
            'averaging': self.averaging,
            'repeat_seeds': list(self.repeat_seeds),
            'output_dir': self.output_dir,
            'tick_ms': self.tick_ms,
            'max_events': self.max_events,
        }


def _check_schema(schema: str) -> None:
    try:
        requested = version.parse(schema)
    except version.InvalidVersion:
        raise ConfigError(f'schema_version {schema!r} is not a version string') from None
    supported = version.parse(SCHEMA_VERSION)
    if requested.major != supported.major or requested > supported:
        raise ConfigError(f'schema_version {schema} is not supported (this build reads up to '
                          f'{SCHEMA_VERSION})')


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f'config file {path} does not exist')
    try:
        with open(path, 'r', encoding='utf-8') as file:
            return json.load(file)
    except json.JSONDecodeError as err:
        raise ConfigError(f'config file {path} is not valid JSON: {err}') from err


def load_cluster(path: Union[str, Path]) -> ClusterSpec:
    """Read a cluster config, or the `cluster` section of an experiment config."""
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f'config file {path} must hold a JSON object')
    if 'cluster' in data:
        data = data['cluster']
    try:
        return cluster_from_dict(data)
    except ValueError as err:
        raise ConfigError(str(err)) from err


def load_experiment(path: Union[str, Path]) -> ExperimentConfig:
    """Read an experiment config, then apply the HETSYNC_SEED override."""
    config = ExperimentConfig.from_dict(read_json(path))
    return apply_env_overrides(config)


def apply_env_overrides(config: ExperimentConfig) -> ExperimentConfig:
    """Replace the seeds with the single seed in HETSYNC_SEED, when set."""
    seed = os.environ.get(SEED_ENV_VAR)
    if seed is None or seed == '':
        return config
    try:
        seeds = (int(seed),)
    except ValueError:
        raise ConfigError(f'{SEED_ENV_VAR} must be an integer, got {seed!r}') from None
    logger.info('%s set, using seed %d instead of %s', SEED_ENV_VAR, seeds[0], list(config.repeat_seeds))
    return replace(config, repeat_seeds=seeds)
