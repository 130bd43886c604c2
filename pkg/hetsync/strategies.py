""" Synchronization paradigms as pure decision policies.

A strategy never mutates anything. `plan_round` fixes how many local steps each
worker takes per synchronization round (barrier strategies only) and
`next_decision` tells one worker what to do next given everyone's progress.
"""

from dataclasses import dataclass
from enum import Enum
from typing import ClassVar, Dict, Optional, Sequence, Tuple

from hetsync.solver import BarrierSolution, ClusterSpec, solve_barrier

STRATEGY_NAMES = ('bsp', 'asp', 'ssp', 'local', 'load_balanced')


@dataclass(frozen=True)
class StrategySpec:
    """Base of the strategy variants; `name` is the config tag."""
    name: ClassVar[str] = ''
    uses_barrier: ClassVar[bool] = True

    @property
    def label(self) -> str:
        """File-name friendly identifier including the parameter."""
        return self.name

    def to_dict(self) -> Dict[str, object]:
        return {'name': self.name}

    @staticmethod
    def from_dict(data: Dict[str, object]) -> 'StrategySpec':
        name = data.get('name')
        if name not in _VARIANTS:
            raise ValueError(f'strategy name must be one of: {list(STRATEGY_NAMES)}, got {name!r}')
        variant = _VARIANTS[name]
        params = {k: v for k, v in data.items() if k != 'name'}
        try:
            return variant(**params)
        except TypeError as err:
            raise ValueError(f'bad parameters for strategy {name!r}: {err}') from None


@dataclass(frozen=True)
class BSP(StrategySpec):
    name: ClassVar[str] = 'bsp'


@dataclass(frozen=True)
class ASP(StrategySpec):
    name: ClassVar[str] = 'asp'
    uses_barrier: ClassVar[bool] = False


@dataclass(frozen=True)
class SSP(StrategySpec):
    stale_threshold: int
    name: ClassVar[str] = 'ssp'
    uses_barrier: ClassVar[bool] = False

    def __post_init__(self):
        if not isinstance(self.stale_threshold, int) or self.stale_threshold < 1:
            raise ValueError(f'stale_threshold must be an integer >= 1, got {self.stale_threshold!r}')

    @property
    def label(self) -> str:
        return f'ssp_s{self.stale_threshold}'

    def to_dict(self) -> Dict[str, object]:
        return {'name': self.name, 'stale_threshold': self.stale_threshold}


@dataclass(frozen=True)
class LocalUniform(StrategySpec):
    period_steps: int
    name: ClassVar[str] = 'local'

    def __post_init__(self):
        if not isinstance(self.period_steps, int) or self.period_steps < 1:
            raise ValueError(f'period_steps must be an integer >= 1, got {self.period_steps!r}')

    @property
    def label(self) -> str:
        return f'local_h{self.period_steps}'

    def to_dict(self) -> Dict[str, object]:
        return {'name': self.name, 'period_steps': self.period_steps}


@dataclass(frozen=True)
class LoadBalanced(StrategySpec):
    staleness_bound: int
    name: ClassVar[str] = 'load_balanced'

    def __post_init__(self):
        if not isinstance(self.staleness_bound, int) or self.staleness_bound < 1:
            raise ValueError(f'staleness_bound must be an integer >= 1, got {self.staleness_bound!r}')

    @property
    def label(self) -> str:
        return f'load_balanced_m{self.staleness_bound}'

    def to_dict(self) -> Dict[str, object]:
        return {'name': self.name, 'staleness_bound': self.staleness_bound}


_VARIANTS = {cls.name: cls for cls in (BSP, ASP, SSP, LocalUniform, LoadBalanced)}


@dataclass(frozen=True)
class WorkerProgress:
    """Where a worker stands.

    Args:
        worker_id (int): The worker.
        local_step (int): Iterations since the last global sync for barrier
            strategies; total iterations (the SSP clock) otherwise.
        round (int): Completed synchronization rounds.
    """
    worker_id: int
    local_step: int = 0
    round: int = 0


class SyncDecision(Enum):
    COMPUTE = 'compute'
    WAIT_FOR_BARRIER = 'wait_for_barrier'
    WAIT_FOR_STRAGGLERS = 'wait_for_stragglers'
    SYNCHRONIZE = 'synchronize'


@dataclass(frozen=True)
class RoundPlan:
    """Per-worker local step targets of one round, or unplanned for ASP/SSP.

    `targets` is keyed by worker id. `barrier_ticks` is only set when the round has
    a fixed wall-clock length (load-balanced local SGD).
    """
    targets: Optional[Dict[int, int]] = None
    barrier_ticks: Optional[int] = None
    solution: Optional[BarrierSolution] = None

    @classmethod
    def unplanned(cls) -> 'RoundPlan':
        return cls()

    @property
    def is_planned(self) -> bool:
        return self.targets is not None

    def target_list(self, cluster: ClusterSpec) -> Tuple[int, ...]:
        return tuple(self.targets[w] for w in cluster.worker_ids)


def plan_round(strategy: StrategySpec, cluster: ClusterSpec) -> RoundPlan:
    """Local step targets per round.

    Raises:
        InfeasibleClusterError: Load-balanced planning on a cluster too
            heterogeneous for its staleness bound.
    """
    ids = cluster.worker_ids
    if isinstance(strategy, BSP):
        return RoundPlan(targets={w: 1 for w in ids})
    if isinstance(strategy, LocalUniform):
        return RoundPlan(targets={w: strategy.period_steps for w in ids})
    if isinstance(strategy, LoadBalanced):
        solution = solve_barrier(cluster.with_staleness_bound(strategy.staleness_bound))
        return RoundPlan(targets=dict(zip(ids, solution.local_steps)),
                         barrier_ticks=solution.barrier_ticks,
                         solution=solution)
    if isinstance(strategy, (ASP, SSP)):
        return RoundPlan.unplanned()
    raise ValueError(f'unknown strategy {strategy!r}')


def next_decision(strategy: StrategySpec,
                  me: WorkerProgress,
                  progress: Sequence[WorkerProgress],
                  plan: RoundPlan) -> SyncDecision:
    """What worker `me` does next.

    Barrier strategies compute until the round target, then synchronize once
    every worker is there and wait otherwise. ASP never blocks. SSP computes
    while the worker's clock is at most `stale_threshold` ahead of the slowest.
    """
    if isinstance(strategy, ASP):
        return SyncDecision.COMPUTE

    if isinstance(strategy, SSP):
        slowest = min(p.local_step for p in progress)
        if me.local_step - slowest <= strategy.stale_threshold:
            return SyncDecision.COMPUTE
        return SyncDecision.WAIT_FOR_STRAGGLERS

    if me.local_step < plan.targets[me.worker_id]:
        return SyncDecision.COMPUTE
    if all(p.local_step >= plan.targets[p.worker_id] for p in progress):
        return SyncDecision.SYNCHRONIZE
    return SyncDecision.WAIT_FOR_BARRIER
