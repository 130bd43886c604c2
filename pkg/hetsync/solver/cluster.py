""" Value types describing a heterogeneous cluster and a barrier choice. """

from dataclasses import dataclass
from typing import Dict, Iterable, Tuple


@dataclass(frozen=True)
class WorkerProfile:
    """A worker and its steady time per local iteration.

    Args:
        worker_id (int): Small non-negative identifier, unique within a cluster.
        iter_ticks (int): Simulated ticks one local iteration takes.
    """
    worker_id: int
    iter_ticks: int

    def __post_init__(self):
        if self.worker_id < 0:
            raise ValueError(f'worker_id must be non-negative, got {self.worker_id}')
        if self.iter_ticks < 1:
            raise ValueError(f'iter_ticks must be at least 1, got {self.iter_ticks} '
                             f'for worker {self.worker_id}')


@dataclass(frozen=True)
class ClusterSpec:
    """An ordered set of workers plus the staleness bound M."""
    workers: Tuple[WorkerProfile, ...]
    staleness_bound: int

    def __post_init__(self):
        object.__setattr__(self, 'workers', tuple(self.workers))
        if not self.workers:
            raise ValueError('a cluster needs at least one worker')
        if self.staleness_bound < 1:
            raise ValueError(f'staleness_bound must be at least 1, got {self.staleness_bound}')
        ids = [w.worker_id for w in self.workers]
        if len(set(ids)) != len(ids):
            raise ValueError(f'worker ids must be unique, got {ids}')

    @classmethod
    def from_iter_ticks(cls, iter_ticks: Iterable[int], staleness_bound: int) -> 'ClusterSpec':
        """Build a cluster whose worker ids are the positions in `iter_ticks`."""
        workers = tuple(WorkerProfile(worker_id=i, iter_ticks=int(t))
                        for i, t in enumerate(iter_ticks))
        return cls(workers=workers, staleness_bound=staleness_bound)

    @property
    def size(self) -> int:
        return len(self.workers)

    @property
    def iter_ticks(self) -> Tuple[int, ...]:
        return tuple(w.iter_ticks for w in self.workers)

    @property
    def worker_ids(self) -> Tuple[int, ...]:
        return tuple(w.worker_id for w in self.workers)

    def index_of(self, worker_id: int) -> int:
        """Position of `worker_id` in the worker list."""
        for i, worker in enumerate(self.workers):
            if worker.worker_id == worker_id:
                return i
        raise KeyError(f'worker {worker_id} is not in the cluster {self.worker_ids}')

    def with_staleness_bound(self, staleness_bound: int) -> 'ClusterSpec':
        return ClusterSpec(workers=self.workers, staleness_bound=staleness_bound)


@dataclass(frozen=True)
class BarrierSolution:
    """The chosen barrier period T*, local steps tau_i and the resulting waits.

    `local_steps` and `wait_ticks` are aligned with the cluster's worker order.
    """
    barrier_ticks: int
    local_steps: Tuple[int, ...]
    wait_ticks: Tuple[int, ...]
    max_wait_ticks: int

    def __post_init__(self):
        object.__setattr__(self, 'local_steps', tuple(int(s) for s in self.local_steps))
        object.__setattr__(self, 'wait_ticks', tuple(int(w) for w in self.wait_ticks))
        if len(self.local_steps) != len(self.wait_ticks):
            raise ValueError('local_steps and wait_ticks must have one entry per worker')
        if self.barrier_ticks < 1:
            raise ValueError(f'barrier_ticks must be positive, got {self.barrier_ticks}')
        if min(self.local_steps) < 1:
            raise ValueError(f'every worker needs at least one local step, got {self.local_steps}')
        if self.max_wait_ticks != max(self.wait_ticks):
            raise ValueError(f'max_wait_ticks {self.max_wait_ticks} does not match '
                             f'wait_ticks {self.wait_ticks}')

    @property
    def step_spread(self) -> int:
        """max(tau) - min(tau); stays below the staleness bound."""
        return max(self.local_steps) - min(self.local_steps)

    def to_dict(self) -> Dict[str, object]:
        return {
            'barrier_ticks': self.barrier_ticks,
            'local_steps': list(self.local_steps),
            'wait_ticks': list(self.wait_ticks),
            'max_wait_ticks': self.max_wait_ticks,
        }
