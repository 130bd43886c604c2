""" Deterministic discrete-event simulation of a parameter-server cluster.

Time advances in integer ticks. At every tick that has something happening the
loop finishes due iterations in worker order, lets the strategy decide
synchronizations, blocks and new iterations, then evaluates if an evaluation
is due. Gradient math is real: each finished iteration runs one SGD step (or
one gradient push for ASP/SSP) on the worker's next batch.
"""

import heapq
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from hetsync.exceptions import EventBudgetError
from hetsync.simulator.events import EventKind, SimEvent
from hetsync.simulator.report import LossPoint, SimReport, WorkerAccount, idle_fraction
from hetsync.solver import ClusterSpec
from hetsync.strategies import (RoundPlan, StrategySpec, SyncDecision, WorkerProgress,
                                next_decision, plan_round)
from hetsync.training import (Examples, ModelState, TrainingTask, apply_gradient, average_models,
                              evaluate, initial_model, loss_and_gradient, next_batch, sgd_step)
from hetsync.utils.streams import philox

logger = logging.getLogger(__name__)

MAX_EVENTS = 10**7
AVERAGING_MODES = ('uniform', 'steps')

_JITTER_STREAM = 7

# heap entry kinds
_END = 0
_WAKE = 1

SyncObserver = Callable[[int, Sequence[ModelState]], None]


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Everything one simulation run depends on.

    Args:
        cluster (ClusterSpec): Worker profiles.
        strategy (StrategySpec): Synchronization paradigm.
        task (TrainingTask): Model, sharded data and SGD settings.
        horizon_ticks (int): Simulated duration.
        eval_every_ticks (int): Evaluation period; evaluations run at tick 0,
            every multiple up to the horizon and at the horizon itself.
        jitter_pct (float): Per-iteration duration noise in [0, 1).
        seed (int): Seed of the timing noise.
        sync_latency_ticks (int): Communication cost of a global sync, idle for
            every worker.
        averaging (str): 'uniform' or 'steps' (weighted by local steps).
        max_events (int): Event budget of the run.
    """
    cluster: ClusterSpec
    strategy: StrategySpec
    task: TrainingTask
    horizon_ticks: int
    eval_every_ticks: int = 100
    jitter_pct: float = 0.0
    seed: int = 0
    sync_latency_ticks: int = 0
    averaging: str = 'uniform'
    max_events: int = MAX_EVENTS

    def __post_init__(self):
        slowest = max(self.cluster.iter_ticks)
        if self.horizon_ticks < slowest:
            raise ValueError(f'horizon_ticks {self.horizon_ticks} is shorter than the slowest '
                             f'iteration ({slowest} ticks)')
        if self.eval_every_ticks < 1:
            raise ValueError(f'eval_every_ticks must be at least 1, got {self.eval_every_ticks}')
        if not 0.0 <= self.jitter_pct < 1.0:
            raise ValueError(f'jitter_pct must be in [0, 1), got {self.jitter_pct}')
        if self.sync_latency_ticks < 0:
            raise ValueError(f'sync_latency_ticks must be non-negative, got {self.sync_latency_ticks}')
        if self.averaging not in AVERAGING_MODES:
            raise ValueError(f'averaging must be one of: {list(AVERAGING_MODES)}, got {self.averaging!r}')
        if len(self.task.dataset.shards) != self.cluster.size:
            raise ValueError(f'{len(self.task.dataset.shards)} data shards for '
                             f'{self.cluster.size} workers')


def iteration_ticks(iter_ticks: int, jitter_pct: float, seed: int, worker_id: int, index: int) -> int:
    """Duration of one iteration, scaled by a uniform factor in [1 - j, 1 + j].

    The factor is keyed on (seed, worker, iteration index) so it does not depend
    on the order in which iterations are simulated.
    """
    if jitter_pct == 0:
        return iter_ticks
    factor = philox(seed, _JITTER_STREAM, worker_id, index).uniform(1.0 - jitter_pct, 1.0 + jitter_pct)
    return max(1, int(np.rint(iter_ticks * factor)))


@dataclass
class _Worker:
    worker_id: int
    iter_ticks: int
    shard: Examples
    model: ModelState
    cursor: int = 0
    local_step: int = 0
    round: int = 0
    started: int = 0
    iterations: int = 0
    compute_ticks: int = 0
    idle_ticks: int = 0
    iter_start: int = 0
    busy_until: Optional[int] = None
    blocked_since: Optional[int] = None
    resume_at: int = 0
    pulled_version: int = 0

    @property
    def progress(self) -> WorkerProgress:
        return WorkerProgress(self.worker_id, self.local_step, self.round)


@dataclass
class _Simulation:
    config: SimConfig
    observer: Optional[SyncObserver] = None
    events: List[SimEvent] = field(default_factory=list)
    loss_curve: List[LossPoint] = field(default_factory=list)
    max_staleness: int = 0

    def __post_init__(self):
        config = self.config
        self.plan: RoundPlan = plan_round(config.strategy, config.cluster)
        self.server_side = not config.strategy.uses_barrier
        start = initial_model(config.task)
        self.workers = [_Worker(worker_id=p.worker_id, iter_ticks=p.iter_ticks, shard=shard, model=start)
                        for p, shard in zip(config.cluster.workers, config.task.dataset.shards)]
        self.index = {w.worker_id: i for i, w in enumerate(self.workers)}
        self.server = start
        self.server_version = 0
        self.eval_data = config.task.dataset.full
        self.queue = []
        self.sequence = 0

    # bookkeeping

    def _emit(self, tick: int, worker_id: Optional[int], kind: EventKind, **payload) -> None:
        self.events.append(SimEvent(tick=tick, worker_id=worker_id, kind=kind, **payload))
        if len(self.events) > self.config.max_events:
            raise EventBudgetError(f'simulation exceeded {self.config.max_events} events at tick {tick}')

    def _push(self, tick: int, kind: int, worker_id: int) -> None:
        heapq.heappush(self.queue, (tick, kind, worker_id, self.sequence))
        self.sequence += 1

    def _block(self, worker: _Worker, tick: int) -> None:
        if worker.blocked_since is None:
            worker.blocked_since = tick
            self._emit(tick, worker.worker_id, EventKind.BLOCK_START)

    def _unblock(self, worker: _Worker, tick: int) -> None:
        if worker.blocked_since is not None:
            worker.idle_ticks += tick - worker.blocked_since
            worker.blocked_since = None
            self._emit(tick, worker.worker_id, EventKind.BLOCK_END)

    # worker actions

    def _start_iteration(self, worker: _Worker, tick: int) -> None:
        if self.server_side:
            worker.model = self.server
            worker.pulled_version = self.server_version
        duration = iteration_ticks(worker.iter_ticks, self.config.jitter_pct, self.config.seed,
                                   worker.worker_id, worker.started)
        worker.started += 1
        worker.iter_start = tick
        worker.busy_until = tick + duration
        self._push(tick + duration, _END, worker.worker_id)
        self._emit(tick, worker.worker_id, EventKind.ITER_START)

    def _finish_iteration(self, worker: _Worker, tick: int) -> None:
        task = self.config.task
        batch, worker.cursor = next_batch(worker.shard, worker.cursor, task.batch_size)
        worker.compute_ticks += tick - worker.iter_start
        worker.iterations += 1
        worker.local_step += 1
        worker.busy_until = None
        self._emit(tick, worker.worker_id, EventKind.ITER_END)

        if not self.server_side:
            worker.model = sgd_step(worker.model, batch, task)
            return
        _, gradient = loss_and_gradient(worker.model, batch, task)
        staleness = self.server_version - worker.pulled_version
        self.server = apply_gradient(self.server, gradient, task.learning_rate)
        self.server_version += 1
        self.max_staleness = max(self.max_staleness, staleness)
        self._emit(tick, worker.worker_id, EventKind.ASP_APPLY, staleness=staleness)

    def _synchronize(self, tick: int) -> None:
        models = [w.model for w in self.workers]
        weights = None
        if self.config.averaging == 'steps':
            weights = [w.local_step for w in self.workers]
        averaged = average_models(models, weights)
        resume_at = tick + self.config.sync_latency_ticks
        for worker in self.workers:
            worker.model = averaged
            worker.local_step = 0
            worker.round += 1
            worker.resume_at = resume_at
        self._emit(tick, None, EventKind.GLOBAL_SYNC)
        if resume_at > tick:
            self._push(resume_at, _WAKE, -1)
        if self.observer is not None:
            self.observer(tick, [w.model for w in self.workers])

    def _settle(self, tick: int) -> None:
        strategy = self.config.strategy
        while True:
            progress = [w.progress for w in self.workers]
            ready = [w for w in self.workers if w.busy_until is None and w.resume_at <= tick]
            decisions: Dict[int, SyncDecision] = {
                w.worker_id: next_decision(strategy, w.progress, progress, self.plan) for w in ready
            }
            if SyncDecision.SYNCHRONIZE not in decisions.values():
                break
            self._synchronize(tick)

        if tick >= self.config.horizon_ticks:
            return
        for worker in self.workers:
            if worker.busy_until is not None:
                continue
            if worker.resume_at > tick or decisions[worker.worker_id] is not SyncDecision.COMPUTE:
                self._block(worker, tick)
            else:
                self._unblock(worker, tick)
                self._start_iteration(worker, tick)

    def _evaluate(self, tick: int) -> None:
        model = self.server if self.server_side else average_models([w.model for w in self.workers])
        loss, accuracy = evaluate(model, self.eval_data, self.config.task)
        self.loss_curve.append(LossPoint(tick, loss, accuracy))
        self._emit(tick, None, EventKind.EVAL, loss=loss, accuracy=accuracy)

    # main loop

    def run(self) -> SimReport:
        config = self.config
        horizon = config.horizon_ticks
        tick = 0
        next_eval = 0
        while True:
            # entries at one tick pop as iteration ends in worker id order, then wake-ups
            while self.queue and self.queue[0][0] == tick:
                _, kind, worker_id, _ = heapq.heappop(self.queue)
                if kind == _END:
                    self._finish_iteration(self.workers[self.index[worker_id]], tick)
            self._settle(tick)
            if tick == next_eval:
                self._evaluate(tick)
                next_eval = tick + config.eval_every_ticks
                if tick < horizon < next_eval:
                    next_eval = horizon

            upcoming = [next_eval] + ([self.queue[0][0]] if self.queue else [])
            tick = min(upcoming)
            if tick > horizon:
                break
        return self._report()

    def _report(self) -> SimReport:
        horizon = self.config.horizon_ticks
        accounts = []
        for worker in self.workers:
            idle = worker.idle_ticks
            if worker.blocked_since is not None:
                idle += horizon - worker.blocked_since
            inflight = horizon - worker.iter_start if worker.busy_until is not None else 0
            accounts.append(WorkerAccount(worker_id=worker.worker_id,
                                          iter_ticks=worker.iter_ticks,
                                          compute_ticks=worker.compute_ticks,
                                          idle_ticks=idle,
                                          inflight_ticks=inflight,
                                          iterations=worker.iterations))
        if self.server_side:
            final_model = self.server
        else:
            final_model = average_models([w.model for w in self.workers])

        return SimReport(strategy_label=self.config.strategy.label,
                         horizon_ticks=horizon,
                         events=tuple(sorted(self.events, key=lambda e: e.sort_key)),
                         per_worker=tuple(accounts),
                         loss_curve=tuple(self.loss_curve),
                         final_model=final_model,
                         max_staleness=self.max_staleness)


def simulate(config: SimConfig, observer: Optional[SyncObserver] = None) -> SimReport:
    """Run one simulation until the horizon.

    Args:
        config (SimConfig): The run to simulate.
        observer (Optional[SyncObserver]): Called after every global sync with
            the tick and every worker's model.

    Returns:
        SimReport: Event log, per-worker accounting, loss curve and final model.

    Raises:
        InfeasibleClusterError: Load-balanced strategy on an infeasible cluster.
        EventBudgetError: More than `config.max_events` events.
    """
    report = _Simulation(config, observer).run()
    logger.info('%s: %d ticks, %d events, %d iterations, idle fraction %.4f',
                report.strategy_label, config.horizon_ticks, len(report.events),
                report.total_iterations, idle_fraction(report))
    return report


def replay_check(config: SimConfig) -> bool:
    """Simulate twice and compare event logs and final models bit for bit."""
    first, second = simulate(config), simulate(config)
    return first.events == second.events and first.final_model.same_as(second.final_model)
