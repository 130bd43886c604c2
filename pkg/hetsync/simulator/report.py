""" Simulation results and the metrics derived from them. """

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from hetsync.simulator.events import EventKind, SimEvent
from hetsync.training import ModelState


@dataclass(frozen=True)
class WorkerAccount:
    """Where one worker's ticks went.

    compute + idle + inflight covers the whole horizon. `inflight_ticks` is the
    elapsed part of an iteration still running at the horizon; it is not counted
    in `iterations`.
    """
    worker_id: int
    iter_ticks: int
    compute_ticks: int
    idle_ticks: int
    inflight_ticks: int
    iterations: int

    @property
    def busy_ticks(self) -> int:
        return self.compute_ticks + self.inflight_ticks


@dataclass(frozen=True)
class LossPoint:
    tick: int
    loss: float
    accuracy: float


@dataclass(frozen=True, eq=False)
class SimReport:
    strategy_label: str
    horizon_ticks: int
    events: Tuple[SimEvent, ...]
    per_worker: Tuple[WorkerAccount, ...]
    loss_curve: Tuple[LossPoint, ...]
    final_model: ModelState
    max_staleness: int = 0

    @property
    def total_iterations(self) -> int:
        return sum(w.iterations for w in self.per_worker)

    @property
    def throughput_iters_per_ktick(self) -> float:
        return 1000.0 * self.total_iterations / self.horizon_ticks

    @property
    def final_loss(self) -> float:
        return self.loss_curve[-1].loss

    @property
    def final_accuracy(self) -> float:
        return self.loss_curve[-1].accuracy

    def events_of(self, kind: EventKind) -> List[SimEvent]:
        return [e for e in self.events if e.kind is kind]

    def event_lines(self) -> List[str]:
        return [e.to_line() for e in self.events]


def idle_intervals(report: SimReport) -> List[Tuple[int, int, int]]:
    """(worker_id, start, end) of every blocked stretch; open blocks end at the horizon."""
    open_since = {}
    intervals = []
    for event in report.events:
        if event.kind is EventKind.BLOCK_START:
            open_since[event.worker_id] = event.tick
        elif event.kind is EventKind.BLOCK_END:
            intervals.append((event.worker_id, open_since.pop(event.worker_id), event.tick))
    intervals.extend((w, start, report.horizon_ticks) for w, start in sorted(open_since.items()))
    return intervals


def idle_ticks_until(report: SimReport, ticks: Sequence[int]) -> np.ndarray:
    """Idle ticks summed over all workers within [0, t) for each t in `ticks`."""
    ticks = np.asarray(ticks, dtype=np.int64)
    intervals = idle_intervals(report)
    if not intervals:
        return np.zeros(ticks.shape, dtype=np.int64)
    starts = np.array([start for _, start, _ in intervals], dtype=np.int64)
    ends = np.array([end for _, _, end in intervals], dtype=np.int64)
    overlap = np.minimum(ends[None, :], ticks[:, None]) - starts[None, :]
    return np.clip(overlap, 0, None).sum(axis=1)


def idle_fraction(report: SimReport) -> float:
    """Total idle ticks over N * horizon."""
    idle = sum(w.idle_ticks for w in report.per_worker)
    return idle / (len(report.per_worker) * report.horizon_ticks)


def ticks_to_loss(report: SimReport, threshold: float) -> Optional[int]:
    """First evaluated tick whose loss is at or below `threshold`, else None."""
    for point in report.loss_curve:
        if point.loss <= threshold:
            return point.tick
    return None


def speedup(report: SimReport, reference: SimReport) -> float:
    """Throughput relative to a reference run, usually a single node."""
    return report.throughput_iters_per_ktick / reference.throughput_iters_per_ktick
