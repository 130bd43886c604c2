""" Simulation events and their one-line text form.

A line is `tick,worker_id,kind[,payload]`. Global events (sync, eval) use `-` as
the worker id. Payload fields are `key=value` pairs joined by `;`.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

GLOBAL_WORKER = '-'


class EventKind(Enum):
    ITER_START = 'iter_start'
    ITER_END = 'iter_end'
    BLOCK_START = 'block_start'
    BLOCK_END = 'block_end'
    GLOBAL_SYNC = 'global_sync'
    ASP_APPLY = 'asp_apply'
    EVAL = 'eval'


# order of kinds sharing a tick; iteration ends land before a sync, starts after it
KIND_RANK = {
    EventKind.ITER_END: 0,
    EventKind.ASP_APPLY: 1,
    EventKind.GLOBAL_SYNC: 2,
    EventKind.BLOCK_END: 3,
    EventKind.EVAL: 4,
    EventKind.BLOCK_START: 5,
    EventKind.ITER_START: 6,
}


@dataclass(frozen=True)
class SimEvent:
    tick: int
    worker_id: Optional[int]
    kind: EventKind
    staleness: Optional[int] = None
    loss: Optional[float] = None
    accuracy: Optional[float] = None

    # kind rank before worker id, not worker id first: a sync at this tick must follow
    # every iteration end and precede every iteration start, whichever worker owns them
    @property
    def sort_key(self) -> Tuple[int, int, int]:
        worker = -1 if self.worker_id is None else self.worker_id
        return self.tick, KIND_RANK[self.kind], worker

    def to_line(self) -> str:
        worker = GLOBAL_WORKER if self.worker_id is None else str(self.worker_id)
        line = f'{self.tick},{worker},{self.kind.value}'
        if self.kind is EventKind.ASP_APPLY:
            line += f',staleness={self.staleness}'
        elif self.kind is EventKind.EVAL:
            line += f',loss={self.loss!r};accuracy={self.accuracy!r}'
        return line

    @classmethod
    def from_line(cls, line: str) -> 'SimEvent':
        fields = line.rstrip('\n').split(',', 3)
        if len(fields) < 3:
            raise ValueError(f'event line needs tick, worker and kind: {line!r}')
        tick, worker, kind = int(fields[0]), fields[1], EventKind(fields[2])
        worker_id = None if worker == GLOBAL_WORKER else int(worker)
        payload = {}
        if len(fields) == 4:
            payload = dict(item.split('=', 1) for item in fields[3].split(';'))
        return cls(tick=tick,
                   worker_id=worker_id,
                   kind=kind,
                   staleness=int(payload['staleness']) if 'staleness' in payload else None,
                   loss=float(payload['loss']) if 'loss' in payload else None,
                   accuracy=float(payload['accuracy']) if 'accuracy' in payload else None)
