from .engine import AVERAGING_MODES, MAX_EVENTS, SimConfig, iteration_ticks, replay_check, simulate
from .events import EventKind, SimEvent
from .report import (LossPoint, SimReport, WorkerAccount, idle_fraction, idle_intervals, idle_ticks_until,
                     speedup, ticks_to_loss)
