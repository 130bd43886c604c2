from .solver import ClusterSpec, WorkerProfile, solve_barrier
from .simulator import SimConfig, simulate
