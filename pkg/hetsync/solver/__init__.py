from .barrier import max_wait, scan_stop, solve_barrier, staleness_gap, wait_time
from .cluster import BarrierSolution, ClusterSpec, WorkerProfile
from .oracle import oracle_solve_barrier
