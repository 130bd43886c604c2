""" Brute-force reference for the barrier solver, used to verify it. """

import math

from hetsync.exceptions import InfeasibleClusterError
from hetsync.solver.cluster import BarrierSolution, ClusterSpec


def oracle_solve_barrier(cluster: ClusterSpec) -> BarrierSolution:
    """Visit every barrier up to the first gap violation and keep the first best one.

    Waits repeat with period lcm(iter_ticks), so the scan also ends after one full
    period; that only matters for clusters whose gap never reaches M.
    """
    ticks = [w.iter_ticks for w in cluster.workers]
    fastest, slowest = min(ticks), max(ticks)
    limit = cluster.staleness_bound

    first_gap = slowest // fastest - slowest // slowest
    if first_gap >= limit:
        raise InfeasibleClusterError(gap=first_gap, staleness_bound=limit, initial_barrier=slowest)

    period_end = slowest + math.lcm(*ticks)
    best = None
    best_score = None
    barrier = slowest
    while barrier // fastest - barrier // slowest < limit and barrier < period_end:
        score = 0
        for t in ticks:
            if barrier % t > score:
                score = barrier % t
        if best_score is None or score < best_score:
            best, best_score = barrier, score
        barrier += 1

    return BarrierSolution(barrier_ticks=best,
                           local_steps=[best // t for t in ticks],
                           wait_ticks=[best % t for t in ticks],
                           max_wait_ticks=best_score)
