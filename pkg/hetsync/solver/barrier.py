""" Optimal global barrier for load-balanced local SGD.

Every worker i finishes floor(T / t_i) iterations inside a barrier of T ticks and
then idles for T mod t_i ticks. The solver picks the barrier that minimizes the
largest of those idle remainders, subject to the spread of local step counts
staying below the staleness bound M.
"""

import logging
import math
from typing import Optional

import numpy as np

from hetsync.exceptions import BarrierTooShortError, InfeasibleClusterError, ScanBudgetError
from hetsync.solver.cluster import BarrierSolution, ClusterSpec

logger = logging.getLogger(__name__)

# candidate evaluations (barriers x workers) a single solve may spend
SCAN_BUDGET = 10**8

# barriers evaluated per vectorized block
_CHUNK = 1 << 15


def wait_time(barrier_ticks: int, iter_ticks: int) -> int:
    """Idle ticks of a worker between its last complete iteration and the barrier.

    Args:
        barrier_ticks (int): Barrier period T.
        iter_ticks (int): Ticks per iteration of the worker.

    Returns:
        int: T mod iter_ticks.
    """
    if barrier_ticks < 1 or iter_ticks < 1:
        raise ValueError(f'barrier_ticks and iter_ticks must be positive, '
                         f'got {barrier_ticks} and {iter_ticks}')
    return barrier_ticks % iter_ticks


def _check_barrier(barrier_ticks: int, cluster: ClusterSpec) -> None:
    slowest = max(cluster.iter_ticks)
    if barrier_ticks < slowest:
        raise BarrierTooShortError(
            f'barrier of {barrier_ticks} ticks is shorter than one iteration of the '
            f'slowest worker ({slowest} ticks)')


def max_wait(barrier_ticks: int, cluster: ClusterSpec) -> int:
    """Largest idle remainder over the cluster for the barrier `barrier_ticks`."""
    _check_barrier(barrier_ticks, cluster)
    return max(wait_time(barrier_ticks, t) for t in cluster.iter_ticks)


def staleness_gap(barrier_ticks: int, cluster: ClusterSpec) -> int:
    """Local steps of the fastest worker minus those of the slowest."""
    _check_barrier(barrier_ticks, cluster)
    ticks = cluster.iter_ticks
    return barrier_ticks // min(ticks) - barrier_ticks // max(ticks)


def scan_stop(cluster: ClusterSpec) -> int:
    """Exclusive upper bound on the barriers a scan can visit.

    The staleness gap exceeds T * (1/t_min - 1/t_max) - 1, so it reaches M at the
    latest once T * (t_max - t_min) >= (M + 1) * t_min * t_max. A homogeneous
    cluster has zero gap everywhere but a zero wait at T = t_max.
    """
    ticks = cluster.iter_ticks
    t_min, t_max = min(ticks), max(ticks)
    if t_min == t_max:
        return t_max + 1
    numerator = (cluster.staleness_bound + 1) * t_min * t_max
    return -(-numerator // (t_max - t_min)) + 1


def solution_for_barrier(barrier_ticks: int, cluster: ClusterSpec) -> BarrierSolution:
    """Local steps and waits each worker gets under a given barrier."""
    _check_barrier(barrier_ticks, cluster)
    waits = [wait_time(barrier_ticks, t) for t in cluster.iter_ticks]
    return BarrierSolution(barrier_ticks=barrier_ticks,
                           local_steps=[barrier_ticks // t for t in cluster.iter_ticks],
                           wait_ticks=waits,
                           max_wait_ticks=max(waits))


def solve_barrier(cluster: ClusterSpec) -> BarrierSolution:
    """Find the smallest barrier with the minimum max wait before the gap first reaches M.

    Scans T upward from the slowest iteration time while the staleness gap stays
    below M, the way the load-balance scan does, but evaluates blocks of candidates
    at once. The gap is not monotone in T (on [2, 3] it is 2 at T=8 and 1 at T=9),
    so barriers past the first violation are never considered even when their gap
    drops back below M. The first minimizer wins ties; a zero max wait ends the scan early
    since nothing later can beat it.

    Args:
        cluster (ClusterSpec): Worker profiles and the staleness bound M.

    Returns:
        BarrierSolution: T*, tau_i, per-worker waits and the max wait.

    Raises:
        InfeasibleClusterError: The gap at T = max(iter_ticks) is already >= M.
        ScanBudgetError: The scan would exceed `SCAN_BUDGET` evaluations.
    """
    ticks = np.asarray(cluster.iter_ticks, dtype=np.int64)
    t_min, t_max = int(ticks.min()), int(ticks.max())
    bound = cluster.staleness_bound

    initial_gap = staleness_gap(t_max, cluster)
    if initial_gap >= bound:
        raise InfeasibleClusterError(gap=initial_gap, staleness_bound=bound, initial_barrier=t_max)

    # the wait is zero at lcm(t_i), nothing past it can win
    stop = min(scan_stop(cluster), math.lcm(*cluster.iter_ticks) + 1)
    evaluations = (stop - t_max) * cluster.size
    if evaluations > SCAN_BUDGET:
        raise ScanBudgetError(f'barrier scan over [{t_max}, {stop}) for {cluster.size} workers '
                              f'needs {evaluations} evaluations, above the budget of {SCAN_BUDGET}')
    logger.debug('scanning barriers in [%d, %d) for iter_ticks %s, M=%d',
                 t_max, stop, cluster.iter_ticks, bound)

    best_barrier: Optional[int] = None
    best_wait: Optional[int] = None
    for start in range(t_max, stop, _CHUNK):
        candidates = np.arange(start, min(start + _CHUNK, stop), dtype=np.int64)
        gaps = candidates // t_min - candidates // t_max
        violations = np.flatnonzero(gaps >= bound)
        if violations.size:
            candidates = candidates[:violations[0]]
        if candidates.size:
            waits = (candidates[:, None] % ticks[None, :]).max(axis=1)
            first = int(np.argmin(waits))
            if best_wait is None or int(waits[first]) < best_wait:
                best_barrier, best_wait = int(candidates[first]), int(waits[first])
        if violations.size or best_wait == 0:
            break

    solution = solution_for_barrier(best_barrier, cluster)
    logger.debug('optimal barrier T*=%d, local steps %s, max wait %d',
                 solution.barrier_ticks, solution.local_steps, solution.max_wait_ticks)
    return solution
