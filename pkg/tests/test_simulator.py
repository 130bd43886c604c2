import dataclasses

import numpy as np
import pytest

from hetsync.exceptions import EventBudgetError, InfeasibleClusterError
from hetsync.simulator import (EventKind, SimEvent, idle_fraction, idle_intervals, idle_ticks_until,
                               iteration_ticks, replay_check, simulate, speedup, ticks_to_loss)
from hetsync.solver import solve_barrier
from hetsync.strategies import ASP, BSP, SSP, LoadBalanced, LocalUniform
from hetsync.training import evaluate, initial_model, next_batch, sgd_step

REFERENCE_TICKS = [10, 12, 15, 20]

ALL_STRATEGIES = [BSP(), ASP(), SSP(stale_threshold=2), LocalUniform(period_steps=3),
                  LoadBalanced(staleness_bound=3)]


def sync_ticks(report):
    return [e.tick for e in report.events_of(EventKind.GLOBAL_SYNC)]


def assert_ticks_partition_horizon(report):
    for account in report.per_worker:
        assert account.compute_ticks + account.idle_ticks + account.inflight_ticks == report.horizon_ticks


def test_bsp_two_workers(make_config):
    report = simulate(make_config([2, 4], BSP(), horizon_ticks=8))
    assert [w.idle_ticks for w in report.per_worker] == [4, 0]
    assert [w.iterations for w in report.per_worker] == [2, 2]
    assert sync_ticks(report) == [4, 8]
    assert idle_fraction(report) == 0.25
    assert_ticks_partition_horizon(report)


def test_load_balanced_two_workers(make_config):
    report = simulate(make_config([3, 4], LoadBalanced(staleness_bound=2), horizon_ticks=12))
    assert sync_ticks(report) == [12]
    assert [w.idle_ticks for w in report.per_worker] == [0, 0]
    assert [w.iterations for w in report.per_worker] == [4, 3]
    assert idle_fraction(report) == 0.0
    assert not report.events_of(EventKind.BLOCK_START)


@pytest.mark.parametrize('strategy', ALL_STRATEGIES, ids=lambda s: s.label)
def test_single_worker_matches_plain_sgd(make_config, make_task, strategy):
    task = make_task(1, n=60, batch_size=8)
    report = simulate(make_config([5], strategy, horizon_ticks=50, task=task, eval_every_ticks=10))
    assert report.per_worker[0].idle_ticks == 0
    assert report.per_worker[0].iterations == 10
    assert not report.events_of(EventKind.BLOCK_START)
    assert idle_fraction(report) == 0.0

    shard = task.dataset.shards[0]
    model, cursor = initial_model(task), 0
    expected = []
    for tick in range(0, 51, 10):
        while model.step_count < tick // 5:
            batch, cursor = next_batch(shard, cursor, task.batch_size)
            model = sgd_step(model, batch, task)
        expected.append(evaluate(model, task.dataset.full, task)[0])
    assert [p.tick for p in report.loss_curve] == list(range(0, 51, 10))
    assert [p.loss for p in report.loss_curve] == expected
    assert report.final_model.same_as(model)


def test_homogeneous_bsp_equals_local_every_step(make_config):
    bsp = simulate(make_config([4, 4, 4], BSP(), horizon_ticks=80))
    local = simulate(make_config([4, 4, 4], LocalUniform(period_steps=1), horizon_ticks=80))
    assert bsp.events == local.events
    assert bsp.final_model.same_as(local.final_model)


def test_latency_makes_everyone_idle(make_config):
    report = simulate(make_config([2, 4], BSP(), horizon_ticks=12, sync_latency_ticks=1))
    assert sync_ticks(report) == [4, 9]
    assert [w.idle_ticks for w in report.per_worker] == [6, 2]
    assert [w.iterations for w in report.per_worker] == [3, 2]
    assert [w.inflight_ticks for w in report.per_worker] == [0, 2]
    assert_ticks_partition_horizon(report)


@pytest.mark.parametrize('strategy', ALL_STRATEGIES, ids=lambda s: s.label)
@pytest.mark.parametrize('jitter', [0.0, 0.3])
def test_report_invariants(make_config, strategy, jitter):
    report = simulate(make_config([3, 5, 7], strategy, horizon_ticks=400, staleness_bound=3,
                                  jitter_pct=jitter, seed=11, eval_every_ticks=37))
    assert_ticks_partition_horizon(report)
    assert list(report.events) == sorted(report.events, key=lambda e: e.sort_key)

    ticks = [p.tick for p in report.loss_curve]
    assert ticks[0] == 0 and ticks[-1] == 400
    assert all(a < b for a, b in zip(ticks, ticks[1:]))
    assert len(report.events_of(EventKind.EVAL)) == len(ticks)

    ends = report.events_of(EventKind.ITER_END)
    assert len(ends) == report.total_iterations
    if jitter == 0.0:
        for account in report.per_worker:
            assert account.iterations * account.iter_ticks == account.compute_ticks
    if not strategy.uses_barrier:
        assert not report.events_of(EventKind.GLOBAL_SYNC)


def test_asp_never_blocks(make_config):
    report = simulate(make_config(REFERENCE_TICKS, ASP(), horizon_ticks=600))
    assert not report.events_of(EventKind.BLOCK_START)
    assert idle_fraction(report) == 0.0
    applies = report.events_of(EventKind.ASP_APPLY)
    assert len(applies) == report.total_iterations
    assert report.max_staleness == max(e.staleness for e in applies) > 0


def test_ssp_clock_gap_is_bounded(make_config):
    rng = np.random.default_rng(3)
    for run in range(20):
        threshold = int(rng.choice([1, 2, 4]))
        ticks = rng.integers(1, 20, size=int(rng.integers(2, 6))).tolist()
        report = simulate(make_config(ticks, SSP(stale_threshold=threshold), horizon_ticks=300,
                                      jitter_pct=0.2 if run % 2 else 0.0, seed=run))
        clocks = {w.worker_id: 0 for w in report.per_worker}
        for event in report.events_of(EventKind.ITER_END):
            clocks[event.worker_id] += 1
            assert max(clocks.values()) - min(clocks.values()) <= threshold + 1


def test_barrier_alignment_with_solver(make_config):
    rng = np.random.default_rng(17)
    checked = 0
    while checked < 50:
        ticks = rng.integers(1, 13, size=int(rng.integers(1, 5))).tolist()
        bound = int(rng.integers(2, 7))
        config = make_config(ticks, LoadBalanced(staleness_bound=bound), horizon_ticks=max(ticks),
                             staleness_bound=bound)
        try:
            solution = solve_barrier(config.cluster)
        except InfeasibleClusterError:
            continue
        checked += 1
        barrier = solution.barrier_ticks
        report = simulate(dataclasses.replace(config, horizon_ticks=3 * barrier))

        assert sync_ticks(report) == [barrier, 2 * barrier, 3 * barrier]
        per_worker = {w: [] for w in config.cluster.worker_ids}
        for worker_id, start, end in idle_intervals(report):
            per_worker[worker_id].append(end - start)
        for worker_id, wait in zip(config.cluster.worker_ids, solution.wait_ticks):
            assert per_worker[worker_id] == ([wait] * 3 if wait else [])


def test_models_identical_after_every_sync(make_config):
    synced = []

    def observer(tick, models):
        synced.append(tick)
        assert all(m.same_as(models[0]) for m in models)

    for strategy in (BSP(), LocalUniform(period_steps=2), LoadBalanced(staleness_bound=4)):
        simulate(make_config(REFERENCE_TICKS, strategy, horizon_ticks=600, averaging='steps'),
                 observer=observer)
    assert synced


def test_replay_and_seeds(make_config):
    for strategy in ALL_STRATEGIES:
        assert replay_check(make_config([3, 4, 6], strategy, horizon_ticks=200, jitter_pct=0.25, seed=5))

    jittered = [simulate(make_config([3, 4, 6], BSP(), horizon_ticks=200, jitter_pct=0.25, seed=s))
                for s in (1, 2)]
    assert jittered[0].events != jittered[1].events

    steady = [simulate(make_config([3, 4, 6], BSP(), horizon_ticks=200, seed=s)) for s in (1, 2)]
    assert steady[0].events == steady[1].events
    assert steady[0].final_model.same_as(steady[1].final_model)


def test_iteration_ticks_jitter():
    assert iteration_ticks(10, 0.0, 1, 0, 5) == 10
    durations = [iteration_ticks(10, 0.5, 1, 0, i) for i in range(200)]
    assert all(5 <= d <= 15 for d in durations)
    assert len(set(durations)) > 1
    assert durations == [iteration_ticks(10, 0.5, 1, 0, i) for i in range(200)]
    assert iteration_ticks(1, 0.9, 1, 0, 0) >= 1


def test_event_budget(make_config):
    with pytest.raises(EventBudgetError):
        simulate(make_config([2, 3], ASP(), horizon_ticks=1000, max_events=50))


def test_infeasible_load_balanced(make_config):
    with pytest.raises(InfeasibleClusterError):
        simulate(make_config([1, 10], LoadBalanced(staleness_bound=3), horizon_ticks=100))


@pytest.mark.parametrize('kwargs', [
    {'horizon_ticks': 3},
    {'eval_every_ticks': 0},
    {'jitter_pct': 1.0},
    {'sync_latency_ticks': -1},
    {'averaging': 'median'},
])
def test_config_validation(make_config, kwargs):
    kwargs = {'horizon_ticks': 100, **kwargs}
    with pytest.raises(ValueError):
        make_config([2, 4], BSP(), **kwargs)


def test_shard_count_must_match(make_config, make_task):
    with pytest.raises(ValueError):
        make_config([2, 4], BSP(), horizon_ticks=100, task=make_task(3))


def test_same_tick_order_puts_kind_before_worker():
    events = [SimEvent(4, 0, EventKind.ITER_START), SimEvent(4, None, EventKind.GLOBAL_SYNC),
              SimEvent(4, 1, EventKind.ITER_END), SimEvent(4, 0, EventKind.BLOCK_END),
              SimEvent(3, 1, EventKind.ITER_START), SimEvent(4, 1, EventKind.ITER_START)]
    ordered = sorted(events, key=lambda e: e.sort_key)
    assert [(e.tick, e.worker_id, e.kind) for e in ordered] == [
        (3, 1, EventKind.ITER_START),
        (4, 1, EventKind.ITER_END),
        (4, None, EventKind.GLOBAL_SYNC),
        (4, 0, EventKind.BLOCK_END),
        (4, 0, EventKind.ITER_START),
        (4, 1, EventKind.ITER_START),
    ]


def test_event_lines(make_config):
    report = simulate(make_config([2, 3], ASP(), horizon_ticks=6, eval_every_ticks=6))
    lines = report.event_lines()
    assert lines[0] == '0,-,eval,loss={!r};accuracy={!r}'.format(report.loss_curve[0].loss,
                                                                  report.loss_curve[0].accuracy)
    assert lines[1:3] == ['0,0,iter_start', '0,1,iter_start']
    assert lines[3:5] == ['2,0,iter_end', '2,0,asp_apply,staleness=0']
    assert [SimEvent.from_line(line) for line in lines] == list(report.events)


def test_idle_metrics(make_config):
    report = simulate(make_config([2, 4], BSP(), horizon_ticks=8))
    assert idle_intervals(report) == [(0, 2, 4), (0, 6, 8)]
    assert idle_ticks_until(report, [0, 3, 5, 8]).tolist() == [0, 1, 2, 4]
    assert ticks_to_loss(report, float('inf')) == 0
    assert ticks_to_loss(report, -1.0) is None

    single = simulate(make_config([2], BSP(), horizon_ticks=8))
    assert speedup(report, single) == pytest.approx(1.0)
