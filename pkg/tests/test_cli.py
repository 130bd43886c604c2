import json

import pandas as pd
import pytest

from hetsync.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_INFEASIBLE, EXIT_OK, EXIT_OUTPUT, main
from hetsync.config import SEED_ENV_VAR, ExperimentConfig
from hetsync.harness import METRICS_COLUMNS, SWEEP_COLUMNS, single_node_config
from hetsync.simulator import simulate

STRATEGY_LABELS = ['bsp', 'local_h2', 'load_balanced_m4']


@pytest.fixture(autouse=True)
def no_seed_override(monkeypatch):
    monkeypatch.delenv(SEED_ENV_VAR, raising=False)


def small_experiment(tmp_path, iter_ticks, **changes):
    data = {
        'cluster': {'iter_ticks': iter_ticks, 'staleness_bound': 2},
        'task': {'num_examples': 100, 'dimension': 3, 'batch_size': 2},
        'strategies': [{'name': 'bsp'}],
        'horizon_ticks': 120,
        'eval_every_ticks': 20,
        'repeat_seeds': [1],
        'output_dir': str(tmp_path / 'out'),
    }
    data.update(changes)
    return data


def test_solve(write_config, capsys):
    path = write_config({'iter_ticks': [3, 4], 'staleness_bound': 2})
    assert main(['solve', str(path)]) == EXIT_OK
    output = json.loads(capsys.readouterr().out)
    assert output == {'barrier_ticks': 12, 'local_steps': [4, 3], 'wait_ticks': [0, 0],
                      'max_wait_ticks': 0, 'staleness_gap': 1}


def test_solve_infeasible(write_config, capsys):
    path = write_config({'iter_ticks': [1, 10], 'staleness_bound': 3})
    assert main(['solve', str(path)]) == EXIT_INFEASIBLE
    assert 'staleness gap 9' in capsys.readouterr().err


def test_solve_missing_file(tmp_path, capsys):
    assert main(['solve', str(tmp_path / 'nope.json')]) == EXIT_CONFIG
    assert 'does not exist' in capsys.readouterr().err


def test_solve_over_scan_budget(write_config, capsys):
    path = write_config({'iter_ticks': [1000000, 1000001], 'staleness_bound': 100})
    assert main(['solve', str(path)]) == EXIT_FAILURE
    lines = capsys.readouterr().err.splitlines()
    assert any(line.startswith('hetsync: ') and 'above the budget' in line for line in lines)


def test_simulate_reference(write_config, reference_experiment, tmp_path):
    path = write_config(reference_experiment)
    assert main(['simulate', str(path)]) == EXIT_OK
    out = tmp_path / 'runs'

    csvs = sorted(out.glob('*_metrics.csv'))
    logs = sorted(out.glob('*_events.log'))
    assert len(csvs) == 9
    assert len(logs) == 9
    summary = json.loads((out / 'summary.json').read_text())
    assert sorted(summary['strategies']) == sorted(STRATEGY_LABELS)

    idle = {label: entry['idle_fraction'] for label, entry in summary['strategies'].items()}
    assert idle['load_balanced_m4'] <= idle['local_h2'] <= idle['bsp']
    assert idle['load_balanced_m4'] < 0.05
    assert summary['strategies']['load_balanced_m4']['barrier_ticks'] == 60
    assert summary['strategies']['load_balanced_m4']['local_steps'] == [6, 5, 4, 3]
    assert summary['strategies']['load_balanced_m4']['ticks_to_threshold'] is not None
    assert summary['strategies']['bsp']['speedup'] == pytest.approx(4.0)
    assert summary['strategies']['load_balanced_m4']['speedup'] > summary['strategies']['bsp']['speedup']
    single = {seed: simulate(single_node_config(ExperimentConfig.from_dict(reference_experiment), seed))
              for seed in (1, 2, 3)}

    for label in STRATEGY_LABELS:
        final_iters = []
        for seed in (1, 2, 3):
            stem = out / f'{label}_seed{seed}'
            text = (stem.parent / f'{stem.name}_metrics.csv').read_text()
            assert text.splitlines()[0] == ','.join(METRICS_COLUMNS)
            assert '\r' not in text
            frame = pd.read_csv(stem.parent / f'{stem.name}_metrics.csv')
            log = (stem.parent / f'{stem.name}_events.log').read_text().splitlines()
            assert len(frame) == sum(1 for line in log if line.split(',')[2] == 'eval')
            assert frame['tick'].is_monotonic_increasing and frame['tick'].is_unique
            assert frame['tick'].iloc[-1] == 5000
            final_iters.append(frame['iters'].iloc[-1])
        throughput = summary['strategies'][label]['throughput_iters_per_ktick']
        assert throughput == pytest.approx(1000 * sum(final_iters) / 3 / 5000)
        expected = sum(1000 * iters / 5000 / single[seed].throughput_iters_per_ktick
                       for seed, iters in zip((1, 2, 3), final_iters)) / 3
        assert summary['strategies'][label]['speedup'] == pytest.approx(expected)

    rerun = tmp_path / 'rerun'
    assert main(['simulate', str(path), '--output_dir', str(rerun), '--jobs', '2']) == EXIT_OK
    for original in csvs + logs + [out / 'summary.json']:
        assert (rerun / original.name).read_bytes() == original.read_bytes()


def test_simulate_seed_override(monkeypatch, write_config, tmp_path):
    monkeypatch.setenv(SEED_ENV_VAR, '4')
    path = write_config(small_experiment(tmp_path, [3, 4], repeat_seeds=[1, 2]))
    assert main(['simulate', str(path)]) == EXIT_OK
    assert [p.name for p in sorted((tmp_path / 'out').glob('*.csv'))] == ['bsp_seed4_metrics.csv']


def test_simulate_infeasible(write_config, tmp_path, capsys):
    data = small_experiment(tmp_path, [1, 10], strategies=[{'name': 'load_balanced', 'staleness_bound': 3}])
    assert main(['simulate', str(write_config(data))]) == EXIT_INFEASIBLE
    assert 'gap 9' in capsys.readouterr().err


def test_simulate_over_event_budget(write_config, tmp_path, capsys):
    data = small_experiment(tmp_path, [3, 4], max_events=10)
    assert main(['simulate', str(write_config(data))]) == EXIT_FAILURE
    assert 'exceeded 10 events' in capsys.readouterr().err


def test_simulate_unwritable_output(write_config, tmp_path):
    blocker = tmp_path / 'blocker'
    blocker.write_text('not a directory')
    data = small_experiment(tmp_path, [3, 4], output_dir=str(blocker / 'out'))
    assert main(['simulate', str(write_config(data))]) == EXIT_OUTPUT


def test_simulate_task_too_small_for_batches(write_config, tmp_path):
    data = small_experiment(tmp_path, [3, 4], task={'num_examples': 10, 'dimension': 3, 'batch_size': 8})
    assert main(['simulate', str(write_config(data))]) == EXIT_CONFIG


def test_sweep(write_config, tmp_path):
    path = write_config(small_experiment(tmp_path, [3, 4]))
    assert main(['sweep', str(path), '--param', 'M', '--from', '1', '--to', '3']) == EXIT_OK
    frame = pd.read_csv(tmp_path / 'out' / 'sweep_M.csv')
    assert list(frame.columns) == SWEEP_COLUMNS
    assert frame['M'].tolist() == [1, 2, 3]
    assert frame['status'].tolist() == ['ok', 'ok', 'ok']
    assert frame['barrier_ticks'].tolist() == [4, 12, 12]
    assert frame['max_wait'].tolist() == [1, 0, 0]
    assert frame['M'].is_monotonic_increasing
    assert frame['max_wait'].is_monotonic_decreasing


def test_sweep_marks_infeasible_bounds(write_config, tmp_path):
    path = write_config(small_experiment(tmp_path, [1, 10]))
    assert main(['sweep', str(path), '--from', '8', '--to', '10']) == EXIT_OK
    frame = pd.read_csv(tmp_path / 'out' / 'sweep_M.csv')
    assert frame['status'].tolist() == ['infeasible', 'infeasible', 'ok']
    assert frame['barrier_ticks'].isna().tolist() == [True, True, False]
    assert frame['barrier_ticks'].iloc[-1] == 10


def test_sweep_bad_range(write_config, tmp_path):
    path = write_config(small_experiment(tmp_path, [3, 4]))
    assert main(['sweep', str(path), '--from', '3', '--to', '1']) == EXIT_CONFIG
