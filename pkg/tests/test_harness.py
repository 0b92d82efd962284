import json
import math
from dataclasses import replace

import numpy as np
import pytest

import harness
from harness import ExperimentConfig, main, parse_sizes, run_experiment, run_trial
from oracle import OracleMode, make_instance
from records_io import read_csv, read_jsonl
from scaling import fitted_constant
from trial_id_utils import trial_generators


def config_for(algorithm, sizes=(16,), trials=3, **kwargs):
    return ExperimentConfig(algorithm=algorithm, sizes=sizes, trials_per_size=trials, base_seed=77, **kwargs)


def comparable(records):
    return [replace(r, wall_time_ms=0.0) for r in records]


def test_mode_follows_the_algorithm():
    assert config_for('ranking').mode is OracleMode.RANKING
    assert config_for('three_ary').mode is OracleMode.VALUE
    assert config_for('three_ary', mode=OracleMode.RANKING).mode is OracleMode.VALUE


def test_config_validation():
    assert config_for('three_ary').validate() == []
    errors = ExperimentConfig(algorithm='quantum', sizes=(0,), trials_per_size=0, base_seed=-1,
                              budget_factor=0, workers=0).validate()
    assert len(errors) == 6


def test_config_cli_args():
    args = config_for('ranking', sizes=(1024, 4096), trials=200).to_cli_args()
    assert args[:3] == ['run', '--algorithm', 'ranking']
    assert '--mode' in args
    assert args[args.index('--sizes') + 1] == '1024,4096'


@pytest.mark.parametrize('algorithm', ['opo_ea', 'binary_search', 'star_ary', 'three_ary', 'ranking'])
def test_run_trial_is_deterministic(algorithm):
    config = config_for(algorithm)
    first = run_trial(config, 16, 2)
    second = run_trial(config, 16, 2)
    assert comparable([first]) == comparable([second])
    assert not first.truncated


@pytest.mark.parametrize('algorithm', ['opo_ea', 'binary_search', 'star_ary', 'three_ary', 'ranking'])
def test_dimension_one_trials(algorithm):
    for trial_index in range(5):
        record = run_trial(config_for(algorithm), 1, trial_index)
        assert record.queries <= 2
        assert not record.truncated


def test_trial_seeds_are_independent_of_the_grid():
    small = run_experiment(config_for('binary_search', sizes=(16,), trials=4))
    large = run_experiment(config_for('binary_search', sizes=(16, 32), trials=6))
    first_small = comparable(small.records)
    assert comparable([r for r in large.records if r.n == 16 and r.trial_index < 4]) == first_small
    assert len({r.seed for r in large.records}) == len(large.records)


def test_trials_draw_fresh_instances():
    config = config_for('three_ary', sizes=(32,))
    seeds = [run_trial(config, 32, i).seed for i in range(3)]
    instances = [make_instance(32, trial_generators(seed)[0]) for seed in seeds]
    assert instances[0] != instances[1] != instances[2]


def test_parallel_workers_match_sequential_run():
    sequential = run_experiment(config_for('three_ary', sizes=(16, 64), trials=4))
    parallel = run_experiment(config_for('three_ary', sizes=(16, 64), trials=4, workers=3))
    assert comparable(sequential.records) == comparable(parallel.records)
    assert [(r.n, r.trial_index) for r in parallel.records] == [(n, i) for n in (16, 64) for i in range(4)]


def test_single_trial_summary():
    result = run_experiment(config_for('binary_search', sizes=(64,), trials=1))
    entry = result.summary.size(64)
    assert entry.mean == result.records[0].queries
    assert entry.sd == 0.0


def test_parse_sizes():
    assert parse_sizes('1024, 2^12') == [1024, 4096]
    with pytest.raises(Exception):
        parse_sizes('abc')
    with pytest.raises(Exception):
        parse_sizes('0')


def test_run_command_writes_outputs(tmp_path, capsys):
    out = tmp_path / 'results' / 'three_ary.csv'
    code = main(['--config', str(tmp_path / 'missing.json'), 'run', '--algorithm', 'three_ary',
                 '--sizes', '16,32', '--trials', '3', '--seed', '5', '--out', str(out)])
    assert code == 0
    records = read_csv(out)
    assert [(r.n, r.trial_index) for r in records] == [(n, i) for n in (16, 32) for i in range(3)]

    summary = read_jsonl(out.with_suffix('.summary.jsonl'))
    assert [line['n'] for line in summary if line['kind'] == 'size'] == [16, 32]
    manifest = json.loads(out.with_suffix('.manifest.json').read_text())
    assert manifest['config']['algorithm'] == 'three_ary'
    assert manifest['totals'] == {'trials': 6, 'truncated': 0, 'interrupted': False}
    assert 'EXPERIMENT SUMMARY' in capsys.readouterr().out


def test_run_command_reports_truncation(tmp_path):
    out = tmp_path / 'truncated.csv'
    code = main(['--config', str(tmp_path / 'missing.json'), 'run', '--algorithm', 'binary_search',
                 '--sizes', '256', '--trials', '2', '--budget-factor', '0.001', '--out', str(out)])
    assert code == 1
    assert all(r.truncated for r in read_csv(out))


def test_run_command_rejects_invalid_config(tmp_path):
    code = main(['--config', str(tmp_path / 'missing.json'), 'run', '--algorithm', 'three_ary',
                 '--sizes', '16', '--trials', '0', '--out', str(tmp_path / 'x.csv')])
    assert code == 2


def test_run_command_unwritable_output(tmp_path):
    blocker = tmp_path / 'file.txt'
    blocker.write_text('not a directory')
    code = main(['--config', str(tmp_path / 'missing.json'), 'run', '--algorithm', 'binary_search',
                 '--sizes', '16', '--trials', '1', '--out', str(blocker / 'out.csv')])
    assert code == 1


def test_verify_command(tmp_path, capsys):
    out = tmp_path / 'reports.jsonl'
    code = main(['--config', str(tmp_path / 'missing.json'), 'verify', '--check', 'improvement',
                 '--n', '256', '--k', '4', '--c', '0', '--samples', '5000', '--out', str(out)])
    assert code == 0
    printed = [json.loads(line) for line in capsys.readouterr().out.splitlines() if line.startswith('{')]
    assert printed[0]['check_name'] == 'improvement_probability'
    assert read_jsonl(out)[0]['passed'] is True


def test_verify_command_rejects_bad_parameters(tmp_path):
    code = main(['--config', str(tmp_path / 'missing.json'), 'verify', '--check', 'improvement',
                 '--n', '256', '--k', '4', '--c', '4', '--samples', '100'])
    assert code == 2


@pytest.mark.parametrize('alias, check_name', [
    ('lemma2', 'improvement_probability'),
    ('lemma4', 'level_sample_sizes'),
    ('lemma5', 'unique_identification'),
])
def test_verify_accepts_interface_check_names(tmp_path, capsys, alias, check_name):
    code = main(['--config', str(tmp_path / 'missing.json'), 'verify', '--check', alias,
                 '--n', '256', '--k', '4', '--c', '0', '--samples', '2000', '--trials', '10', '--seed', '1'])
    assert code in (0, 1)
    printed = [json.loads(line) for line in capsys.readouterr().out.splitlines() if line.startswith('{')]
    assert printed[0]['check_name'] == check_name


def test_verify_unbiasedness_command(tmp_path):
    code = main(['--config', str(tmp_path / 'missing.json'), 'verify', '--check', 'unbiasedness', '--n', '2'])
    assert code == 0


def test_scaling_command(tmp_path, capsys):
    out = tmp_path / 'bs.csv'
    main(['--config', str(tmp_path / 'missing.json'), 'run', '--algorithm', 'binary_search',
          '--sizes', '16,32', '--trials', '2', '--out', str(out)])
    capsys.readouterr()
    summary_out = tmp_path / 'scaling.jsonl'
    code = main(['--config', str(tmp_path / 'missing.json'), 'scaling', '--in', str(out), '--out', str(summary_out)])
    assert code == 0
    assert 'Scaling summary for binary_search' in capsys.readouterr().out
    assert any(line['kind'] == 'model' for line in read_jsonl(summary_out))


def test_scaling_command_missing_input(tmp_path):
    code = main(['--config', str(tmp_path / 'missing.json'), 'scaling', '--in', str(tmp_path / 'none.csv')])
    assert code == 2


def test_config_command(tmp_path, capsys):
    code = main(['--config', str(tmp_path / 'missing.json'), 'config', '--algorithm', 'ranking'])
    assert code == 0
    assert '--mode ranking' in capsys.readouterr().out


def test_config_command_saves_values(tmp_path, capsys):
    path = tmp_path / 'lab.json'
    code = main(['--config', str(path), 'config', '--set', 'workers=4', '--set', 'verification.success_frequency=0.95',
                 '--show'])
    assert code == 0
    saved = json.loads(path.read_text())
    assert saved['workers'] == 4
    assert saved['verification']['success_frequency'] == 0.95
    assert saved['verification']['improvement_samples'] == 100000
    assert '"workers": 4' in capsys.readouterr().out

    assert main(['--config', str(path), 'config', '--algorithm', 'three_ary']) == 0
    assert '--workers 4' in capsys.readouterr().out


def test_config_command_rejects_invalid_values(tmp_path):
    path = tmp_path / 'lab.json'
    assert main(['--config', str(path), 'config', '--set', 'workers=0']) == 2
    assert main(['--config', str(path), 'config', '--set', 'quantum=1']) == 2
    assert not path.exists()
    with pytest.raises(SystemExit):
        main(['--config', str(path), 'config', '--set', 'workers'])


def test_config_command_reset(tmp_path):
    path = tmp_path / 'lab.json'
    main(['--config', str(path), 'config', '--set', 'base_seed=42'])
    assert json.loads(path.read_text())['base_seed'] == 42
    assert main(['--config', str(path), 'config', '--reset']) == 0
    assert json.loads(path.read_text())['base_seed'] == 20110101


def test_timezone_fallback(monkeypatch):
    monkeypatch.setenv('TZ', 'Nowhere/Invalid')
    assert harness.get_timezone().zone == 'UTC'
    monkeypatch.setenv('TZ', 'Europe/Berlin')
    assert harness.get_timezone().zone == 'Europe/Berlin'


def reference_opo_ea(n, rng):
    """Plain (1+1) EA on an independently drawn hidden-permutation LeadingOnes instance"""
    z = rng.integers(0, 2, size=n)
    order = rng.permutation(n)

    def fitness(x):
        wrong = np.flatnonzero(x[order] != z[order])
        return int(wrong[0]) if wrong.size else n

    x = rng.integers(0, 2, size=n)
    fx, queries = fitness(x), 1
    while fx < n:
        y = x ^ (rng.random(n) < 1 / n)
        fy = fitness(y)
        queries += 1
        if fy >= fx:
            x, fx = y, fy
    return queries


@pytest.mark.slow
def test_opo_ea_agrees_with_reference_implementation():
    n, trials = 128, 1000
    result = run_experiment(config_for('opo_ea', sizes=(n,), trials=trials))
    ours = np.array([r.queries for r in result.records], dtype=float)
    rng = np.random.default_rng(99)
    reference = np.array([reference_opo_ea(n, rng) for _ in range(trials)], dtype=float)
    se = math.sqrt(ours.var(ddof=1) / trials + reference.var(ddof=1) / trials)
    assert abs(ours.mean() - reference.mean()) < 4 * se


def model_spread(result, model):
    return result.summary.model(model).spread


def test_binary_search_follows_n_log_n():
    result = run_experiment(config_for('binary_search', sizes=(32, 64, 128), trials=20), min_spread_trials=1)
    assert result.summary.truncations == 0
    assert model_spread(result, 'n log n') < 0.15


def test_three_ary_separates_from_the_quadratic_law():
    result = run_experiment(config_for('three_ary', sizes=(2 ** 10, 2 ** 12), trials=6), min_spread_trials=1)
    assert result.summary.truncations == 0
    assert model_spread(result, 'n log n / log log n') < 0.25
    assert model_spread(result, 'n^2') > 2.0


def test_ranking_costs_a_constant_factor_over_values():
    ranked = run_experiment(config_for('ranking', sizes=(256,), trials=10))
    valued = run_experiment(config_for('three_ary', sizes=(256,), trials=10))
    assert ranked.summary.truncations == 0
    assert ranked.summary.size(256).mean <= 3 * valued.summary.size(256).mean


@pytest.mark.slow
@pytest.mark.parametrize('algorithm', ['opo_ea', 'binary_search', 'star_ary', 'three_ary', 'ranking'])
def test_every_algorithm_completes_the_grid(algorithm):
    result = run_experiment(config_for(algorithm, sizes=(16, 64, 256, 1024), trials=50))
    assert len(result.records) == 200
    assert not any(r.truncated for r in result.records)


@pytest.mark.slow
def test_binary_search_law_acceptance():
    result = run_experiment(config_for('binary_search', sizes=(256, 512, 1024), trials=500))
    assert result.summary.truncations == 0
    assert model_spread(result, 'n log n') < 0.15


@pytest.mark.slow
@pytest.mark.parametrize('algorithm', ['star_ary', 'three_ary'])
def test_block_optimizer_law_acceptance(algorithm):
    sizes = (2 ** 10, 2 ** 12, 2 ** 14)
    result = run_experiment(config_for(algorithm, sizes=sizes, trials=200, workers=4))
    assert result.summary.truncations == 0
    assert model_spread(result, 'n log n / log log n') < 0.25
    assert model_spread(result, 'n^2') > 2.0

    # No crossover with binary search is reached by 2^14, so the gap to
    # c * n log n has to shrink with n instead.
    baseline = run_experiment(config_for('binary_search', sizes=sizes, trials=50))
    c = fitted_constant(baseline.summary)
    gaps = [result.summary.size(n).mean / (c * n * math.log2(n)) for n in sizes]
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.slow
def test_ranking_acceptance_at_1024():
    ranked = run_experiment(config_for('ranking', sizes=(1024,), trials=100))
    valued = run_experiment(config_for('three_ary', sizes=(1024,), trials=100))
    assert not any(r.truncated for r in ranked.records)
    assert ranked.summary.size(1024).mean <= 3 * valued.summary.size(1024).mean
