from experiment_runner import ExperimentRunner, RunStatus
from records_io import TrialRecord


def fake_trial(n, trial_index):
    return TrialRecord(algorithm='binary_search', n=n, trial_index=trial_index, seed=0,
                       queries=n + trial_index, truncated=trial_index == 2, wall_time_ms=0.5)


def test_sequential_run_reports_progress():
    progress = []
    runner = ExperimentRunner(fake_trial, [8, 4], 3, progress_callback=progress.append)
    outcome = runner.run()
    assert outcome['success'] and not outcome['interrupted']
    assert [(r.n, r.trial_index) for r in outcome['results']] == [(4, 0), (4, 1), (4, 2), (8, 0), (8, 1), (8, 2)]
    assert [p['completed'] for p in progress] == [1, 2, 3, 4, 5, 6]
    assert progress[-1]['total'] == 6
    assert runner.status == RunStatus.COMPLETED
    assert runner.size_counts == {4: 3, 8: 3}


def test_pool_run_orders_results():
    runner = ExperimentRunner(fake_trial, [16, 8], 5, workers=4)
    outcome = runner.run()
    assert [(r.n, r.trial_index) for r in outcome['results']] == [(n, i) for n in (8, 16) for i in range(5)]


def test_failing_trial_is_reported():
    messages = []

    def broken(n, trial_index):
        if trial_index == 1:
            raise RuntimeError('accounting')
        return fake_trial(n, trial_index)

    runner = ExperimentRunner(broken, [4], 3, output_callback=messages.append)
    outcome = runner.run()
    assert not outcome['success']
    assert outcome['error'] == 'accounting'
    assert len(outcome['results']) == 1
    assert runner.status == RunStatus.FAILED
    assert messages


def test_interrupt_keeps_completed_trials():
    def interrupted(n, trial_index):
        if trial_index == 2:
            raise KeyboardInterrupt
        return fake_trial(n, trial_index)

    runner = ExperimentRunner(interrupted, [4], 5)
    outcome = runner.run()
    assert outcome['interrupted']
    assert len(outcome['results']) == 2
    assert runner.status == RunStatus.INTERRUPTED
