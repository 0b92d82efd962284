import math
import random

import pytest

from records_io import TrialRecord
from scaling import MODELS, doubling_ratios, fitted_constant, format_summary_table, summarize


def records_for(n, queries, algorithm='three_ary', truncated=()):
    return [TrialRecord(algorithm=algorithm, n=n, trial_index=i, seed=i, queries=q,
                        truncated=i in truncated, wall_time_ms=2.0)
            for i, q in enumerate(queries)]


def test_models():
    assert MODELS['n^2'](8) == 64
    assert MODELS['n log n'](8) == 24
    assert MODELS['n log n / log log n'](16) == pytest.approx(32)
    assert MODELS['n log n'](1) is None
    assert MODELS['n log n / log log n'](2) is None


def test_single_record_summary():
    summary = summarize(records_for(64, [500]))
    entry = summary.size(64)
    assert entry.trials == 1
    assert entry.mean == 500
    assert entry.sd == 0.0
    assert entry.ci_low == entry.ci_high == 500


def test_size_statistics():
    summary = summarize(records_for(16, [10, 20, 30, 40], truncated={3}))
    entry = summary.size(16)
    assert entry.mean == 25
    assert entry.sd == pytest.approx(math.sqrt(500 / 3))
    assert entry.ci_low < 25 < entry.ci_high
    assert entry.truncated == 1
    assert summary.truncations == 1


def test_summary_is_order_independent():
    records = records_for(16, range(40)) + records_for(32, range(100, 140))
    shuffled = list(records)
    random.Random(3).shuffle(shuffled)
    assert summarize(records) == summarize(shuffled)


def test_spread_uses_sizes_with_enough_trials():
    records = []
    for n in (16, 32, 64):
        records += records_for(n, [int(2 * n * math.log2(n))] * 30)
    records += records_for(128, [5])
    summary = summarize(records, min_trials=30)
    fit = summary.model('n log n')
    assert fit.sizes_used == [16, 32, 64]
    assert fit.spread == pytest.approx(0.0, abs=1e-9)
    assert set(fit.ratios) == {16, 32, 64, 128}
    assert summary.model('n^2').spread > 0.5


def test_spread_needs_two_sizes():
    summary = summarize(records_for(16, [5] * 30))
    assert all(fit.spread is None for fit in summary.models)


def test_doubling_ratios_and_fitted_constant():
    records = []
    for n in (16, 32, 64):
        records += records_for(n, [3 * n * int(math.log2(n))] * 2)
    summary = summarize(records)
    assert doubling_ratios(summary) == {16: pytest.approx(2.5), 32: pytest.approx(2.4)}
    assert fitted_constant(summary) == pytest.approx(3.0)


def test_empty_records_rejected():
    with pytest.raises(ValueError):
        summarize([])


def test_json_lines_and_table():
    summary = summarize(records_for(16, [10, 12]) + records_for(32, [30, 34]))
    lines = summary.to_json_lines()
    assert [line['kind'] for line in lines] == ['size', 'size', 'model', 'model', 'model']
    assert lines[0]['algorithm'] == 'three_ary'
    table = format_summary_table(summary)
    assert table[0] == 'Scaling summary for three_ary:'
    assert any('n log n' in line for line in table)
