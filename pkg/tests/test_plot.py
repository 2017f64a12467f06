"""Tests for CSV + SVG plot output."""

import pytest

from services.loss_service import reward_diff_cdf
from services.plot_service import emit_plot
from utils.errors import ContractError


def test_cdf_series_rows(tmp_path):
    csv_path, svg_path = emit_plot({'cdf': reward_diff_cdf([3.0, 1.0, 2.0])}, tmp_path / 'out.png', step=True)
    assert csv_path == tmp_path / 'out.csv'
    assert svg_path == tmp_path / 'out.svg'
    assert csv_path.read_text(encoding='utf-8').splitlines() == [
        'series,x,y',
        'cdf,1.0,0.3333333333333333',
        'cdf,2.0,0.6666666666666666',
        'cdf,3.0,1.0',
    ]
    assert svg_path.read_text(encoding='utf-8').lstrip().startswith('<?xml')


def test_legend_keeps_series_order(tmp_path):
    series = {'zeta': [(0.0, 0.5), (1.0, 1.0)], 'alpha': [(0.0, 0.2), (2.0, 1.0)]}
    csv_path, svg_path = emit_plot(series, tmp_path / 'two', title='Two series')
    svg = svg_path.read_text(encoding='utf-8')
    assert svg.index('zeta') < svg.index('alpha')
    rows = csv_path.read_text(encoding='utf-8').splitlines()[1:]
    assert [row.split(',')[0] for row in rows] == ['zeta', 'zeta', 'alpha', 'alpha']


def test_output_is_byte_stable(tmp_path):
    series = {'near': reward_diff_cdf([0.1, -0.2, 0.05]), 'wide': reward_diff_cdf([4.0, -3.0, 1.5])}
    first = emit_plot(series, tmp_path / 'a' / 'cdf', step=True)
    second = emit_plot(series, tmp_path / 'b' / 'cdf', step=True)
    for left, right in zip(first, second):
        assert left.read_bytes() == right.read_bytes()


def test_empty_series_are_refused(tmp_path):
    with pytest.raises(ContractError):
        emit_plot({}, tmp_path / 'none')
    with pytest.raises(ContractError):
        emit_plot({'empty': []}, tmp_path / 'none')
    assert list(tmp_path.iterdir()) == []
