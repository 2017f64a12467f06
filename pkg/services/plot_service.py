"""
Plot Service

Writes named (x, y) series as a comma-separated data file plus an SVG
rendering. Both files are byte-stable across runs.
"""

import csv
import logging
from pathlib import Path
from typing import Mapping, Sequence, Tuple, Union

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

from utils.errors import ContractError  # noqa: E402

logger = logging.getLogger(__name__)

Series = Mapping[str, Sequence[Tuple[float, float]]]

SVG_SETTINGS = {
    'svg.hashsalt': 'xalma-lab',
    'svg.fonttype': 'none',
    'font.family': 'DejaVu Sans',
    'axes.unicode_minus': False,
}


def write_series_csv(series: Series, path: Path) -> Path:
    """One row per point: series,x,y in input order."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['series', 'x', 'y'])
        for name, points in series.items():
            for x, y in points:
                writer.writerow([name, repr(float(x)), repr(float(y))])
    return path


def write_series_svg(series: Series, path: Path, title: str = '', xlabel: str = 'x',
                     ylabel: str = 'y', step: bool = False) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(SVG_SETTINGS):
        fig, ax = plt.subplots(figsize=(6, 4))
        try:
            for name, points in series.items():
                xs = [float(x) for x, _ in points]
                ys = [float(y) for _, y in points]
                ax.plot(xs, ys, label=name, drawstyle='steps-post' if step else 'default')
            if title:
                ax.set_title(title)
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            ax.grid(True, alpha=0.3)
            ax.legend(loc='lower right')
            fig.savefig(path, format='svg', metadata={'Date': None})
        finally:
            plt.close(fig)
    return path


def emit_plot(series: Series, path: Union[str, Path], title: str = '', xlabel: str = 'x',
              ylabel: str = 'y', step: bool = False) -> Tuple[Path, Path]:
    """
    Write `<path>.csv` and `<path>.svg`.

    Args:
        series: Ordered mapping of legend label to (x, y) points
        path: Output stem; any suffix is replaced
        step: Draw as a step function (CDFs)

    Returns:
        (csv path, svg path)
    """
    if not series:
        raise ContractError.from_key('empty_input', what='emit_plot')
    for name, points in series.items():
        if not points:
            raise ContractError(f"emit_plot: series {name!r} has no points")

    stem = Path(path)
    csv_path = write_series_csv(series, stem.with_suffix('.csv'))
    svg_path = write_series_svg(series, stem.with_suffix('.svg'), title, xlabel, ylabel, step)
    logger.info(f"Wrote plot {svg_path} ({len(series)} series)")
    return csv_path, svg_path
