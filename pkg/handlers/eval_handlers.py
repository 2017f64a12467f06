"""Evaluation, plotting and comparison command handlers."""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from config.settings import settings
from handlers.training_handlers import load_groups
from model.adapters import route_pair
from model.groups import GroupMap
from services.comparison_service import (
    ComparisonConfig,
    parse_methods,
    parse_variants,
    run_ablation,
    run_comparison,
)
from services.eval_service import evaluate, grouped_by_direction, proxy_reward
from services.loss_service import reward_diff_cdf, reward_differences
from services.plot_service import emit_plot
from services.training_service import load_policy
from storage.models import ParallelPair, PreferenceTriple
from storage.records import atomic_writer, read_typed
from utils.decorators import handles_lab_errors
from utils.errors import DataError, RoutingError, UsageError
from utils.formatters import format_ablation_report, format_comparison_report, format_eval_result, format_example
from utils.logging_config import log_command
from utils.validators import load_config_file

logger = logging.getLogger(__name__)


def _in_group(src_lang: str, tgt_lang: str, groups: GroupMap, group: Optional[int]) -> bool:
    if group is None:
        return True
    try:
        return route_pair(src_lang, tgt_lang, groups) == group
    except RoutingError:
        return False


def write_report(text: str, out: Optional[str]):
    """Report to a file when --out is given, stdout otherwise."""
    if not out:
        print(text, end='' if text.endswith('\n') else '\n')
        return
    with atomic_writer(settings.resolve(out)) as f:
        f.write(text if text.endswith('\n') else text + '\n')
    print(f"report: {settings.resolve(out)}")


@handles_lab_errors
def eval_command(args) -> int:
    """Greedy-translate held-out pairs and report per-direction scores."""
    log_command(logger, 'eval', f"model={args.model} in={args.input} unit={args.unit}")
    groups = load_groups(args.groups)
    pairs = [p for p in read_typed(settings.resolve(args.input), ParallelPair)
             if _in_group(p.src_lang, p.tgt_lang, groups, args.group)]
    if not pairs:
        raise DataError(f"{args.input}: no pairs for group {args.group}")

    model = load_policy(settings.resolve(args.model))
    model.freeze()
    result = evaluate(model, pairs, groups, unit=args.unit, max_n=args.max_n)
    text = format_eval_result(result)
    by_direction = grouped_by_direction(pairs)
    if args.scorer:
        scorer = load_policy(settings.resolve(args.scorer))
        scorer.freeze()
        ordered: List[ParallelPair] = []
        hypotheses: List[str] = []
        for key, direction_pairs in by_direction.items():
            ordered.extend(direction_pairs)
            hypotheses.extend(result.hypotheses[key])
        text += f"\nproxy reward: {proxy_reward(scorer, ordered, hypotheses, groups):.4f}"
    if args.examples > 0:
        blocks = []
        for key, direction_pairs in by_direction.items():
            for pair, hypothesis in list(zip(direction_pairs, result.hypotheses[key]))[:args.examples]:
                blocks.append(f"{key}\n" + format_example(pair.src, hypothesis, pair.tgt))
        text += "\n\nExamples\n--------\n" + "\n".join(blocks)
    write_report(text, args.out)
    return 0


def _series_name(path: str, used: Sequence[str]) -> str:
    name = Path(path).stem
    return name if name not in used else f"{name}_{len(used)}"


@handles_lab_errors
def plot_cdf_command(args) -> int:
    """Score preference files, build their reward-difference CDFs and plot them."""
    log_command(logger, 'plot-cdf', f"in={args.input} model={args.model}")
    sources = [s for s in args.input.split(',') if s.strip()]
    if not sources:
        raise UsageError("--in needs at least one preference file")
    groups = load_groups(args.groups) if args.group is not None else None
    model = load_policy(settings.resolve(args.model))
    model.freeze()

    series: Dict[str, list] = {}
    for source in sources:
        triples = read_typed(settings.resolve(source.strip()), PreferenceTriple)
        if groups is not None:
            triples = [t for t in triples if _in_group(t.src_lang, t.tgt_lang, groups, args.group)]
        if not triples:
            raise DataError(f"{source}: no preference triples to score")
        diffs = reward_differences(model, triples, group=args.group if model.adapters else None)
        series[_series_name(source, list(series))] = reward_diff_cdf(diffs)

    out_dir = settings.resolve(args.out)
    csv_path, svg_path = emit_plot(series, out_dir / 'reward_diff_cdf', title='Reward-difference CDF',
                                   xlabel='log p(y_w|x) - log p(y_l|x)', ylabel='cumulative fraction', step=True)
    print(f"data: {csv_path}")
    print(f"plot: {svg_path}")
    return 0


@handles_lab_errors
def compare_losses_command(args) -> int:
    """
    Train each preference loss from one SFT state on the toy task and report.

    With --ablate, compare recipe variants (which adapter pre-training
    stages run before SFT) instead of losses.
    """
    config = load_config_file(settings.resolve(args.config) if args.config else None, ComparisonConfig)
    groups = load_groups(args.groups) if args.groups else None
    if args.ablate:
        variants = parse_variants(args.variants)
        log_command(logger, 'compare-losses', f"ablate variants={variants} seed={args.seed}")
        report = run_ablation(args.seed, config, groups, variants)
        write_report(format_ablation_report(report), args.out)
        return 0

    if args.methods is None:
        raise UsageError("compare-losses needs --methods unless --ablate is given")
    methods = parse_methods(args.methods)
    log_command(logger, 'compare-losses', f"methods={[m.value for m in methods]} seed={args.seed}")
    report = run_comparison(methods, args.seed, config, groups)
    write_report(format_comparison_report(report), args.out)
    return 0
