"""
X-ALMA Lab - Main Entry Point

One command per process:
  train             run one stage of the five-stage recipe
  build-prefdata    build D1 + D2 preference triples with a frozen policy
  build-pseudomono  join parallel pairs into pseudo-monolingual text
  eval              per-direction lexical match and reference likelihood
  merge-adapter     fold a group's adapter into base weights
  plot-cdf          reward-difference CDFs as CSV + SVG
  compare-losses    preference-loss comparison (or, with --ablate, a stage
                    ablation) on the synthetic cipher task
"""

import argparse
import logging
import sys
from typing import Callable, Dict, Optional, Sequence

from config.constants import EXIT_CODES, STAGE_ORDER, DecodeMode
from config.settings import settings, validate_settings
from handlers.adapter_handlers import merge_adapter_command
from handlers.data_handlers import EDITORS, build_prefdata_command, build_pseudomono_command
from handlers.eval_handlers import compare_losses_command, eval_command, plot_cdf_command
from handlers.training_handlers import train_command
from utils.decorators import report_error
from utils.errors import LabError
from utils.logging_config import setup_logging

logger = logging.getLogger(__name__)

HANDLERS: Dict[str, Callable] = {
    'train': train_command,
    'build-prefdata': build_prefdata_command,
    'build-pseudomono': build_pseudomono_command,
    'eval': eval_command,
    'merge-adapter': merge_adapter_command,
    'plot-cdf': plot_cdf_command,
    'compare-losses': compare_losses_command,
}


def _add_groups_flag(parser: argparse.ArgumentParser):
    parser.add_argument('--groups', default=None,
                        help='Language-group registry file (default: XALMA_LAB_GROUPS)')


def build_parser() -> argparse.ArgumentParser:
    """Argument parser for every command; relative paths resolve against XALMA_LAB_DATA_DIR."""
    parser = argparse.ArgumentParser(prog='xalma-lab', description='Desk-scale multilingual preference lab')
    sub = parser.add_subparsers(dest='command', metavar='command', required=True)

    # ==================== TRAIN ====================
    stage_help = ', '.join(f"{i + 1}={stage.value}" for i, stage in enumerate(STAGE_ORDER))
    train = sub.add_parser('train', help='Run one training stage')
    train.add_argument('--stage', type=int, required=True, choices=range(1, len(STAGE_ORDER) + 1),
                       metavar='N', help=f'Stage number ({stage_help})')
    train.add_argument('--config', default=None, help='Stage config file (key = value lines)')
    train.add_argument('--seed', type=int, required=True, help='Seed for init, batching and adapters')
    train.add_argument('--group', type=int, default=None, help='Language group the stage is scoped to')
    train.add_argument('--data', default=None, help='Comma-separated record files')
    train.add_argument('--steps', type=int, default=None, help='Step budget')
    train.add_argument('--tokens', type=int, default=None, help='Token budget, converted to steps')
    train.add_argument('--resume', default=None, help='Training-state checkpoint to continue from')
    train.add_argument('--out', required=True, help='Training-state checkpoint to write')
    train.add_argument('--export-model', default=None, help='Also write the base weights as a model checkpoint')
    train.add_argument('--export-adapters', default=None, help='Also write each adapter into this directory')
    train.add_argument('--allow-out-of-order', action='store_true', help='Skip the stage order check')
    _add_groups_flag(train)

    # ==================== DATA ====================
    prefdata = sub.add_parser('build-prefdata', help='Build preference triples')
    prefdata.add_argument('--in', dest='input', required=True, help='Parallel pairs file')
    prefdata.add_argument('--model', required=True, help='Model or training-state checkpoint')
    prefdata.add_argument('--out', required=True, help='Preference triples file to write')
    prefdata.add_argument('--seed', type=int, required=True, help='Sampling seed')
    prefdata.add_argument('--editor', choices=EDITORS, default='none', help='Post-editor for D2')
    prefdata.add_argument('--mode', choices=[m.value for m in DecodeMode], default=DecodeMode.GREEDY.value,
                          help='Decoding mode for the model translation')
    prefdata.add_argument('--temperature', type=float, default=1.0, help='Sampling temperature with --mode temperature')
    prefdata.add_argument('--workers', type=int, default=None, help='Generation fan-out (default: XALMA_LAB_WORKERS)')
    _add_groups_flag(prefdata)

    pseudo = sub.add_parser('build-pseudomono', help='Build pseudo-monolingual records')
    pseudo.add_argument('--in', dest='input', required=True, help='Parallel pairs file')
    pseudo.add_argument('--out', required=True, help='Monolingual records file to write')
    pseudo.add_argument('--seed', type=int, required=True, help='Seed for the order coin')

    # ==================== EVAL ====================
    evaluate = sub.add_parser('eval', help='Evaluate a policy on parallel pairs')
    evaluate.add_argument('--model', required=True, help='Model or training-state checkpoint')
    evaluate.add_argument('--in', dest='input', required=True, help='Held-out parallel pairs file')
    evaluate.add_argument('--group', type=int, default=None, help='Only pairs routed to this group')
    evaluate.add_argument('--unit', choices=['word', 'char'], default='word', help='BLEU token unit')
    evaluate.add_argument('--max-n', type=int, default=4, help='Highest BLEU n-gram order')
    evaluate.add_argument('--examples', type=int, default=0, help='Show the first N translations per direction')
    evaluate.add_argument('--scorer', default=None, help='Frozen scorer checkpoint for the proxy reward')
    evaluate.add_argument('--out', default=None, help='Report file (default: stdout)')
    _add_groups_flag(evaluate)

    merge = sub.add_parser('merge-adapter', help='Merge an adapter into base weights')
    merge.add_argument('--group', type=int, required=True, help='Group the adapter belongs to')
    merge.add_argument('--in', dest='input', required=True, help='Base model checkpoint')
    merge.add_argument('--adapter', required=True, help='Adapter checkpoint')
    merge.add_argument('--out', required=True, help='Merged model checkpoint to write')
    merge.add_argument('--unmerge', action='store_true',
                       help='Subtract an adapter that was merged into --in before')

    cdf = sub.add_parser('plot-cdf', help='Plot reward-difference CDFs')
    cdf.add_argument('--in', dest='input', required=True, help='Comma-separated preference files, one series each')
    cdf.add_argument('--model', required=True, help='Scoring model or training-state checkpoint')
    cdf.add_argument('--out', required=True, help='Output directory')
    cdf.add_argument('--group', type=int, default=None, help='Only triples routed to this group')
    _add_groups_flag(cdf)

    compare = sub.add_parser('compare-losses', help='Compare preference losses on the toy task')
    compare.add_argument('--methods', default=None, help='Comma-separated losses, e.g. arpo,cpo,dpo')
    compare.add_argument('--ablate', action='store_true',
                         help='Compare recipe variants (adapter pre-training stages) instead of losses')
    compare.add_argument('--variants', default=None,
                         help='Comma-separated ablation variants (default: all); needs --ablate')
    compare.add_argument('--config', default=None, help='Comparison config file (key = value lines)')
    compare.add_argument('--seed', type=int, required=True, help='Seed for data, init and sampling')
    compare.add_argument('--out', default=None, help='Report file (default: stdout)')
    _add_groups_flag(compare)

    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse, validate settings and dispatch one command.

    Returns:
        0 on success, 1 runtime failure, 2 usage error, 3 config error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CODES['ok'] if e.code in (0, None) else EXIT_CODES['usage']

    try:
        validate_settings()
    except LabError as e:
        report_error(e.error_class, e.message)
        return e.exit_code
    setup_logging(settings.LOG_LEVEL, settings.LOG_FILE)

    return HANDLERS[args.command](args)


def main():
    sys.exit(cli_main())


if __name__ == '__main__':
    main()
