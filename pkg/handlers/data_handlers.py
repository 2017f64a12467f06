"""Data-construction command handlers."""

import logging

from config.constants import DecodeMode
from config.settings import settings
from handlers.training_handlers import load_groups
from services.corpus_service import build_pseudo_mono
from services.editor_service import IdentityEditor, ReferenceGuidedEditor
from services.preference_service import build_preference
from services.training_service import load_policy
from storage.models import ParallelPair
from storage.records import read_typed, write_records
from utils.decorators import handles_lab_errors
from utils.errors import ConfigurationError, UsageError
from utils.formatters import format_preference_summary
from utils.logging_config import log_command

logger = logging.getLogger(__name__)

EDITORS = ('none', 'identity', 'reference')


def make_editor(name: str, pairs):
    if name == 'none':
        return None
    if name == 'identity':
        return IdentityEditor()
    if name == 'reference':
        return ReferenceGuidedEditor({pair.src: pair.tgt for pair in pairs})
    raise ConfigurationError(f"unknown editor {name!r} (expected one of {', '.join(EDITORS)})")


@handles_lab_errors
def build_prefdata_command(args) -> int:
    """Generate y_model with a frozen policy and write D1 + D2 triples."""
    if args.workers is not None and args.workers < 1:
        raise UsageError(f"--workers must be >= 1, got {args.workers}")
    log_command(logger, 'build-prefdata', f"in={args.input} seed={args.seed} editor={args.editor}")

    pairs = read_typed(settings.resolve(args.input), ParallelPair)
    groups = load_groups(args.groups)
    model = load_policy(settings.resolve(args.model))
    model.freeze()
    dataset = build_preference(pairs, model, editor=make_editor(args.editor, pairs), seed=args.seed,
                               groups=groups, workers=args.workers, mode=DecodeMode(args.mode),
                               temperature=args.temperature)
    out = write_records(settings.resolve(args.out), dataset.records)
    print(format_preference_summary(dataset, str(out)))
    return 0


@handles_lab_errors
def build_pseudomono_command(args) -> int:
    """Join parallel pairs into pseudo-monolingual records with a seeded order coin."""
    log_command(logger, 'build-pseudomono', f"in={args.input} seed={args.seed}")
    pairs = read_typed(settings.resolve(args.input), ParallelPair)
    records = build_pseudo_mono(pairs, args.seed)
    out = write_records(settings.resolve(args.out), records)
    print(f"pseudo-monolingual records: {len(records)} -> {out}")
    return 0
