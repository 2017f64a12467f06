"""Adapter management command handlers."""

import logging

from config.settings import settings
from model.adapters import LoadingStrategy, load_strategy, unmerge
from storage.checkpoints import load_adapter, load_model, save_model
from utils.decorators import handles_lab_errors
from utils.errors import AdapterStateError
from utils.logging_config import log_command

logger = logging.getLogger(__name__)


@handles_lab_errors
def merge_adapter_command(args) -> int:
    """Fold one group's adapter into a base model checkpoint, or take it back out with --unmerge."""
    action = 'unmerge' if args.unmerge else 'merge'
    log_command(logger, 'merge-adapter', f"{action} group={args.group} in={args.input} adapter={args.adapter}")
    model = load_model(settings.resolve(args.input))
    adapter = load_adapter(settings.resolve(args.adapter))
    if adapter.group_id != args.group:
        raise AdapterStateError(f"adapter {args.adapter} belongs to group {adapter.group_id}, not {args.group}")

    if args.unmerge:
        result = unmerge(model, adapter)
    else:
        result = load_strategy(model, LoadingStrategy.merged_model(args.group), {args.group: adapter})
    out = save_model(result, settings.resolve(args.out))
    print(f"{action}d group {args.group} adapter {'out of' if args.unmerge else 'into'} {out}")
    return 0
