"""Training command handlers."""

import logging
from typing import Iterable, List, Optional

from config.constants import Stage
from config.schemas import ModelConfig, StageConfig
from config.settings import settings
from model.groups import GroupMap, load_groups_file
from model.policy import PolicyModel
from model.vocab import Vocab
from services.training_service import TrainState, checkpoint, load_stage_records, restore, run_stage
from storage.checkpoints import save_adapter, save_model
from storage.models import MonoRecord, ParallelPair
from utils.decorators import handles_lab_errors
from utils.formatters import format_stage_summary
from utils.logging_config import log_command
from utils.validators import apply_overrides, read_config_values

logger = logging.getLogger(__name__)


def load_groups(path: Optional[str]) -> GroupMap:
    """Group registry from a flag, else XALMA_LAB_GROUPS."""
    return load_groups_file(path or settings.GROUPS_CONFIG)


def record_texts(records: Iterable) -> List[str]:
    texts = []
    for record in records:
        if isinstance(record, MonoRecord):
            texts.append(record.text)
        elif isinstance(record, ParallelPair):
            texts.extend((record.src, record.tgt))
        else:
            texts.extend((record.x, record.y_w, record.y_l))
    return texts


def stage_config_from_args(args) -> tuple:
    """
    StageConfig and ModelConfig from --config plus flag overrides.

    `model.*` keys in the file size a fresh model; everything else is the stage.
    """
    values = read_config_values(settings.resolve(args.config) if args.config else None)
    model_values = values.pop('model', {})
    overrides = {
        'stage': Stage.from_number(args.stage).value,
        'seed': args.seed,
        'group': args.group,
        'steps': args.steps,
        'tokens': args.tokens,
        'data': args.data.split(',') if args.data else None,
        'allow_out_of_order': True if args.allow_out_of_order else None,
    }
    cfg = StageConfig.model_validate(apply_overrides(values, overrides))
    return cfg, ModelConfig.model_validate(model_values)


@handles_lab_errors
def train_command(args) -> int:
    """
    Run one stage and write the training-state checkpoint.

    Args:
        args: Parsed `train` flags
    """
    cfg, model_config = stage_config_from_args(args)
    log_command(logger, 'train', f"stage={cfg.stage.value} group={cfg.group} seed={cfg.seed}")

    groups = load_groups(args.groups) if cfg.stage != Stage.PT1_MONO_BASE else None
    records = load_stage_records(cfg)
    if args.resume:
        state = restore(settings.resolve(args.resume))
    else:
        vocab = Vocab.from_texts(record_texts(records))
        state = TrainState.fresh(PolicyModel(model_config, vocab, seed=cfg.seed), cfg.seed)

    run_stage(cfg, state, records=records, groups=groups)
    out = checkpoint(state, settings.resolve(args.out))

    if args.export_model:
        save_model(state.model, settings.resolve(args.export_model))
    if args.export_adapters:
        directory = settings.resolve(args.export_adapters)
        for group_id, adapter in sorted(state.model.adapters.items()):
            save_adapter(adapter, directory / f"adapter_group{group_id}.xlab")

    print(format_stage_summary(state.runs[-1]))
    print(f"checkpoint: {out}")
    return 0
