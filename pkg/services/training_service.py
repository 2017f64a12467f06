"""
Training Service

The five-stage recipe: monolingual base training, adapter training on
monolingual and pseudo-monolingual text, supervised fine-tuning on parallel
prompts and preference optimization. Owns the freeze contract, the stage
order rule and training-state checkpoints.
"""

import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel

from autodiff import backward, no_grad, zero_grad
from config.constants import REFERENCE_METHODS, LossMethod, Stage
from config.schemas import LossConfig, StageConfig
from config.settings import settings
from model.adapters import attach, budget_rank, init_adapter, route_pair
from model.groups import GroupMap, load_groups_file
from model.policy import DEFAULT_PROMPT, PolicyModel, prompt_ids
from services.corpus_service import sample_monolingual
from services.loss_service import batch_loss, score_pair, sft_nll
from services.optimizer_service import Moments, collect_grads, optimizer_step, warmup_lr
from storage.checkpoints import (
    adapter_from_parts,
    adapter_header,
    adapter_tensors,
    load_model,
    model_from_parts,
    model_header,
    read_bundle,
    write_bundle,
)
from storage.models import MonoRecord, ParallelPair, PreferenceTriple
from storage.records import read_records
from utils.errors import (
    AdapterStateError,
    ConfigurationError,
    DataError,
    FrozenTensorError,
    GroupLookupError,
    RoutingError,
    SequencingError,
)
from utils.helpers import mean_or_zero, tensor_checksum, tokens_to_steps
from utils.logging_config import log_stage_action

logger = logging.getLogger(__name__)

MONO_STAGES = (Stage.PT1_MONO_BASE, Stage.PT2_MONO_ADAPTERS, Stage.PT3_PSEUDO_MONO)

STAGE_RECORD_KIND = {
    Stage.PT1_MONO_BASE: MonoRecord,
    Stage.PT2_MONO_ADAPTERS: MonoRecord,
    Stage.PT3_PSEUDO_MONO: MonoRecord,
    Stage.POST1_SFT: ParallelPair,
    Stage.POST2_PREFERENCE: PreferenceTriple,
}


class StageRun(BaseModel):
    """What one run_stage call did."""

    stage: Stage
    group: Optional[int] = None
    method: LossMethod
    steps: int
    losses: List[float]
    # Mean log-likelihood of the preferred translations per step (preference stage only)
    chosen_logp: List[float] = []
    base_checksum: Optional[str] = None


@dataclass
class TrainState:
    """Model, optimizer moments, step counter, RNG and stage history of one training run."""

    model: PolicyModel
    rng: np.random.Generator
    moments: Dict[str, Moments] = field(default_factory=dict)
    step: int = 0
    runs: List[StageRun] = field(default_factory=list)

    @classmethod
    def fresh(cls, model: PolicyModel, seed: int) -> "TrainState":
        return cls(model=model, rng=np.random.default_rng(seed))

    @property
    def adapters(self):
        return self.model.adapters

    @property
    def stage_history(self) -> List[Stage]:
        return [run.stage for run in self.runs]


# ==================== CONTRACTS ====================

def check_stage_order(state: TrainState, cfg: StageConfig):
    """
    A stage may repeat the previous one or advance by exactly one.

    A fresh state may start anywhere (the base can come from a checkpoint).
    Going back or skipping ahead needs allow_out_of_order.
    """
    if not state.runs or cfg.allow_out_of_order:
        return
    previous = state.runs[-1].stage
    if cfg.stage.index not in (previous.index, previous.index + 1):
        raise SequencingError.from_key('stage_order', requested=cfg.stage.value, previous=previous.value)


def base_checksum(model: PolicyModel) -> str:
    return tensor_checksum({name: t.data for name, t in model.params.items()})


def _adapter_parameters(model: PolicyModel, group: int) -> Dict[str, object]:
    prefix = f"adapters.{group}."
    return {name: t for name, t in model.trainable_parameters().items() if name.startswith(prefix)}


def prepare_trainable(state: TrainState, cfg: StageConfig) -> Dict[str, object]:
    """
    Set freeze flags, create the scoped adapter if needed and return the
    tensors this stage may update. Moments of other tensors are discarded.
    """
    model = state.model
    if cfg.stage == Stage.PT1_MONO_BASE:
        if model.adapters:
            raise AdapterStateError(
                f"{cfg.stage.value} trains the base; detach adapters {sorted(model.adapters)} first")
        model.unfreeze()
        trainable = dict(model.params)
    else:
        model.freeze()
        if cfg.group not in model.adapters:
            rank = cfg.adapter_rank or budget_rank(model)
            attach(model, init_adapter(model, cfg.group, model.linear_names(), rank=rank, seed=cfg.seed))
            log_stage_action(logger, cfg.stage.value, "adapter_created", f"group {cfg.group}, rank {rank}")
        trainable = _adapter_parameters(model, cfg.group)

    for name in list(state.moments):
        if name not in trainable:
            del state.moments[name]
    return trainable


def reference_snapshot(model: PolicyModel, group: Optional[int]) -> PolicyModel:
    """Frozen copy of the base plus the scoped adapter, taken before the stage starts."""
    reference = model.copy()
    if group is not None and group in model.adapters:
        attach(reference, copy.deepcopy(model.adapters[group]))
    reference.freeze()
    for adapter in reference.adapters.values():
        for tensor in adapter.parameters().values():
            tensor.requires_grad = False
    return reference


# ==================== DATA ====================

def load_stage_records(cfg: StageConfig) -> list:
    if not cfg.data:
        raise ConfigurationError(f"stage {cfg.stage.value} needs at least one data source")
    records = []
    for source in cfg.data:
        records.extend(read_records(settings.resolve(source)))
    return records


def _check_kind(stage: Stage, records: Sequence) -> None:
    kind = STAGE_RECORD_KIND[stage]
    for index, record in enumerate(records):
        if not isinstance(record, kind):
            raise DataError(
                f"stage {stage.value} trains on {kind.__name__} records; record {index} is {type(record).__name__}")


def _routes_to(src_lang: str, tgt_lang: str, groups: GroupMap, group: int) -> bool:
    try:
        return route_pair(src_lang, tgt_lang, groups) == group
    except RoutingError:
        return False


def _fits(model: PolicyModel, prompt: str, target_len: int) -> bool:
    return len(prompt_ids(model, prompt)) + target_len <= model.max_len


@dataclass
class StagePools:
    """
    Training items of one stage.

    Monolingual stages keep their per-language corpora and, once run_stage
    has sampled them against the token budget, consume that stream in order.
    Other stages draw items uniformly.
    """

    items: list
    tokens_per_item: float
    corpora: Optional[Dict[str, List[MonoRecord]]] = None
    stream: list = field(default_factory=list)
    cursor: int = 0

    def fill_stream(self, vocab, budget: int, seed: int) -> int:
        sample = sample_monolingual(self.corpora, budget, seed)
        self.stream = [("", vocab.encode_target(record.text)) for record in sample]
        self.cursor = 0
        return len(self.stream)

    def draw(self, rng: np.random.Generator, size: int) -> list:
        if self.stream:
            batch = [self.stream[(self.cursor + i) % len(self.stream)] for i in range(size)]
            self.cursor += size
            return batch
        return [self.items[int(rng.integers(len(self.items)))] for _ in range(size)]


def build_pools(cfg: StageConfig, model: PolicyModel, records: Sequence,
                groups: Optional[GroupMap]) -> StagePools:
    """
    Turn stage records into training items.

    Monolingual stages keep per-language corpora for sample_monolingual;
    PT2/PT3 keep only languages of the scoped group. POST1 adds the reverse of every pair
    (uniform direction mixing). POST2 keeps triples routed to the group.
    """
    _check_kind(cfg.stage, records)
    vocab = model.vocab
    skipped = 0

    corpora = None
    if cfg.stage in MONO_STAGES:
        members = None if cfg.stage == Stage.PT1_MONO_BASE else set(groups.members(cfg.group))
        corpora = {}
        for record in records:
            if members is not None and record.lang not in members:
                continue
            corpora.setdefault(record.lang, []).append(
                MonoRecord(lang=record.lang, text=record.text[:model.max_len - 2]))
        items = [("", vocab.encode_target(r.text)) for lang in sorted(corpora) for r in corpora[lang]]

    elif cfg.stage == Stage.POST1_SFT:
        items = []
        seen = set()
        for pair in records:
            for src_lang, tgt_lang, src, tgt in ((pair.src_lang, pair.tgt_lang, pair.src, pair.tgt),
                                                 (pair.tgt_lang, pair.src_lang, pair.tgt, pair.src)):
                key = (src_lang, tgt_lang, src, tgt)
                if key in seen or not _routes_to(src_lang, tgt_lang, groups, cfg.group):
                    continue
                seen.add(key)
                prompt = DEFAULT_PROMPT.render(src_lang, tgt_lang, src)
                target = vocab.encode_target(tgt)
                if not _fits(model, prompt, len(target)):
                    skipped += 1
                    continue
                items.append((prompt, target))

    else:
        items = []
        for triple in records:
            if not _routes_to(triple.src_lang, triple.tgt_lang, groups, cfg.group):
                continue
            prompt = DEFAULT_PROMPT.render(triple.src_lang, triple.tgt_lang, triple.x)
            longest = max(len(triple.y_w), len(triple.y_l)) + 1
            if not _fits(model, prompt, longest):
                skipped += 1
                continue
            items.append(triple)

    if skipped:
        logger.warning(f"⚠️ {cfg.stage.value}: skipped {skipped} items longer than the model capacity")
    if not items:
        raise DataError(f"stage {cfg.stage.value}: no usable records for group {cfg.group}")
    if cfg.stage == Stage.POST2_PREFERENCE:
        tokens = sum(len(t.y_w) + len(t.y_l) + 2 for t in items)
    else:
        tokens = sum(len(target) for _, target in items)
    return StagePools(items, tokens / len(items), corpora=corpora)


# ==================== RUN ====================

def _stage_loss(cfg: StageConfig, loss_config: LossConfig, model: PolicyModel, batch: list):
    if cfg.stage == Stage.POST2_PREFERENCE:
        result = batch_loss(loss_config, model, batch, group=cfg.group)
        return result.loss, result.parts
    return sft_nll(model, batch, group=cfg.group), {}


def _chosen_logp(model: PolicyModel, batch: Sequence[PreferenceTriple], group: Optional[int]) -> float:
    with no_grad():
        return mean_or_zero([score_pair(model, t, group=group)[0].total.item() for t in batch])


def run_stage(cfg: StageConfig, state: TrainState, records: Optional[Sequence] = None,
              groups: Optional[GroupMap] = None) -> TrainState:
    """
    Run one stage of the recipe on `state`.

    Args:
        cfg: Stage configuration
        state: Training state (updated in place and returned)
        records: In-memory records; read from cfg.data when omitted
        groups: Language-group registry; XALMA_LAB_GROUPS when omitted

    Returns:
        The same state, with a new StageRun appended
    """
    check_stage_order(state, cfg)
    if cfg.stage != Stage.PT1_MONO_BASE:
        groups = groups or load_groups_file(settings.GROUPS_CONFIG)
        if cfg.group not in groups.group_ids:
            raise GroupLookupError(f"unknown group id {cfg.group}")
    if records is None:
        records = load_stage_records(cfg)

    model = state.model
    trainable = prepare_trainable(state, cfg)
    pools = build_pools(cfg, model, records, groups)
    batch_size = cfg.optimizer.batch_size
    steps = cfg.steps or tokens_to_steps(cfg.tokens, batch_size, pools.tokens_per_item)
    if pools.corpora is not None:
        budget = cfg.tokens or max(math.ceil(steps * batch_size * pools.tokens_per_item), 1)
        pools.fill_stream(model.vocab, budget, seed=int(state.rng.integers(2 ** 31)))

    loss_config = cfg.loss
    if loss_config.method in REFERENCE_METHODS and loss_config.reference_model is None:
        loss_config = loss_config.model_copy(update={'reference_model': reference_snapshot(model, cfg.group)})

    checksum = base_checksum(model) if model.frozen else None
    frozen = model.params if model.frozen else None
    log_stage_action(logger, cfg.stage.value, "start",
                     f"group={cfg.group} steps={steps} loss={loss_config.method.value} "
                     f"trainable={sum(t.size for t in trainable.values())}")

    losses: List[float] = []
    chosen: List[float] = []
    params = list(trainable.values())
    for step in range(steps):
        batch = pools.draw(state.rng, batch_size)
        zero_grad(params)
        loss, parts = _stage_loss(cfg, loss_config, model, batch)
        backward(loss)
        optimizer_step(trainable, state.moments, collect_grads(trainable), cfg.optimizer,
                       lr=warmup_lr(cfg.optimizer, step, steps), frozen=frozen)
        losses.append(loss.item())
        if cfg.stage == Stage.POST2_PREFERENCE:
            chosen.append(-parts['bc'] if 'bc' in parts else _chosen_logp(model, batch, cfg.group))
        state.step += 1
        logger.debug(f"{cfg.stage.value} step {step + 1}/{steps}: loss {losses[-1]:.6f}")
    zero_grad(params)

    if checksum is not None:
        after = base_checksum(model)
        if after != checksum:
            raise FrozenTensorError.from_key('frozen_changed', stage=cfg.stage.value,
                                             before=checksum[:12], after=after[:12])

    state.runs.append(StageRun(stage=cfg.stage, group=cfg.group, method=loss_config.method, steps=steps,
                               losses=losses, chosen_logp=chosen, base_checksum=checksum))
    log_stage_action(logger, cfg.stage.value, "done",
                     f"loss {losses[0]:.4f} -> {losses[-1]:.4f} over {steps} steps")
    return state


def run_recipe(configs: Sequence[StageConfig], state: TrainState,
               records: Sequence[Optional[Sequence]] = (), groups: Optional[GroupMap] = None) -> TrainState:
    """Run stages in order; records[i] (when given) feeds configs[i]."""
    for index, cfg in enumerate(configs):
        stage_records = records[index] if index < len(records) else None
        run_stage(cfg, state, stage_records, groups)
    return state


# ==================== CHECKPOINTS ====================

def checkpoint(state: TrainState, path: Union[str, Path]) -> Path:
    """Model, adapters, optimizer moments, step counter, RNG and history in one file."""
    model = state.model
    tensors: Dict[str, np.ndarray] = {f"base.{name}": t.data for name, t in model.params.items()}
    for group_id in sorted(model.adapters):
        tensors.update(adapter_tensors(model.adapters[group_id], prefix=f"adapters.{group_id}."))
    for name in sorted(state.moments):
        tensors[f"m.{name}"] = state.moments[name].m
        tensors[f"v.{name}"] = state.moments[name].v

    header = {
        'kind': 'train_state',
        'model': model_header(model),
        'adapters': [adapter_header(model.adapters[g]) for g in sorted(model.adapters)],
        'step': state.step,
        'moment_steps': {name: state.moments[name].t for name in sorted(state.moments)},
        'rng': state.rng.bit_generator.state,
        'runs': [run.model_dump(mode='json') for run in state.runs],
    }
    return write_bundle(path, header, tensors)


def restore(path: Union[str, Path]) -> TrainState:
    header, tensors = read_bundle(path, 'train_state')
    base = {name[len('base.'):]: array for name, array in tensors.items() if name.startswith('base.')}
    model = model_from_parts(header['model'], base)
    for adapter_meta in header['adapters']:
        adapter = adapter_from_parts(adapter_meta, tensors, prefix=f"adapters.{adapter_meta['group_id']}.")
        attach(model, adapter)

    moments = {
        name: Moments(tensors[f"m.{name}"], tensors[f"v.{name}"], int(t))
        for name, t in header['moment_steps'].items()
    }
    rng = np.random.default_rng()
    rng.bit_generator.state = header['rng']
    runs = [StageRun.model_validate(run) for run in header['runs']]
    logger.info(f"Restored training state from {path} (step {header['step']}, {len(runs)} stage runs)")
    return TrainState(model=model, rng=rng, moments=moments, step=int(header['step']), runs=runs)



def load_policy(path: Union[str, Path]) -> PolicyModel:
    """A policy from either a model checkpoint or a training-state checkpoint (adapters attached)."""
    header, _ = read_bundle(path)
    if header.get('kind') == 'train_state':
        return restore(path).model
    if header.get('kind') == 'model':
        return load_model(path)
    raise ConfigurationError(f"{path}: expected a model or train_state checkpoint, found {header.get('kind')!r}")
