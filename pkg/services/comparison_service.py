"""
Comparison Service

Desk experiment behind `compare-losses`: pre-train a tiny base on
pseudo-monolingual cipher text, fine-tune per-group adapters to a strong
SFT starting point, build near-duplicate preference data and continue from
that same starting point with each preference loss. Every method is then
judged against the SFT evaluation for over-rejection.
"""

import copy
import logging
from typing import Dict, List, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, field_validator

from config.constants import PREFERENCE_METHODS, DecodeMode, LossMethod, Stage
from config.schemas import LossConfig, ModelConfig, OptimizerConfig, StageConfig
from config.settings import settings
from model.groups import GroupMap, group_of, load_groups_file
from model.policy import PolicyModel
from model.vocab import Vocab
from services.corpus_service import build_pseudo_mono, pair_language
from services.eval_service import (
    EvalResult,
    OverRejectionReport,
    evaluate,
    grouped_by_direction,
    over_rejection_report,
    proxy_reward,
)
from services.preference_service import build_preference
from services.synthetic_service import make_lexicon, make_monolingual, near_duplicate_triples, toy_task
from services.training_service import TrainState, reference_snapshot, run_recipe, run_stage
from storage.models import ParallelPair, PreferenceTriple
from utils.errors import ConfigurationError
from utils.logging_config import log_stage_action

logger = logging.getLogger(__name__)


ADAPTER_STAGES = (Stage.PT2_MONO_ADAPTERS, Stage.PT3_PSEUDO_MONO)

# Recipe variants of the stage ablation: adapter pre-training run between PT1 and POST1.
ABLATION_VARIANTS: Dict[str, List[Stage]] = {
    'full': [Stage.PT2_MONO_ADAPTERS, Stage.PT3_PSEUDO_MONO],
    'no_pt2': [Stage.PT3_PSEUDO_MONO],
    'no_pt3': [Stage.PT2_MONO_ADAPTERS],
    'sft_only': [],
    'pt3_then_pt2': [Stage.PT3_PSEUDO_MONO, Stage.PT2_MONO_ADAPTERS],
}


def parse_stage(token) -> Stage:
    """A Stage from its value or its short prefix ('pt2', 'PT3')."""
    if isinstance(token, Stage):
        return token
    text = str(token).strip()
    for stage in Stage:
        if text == stage.value or text.lower() == stage.value.split('_')[0].lower():
            return stage
    raise ValueError(f"unknown stage {text!r}")


class ComparisonConfig(BaseModel):
    """Knobs of the desk comparison; every field has a working default."""

    model_config = ConfigDict(extra='forbid')

    langs: List[str] = Field(default_factory=lambda: ['xc'])
    pairs: int = Field(96, ge=4)
    # Words per toy sentence; None draws 1 to 3.
    words_per_sentence: Optional[int] = Field(2, ge=1)
    near_duplicates: int = Field(32, ge=0)
    pretrain_steps: int = Field(600, ge=1)
    adapter_stages: List[Stage] = Field(default_factory=lambda: [Stage.PT3_PSEUDO_MONO])
    adapter_pretrain_steps: int = Field(200, ge=1)
    sft_steps: int = Field(1500, ge=1)
    preference_steps: int = Field(300, ge=1)
    adapter_rank: int = Field(8, ge=1)
    model: ModelConfig = Field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = Field(default_factory=lambda: OptimizerConfig(lr=5e-3))
    preference_optimizer: OptimizerConfig = Field(default_factory=lambda: OptimizerConfig(lr=1e-3))
    beta: float = Field(0.1, gt=0)
    eta: float = Field(1.5, gt=0)
    temperature: float = Field(1.0, gt=0)
    bleu_unit: str = 'char'

    @field_validator('bleu_unit')
    @classmethod
    def check_unit(cls, unit: str) -> str:
        if unit not in ('word', 'char'):
            raise ValueError(f"bleu_unit must be 'word' or 'char', got {unit!r}")
        return unit

    @field_validator('adapter_stages', mode='before')
    @classmethod
    def check_adapter_stages(cls, stages) -> List[Stage]:
        parsed = [parse_stage(stage) for stage in stages]
        for stage in parsed:
            if stage not in ADAPTER_STAGES:
                raise ValueError(f"{stage.value} is not an adapter pre-training stage")
        if len(set(parsed)) != len(parsed):
            raise ValueError("adapter_stages lists a stage twice")
        return parsed


class MethodOutcome(BaseModel):
    method: LossMethod
    evaluation: EvalResult
    proxy_reward: float
    final_loss: float
    likelihood_track: List[float]
    over_rejection: OverRejectionReport


class ComparisonReport(BaseModel):
    seed: int
    config: ComparisonConfig
    train_pairs: int
    held_out_pairs: int
    preference_records: int
    sft: EvalResult
    sft_proxy_reward: float
    outcomes: Dict[str, MethodOutcome]


class AblationRow(BaseModel):
    variant: str
    stages: List[Stage]
    evaluation: EvalResult


class AblationReport(BaseModel):
    seed: int
    config: ComparisonConfig
    train_pairs: int
    held_out_pairs: int
    rows: List[AblationRow]


def parse_methods(text: str) -> List[LossMethod]:
    """Comma-separated preference losses, order kept, duplicates removed."""
    methods = []
    for token in (t.strip().lower() for t in text.split(',')):
        if not token:
            continue
        try:
            method = LossMethod(token)
        except ValueError:
            raise ConfigurationError(f"unknown loss method {token!r}")
        if method not in PREFERENCE_METHODS:
            raise ConfigurationError(f"{token} is not a preference loss")
        if method not in methods:
            methods.append(method)
    if not methods:
        raise ConfigurationError("at least one preference method is required")
    return methods


def method_loss_config(method: LossMethod, config: ComparisonConfig) -> LossConfig:
    """Naive settings: no behavior-cloning term unless the loss carries one."""
    return LossConfig(method=method, beta=config.beta, eta=config.eta)


def _groups_for(langs: Sequence[str], groups: GroupMap) -> List[int]:
    return sorted({group_of(groups, lang) for lang in langs})


def _frozen_copy(state: TrainState) -> PolicyModel:
    reference = reference_snapshot(state.model, None)
    for group_id in sorted(state.model.adapters):
        reference.adapters[group_id] = copy.deepcopy(state.model.adapters[group_id])
        for tensor in reference.adapters[group_id].parameters().values():
            tensor.requires_grad = False
    return reference


def _proxy(scorer: PolicyModel, result: EvalResult, held_out: Sequence[ParallelPair],
           groups: GroupMap) -> float:
    pairs: List[ParallelPair] = []
    hypotheses: List[str] = []
    for key, direction_pairs in grouped_by_direction(held_out).items():
        pairs.extend(direction_pairs)
        hypotheses.extend(result.hypotheses[key])
    return proxy_reward(scorer, pairs, hypotheses, groups)


def _adapter_stage_records(stage: Stage, config: ComparisonConfig, group_pairs: Sequence[ParallelPair],
                           members: Sequence[str], seed: int, lexicon: Sequence[str]) -> list:
    if stage == Stage.PT3_PSEUDO_MONO:
        return build_pseudo_mono(group_pairs, seed + 7)
    langs = sorted(members)
    corpora = make_monolingual(langs, [config.pairs] * len(langs), seed + 11, lexicon,
                               words=config.words_per_sentence)
    return [record for lang in langs for record in corpora[lang]]


def build_sft_state(config: ComparisonConfig, train: Sequence[ParallelPair], seed: int,
                    groups: GroupMap) -> TrainState:
    """
    Base pre-training on pseudo-monolingual text, then per group the
    configured adapter pre-training stages followed by SFT.

    A stage that does not follow its predecessor in recipe order (a skipped
    or reordered adapter stage) runs with allow_out_of_order.
    """
    vocab = Vocab()
    state = TrainState.fresh(PolicyModel(config.model, vocab, seed=seed), seed)

    configs = [StageConfig(stage=Stage.PT1_MONO_BASE, steps=config.pretrain_steps,
                           optimizer=config.optimizer, seed=seed)]
    records = [build_pseudo_mono(train, seed)]
    lexicon = make_lexicon(seed)
    previous = Stage.PT1_MONO_BASE
    for group_id in _groups_for(config.langs, groups):
        members = groups.members(group_id)
        group_pairs = [p for p in train if pair_language(p, groups.english_code) in members]
        for stage in list(config.adapter_stages) + [Stage.POST1_SFT]:
            steps = config.sft_steps if stage == Stage.POST1_SFT else config.adapter_pretrain_steps
            configs.append(StageConfig(stage=stage, group=group_id, steps=steps, optimizer=config.optimizer,
                                       seed=seed + group_id, adapter_rank=config.adapter_rank,
                                       allow_out_of_order=stage.index != previous.index + 1))
            records.append(group_pairs if stage == Stage.POST1_SFT
                           else _adapter_stage_records(stage, config, group_pairs, members, seed + group_id,
                                                       lexicon))
            previous = stage
    return run_recipe(configs, state, records, groups)


def build_comparison_preferences(config: ComparisonConfig, state: TrainState, train: Sequence[ParallelPair],
                                 seed: int, groups: GroupMap) -> List[PreferenceTriple]:
    """Sampled SFT outputs against references, topped up with one-letter near-duplicates."""
    generator = _frozen_copy(state)
    dataset = build_preference(train, generator, seed=seed, groups=groups, mode=DecodeMode.TEMPERATURE,
                               temperature=config.temperature)
    records = list(dataset.records)
    lexicon = make_lexicon(seed)
    for offset, lang in enumerate(config.langs):
        if config.near_duplicates:
            records.extend(near_duplicate_triples(config.near_duplicates, seed + 1000 + offset, lang, lexicon,
                                                  words=config.words_per_sentence))
    logger.info(f"Comparison preference data: {dataset.d1} sampled + "
                f"{len(records) - dataset.d1 - dataset.d2} near-duplicate triples")
    return records


def run_comparison(methods: Sequence[LossMethod], seed: int, config: Optional[ComparisonConfig] = None,
                   groups: Optional[GroupMap] = None) -> ComparisonReport:
    """
    Train every method from the same SFT state and compare against SFT.

    Args:
        methods: Preference losses to compare
        seed: Seed for data, initialization and sampling
        config: Experiment knobs
        groups: Registry holding the toy languages; the shipped toy registry by default

    Returns:
        ComparisonReport with one outcome per method, in the given order
    """
    config = config or ComparisonConfig()
    groups = groups or load_groups_file(settings.TOY_GROUPS_CONFIG)
    train, held_out = toy_task(config.langs, config.pairs, seed, words=config.words_per_sentence)

    sft_state = build_sft_state(config, train, seed, groups)
    scorer = _frozen_copy(sft_state)
    sft_eval = evaluate(sft_state.model, held_out, groups, unit=config.bleu_unit)
    sft_proxy = _proxy(scorer, sft_eval, held_out, groups)
    log_stage_action(logger, "compare", "sft_ready",
                     f"bleu={sft_eval.aggregate['lexical_bleu']:.4f} proxy={sft_proxy:.4f}")

    preferences = build_comparison_preferences(config, sft_state, train, seed, groups)

    outcomes: Dict[str, MethodOutcome] = {}
    for method in methods:
        state = copy.deepcopy(sft_state)
        track: List[float] = []
        losses: List[float] = []
        for group_id in _groups_for(config.langs, groups):
            cfg = StageConfig(stage=Stage.POST2_PREFERENCE, group=group_id, steps=config.preference_steps,
                              loss=method_loss_config(method, config), optimizer=config.preference_optimizer,
                              seed=seed + group_id)
            run_stage(cfg, state, records=preferences, groups=groups)
            track.extend(state.runs[-1].chosen_logp)
            losses.append(state.runs[-1].losses[-1])

        result = evaluate(state.model, held_out, groups, unit=config.bleu_unit)
        outcomes[method.value] = MethodOutcome(
            method=method,
            evaluation=result,
            proxy_reward=_proxy(scorer, result, held_out, groups),
            final_loss=losses[-1],
            likelihood_track=track,
            over_rejection=over_rejection_report(sft_eval, result, track),
        )
        log_stage_action(logger, "compare", method.value,
                         f"bleu={result.aggregate['lexical_bleu']:.4f} "
                         f"flagged={outcomes[method.value].over_rejection.flagged}")

    return ComparisonReport(seed=seed, config=config, train_pairs=len(train), held_out_pairs=len(held_out),
                            preference_records=len(preferences), sft=sft_eval, sft_proxy_reward=sft_proxy,
                            outcomes=outcomes)


# ==================== STAGE ABLATION ====================

def parse_variants(text: Optional[str]) -> List[str]:
    """Comma-separated ablation variant names; every variant when empty."""
    if not text:
        return list(ABLATION_VARIANTS)
    variants = []
    for token in (t.strip().lower() for t in text.split(',')):
        if not token:
            continue
        if token not in ABLATION_VARIANTS:
            raise ConfigurationError(f"unknown ablation variant {token!r}; choose from {sorted(ABLATION_VARIANTS)}")
        if token not in variants:
            variants.append(token)
    return variants


def run_ablation(seed: int, config: Optional[ComparisonConfig] = None, groups: Optional[GroupMap] = None,
                 variants: Optional[Sequence[str]] = None) -> AblationReport:
    """
    Build the SFT state once per recipe variant and evaluate each on the held-out pairs.

    Every variant starts from the same seed, data and PT1 budget; only the
    adapter pre-training stages between PT1 and POST1 differ.
    """
    config = config or ComparisonConfig()
    groups = groups or load_groups_file(settings.TOY_GROUPS_CONFIG)
    train, held_out = toy_task(config.langs, config.pairs, seed, words=config.words_per_sentence)

    rows: List[AblationRow] = []
    for variant in variants or list(ABLATION_VARIANTS):
        stages = ABLATION_VARIANTS[variant]
        variant_config = config.model_copy(update={'adapter_stages': list(stages)})
        state = build_sft_state(variant_config, train, seed, groups)
        result = evaluate(state.model, held_out, groups, unit=config.bleu_unit)
        rows.append(AblationRow(variant=variant, stages=stages, evaluation=result))
        log_stage_action(logger, "ablate", variant,
                         f"stages={[s.value for s in stages]} bleu={result.aggregate['lexical_bleu']:.4f}")

    return AblationReport(seed=seed, config=config, train_pairs=len(train), held_out_pairs=len(held_out),
                          rows=rows)
