"""Tests for the preference-loss comparison and the stage ablation on the synthetic cipher task."""

import pytest
from pydantic import ValidationError

from config.constants import LossMethod, Stage
from config.schemas import ModelConfig, OptimizerConfig
from services.comparison_service import (
    ABLATION_VARIANTS,
    ComparisonConfig,
    build_sft_state,
    parse_methods,
    parse_variants,
    run_ablation,
    run_comparison,
)
from services.synthetic_service import toy_task
from utils.errors import ConfigurationError
from utils.formatters import format_ablation_report, format_comparison_report


def _smoke_config(**overrides):
    values = dict(
        pairs=4,
        near_duplicates=4,
        pretrain_steps=2,
        adapter_pretrain_steps=2,
        sft_steps=2,
        preference_steps=2,
        adapter_rank=1,
        model=ModelConfig(d_model=8, d_hidden=16, n_blocks=1, max_len=96),
        optimizer=OptimizerConfig(lr=1e-2, batch_size=2),
        preference_optimizer=OptimizerConfig(lr=1e-2, batch_size=2),
    )
    values.update(overrides)
    return ComparisonConfig(**values)


def test_parse_methods():
    assert parse_methods("ARPO, cpo,arpo,dpo") == [LossMethod.ARPO, LossMethod.CPO, LossMethod.DPO]
    for text in ("", "sft", "arpo,unknown"):
        with pytest.raises(ConfigurationError):
            parse_methods(text)


def test_config_rejects_unknown_unit_and_keys():
    with pytest.raises(ValidationError):
        ComparisonConfig(bleu_unit='byte')
    with pytest.raises(ValidationError):
        ComparisonConfig(learning_rate=0.1)


def test_adapter_stages_accept_short_names():
    config = ComparisonConfig(adapter_stages=['pt3', 'PT2_mono_adapters'])
    assert config.adapter_stages == [Stage.PT3_PSEUDO_MONO, Stage.PT2_MONO_ADAPTERS]
    for stages in (['pt1'], ['post1'], ['pt2', 'pt2'], ['pt9']):
        with pytest.raises(ValidationError):
            ComparisonConfig(adapter_stages=stages)


def test_smoke_run_reports_every_method():
    report = run_comparison([LossMethod.ARPO, LossMethod.CPO], seed=0, config=_smoke_config())
    assert list(report.outcomes) == ['arpo', 'cpo']
    assert report.train_pairs == 8
    assert report.preference_records >= 4
    for outcome in report.outcomes.values():
        assert set(outcome.evaluation.directions) == set(report.sft.directions)
        assert len(outcome.likelihood_track) == 2
    text = format_comparison_report(report)
    assert 'SFT baseline' in text
    assert 'method: cpo' in text
    assert 'adapter stages: PT3_pseudo_mono' in text
    assert text.endswith('\n')


def test_same_seed_gives_the_same_report():
    first = run_comparison([LossMethod.DPO], seed=3, config=_smoke_config())
    second = run_comparison([LossMethod.DPO], seed=3, config=_smoke_config())
    assert format_comparison_report(first) == format_comparison_report(second)


# ==================== STAGE ABLATION ====================

@pytest.mark.parametrize('stages', [[], ['pt2'], ['pt3', 'pt2'], ['pt2', 'pt3']])
def test_sft_state_runs_the_configured_adapter_stages(toy_groups, stages):
    config = _smoke_config(adapter_stages=stages)
    train, _ = toy_task(config.langs, config.pairs, seed=0, words=config.words_per_sentence)
    state = build_sft_state(config, train, seed=0, groups=toy_groups)
    assert state.stage_history == [Stage.PT1_MONO_BASE] + config.adapter_stages + [Stage.POST1_SFT]
    assert sorted(state.adapters) == [1]


def test_parse_variants():
    assert parse_variants(None) == list(ABLATION_VARIANTS)
    assert parse_variants("no_pt3, full,no_pt3") == ['no_pt3', 'full']
    with pytest.raises(ConfigurationError):
        parse_variants("full,everything")


def test_ablation_reports_one_row_per_variant():
    report = run_ablation(seed=0, config=_smoke_config(), variants=['sft_only', 'pt3_then_pt2'])
    assert [row.variant for row in report.rows] == ['sft_only', 'pt3_then_pt2']
    assert report.rows[0].stages == []
    assert report.rows[1].stages == [Stage.PT3_PSEUDO_MONO, Stage.PT2_MONO_ADAPTERS]
    for row in report.rows:
        assert 0.0 <= row.evaluation.aggregate['lexical_bleu'] <= 1.0
    text = format_ablation_report(report)
    assert 'sft_only' in text
    assert 'PT3_pseudo_mono -> PT2_mono_adapters' in text
    assert text.endswith('\n')


# ==================== DESK EXPERIMENTS ====================

@pytest.mark.experiment
def test_dpo_over_rejects_while_arpo_holds():
    report = run_comparison([LossMethod.DPO, LossMethod.CPO, LossMethod.ARPO], seed=0)
    assert report.sft.aggregate['lexical_bleu'] >= 0.9

    dpo = report.outcomes['dpo']
    assert dpo.over_rejection.aggregate.relative_bleu_change <= -0.30
    assert dpo.over_rejection.likelihood_trend < 0

    arpo = report.outcomes['arpo']
    assert abs(arpo.over_rejection.aggregate.relative_bleu_change) <= 0.10
    assert arpo.proxy_reward >= report.outcomes['cpo'].proxy_reward
