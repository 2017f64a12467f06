"""Tests for language-specific adapters, loading strategies and routing."""

import numpy as np
import pytest

from config.constants import ADAPTER_DEFAULTS, Direction
from config.schemas import ModelConfig
from model import (
    Adapter,
    LoadingStrategy,
    PolicyModel,
    Vocab,
    attach,
    budget_rank,
    detach,
    init_adapter,
    load_strategy,
    merge,
    param_count,
    route,
    route_pair,
    sequence_logprob,
    unmerge,
)
from autodiff import Tensor
from utils.errors import AdapterStateError, ConfigurationError, RoutingError


def _trained_adapter(model, group_id, seed):
    """Adapter with nonzero B, as if it had been trained."""
    adapter = init_adapter(model, group_id, model.linear_names(), rank=2, seed=seed)
    rng = np.random.default_rng(seed + 100)
    for tensor in adapter.B.values():
        tensor.data = rng.normal(0.0, 0.2, size=tensor.shape)
    return adapter


def _random_sequences(vocab, count, seed):
    rng = np.random.default_rng(seed)
    letters = "abcdefghijklmnopqrstuvwxyz "
    sequences = []
    for _ in range(count):
        prompt = ''.join(rng.choice(list(letters), size=rng.integers(1, 12)))
        target = ''.join(rng.choice(list(letters), size=rng.integers(1, 12)))
        sequences.append((prompt, vocab.encode_target(target)))
    return sequences


# ==================== INIT ====================

def test_fresh_adapter_has_zero_b(tiny_model):
    adapter = init_adapter(tiny_model, 1, tiny_model.linear_names(), rank=3)
    assert all(np.all(b.data == 0.0) for b in adapter.B.values())
    assert adapter.alpha == 6.0
    assert adapter.scaling == 2.0


def test_same_seed_same_factors(tiny_model):
    first = init_adapter(tiny_model, 1, tiny_model.linear_names(), rank=2, seed=7)
    second = init_adapter(tiny_model, 1, tiny_model.linear_names(), rank=2, seed=7)
    for target in first.targets:
        assert first.A[target].data.tobytes() == second.A[target].data.tobytes()


def test_init_std(tiny_model):
    adapter = init_adapter(tiny_model, 1, tiny_model.linear_names(), rank=16, seed=0)
    values = np.concatenate([a.data.ravel() for a in adapter.A.values()])
    assert values.std() == pytest.approx(ADAPTER_DEFAULTS['init_std'], rel=0.15)


def test_init_rejects_bad_arguments(tiny_model):
    with pytest.raises(ConfigurationError):
        init_adapter(tiny_model, 1, ['blocks.0.attn.wz'], rank=2)
    with pytest.raises(ConfigurationError):
        init_adapter(tiny_model, 1, [], rank=2)
    with pytest.raises(ConfigurationError):
        init_adapter(tiny_model, 1, tiny_model.linear_names(), rank=0)


def test_default_config_budget_rank_lands_near_fifteen_percent(vocab):
    model = PolicyModel(ModelConfig(), vocab)
    rank = budget_rank(model)
    attach(model, init_adapter(model, 1, model.linear_names(), rank=rank))
    ratio = (param_count(model, True) - param_count(model, False)) / param_count(model, False)
    assert ADAPTER_DEFAULTS['budget_low'] <= ratio <= ADAPTER_DEFAULTS['budget_high']


# ==================== ATTACH / DETACH ====================

def test_attach_detach_round_trip_is_bit_exact(tiny_model, vocab):
    sequences = _random_sequences(vocab, 5, seed=0)
    before = [sequence_logprob(tiny_model, p, t)['total'] for p, t in sequences]
    weights = {name: t.data.tobytes() for name, t in tiny_model.params.items()}

    attach(tiny_model, _trained_adapter(tiny_model, 1, seed=1))
    detach(tiny_model, 1)

    after = [sequence_logprob(tiny_model, p, t)['total'] for p, t in sequences]
    assert before == after
    assert weights == {name: t.data.tobytes() for name, t in tiny_model.params.items()}


def test_duplicate_attach_and_missing_detach(tiny_model):
    attach(tiny_model, init_adapter(tiny_model, 1, tiny_model.linear_names(), rank=1))
    with pytest.raises(AdapterStateError):
        attach(tiny_model, init_adapter(tiny_model, 1, tiny_model.linear_names(), rank=1))
    with pytest.raises(AdapterStateError):
        detach(tiny_model, 2)


def test_hard_gate_exclusivity(tiny_model, vocab):
    adapters = {1: _trained_adapter(tiny_model, 1, seed=1), 6: _trained_adapter(tiny_model, 6, seed=6)}
    everything = load_strategy(tiny_model, LoadingStrategy.all_modules(), adapters)
    only_six = load_strategy(tiny_model, LoadingStrategy.single_module(6), adapters)

    for prompt, target in _random_sequences(vocab, 10, seed=2):
        tagged = sequence_logprob(everything, prompt, target, group=6)['total']
        single = sequence_logprob(only_six, prompt, target)['total']
        assert tagged == single


def test_all_modules_requires_group_id(tiny_model, vocab):
    adapters = {1: _trained_adapter(tiny_model, 1, seed=1), 2: _trained_adapter(tiny_model, 2, seed=2)}
    serving = load_strategy(tiny_model, LoadingStrategy.all_modules(), adapters)
    with pytest.raises(AdapterStateError):
        sequence_logprob(serving, "ab", vocab.encode_target("cd"))


# ==================== MERGE ====================

def test_merge_of_zero_adapter_keeps_weights(tiny_model):
    merged = merge(tiny_model, init_adapter(tiny_model, 1, tiny_model.linear_names(), rank=2))
    for name, tensor in tiny_model.params.items():
        np.testing.assert_array_equal(merged.params[name].data, tensor.data)
    assert merged.adapters == {}
    assert param_count(merged) == param_count(tiny_model)


def test_merge_hand_arithmetic():
    vocab = Vocab("ab")
    model = PolicyModel(ModelConfig(d_model=2, d_hidden=2, n_blocks=1, max_len=4), vocab)
    target = 'blocks.0.attn.wq'
    model.params[target].data = np.eye(2)
    adapter = Adapter(group_id=1, rank=1, alpha=2.0,
                      A={target: Tensor([[1.0, 0.0]], requires_grad=True)},
                      B={target: Tensor([[1.0], [0.0]], requires_grad=True)})
    merged = merge(model, adapter)
    np.testing.assert_array_equal(merged.params[target].data, [[3.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(unmerge(merged, adapter).params[target].data, np.eye(2))


def test_merged_matches_attached(tiny_model, vocab):
    adapter = _trained_adapter(tiny_model, 3, seed=3)
    merged = load_strategy(tiny_model, LoadingStrategy.merged_model(3), {3: adapter})
    attached = load_strategy(tiny_model, LoadingStrategy.single_module(3), {3: adapter})

    for prompt, target in _random_sequences(vocab, 50, seed=4):
        merged_score = sequence_logprob(merged, prompt, target)['total']
        attached_score = sequence_logprob(attached, prompt, target)['total']
        assert abs(merged_score - attached_score) <= 1e-9


def test_merge_shape_mismatch(tiny_model, two_block_model):
    adapter = init_adapter(two_block_model, 1, ['blocks.1.mlp.w1'], rank=2)
    with pytest.raises(ConfigurationError):
        merge(tiny_model, adapter)


# ==================== ROUTING ====================

def test_route_by_language(table_groups):
    assert route('ja', table_groups) == 6
    assert route('ja', table_groups, Direction.INTO_EN) == 6


def test_route_english_pair(table_groups):
    assert route_pair('en', 'de', table_groups) == 1
    assert route_pair('gu', 'en', table_groups) == 7


def test_route_errors(table_groups):
    with pytest.raises(RoutingError):
        route('xx', table_groups)
    with pytest.raises(RoutingError):
        route('en', table_groups)
    with pytest.raises(RoutingError):
        route_pair('en', 'en', table_groups)
    with pytest.raises(RoutingError):
        route_pair('de', 'ja', table_groups)
