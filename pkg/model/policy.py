"""
Tiny decoder-only policy model.

Single-head causal attention and a tanh MLP per block, residuals scaled by a
constant layer scale (no normalization). Every linear weight is stored as
[out, in] and is an adapter injection point named `blocks.{i}.attn.w{q,k,v,o}`
or `blocks.{i}.mlp.w{1,2}`.
"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np

from autodiff import (
    Tensor,
    add,
    exp,
    gather,
    log_softmax,
    matmul,
    mul,
    no_grad,
    sum_,
    take_rows,
    tanh,
    transpose,
)
from config.constants import PROMPT_TEMPLATE, DecodeMode
from config.schemas import ModelConfig
from model.vocab import Vocab
from utils.errors import AdapterStateError, CapacityError, ContractError, VocabularyError

if TYPE_CHECKING:
    from model.adapters import Adapter

logger = logging.getLogger(__name__)

MASK_VALUE = -1e9


@dataclass(frozen=True)
class PromptTemplate:
    """Translation instruction prepended to every target."""

    template: str = PROMPT_TEMPLATE

    def render(self, src_lang: str, tgt_lang: str, source: str) -> str:
        return self.template.format(src_lang=src_lang, tgt_lang=tgt_lang, source=source)


DEFAULT_PROMPT = PromptTemplate()


def attention_names(block: int) -> List[str]:
    return [f"blocks.{block}.attn.{name}" for name in ('wq', 'wk', 'wv', 'wo')]


def mlp_names(block: int) -> List[str]:
    return [f"blocks.{block}.mlp.{name}" for name in ('w1', 'w2')]


class PolicyModel:
    """Parameters, frozen flag and attached language-specific adapters."""

    def __init__(self, config: ModelConfig, vocab: Vocab, seed: int = 0,
                 params: Optional[Dict[str, np.ndarray]] = None):
        self.config = config
        self.vocab = vocab
        self.frozen = False
        self.adapters: Dict[int, "Adapter"] = {}
        self.params: Dict[str, Tensor] = {}

        shapes = self.parameter_shapes()
        if params is not None:
            for name, shape in shapes.items():
                data = np.asarray(params[name], dtype=np.float64)
                if data.shape != shape:
                    raise ContractError(f"parameter {name!r} has shape {data.shape}, expected {shape}")
                self.params[name] = Tensor(data, requires_grad=True)
            return

        rng = np.random.default_rng(seed)
        for name, shape in shapes.items():
            if name in ('embed', 'pos'):
                data = rng.normal(0.0, config.embed_std, size=shape)
            elif name == 'head':
                # Zero head: the untrained model predicts uniformly.
                data = np.zeros(shape)
            else:
                data = rng.normal(0.0, 1.0 / math.sqrt(shape[1]), size=shape)
            self.params[name] = Tensor(data, requires_grad=True)

    # ==================== STRUCTURE ====================

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def max_len(self) -> int:
        return self.config.max_len

    def parameter_shapes(self) -> Dict[str, Tuple[int, ...]]:
        d, h = self.config.d_model, self.config.d_hidden
        shapes = {
            'embed': (len(self.vocab), d),
            'pos': (self.config.max_len, d),
        }
        for block in range(self.config.n_blocks):
            for name in attention_names(block):
                shapes[name] = (d, d)
            w1, w2 = mlp_names(block)
            shapes[w1] = (h, d)
            shapes[w2] = (d, h)
        shapes['head'] = (d, len(self.vocab))
        return shapes

    def linear_names(self) -> List[str]:
        """Every registered adapter injection point."""
        names = []
        for block in range(self.config.n_blocks):
            names.extend(attention_names(block))
            names.extend(mlp_names(block))
        return names

    def linear_shape(self, name: str) -> Tuple[int, int]:
        """(out, in) of a linear layer."""
        return self.params[name].shape

    def freeze(self):
        self.frozen = True
        for tensor in self.params.values():
            tensor.requires_grad = False

    def unfreeze(self):
        self.frozen = False
        for tensor in self.params.values():
            tensor.requires_grad = True

    def trainable_parameters(self) -> Dict[str, Tensor]:
        """Base tensors (unless frozen) plus every attached adapter's factors."""
        named = {} if self.frozen else dict(self.params)
        for group_id, adapter in self.adapters.items():
            for name, tensor in adapter.parameters().items():
                named[f"adapters.{group_id}.{name}"] = tensor
        return named

    def copy(self) -> "PolicyModel":
        """Independent copy of base weights and frozen flag; adapters are not carried."""
        clone = PolicyModel(self.config, self.vocab,
                            params={name: t.data.copy() for name, t in self.params.items()})
        if self.frozen:
            clone.freeze()
        return clone

    # ==================== FORWARD ====================

    def _active_adapter(self, group: Optional[int]):
        if not self.adapters:
            return None
        if group is None:
            if len(self.adapters) == 1:
                return next(iter(self.adapters.values()))
            raise AdapterStateError.from_key('missing_group', count=len(self.adapters))
        if group not in self.adapters:
            raise AdapterStateError.from_key('missing_attach', group_id=group)
        return self.adapters[group]

    def _linear(self, x: Tensor, name: str, adapter) -> Tensor:
        weight = self.params[name]
        if adapter is not None and name in adapter.targets:
            weight = add(weight, adapter.delta(name))
        return matmul(x, transpose(weight))

    def forward(self, ids: Sequence[int], group: Optional[int] = None) -> Tensor:
        """
        Next-token log-probabilities for every position.

        Args:
            ids: Input token ids, at most max_len long
            group: Language group whose adapter handles this input

        Returns:
            Tensor [len(ids), V] of log-probabilities
        """
        length = len(ids)
        if length > self.config.max_len:
            raise CapacityError.from_key('sequence_too_long', length=length, capacity=self.config.max_len)
        adapter = self._active_adapter(group)
        scale = self.config.layer_scale

        x = add(take_rows(self.params['embed'], ids), take_rows(self.params['pos'], np.arange(length)))
        mask = np.triu(np.full((length, length), MASK_VALUE), k=1)
        inv_sqrt_d = 1.0 / math.sqrt(self.config.d_model)

        for block in range(self.config.n_blocks):
            wq, wk, wv, wo = attention_names(block)
            q = self._linear(x, wq, adapter)
            k = self._linear(x, wk, adapter)
            v = self._linear(x, wv, adapter)
            scores = add(mul(matmul(q, transpose(k)), inv_sqrt_d), mask)
            weights = exp(log_softmax(scores, axis=-1))
            x = add(x, mul(self._linear(matmul(weights, v), wo, adapter), scale))

            w1, w2 = mlp_names(block)
            hidden = tanh(self._linear(x, w1, adapter))
            x = add(x, mul(self._linear(hidden, w2, adapter), scale))

        return log_softmax(matmul(x, self.params['head']), axis=-1)


# ==================== SCORING ====================

@dataclass
class SequenceScore:
    """Differentiable log π(target | prompt)."""

    per_token: Tensor
    total: Tensor
    length: int

    @property
    def avg(self) -> Tensor:
        return self.total / self.length


def _check_target(model: PolicyModel, target: Sequence[int]):
    if len(target) == 0:
        raise ContractError.from_key('empty_target')
    if target[-1] != model.vocab.eos_id:
        raise ContractError.from_key('target_not_terminated')
    for token_id in target:
        if not 0 <= token_id < model.vocab_size:
            raise VocabularyError.from_key('unknown_token', symbol=token_id)


def prompt_ids(model: PolicyModel, prompt: str) -> List[int]:
    return [model.vocab.bos_id] + model.vocab.encode(prompt)


def sequence_logprob_tensor(model: PolicyModel, prompt: str, target: Sequence[int],
                            group: Optional[int] = None) -> SequenceScore:
    """Score an EOS-terminated target after BOS + rendered prompt."""
    _check_target(model, target)
    context = prompt_ids(model, prompt)
    total_length = len(context) + len(target)
    if total_length > model.max_len:
        raise CapacityError.from_key('sequence_too_long', length=total_length, capacity=model.max_len)

    inputs = context + list(target[:-1])
    logprobs = model.forward(inputs, group=group)
    positions = np.arange(len(context) - 1, len(inputs))
    per_token = gather(take_rows(logprobs, positions), list(target))
    return SequenceScore(per_token=per_token, total=sum_(per_token), length=len(target))


def sequence_logprob(model: PolicyModel, prompt: str, target: Sequence[int],
                     group: Optional[int] = None) -> dict:
    """
    Float view of sequence_logprob_tensor.

    Returns:
        {'total': float, 'per_token': list of floats, 'avg': float}
    """
    with no_grad():
        score = sequence_logprob_tensor(model, prompt, target, group=group)
    total = score.total.item()
    return {
        'total': total,
        'per_token': [float(v) for v in score.per_token.data],
        'avg': total / score.length,
    }


def generate(model: PolicyModel, prompt: str, mode: DecodeMode = DecodeMode.GREEDY,
             max_len: int = 32, temperature: float = 1.0, seed: Optional[int] = None,
             group: Optional[int] = None) -> List[int]:
    """
    Decode a continuation of the prompt.

    Args:
        model: Policy to decode from
        prompt: Rendered prompt text
        mode: GREEDY (argmax) or TEMPERATURE (seeded sampling)
        max_len: Maximum number of generated tokens
        temperature: Softmax temperature, TEMPERATURE mode only
        seed: Sampling seed, required in TEMPERATURE mode
        group: Language group whose adapter handles the prompt

    Returns:
        Generated token ids without the prompt and without the closing EOS
    """
    mode = DecodeMode(mode)
    if max_len < 1:
        raise ContractError.from_key('bad_decode', detail=f"max_len must be >= 1, got {max_len}")
    if mode == DecodeMode.TEMPERATURE:
        if temperature <= 0:
            raise ContractError.from_key('bad_decode', detail=f"temperature must be > 0, got {temperature}")
        if seed is None:
            raise ContractError.from_key('bad_decode', detail="temperature sampling needs a seed")
    rng = np.random.default_rng(seed)

    ids = prompt_ids(model, prompt)
    if len(ids) >= model.max_len:
        raise CapacityError.from_key('sequence_too_long', length=len(ids) + 1, capacity=model.max_len)

    # PAD and BOS are never emitted.
    banned = [model.vocab.pad_id, model.vocab.bos_id]
    generated: List[int] = []
    with no_grad():
        while len(generated) < max_len and len(ids) < model.max_len:
            logits = model.forward(ids, group=group).data[-1].copy()
            logits[banned] = -np.inf
            if mode == DecodeMode.GREEDY:
                next_id = int(np.argmax(logits))
            else:
                scaled = logits / temperature
                probs = np.exp(scaled - scaled.max())
                probs /= probs.sum()
                next_id = int(rng.choice(len(probs), p=probs))
            if next_id == model.vocab.eos_id:
                break
            generated.append(next_id)
            ids.append(next_id)
    return generated


def param_count(model: PolicyModel, include_adapters: bool = False) -> int:
    """Scalar parameter count of the base, plus attached adapters when asked."""
    count = sum(tensor.size for tensor in model.params.values())
    if include_adapters:
        count += sum(adapter.param_count() for adapter in model.adapters.values())
    return count
