"""
Language-specific low-rank adapters with hard-gated routing.

An adapter holds, per targeted linear layer, A [r, in] and B [out, r]; the
effective weight is W + (alpha / r) * B @ A. Routing is a table lookup in the
GroupMap, never a learned gate.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from autodiff import Tensor, matmul, mul
from config.constants import ADAPTER_DEFAULTS, ENGLISH, Direction, LoadingKind
from model.groups import GroupMap, group_of
from model.policy import PolicyModel, param_count
from utils.errors import (
    AdapterStateError,
    ConfigurationError,
    GroupLookupError,
    RoutingError,
)

logger = logging.getLogger(__name__)


@dataclass
class Adapter:
    """Low-rank factors for one language group."""

    group_id: int
    rank: int
    alpha: float
    A: Dict[str, Tensor] = field(default_factory=dict)
    B: Dict[str, Tensor] = field(default_factory=dict)

    @property
    def targets(self) -> Sequence[str]:
        return list(self.A)

    @property
    def scaling(self) -> float:
        return self.alpha / self.rank

    def delta(self, target: str) -> Tensor:
        """(alpha / r) * B @ A as a differentiable tensor, shape [out, in]."""
        return mul(matmul(self.B[target], self.A[target]), self.scaling)

    def delta_array(self, target: str) -> np.ndarray:
        return (self.B[target].data @ self.A[target].data) * self.scaling

    def parameters(self) -> Dict[str, Tensor]:
        named = {}
        for target in self.targets:
            named[f"{target}.A"] = self.A[target]
            named[f"{target}.B"] = self.B[target]
        return named

    def param_count(self) -> int:
        return sum(tensor.size for tensor in self.parameters().values())


@dataclass(frozen=True)
class LoadingStrategy:
    """SingleModule(group), MergedModel(group) or AllModules."""

    kind: LoadingKind
    group_id: Optional[int] = None

    @classmethod
    def single_module(cls, group_id: int) -> "LoadingStrategy":
        return cls(LoadingKind.SINGLE_MODULE, group_id)

    @classmethod
    def merged_model(cls, group_id: int) -> "LoadingStrategy":
        return cls(LoadingKind.MERGED_MODEL, group_id)

    @classmethod
    def all_modules(cls) -> "LoadingStrategy":
        return cls(LoadingKind.ALL_MODULES)


def init_adapter(model: PolicyModel, group_id: int, targets: Iterable[str], rank: int,
                 alpha: Optional[float] = None, seed: int = 0) -> Adapter:
    """
    Create a fresh adapter for `targets` on `model`.

    Args:
        model: Model whose linear layers define the factor shapes
        group_id: Language group the adapter serves
        targets: Linear layer names (see PolicyModel.linear_names)
        rank: r >= 1
        alpha: Scale; defaults to 2r so alpha / r == 2
        seed: Seed for A ~ N(0, 0.02); B starts at zero

    Returns:
        Adapter whose delta is exactly zero
    """
    targets = list(targets)
    if rank < 1:
        raise ConfigurationError.from_key('bad_rank', rank=rank)
    if not targets:
        raise ConfigurationError.from_key('empty_targets')
    registered = set(model.linear_names())
    for target in targets:
        if target not in registered:
            raise ConfigurationError.from_key('unknown_target', target=target)

    alpha = 2.0 * rank if alpha is None else float(alpha)
    rng = np.random.default_rng(seed)
    adapter = Adapter(group_id=group_id, rank=rank, alpha=alpha)
    for target in targets:
        out_dim, in_dim = model.linear_shape(target)
        adapter.A[target] = Tensor(
            rng.normal(0.0, ADAPTER_DEFAULTS['init_std'], size=(rank, in_dim)), requires_grad=True
        )
        adapter.B[target] = Tensor(np.zeros((out_dim, rank)), requires_grad=True)

    logger.debug(f"Initialized adapter for group {group_id}: rank {rank}, {adapter.param_count()} params")
    return adapter


def _check_shapes(model: PolicyModel, adapter: Adapter):
    registered = set(model.linear_names())
    for target in adapter.targets:
        if target not in registered:
            raise ConfigurationError.from_key('unknown_target', target=target)
        weight_shape = model.linear_shape(target)
        delta_shape = (adapter.B[target].shape[0], adapter.A[target].shape[1])
        if delta_shape != weight_shape or adapter.B[target].shape[1] != adapter.A[target].shape[0]:
            raise ConfigurationError.from_key(
                'adapter_shape', target=target, delta=delta_shape, weight=weight_shape
            )


def attach(model: PolicyModel, adapter: Adapter):
    """Route the adapter's group through base + delta."""
    if adapter.group_id in model.adapters:
        raise AdapterStateError.from_key('duplicate_attach', group_id=adapter.group_id)
    _check_shapes(model, adapter)
    model.adapters[adapter.group_id] = adapter
    logger.debug(f"Attached adapter for group {adapter.group_id}")


def detach(model: PolicyModel, group_id: int) -> Adapter:
    """Remove and return the adapter of `group_id`."""
    if group_id not in model.adapters:
        raise AdapterStateError.from_key('missing_attach', group_id=group_id)
    adapter = model.adapters.pop(group_id)
    logger.debug(f"Detached adapter for group {group_id}")
    return adapter


def merge(model: PolicyModel, adapter: Adapter) -> PolicyModel:
    """
    Fold an adapter into a new model with the same parameter count.

    Returns:
        Copy of `model` with W' = W + (alpha / r) * B @ A on every target and no adapters
    """
    _check_shapes(model, adapter)
    merged = model.copy()
    for target in adapter.targets:
        base = merged.params[target]
        base.data = base.data + adapter.delta_array(target)
    logger.info(f"Merged adapter for group {adapter.group_id} into {len(adapter.targets)} layers")
    return merged


def unmerge(model: PolicyModel, adapter: Adapter) -> PolicyModel:
    """Inverse of merge, up to floating-point rounding."""
    _check_shapes(model, adapter)
    restored = model.copy()
    for target in adapter.targets:
        base = restored.params[target]
        base.data = base.data - adapter.delta_array(target)
    return restored


def load_strategy(model: PolicyModel, strategy: LoadingStrategy,
                  adapters: Dict[int, Adapter]) -> PolicyModel:
    """
    Build the serving model for one loading strategy.

    SingleModule attaches only the requested group's adapter; MergedModel folds
    it into the weights; AllModules attaches every adapter, so each input must
    carry its group id at scoring time.
    """
    serving = model.copy()
    serving.freeze()

    if strategy.kind == LoadingKind.ALL_MODULES:
        for group_id in sorted(adapters):
            attach(serving, adapters[group_id])
        return serving

    if strategy.group_id not in adapters:
        raise AdapterStateError.from_key('missing_attach', group_id=strategy.group_id)
    adapter = adapters[strategy.group_id]
    if strategy.kind == LoadingKind.SINGLE_MODULE:
        attach(serving, adapter)
        return serving

    merged = merge(serving, adapter)
    merged.freeze()
    return merged


def route(lang: str, groups: GroupMap, direction: Optional[Direction] = None) -> int:
    """
    Group for a language code; English needs the other side of the pair.

    Args:
        lang: Non-English iso code
        groups: Registry to look the code up in
        direction: Translation direction (informational; the group is the same both ways)

    Returns:
        group_id
    """
    if lang == ENGLISH:
        raise RoutingError.from_key('english_ambiguous')
    try:
        return group_of(groups, lang)
    except GroupLookupError as e:
        raise RoutingError(e.message)


def route_pair(src_lang: str, tgt_lang: str, groups: GroupMap) -> int:
    """Group of an English-centric pair, by its non-English side."""
    if src_lang == ENGLISH and tgt_lang == ENGLISH:
        raise RoutingError("en -> en has no language-specific module")
    if src_lang == ENGLISH:
        return route(tgt_lang, groups, Direction.FROM_EN)
    if tgt_lang == ENGLISH:
        return route(src_lang, groups, Direction.INTO_EN)

    src_group = route(src_lang, groups)
    tgt_group = route(tgt_lang, groups)
    if src_group != tgt_group:
        raise RoutingError(f"{src_lang} -> {tgt_lang} spans groups {src_group} and {tgt_group}")
    return src_group


def adapter_budget(model: PolicyModel, rank: int, targets: Optional[Sequence[str]] = None) -> int:
    """Adapter parameter count r * (in + out) summed over targets."""
    targets = model.linear_names() if targets is None else targets
    return sum(rank * sum(model.linear_shape(target)) for target in targets)


def budget_rank(model: PolicyModel, ratio: float = ADAPTER_DEFAULTS['budget_ratio'],
                targets: Optional[Sequence[str]] = None) -> int:
    """
    Rank whose adapter/base parameter ratio lands closest to `ratio`.

    Sweeps r = 1, 2, ... until the ratio passes the target and keeps the nearer side.
    """
    base = param_count(model, include_adapters=False)
    best_rank, best_gap = 1, None
    rank = 1
    while True:
        fraction = adapter_budget(model, rank, targets) / base
        gap = abs(fraction - ratio)
        if best_gap is None or gap < best_gap:
            best_rank, best_gap = rank, gap
        if fraction >= ratio:
            break
        rank += 1
    logger.debug(f"Budget sweep: rank {best_rank} gives ratio "
                 f"{adapter_budget(model, best_rank, targets) / base:.4f} (target {ratio})")
    return best_rank
