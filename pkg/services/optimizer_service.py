"""
Optimizer Service

Adaptive-moment updates with bias correction and a linear warm-up.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional

import numpy as np

from autodiff import Tensor
from config.schemas import OptimizerConfig
from utils.errors import ContractError, FrozenTensorError

logger = logging.getLogger(__name__)


@dataclass
class Moments:
    """First/second moment estimates for one tensor and its own update count."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, tensor: Tensor) -> "Moments":
        return cls(np.zeros(tensor.shape), np.zeros(tensor.shape), 0)


def warmup_lr(config: OptimizerConfig, step: int, total_steps: int) -> float:
    """
    Learning rate for a 0-based step: linear ramp over the first
    ceil(warmup_ratio * total_steps) steps, constant afterwards.
    """
    warmup = math.ceil(config.warmup_ratio * total_steps)
    if warmup <= 0:
        return config.lr
    return config.lr * min(1.0, (step + 1) / warmup)


def optimizer_step(params: Mapping[str, Tensor], moments: Dict[str, Moments],
                   grads: Mapping[str, np.ndarray], config: OptimizerConfig,
                   lr: Optional[float] = None, frozen: Optional[Mapping[str, Tensor]] = None):
    """
    Apply one adaptive-moment update in place.

    Args:
        params: Trainable tensors by name (updated in place)
        moments: Moment state by name; missing entries start at zero
        grads: Gradients for exactly the trainable tensors
        config: lr, beta1, beta2, eps
        lr: Learning rate override (warm-up schedule)
        frozen: Frozen tensors by name; a gradient for one of them is a contract breach
    """
    if frozen:
        for name in grads:
            if name in frozen:
                raise FrozenTensorError.from_key('frozen_grad', name=name)
    missing = sorted(set(params) - set(grads))
    extra = sorted(set(grads) - set(params))
    if missing or extra:
        raise ContractError.from_key('grad_set', detail=f"missing {missing}, unexpected {extra}")
    for name, grad in grads.items():
        if np.shape(grad) != params[name].shape:
            raise ContractError.from_key('grad_shape', name=name, got=np.shape(grad),
                                         expected=params[name].shape)

    rate = config.lr if lr is None else lr
    for name, tensor in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        state = moments.get(name)
        if state is None:
            state = moments[name] = Moments.zeros_like(tensor)
        state.t += 1
        state.m = config.beta1 * state.m + (1.0 - config.beta1) * grad
        state.v = config.beta2 * state.v + (1.0 - config.beta2) * grad * grad
        m_hat = state.m / (1.0 - config.beta1 ** state.t)
        v_hat = state.v / (1.0 - config.beta2 ** state.t)
        tensor.data = tensor.data - rate * m_hat / (np.sqrt(v_hat) + config.eps)


def collect_grads(params: Mapping[str, Tensor]) -> Dict[str, np.ndarray]:
    """Gradients after backward; tensors the loss never touched get zeros."""
    return {name: (t.grad if t.grad is not None else np.zeros(t.shape)) for name, t in params.items()}
