"""Central-difference verification of analytic gradients."""

import logging
from typing import Callable, Sequence

import numpy as np

from autodiff.tensor import Tensor, backward, no_grad, zero_grad
from utils.errors import GradCheckError

logger = logging.getLogger(__name__)

MAX_EPS = 1e-3


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-5) -> float:
    """
    Compare backward() against central differences on every coordinate.

    Args:
        f: Zero-argument closure returning a scalar Tensor built from `params`
        params: Leaf tensors with requires_grad set
        eps: Finite-difference step, in (0, 1e-3]

    Returns:
        max |analytic - numeric| / max(1, |analytic|, |numeric|) over all coordinates
    """
    if not 0.0 < eps <= MAX_EPS:
        raise GradCheckError.from_key('gradcheck_eps', eps=eps)

    zero_grad(params)
    backward(f())
    analytic = [
        np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        for p in params
    ]

    worst = 0.0
    for param_index, param in enumerate(params):
        flat = param.data.reshape(-1)
        grad_flat = analytic[param_index].reshape(-1)
        for coord in range(flat.size):
            original = flat[coord]
            with no_grad():
                flat[coord] = original + eps
                plus = f().item()
                flat[coord] = original - eps
                minus = f().item()
            flat[coord] = original

            numeric = (plus - minus) / (2.0 * eps)
            exact = grad_flat[coord]
            if not np.isfinite(exact):
                raise GradCheckError.from_key(
                    'gradcheck_non_finite', which='analytic', param=param_index, index=coord
                )
            if not np.isfinite(numeric):
                raise GradCheckError.from_key(
                    'gradcheck_non_finite', which='numeric', param=param_index, index=coord
                )

            error = abs(exact - numeric) / max(1.0, abs(exact), abs(numeric))
            worst = max(worst, error)

    logger.debug(f"grad_check over {len(params)} tensors: max relative error {worst:.3e}")
    return worst
