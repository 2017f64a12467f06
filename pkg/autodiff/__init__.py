"""Dense reverse-mode differentiation engine."""

from .tensor import (
    Graph,
    Node,
    OPS,
    Tensor,
    abs_,
    add,
    as_tensor,
    backward,
    clamp_max,
    exp,
    expm1,
    gather,
    is_grad_enabled,
    log,
    log_sigmoid,
    log_softmax,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    op_apply,
    sigmoid,
    sub,
    sum_,
    take_rows,
    tanh,
    transpose,
    zero_grad,
)
from .gradcheck import grad_check

__all__ = [
    'Graph', 'Node', 'OPS', 'Tensor', 'abs_', 'add', 'as_tensor', 'backward',
    'clamp_max', 'exp', 'gather', 'grad_check', 'is_grad_enabled', 'log',
    'log_sigmoid', 'log_softmax', 'matmul', 'mean', 'mul', 'neg', 'no_grad',
    'op_apply', 'sigmoid', 'sub', 'sum_', 'take_rows', 'tanh', 'transpose',
    'zero_grad',
]
