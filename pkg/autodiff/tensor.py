"""
Reverse-mode differentiation over dense float64 arrays.

Define-by-run: every op returns a new Tensor that remembers its inputs and a
backward closure when any input requires a gradient. `backward(root)` traces
the ancestors of root into a Graph whose node order is creation order, which
is a topological order because an op's inputs always exist before its output.
"""

import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from utils.errors import ContractError, DomainError, ShapeError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]

_sequence = itertools.count()
_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, 'grad_enabled', True)


@contextmanager
def no_grad():
    """Disable graph recording on this thread (scoring, generation, finite differences)."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Tensor:
    """A float64 array with an optional gradient."""

    __slots__ = ('data', 'requires_grad', 'grad', '_op', '_inputs', '_backward', '_seq')

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._op = 'leaf'
        self._inputs: Tuple["Tensor", ...] = ()
        self._backward: Optional[Callable] = None
        self._seq = next(_sequence)

    @classmethod
    def _from_op(cls, data: np.ndarray, kind: str, inputs: Tuple["Tensor", ...],
                 backward: Callable) -> "Tensor":
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        out.grad = None
        out._seq = next(_sequence)
        out.requires_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
        if out.requires_grad:
            out._op = kind
            out._inputs = inputs
            out._backward = backward
        else:
            out._op = 'leaf'
            out._inputs = ()
            out._backward = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}, op={self._op})"

    # Operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ContractError("division by a Tensor is not supported; multiply by a constant")
        return mul(self, 1.0 / float(other))


def as_tensor(value: ArrayLike) -> Tensor:
    """Wrap constants; Tensors pass through untouched."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def zero_grad(params: Sequence[Tensor]):
    for param in params:
        param.grad = None


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError.from_key('shape_mismatch', op=op, shapes=[a.shape, b.shape])


# ==================== ELEMENTWISE ====================

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('add', a, b)

    def backward(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(g, b.shape) if b.requires_grad else None,
        )
    return Tensor._from_op(a.data + b.data, 'add', (a, b), backward)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('sub', a, b)

    def backward(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(-g, b.shape) if b.requires_grad else None,
        )
    return Tensor._from_op(a.data - b.data, 'sub', (a, b), backward)


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return Tensor._from_op(-a.data, 'neg', (a,), lambda g: (-g,))


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('mul', a, b)

    def backward(g):
        return (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        )
    return Tensor._from_op(a.data * b.data, 'mul', (a, b), backward)


def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out_data = np.exp(a.data)
    return Tensor._from_op(out_data, 'exp', (a,), lambda g: (g * out_data,))


def expm1(a: ArrayLike) -> Tensor:
    """exp(a) - 1, accurate near zero."""
    a = as_tensor(a)
    grad_scale = np.exp(a.data)
    return Tensor._from_op(np.expm1(a.data), 'expm1', (a,), lambda g: (g * grad_scale,))


def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    if a.size and np.min(a.data) <= 0.0:
        raise DomainError.from_key('log_domain', value=float(np.min(a.data)))
    return Tensor._from_op(np.log(a.data), 'log', (a,), lambda g: (g / a.data,))


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    exp_x = np.exp(x[~positive])
    out[~positive] = exp_x / (1.0 + exp_x)
    return out


def sigmoid(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    s = _stable_sigmoid(np.atleast_1d(a.data)).reshape(a.shape)
    return Tensor._from_op(s, 'sigmoid', (a,), lambda g: (g * s * (1.0 - s),))


def log_sigmoid(a: ArrayLike) -> Tensor:
    """log σ(x) = -log(1 + e^-x), evaluated without overflow."""
    a = as_tensor(a)
    out_data = -np.logaddexp(0.0, -a.data)
    s_neg = _stable_sigmoid(np.atleast_1d(-a.data)).reshape(a.shape)
    return Tensor._from_op(out_data, 'log_sigmoid', (a,), lambda g: (g * s_neg,))


def tanh(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.data)
    return Tensor._from_op(t, 'tanh', (a,), lambda g: (g * (1.0 - t * t),))


def abs_(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return Tensor._from_op(np.abs(a.data), 'abs', (a,), lambda g: (g * np.sign(a.data),))


def clamp_max(a: ArrayLike, c: float) -> Tensor:
    """min(a, c); the subgradient at a == c is 0 (the clamped branch)."""
    a = as_tensor(a)
    passthrough = a.data < c
    return Tensor._from_op(
        np.minimum(a.data, c), 'clamp_max', (a,), lambda g: (g * passthrough,)
    )


# ==================== CONTRACTIONS & REDUCTIONS ====================

def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError.from_key('shape_mismatch', op='matmul', shapes=[a.shape, b.shape])

    def backward(g):
        return (
            g @ b.data.T if a.requires_grad else None,
            a.data.T @ g if b.requires_grad else None,
        )
    return Tensor._from_op(a.data @ b.data, 'matmul', (a, b), backward)


def transpose(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError.from_key('shape_mismatch', op='transpose', shapes=[a.shape])
    return Tensor._from_op(a.data.T, 'transpose', (a,), lambda g: (g.T,))


def sum_(a: ArrayLike, axis: Optional[int] = None) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)
    return Tensor._from_op(a.data.sum(axis=axis), 'sum', (a,), backward)


def mean(a: ArrayLike, axis: Optional[int] = None) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else a.shape[axis]
    if count == 0:
        raise ShapeError.from_key('shape_mismatch', op='mean', shapes=[a.shape])

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.shape).copy(),)
    return Tensor._from_op(a.data.mean(axis=axis), 'mean', (a,), backward)


def gather(a: ArrayLike, indices) -> Tensor:
    """
    Pick entries along the last axis.

    For a 2-D input, `indices` holds one column per row and the result is 1-D.
    For a 1-D input, `indices` may be an int (scalar result) or a sequence.
    """
    a = as_tensor(a)
    if a.data.ndim == 2:
        idx = np.asarray(indices, dtype=np.int64)
        if idx.shape != (a.shape[0],) or (idx.size and (idx.min() < 0 or idx.max() >= a.shape[1])):
            raise ShapeError.from_key('shape_mismatch', op='gather', shapes=[a.shape, idx.shape])
        rows = np.arange(a.shape[0])
        out_data = a.data[rows, idx]

        def backward(g):
            grad = np.zeros_like(a.data)
            grad[rows, idx] = g
            return (grad,)
        return Tensor._from_op(out_data, 'gather', (a,), backward)

    if a.data.ndim == 1:
        idx = indices if isinstance(indices, (int, np.integer)) else np.asarray(indices, dtype=np.int64)
        try:
            out_data = a.data[idx]
        except IndexError:
            raise ShapeError.from_key('shape_mismatch', op='gather', shapes=[a.shape, np.shape(idx)])

        def backward(g):
            grad = np.zeros_like(a.data)
            np.add.at(grad, idx, g)
            return (grad,)
        return Tensor._from_op(out_data, 'gather', (a,), backward)

    raise ShapeError.from_key('shape_mismatch', op='gather', shapes=[a.shape])


def take_rows(table: ArrayLike, indices) -> Tensor:
    """Row lookup table[indices] (embedding lookup); repeated rows accumulate."""
    table = as_tensor(table)
    idx = np.asarray(indices, dtype=np.int64)
    if table.data.ndim != 2 or idx.ndim != 1 or (idx.size and (idx.min() < 0 or idx.max() >= table.shape[0])):
        raise ShapeError.from_key('shape_mismatch', op='take_rows', shapes=[table.shape, idx.shape])

    def backward(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, idx, g)
        return (grad,)
    return Tensor._from_op(table.data[idx], 'take_rows', (table,), backward)


def log_softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    out_data = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(g):
        return (g - np.exp(out_data) * g.sum(axis=axis, keepdims=True),)
    return Tensor._from_op(out_data, 'log_softmax', (a,), backward)


# ==================== DISPATCH ====================

OPS = {
    'add': add,
    'sub': sub,
    'neg': neg,
    'mul': mul,
    'matmul': matmul,
    'transpose': transpose,
    'exp': exp,
    'expm1': expm1,
    'log': log,
    'sigmoid': sigmoid,
    'log_sigmoid': log_sigmoid,
    'tanh': tanh,
    'abs': abs_,
    'clamp_max': clamp_max,
    'mean': mean,
    'sum': sum_,
    'gather': gather,
    'take_rows': take_rows,
    'log_softmax': log_softmax,
}


def op_apply(kind: str, *inputs: ArrayLike, **params) -> Tensor:
    """
    Apply an op by name.

    Args:
        kind: Key of OPS (e.g. 'clamp_max', 'gather', 'log_softmax')
        *inputs: Tensors or constants
        **params: Op parameters (c for clamp_max, indices for gather, axis for log_softmax/sum/mean)

    Returns:
        Output tensor
    """
    try:
        fn = OPS[kind]
    except KeyError:
        raise ContractError.from_key('unknown_op', kind=kind)
    return fn(*inputs, **params)


# ==================== GRAPH & BACKWARD ====================

@dataclass(frozen=True)
class Node:
    index: int
    kind: str
    inputs: Tuple[int, ...]
    output: Tensor


@dataclass
class Graph:
    """Topologically ordered op records; every input id of node k is < k."""

    nodes: list

    @classmethod
    def trace(cls, root: Tensor) -> "Graph":
        seen = {}
        stack = [root]
        while stack:
            tensor = stack.pop()
            if id(tensor) in seen:
                continue
            seen[id(tensor)] = tensor
            stack.extend(tensor._inputs)

        ordered = sorted(seen.values(), key=lambda t: t._seq)
        ids = {id(t): i for i, t in enumerate(ordered)}
        nodes = [
            Node(i, t._op, tuple(ids[id(p)] for p in t._inputs), t)
            for i, t in enumerate(ordered)
        ]
        return cls(nodes)

    def __len__(self):
        return len(self.nodes)


def backward(root: Tensor):
    """Populate `.grad` of every requires_grad leaf reachable from a scalar root."""
    if root.shape != ():
        raise ContractError.from_key('backward_non_scalar', shape=root.shape)
    if not root.requires_grad:
        return

    graph = Graph.trace(root)
    grads = [None] * len(graph)
    grads[-1] = np.ones((), dtype=np.float64)

    for node in reversed(graph.nodes):
        g = grads[node.index]
        if g is None:
            continue
        tensor = node.output
        if not node.inputs:
            if tensor.requires_grad:
                tensor.grad = g.copy() if tensor.grad is None else tensor.grad + g
            continue

        for input_id, input_grad in zip(node.inputs, tensor._backward(g)):
            if input_grad is None:
                continue
            if grads[input_id] is None:
                grads[input_id] = input_grad
            else:
                grads[input_id] = grads[input_id] + input_grad
