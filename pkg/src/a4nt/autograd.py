"""Dense-tensor core with reverse-mode automatic differentiation.

Tensors wrap numpy arrays.  Operations executed while a Tape is active are
recorded in creation order (which is a valid topological order), and
``backward`` replays the tape in reverse to accumulate gradients into every
``requires_grad`` leaf.  Outside of a tape, operations run forward-only,
which is what inference paths use.

Parameters default to float32; building a graph from float64 leaves keeps
everything in float64, which the finite-difference tests rely on.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes do not conform to an op's rule."""


class NonFiniteGradient(RuntimeError):
    """Raised when an optimizer step sees NaN or inf gradient entries."""


_active_tape: Optional["Tape"] = None


class Tape:
    """Ordered record of the primitive operations of one forward pass."""

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self) -> "Tape":
        global _active_tape
        self._outer = _active_tape
        _active_tape = self
        return self

    def __exit__(self, *exc):
        global _active_tape
        _active_tape = self._outer
        return False


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _accumulate(t: Tensor, g: np.ndarray):
    t.grad = g if t.grad is None else t.grad + g


def _make(data: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if _active_tape is not None and out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
        _active_tape.nodes.append(out)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(op: str, a: Tensor, b: Tensor):
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} do not broadcast")


# ---------------------------------------------------------------------------
# elementwise / arithmetic primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("add", a, b)
    data = a.data + b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("sub", a, b)
    data = a.data - b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("mul", a, b)
    data = a.data * b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    data = a.data * c

    def backward(g):
        _accumulate(a, g * c)

    return _make(data, (a,), backward)


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: shapes {a.data.shape} and {b.data.shape} do not conform")
    data = a.data @ b.data

    def backward(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _make(data, (a, b), backward)


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def backward(g):
        _accumulate(a, g * (1.0 - data * data))

    return _make(data, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        _accumulate(a, g * data * (1.0 - data))

    return _make(data, (a,), backward)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def backward(g):
        _accumulate(a, g * data)

    return _make(data, (a,), backward)


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def backward(g):
        _accumulate(a, g / a.data)

    return _make(data, (a,), backward)


def abs_(a: Tensor) -> Tensor:
    data = np.abs(a.data)

    def backward(g):
        _accumulate(a, g * np.sign(a.data))

    return _make(data, (a,), backward)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clip values to [lo, hi]; gradient is passed through inside the bounds."""
    data = np.clip(a.data, lo, hi)

    def backward(g):
        mask = (a.data >= lo) & (a.data <= hi)
        _accumulate(a, g * mask)

    return _make(data, (a,), backward)


# ---------------------------------------------------------------------------
# reductions, softmax, structural primitives


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * data).sum(axis=-1, keepdims=True)
        _accumulate(a, (g - dot) * data)

    return _make(data, (a,), backward)


def log_softmax(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    data = shifted - lse
    sm = np.exp(data)

    def backward(g):
        _accumulate(a, g - sm * g.sum(axis=-1, keepdims=True))

    return _make(data, (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ShapeError("concat: no inputs")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(g):
        offset = 0
        for t, s in zip(tensors, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis if axis >= 0 else g.ndim + axis] = slice(offset, offset + s)
            _accumulate(t, g[tuple(idx)])
            offset += s

    return _make(data, tuple(tensors), backward)


def narrow(a: Tensor, axis: int, start: int, size: int) -> Tensor:
    """Contiguous slice along one axis."""
    if start < 0 or start + size > a.data.shape[axis]:
        raise ShapeError(f"narrow: [{start}:{start + size}] out of range for axis {axis} of {a.data.shape}")
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + size)
    idx = tuple(idx)
    data = a.data[idx]

    def backward(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        _accumulate(a, full)

    return _make(data, (a,), backward)


def rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of a 2-D table by integer index (embedding lookup)."""
    if table.data.ndim != 2:
        raise ShapeError(f"rows: table must be 2-D, got {table.data.shape}")
    ids = np.asarray(ids, dtype=np.int64)
    data = table.data[ids]

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        _accumulate(table, full)

    return _make(data, (table,), backward)


def sum_all(a: Tensor) -> Tensor:
    data = np.asarray(a.data.sum(), dtype=a.data.dtype)

    def backward(g):
        _accumulate(a, np.broadcast_to(g, a.data.shape).astype(a.data.dtype))

    return _make(data, (a,), backward)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    data = np.asarray(a.data.mean(), dtype=a.data.dtype)

    def backward(g):
        _accumulate(a, np.broadcast_to(g / n, a.data.shape).astype(a.data.dtype))

    return _make(data, (a,), backward)


def sum_axis(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        gg = g if keepdims else np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(gg, a.data.shape).astype(a.data.dtype))

    return _make(data, (a,), backward)


def mean_axis(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    n = a.data.shape[axis]
    return scale(sum_axis(a, axis, keepdims), 1.0 / n)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    data = a.data.reshape(shape)

    def backward(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _make(data, (a,), backward)


# ---------------------------------------------------------------------------
# primitive dispatch and backward pass

_PRIMITIVES: dict[str, Callable] = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "mul": mul,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "exp": exp,
    "log": log,
    "abs": abs_,
    "softmax": softmax,
    "log_softmax": log_softmax,
    "concat": lambda *ts: concat(ts, axis=-1),
    "mean": mean_axis,
    "absdiff": lambda a, b: abs_(sub(a, b)),
    "gather": rows,
    "weighted_rows": matmul,  # (B, V) distribution rows x (V, d) table
}


def forward_primitive(op_kind: str, *inputs):
    """Apply a named primitive; unknown names and bad shapes are rejected."""
    try:
        fn = _PRIMITIVES[op_kind]
    except KeyError:
        raise ShapeError(f"unknown primitive {op_kind!r}")
    return fn(*inputs)


def backward(tape: Tape, loss: Tensor):
    """Accumulate d(loss)/d(leaf) into .grad of every requires_grad leaf."""
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    idx = None
    for i in range(len(tape.nodes) - 1, -1, -1):
        if tape.nodes[i] is loss:
            idx = i
            break
    if idx is None:
        raise ValueError("backward: loss was not produced on this tape")
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes[: idx + 1]):
        if node.grad is not None and node._backward is not None:
            node._backward(node.grad)
    # free intermediate grads; leaves keep theirs
    for node in tape.nodes:
        if node._backward is not None:
            node.grad = None


def zero_grads(params: Sequence[Tensor]):
    for p in params:
        p.grad = None


def clip_global_norm(params: Sequence[Tensor], max_norm: float = 5.0) -> float:
    """Scale gradients so their global L2 norm is at most max_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    norm = math.sqrt(total)
    if norm > max_norm and norm > 0:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * factor
    return norm


# ---------------------------------------------------------------------------
# RMSprop


class RmspropState:
    """Per-parameter mean-square accumulators plus hyperparameters."""

    def __init__(self, params: Sequence[Tensor], learning_rate: float,
                 decay: float = 0.9, epsilon: float = 1e-8):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0.0 < decay < 1.0):
            raise ValueError("decay must be in (0, 1)")
        self.learning_rate = learning_rate
        self.decay = decay
        self.epsilon = epsilon
        self.acc = [np.zeros_like(p.data) for p in params]


def rmsprop_step(params: Sequence[Tensor], grads: Optional[Sequence[np.ndarray]],
                 state: RmspropState):
    """One RMSprop update in place; rejects non-finite gradients untouched."""
    if grads is None:
        grads = [p.grad for p in params]
    if len(params) != len(grads) or len(params) != len(state.acc):
        raise ShapeError("rmsprop_step: params, grads and state are not aligned")
    for p, g in zip(params, grads):
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise ShapeError(f"rmsprop_step: grad shape {g.shape} vs param {p.data.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient("rmsprop_step: non-finite gradient entries")
    for p, g, acc in zip(params, grads, state.acc):
        if g is None:
            continue
        acc *= state.decay
        acc += (1.0 - state.decay) * g * g
        p.data = p.data - state.learning_rate * g / (np.sqrt(acc) + state.epsilon)
