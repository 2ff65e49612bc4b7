"""A small reverse-mode automatic differentiation engine on top of numpy.

Every operation returns a :class:`Tensor`. When at least one input requires a
gradient (and recording is enabled), the result keeps references to its inputs
together with a closure that maps the output gradient onto input gradients.
:func:`backward` walks that graph in reverse topological order.

Gradients accumulate additively on leaf tensors; callers reset them with
:meth:`Tensor.zero_grad` between optimisation steps.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, NumericError, ShapeError

_node_ids = itertools.count()
_state = threading.local()

LAYER_NORM_EPS = 1e-5


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference, finite differences)."""
    previous = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


class Tensor:
    """Array participating in gradient-tracked computation."""

    __slots__ = ("data", "grad", "requires_grad", "node_id", "op", "_parents", "_backward")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_node_ids)
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    # -- basic protocol -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # -- operator sugar ---------------------------------------------------
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

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return swapaxes(self, -1, -2)


# ---------------------------------------------------------------------------
# graph construction helpers


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, op: str, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    if not np.all(np.isfinite(data)):
        shapes = ", ".join(str(p.shape) for p in parents)
        raise NumericError(f"{op} produced non-finite values (input shapes {shapes})")
    out = Tensor(data, dtype=data.dtype)
    out.op = op
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, "add", (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.data - b.data, "sub", (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(a.data * b.data, "mul", (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a, b)

    def backward(g):
        ga = g / b.data
        gb = -g * a.data / (b.data * b.data)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data
    return _result(out, "div", (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, "neg", (a,), lambda g: (-g,))


def relu(x) -> Tensor:
    x = as_tensor(x)
    positive = x.data > 0

    def backward(g):
        return (g * positive,)

    return _result(np.where(positive, x.data, 0.0).astype(x.dtype), "relu", (x,), backward)


def tabs(x) -> Tensor:
    x = as_tensor(x)
    return _result(np.abs(x.data), "abs", (x,), lambda g: (g * np.sign(x.data),))


def exp(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(over="ignore"):
        out = np.exp(x.data)
    return _result(out, "exp", (x,), lambda g: (g * out,))


def log(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)
    return _result(out, "log", (x,), lambda g: (g / x.data,))


# ---------------------------------------------------------------------------
# linear algebra and reductions


def matmul(a, b) -> Tensor:
    """Batched matrix product with numpy broadcasting over leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs operands of rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions differ for {a.shape} @ {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError(f"matmul: batch dimensions differ for {a.shape} @ {b.shape}") from None

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(a.data @ b.data, "matmul", (a, b), backward)


def tsum(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), "sum", (x,), backward)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else np.prod([x.shape[i] for i in np.atleast_1d(axis)])

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return _result(np.asarray(x.data.mean(axis=axis, keepdims=keepdims)), "mean", (x,), backward)


# ---------------------------------------------------------------------------
# shape manipulation


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {x.shape} as {tuple(shape)}") from None
    return _result(out, "reshape", (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    inverse = None if axes is None else np.argsort(axes)
    return _result(np.transpose(x.data, axes), "transpose", (x,), lambda g: (np.transpose(g, inverse),))


def swapaxes(x, a: int, b: int) -> Tensor:
    x = as_tensor(x)
    return _result(np.swapaxes(x.data, a, b), "swapaxes", (x,), lambda g: (np.swapaxes(g, a, b),))


def getitem(x, index) -> Tensor:
    """Basic and advanced indexing; repeated indices accumulate gradient."""
    x = as_tensor(x)
    if isinstance(index, Tensor):
        index = index.data.astype(np.int64)

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return _result(np.asarray(x.data[index]), "getitem", (x,), backward)


def slice_(x, start: int, stop: int, axis: int = 0) -> Tensor:
    index = [slice(None)] * as_tensor(x).ndim
    index[axis] = slice(start, stop)
    return getitem(x, tuple(index))


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise ShapeError(f"concat along axis {axis}: incompatible shapes {shapes}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(out, "concat", tensors, backward)


def embedding_lookup(table, ids) -> Tensor:
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ContractError(f"embedding ids outside [0, {table.shape[0]})")
    out = getitem(table, ids)
    out.op = "embedding_lookup"
    return out


# ---------------------------------------------------------------------------
# normalisation, attention, similarity


def softmax(x, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Softmax along ``axis``. ``mask`` (broadcastable bool) marks allowed entries."""
    x = as_tensor(x)
    logits = x.data if mask is None else np.where(mask, x.data, -np.inf)
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)

    return _result(p, "softmax", (x,), backward)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - logz
    p = np.exp(out)

    def backward(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return _result(out, "log_softmax", (x,), backward)


def layer_norm(x, gain=None, bias=None, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalise over the last axis, then apply the affine ``gain``/``bias``."""
    x = as_tensor(x)
    d = x.shape[-1]
    gain = Tensor(np.ones(d, dtype=x.dtype)) if gain is None else as_tensor(gain)
    bias = Tensor(np.zeros(d, dtype=x.dtype)) if bias is None else as_tensor(bias)
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: gain {gain.shape} / bias {bias.shape} do not match width {d}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv

    def backward(g):
        gxhat = g * gain.data
        gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _result(xhat * gain.data + bias.data, "layer_norm", (x, gain, bias), backward)


def l1_distance(a, b) -> Tensor:
    """Mean absolute difference over all elements."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"l1_distance: shapes {a.shape} and {b.shape} differ")
    diff = a.data - b.data
    sign = np.sign(diff)
    n = diff.size

    def backward(g):
        return g * sign / n, -g * sign / n

    return _result(np.asarray(np.abs(diff).mean()), "l1_distance", (a, b), backward)


def cosine_similarity(a, b, axis: int = -1) -> Tensor:
    """Cosine similarity along ``axis``; defined as 0 wherever either norm is 0."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"cosine_similarity: shapes {a.shape} and {b.shape} differ")
    dot = (a.data * b.data).sum(axis=axis, keepdims=True)
    aa = (a.data * a.data).sum(axis=axis, keepdims=True)
    bb = (b.data * b.data).sum(axis=axis, keepdims=True)
    ok = (aa > 0) & (bb > 0)
    na_s = np.sqrt(np.where(ok, aa, 1.0))
    nb_s = np.sqrt(np.where(ok, bb, 1.0))
    # one sqrt of the product makes cos(x, x) exactly 1; the clip keeps rounding inside [-1, 1]
    denom = np.sqrt(np.where(ok, aa * bb, 1.0))
    cos = np.where(ok, np.clip(dot / denom, -1.0, 1.0), 0.0)

    def backward(g):
        g = np.expand_dims(g, axis) * ok
        ga = g * (b.data / (na_s * nb_s) - cos * a.data / (na_s * na_s))
        gb = g * (a.data / (na_s * nb_s) - cos * b.data / (nb_s * nb_s))
        return ga, gb

    return _result(np.squeeze(cos, axis=axis), "cosine_similarity", (a, b), backward)


# ---------------------------------------------------------------------------
# backward pass


@dataclass
class Tape:
    """Operations reachable from a loss, in topological (creation-compatible) order."""

    nodes: list[Tensor] = field(default_factory=list)

    @classmethod
    def from_output(cls, out: Tensor) -> Tape:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(out, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node.node_id in seen:
                continue
            seen.add(node.node_id)
            stack.append((node, True))
            for parent in node._parents:
                if parent.node_id not in seen:
                    stack.append((parent, False))
        return cls(order)

    def leaves(self) -> list[Tensor]:
        return [n for n in self.nodes if n.is_leaf and n.requires_grad]


def backward(loss: Tensor, tape: Tape | None = None) -> list[Tensor]:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every requires_grad leaf.

    Returns the leaves that received gradient.
    """
    if loss.data.size != 1 or loss.ndim > 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = tape or Tape.from_output(loss)
    grads: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
    touched = []
    for node in reversed(tape.nodes):
        g = grads.pop(node.node_id, None)
        if g is None or not node.requires_grad:
            continue
        if node.is_leaf:
            node.grad = g.copy() if node.grad is None else node.grad + g
            touched.append(node)
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            if parent.node_id in grads:
                grads[parent.node_id] = grads[parent.node_id] + pg
            else:
                grads[parent.node_id] = pg
    return touched


def grad_of(f: Callable[..., Tensor], *xs: Tensor) -> list[np.ndarray]:
    """Gradients of scalar ``f(*xs)`` with respect to each of ``xs``."""
    saved = [(x.requires_grad, x.grad) for x in xs]
    for x in xs:
        x.requires_grad = True
        x.grad = None
    backward(f(*xs))
    out = [np.zeros_like(x.data) if x.grad is None else x.grad for x in xs]
    for x, (flag, grad) in zip(xs, saved):
        x.requires_grad, x.grad = flag, grad
    return out


def finite_diff_check(f: Callable[..., Tensor], x: Tensor | Iterable[Tensor], eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` receives the tensor(s) in ``x`` as positional arguments. Perturbation
    happens in place, so ``f`` may also read them through closures.
    Relative error is ``|g_a - g_n| / max(1, |g_n|)`` per coordinate.
    """
    xs = [x] if isinstance(x, Tensor) else list(x)
    analytic = grad_of(f, *xs)
    worst = 0.0
    with no_grad():
        for t, g_a in zip(xs, analytic):
            if not t.data.flags.c_contiguous:
                t.data = np.ascontiguousarray(t.data)
            flat = t.data.reshape(-1)
            ga = g_a.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                f_plus = float(f(*xs).data)
                flat[i] = orig - eps
                f_minus = float(f(*xs).data)
                flat[i] = orig
                g_n = (f_plus - f_minus) / (2 * eps)
                worst = max(worst, abs(ga[i] - g_n) / max(1.0, abs(g_n)))
    return worst
