"""
Minimal reverse-mode autodiff over numpy arrays.

Only the operators the PullNet model needs are provided. Every op records a
closure that pushes its output gradient to its inputs; `backward()` replays
them in reverse topological order.
"""

import threading
from contextlib import contextmanager
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

ArrayLike = Union[np.ndarray, float, int, Sequence]

_grad_mode = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_grad_mode, "enabled", True)


@contextmanager
def no_grad():
    """Run forward passes without recording the tape."""
    previous = is_grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A float64 array with an optional gradient accumulator"""

    __array_priority__ = 100  # make ndarray <op> Tensor defer to Tensor

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        _children: Tuple["Tensor", ...] = (),
        _op: str = "",
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._backprop = None
        self._prev = _children
        self._op = _op

    # -- construction helpers -------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op!r}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    @staticmethod
    def _make(data: np.ndarray, children: Tuple["Tensor", ...], op: str) -> "Tensor":
        track = is_grad_enabled() and any(c.requires_grad for c in children)
        return Tensor(data, requires_grad=track, _children=children if track else (), _op=op)

    # -- elementwise arithmetic -----------------------------------------------

    def __add__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        out = Tensor._make(self.data + other.data, (self, other), "+")
        if out.requires_grad:

            def _backprop():
                self._accumulate(_unbroadcast(out.grad, self.shape))
                other._accumulate(_unbroadcast(out.grad, other.shape))

            out._backprop = _backprop
        return out

    def __mul__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        out = Tensor._make(self.data * other.data, (self, other), "*")
        if out.requires_grad:

            def _backprop():
                self._accumulate(_unbroadcast(other.data * out.grad, self.shape))
                other._accumulate(_unbroadcast(self.data * out.grad, other.shape))

            out._backprop = _backprop
        return out

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return self + (-as_tensor(other))

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) + (-self)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return self + other

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return self * other

    def __truediv__(self, other: Union[float, int, np.ndarray]) -> "Tensor":
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return self * (1.0 / np.asarray(other, dtype=np.float64))

    # -- linear algebra -------------------------------------------------------

    def __matmul__(self, other: "Tensor") -> "Tensor":
        other = as_tensor(other)
        a, b = self.data, other.data
        out = Tensor._make(a @ b, (self, other), "@")
        if out.requires_grad:

            def _backprop():
                g = out.grad
                if a.ndim == 1 and b.ndim == 1:
                    ga, gb = g * b, g * a
                elif a.ndim == 1:
                    ga, gb = b @ g, np.outer(a, g)
                elif b.ndim == 1:
                    ga, gb = np.outer(g, b), a.T @ g
                else:
                    ga, gb = g @ b.T, a.T @ g
                self._accumulate(ga)
                other._accumulate(gb)

            out._backprop = _backprop
        return out

    # -- nonlinearities -------------------------------------------------------

    def sigmoid(self) -> "Tensor":
        s = expit(self.data)
        out = Tensor._make(s, (self,), "sigmoid")
        if out.requires_grad:

            def _backprop():
                self._accumulate(out.grad * s * (1.0 - s))

            out._backprop = _backprop
        return out

    def tanh(self) -> "Tensor":
        t = np.tanh(self.data)
        out = Tensor._make(t, (self,), "tanh")
        if out.requires_grad:

            def _backprop():
                self._accumulate(out.grad * (1.0 - t * t))

            out._backprop = _backprop
        return out

    def relu(self) -> "Tensor":
        mask = self.data > 0
        out = Tensor._make(self.data * mask, (self,), "relu")
        if out.requires_grad:

            def _backprop():
                self._accumulate(out.grad * mask)

            out._backprop = _backprop
        return out

    # -- reductions and indexing ----------------------------------------------

    def sum(self, axis: Optional[int] = None) -> "Tensor":
        out = Tensor._make(self.data.sum(axis=axis), (self,), "sum")
        if out.requires_grad:

            def _backprop():
                g = out.grad if axis is None else np.expand_dims(out.grad, axis)
                self._accumulate(np.broadcast_to(g, self.shape).copy())

            out._backprop = _backprop
        return out

    def mean(self) -> "Tensor":
        return self.sum() / max(self.data.size, 1)

    def __getitem__(self, index) -> "Tensor":
        out = Tensor._make(self.data[index], (self,), "getitem")
        if out.requires_grad:

            def _backprop():
                grad = np.zeros_like(self.data)
                np.add.at(grad, index, out.grad)
                self._accumulate(grad)

            out._backprop = _backprop
        return out

    def reshape(self, *shape) -> "Tensor":
        out = Tensor._make(self.data.reshape(*shape), (self,), "reshape")
        if out.requires_grad:

            def _backprop():
                self._accumulate(out.grad.reshape(self.shape))

            out._backprop = _backprop
        return out

    # -- reverse pass ---------------------------------------------------------

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate d(self)/d(leaf) into every leaf that requires grad."""
        if not self.requires_grad:
            return
        topo: List[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for child in node._prev:
                if id(child) not in visited:
                    stack.append((child, False))

        self.grad = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=np.float64)
        for node in reversed(topo):
            if node._backprop is not None:
                node._backprop()
        # free the tape; interior grads are not needed once leaves are filled
        for node in topo:
            if node._prev:
                node._backprop = None
                node._prev = ()


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(data: ArrayLike) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def scatter_add(values: Tensor, index: np.ndarray, size: int) -> Tensor:
    """out[index[i]] += values[i] over the leading axis."""
    index = np.asarray(index, dtype=np.int64)
    data = np.zeros((size,) + values.shape[1:])
    np.add.at(data, index, values.data)
    out = Tensor._make(data, (values,), "scatter_add")
    if out.requires_grad:

        def _backprop():
            values._accumulate(out.grad[index])

        out._backprop = _backprop
    return out


def segment_mean(values: Tensor, segments: np.ndarray, size: int) -> Tensor:
    """Mean of `values` rows per segment id; empty segments give zero rows."""
    segments = np.asarray(segments, dtype=np.int64)
    counts = np.bincount(segments, minlength=size).astype(np.float64)
    inverse = np.divide(1.0, counts, out=np.zeros_like(counts), where=counts > 0)
    return scatter_add(values, segments, size) * inverse[:, None]


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor._make(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), "stack")
    if out.requires_grad:

        def _backprop():
            for i, t in enumerate(tensors):
                t._accumulate(np.take(out.grad, i, axis=axis))

        out._backprop = _backprop
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    out = Tensor._make(
        np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), "concat"
    )
    if out.requires_grad:

        def _backprop():
            pieces = np.split(out.grad, np.cumsum(sizes)[:-1], axis=axis)
            for t, piece in zip(tensors, pieces):
                t._accumulate(piece)

        out._backprop = _backprop
    return out


def bce_with_logits(logits: Tensor, targets: ArrayLike) -> Tensor:
    """Mean binary cross-entropy computed from logits (softplus form)."""
    targets = np.asarray(targets, dtype=np.float64)
    x = logits.data
    losses = np.logaddexp(0.0, x) - targets * x
    out = Tensor._make(np.asarray(losses.mean() if losses.size else 0.0), (logits,), "bce")
    if out.requires_grad:
        n = max(losses.size, 1)

        def _backprop():
            logits._accumulate(out.grad * (expit(x) - targets) / n)

        out._backprop = _backprop
    return out


def weighted_sum(terms: Iterable[Tuple[float, Tensor]]) -> Optional[Tensor]:
    """Normalized weighted mean of scalar tensors; None when nothing is present."""
    total = None
    weight = 0.0
    for w, term in terms:
        if w <= 0:
            continue
        total = term * w if total is None else total + term * w
        weight += w
    return None if total is None else total / weight
